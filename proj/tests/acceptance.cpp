// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tot/pipeline.hpp"
#include "tot/trainer.hpp"
#include "tot/transport.hpp"

using namespace tot;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

EncoderParams random_params(const EncoderShape& shape, Rng& rng) {
  EncoderParams p = zeros_like(shape);
  p.for_each([&](Matrix& m) { m = oracle::random_matrix(m.rows(), m.cols(), rng); });
  return p;
}

Outcome sinkhorn_correctness() {
  const auto start = Clock::now();
  Rng rng(1001);
  double worst_gap = 0.0;
  double worst_marginal = 0.0;
  const TransportConfig defaults;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 2 + rng.uniform_index(5);
    const std::size_t k = 2 + rng.uniform_index(3);
    const Matrix s = oracle::random_matrix(b, k, rng);

    const CodeMatrix ot = sinkhorn_ot(s, defaults.epsilon, 20000000, 1e-9);
    const Matrix ones(b, k, 1.0);
    const Matrix ot_best = oracle::polytope_optimum(s, ones, defaults.epsilon);
    worst_gap = std::max(worst_gap, std::abs(oracle::regularized_objective(ot.values, s, ones, defaults.epsilon) -
                                             oracle::regularized_objective(ot_best, s, ones, defaults.epsilon)));

    const Matrix t = temporal_prior(b, k, defaults.sigma);
    const CodeMatrix tot = sinkhorn_tot(s, t, defaults.rho, 20000000, 1e-9);
    const Matrix tot_best = oracle::polytope_optimum(s, t, defaults.rho);
    worst_gap = std::max(worst_gap, std::abs(oracle::regularized_objective(tot.values, s, t, defaults.rho) -
                                             oracle::regularized_objective(tot_best, s, t, defaults.rho)));
    for (const CodeMatrix* q : {&ot, &tot})
      worst_marginal = std::max({worst_marginal, q->error.row, q->error.col});
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst_gap < 1e-5 && worst_marginal < 1e-8 && elapsed < 10.0;
  return {ok ? Status::pass : Status::fail, "max objective gap " + fmt("%.2e", worst_gap) + ", max marginal error " +
                                                fmt("%.2e", worst_marginal) + ", " + fmt("%.2f", elapsed) + " s"};
}

Outcome tot_degeneracy() {
  Rng rng(1002);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 2 + rng.uniform_index(200);
    const std::size_t k = 1 + rng.uniform_index(10);
    const Matrix s = oracle::random_matrix(b, k, rng);
    const double reg = oracle::uniform_real(rng, 0.02, 1.0);
    const std::size_t iters = 1 + rng.uniform_index(20);
    const Matrix a = sinkhorn_ot(s, reg, iters).values;
    const Matrix c = sinkhorn_tot(s, Matrix(b, k, oracle::uniform_real(rng, 0.1, 3.0)), reg, iters).values;
    worst = std::max(worst, oracle::max_abs_diff(a, c));
  }
  return {worst <= 1e-10 ? Status::pass : Status::fail, "max elementwise difference " + fmt("%.2e", worst)};
}

Outcome temporal_prior_check() {
  double worst = 0.0;
  std::size_t bad_rows = 0;
  for (double sigma : {1.0, 2.5}) {
    for (std::size_t b : {3, 6, 10}) {
      for (std::size_t k : {3, 6, 10}) {
        const Matrix t = temporal_prior(b, k, sigma);
        for (std::size_t i = 0; i < b; ++i) {
          double closest = 1e300;
          for (std::size_t j = 0; j < k; ++j) {
            worst = std::max(worst, std::abs(t(i, j) - oracle::prior_entry(i + 1, j + 1, b, k, sigma)));
            closest = std::min(closest, std::abs(double(i + 1) / b - double(j + 1) / k));
          }
          const auto row = t.row(i);
          const std::size_t arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
          // Equidistant columns tie; any of them is a valid peak.
          if (std::abs(std::abs(double(i + 1) / b - double(arg + 1) / k) - closest) > 1e-12) ++bad_rows;
        }
      }
    }
  }
  const bool ok = worst <= 1e-12 && bad_rows == 0;
  return {ok ? Status::pass : Status::fail,
          "max deviation " + fmt("%.2e", worst) + ", rows peaked off the diagonal " + std::to_string(bad_rows)};
}

Outcome gradient_integrity() {
  const auto start = Clock::now();
  Rng rng(1004);
  double worst = 0.0;
  int instances = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const bool coherence = trial % 2 == 1;
    const std::size_t b = 8;
    const std::size_t k = 2 + rng.uniform_index(3);
    const EncoderShape shape{3 + rng.uniform_index(4), 5, 4, k};
    const EncoderParams params = random_params(shape, rng);
    const Matrix input = oracle::random_matrix(coherence ? 2 * b : b, shape.input_dim, rng, -2, 2);
    const std::size_t split = 2 + rng.uniform_index(5);
    const std::vector<VideoBlock> blocks{{0, "a", 0, split}, {1, "b", split, b - split}};
    LossConfig loss;
    loss.temperature = oracle::uniform_real(rng, 0.2, 1.0);
    loss.alpha = 1.0;
    // Pseudo-labels from the actual transport step, then held fixed.
    const BatchForward fwd = forward_batch(params, input, b, true);
    TransportConfig tcfg;
    tcfg.iterations = 3;
    const Matrix codes = solve_codes(fwd.scores, blocks, TransportKind::tot, tcfg).values;
    const ObjectiveResult obj = evaluate_objective(params, fwd, blocks, codes, loss, coherence);
    auto check = [&](Matrix EncoderParams::*member) {
      auto f = [&](const Matrix& m) {
        EncoderParams q = params;
        q.*member = m;
        return evaluate_objective(q, forward_batch(q, input, b, true), blocks, codes, loss, coherence).total;
      };
      worst = std::max(worst, oracle::max_relative_error(obj.grads.*member, oracle::finite_difference(f, params.*member)));
    };
    check(&EncoderParams::w1);
    check(&EncoderParams::b1);
    check(&EncoderParams::w2);
    check(&EncoderParams::b2);
    check(&EncoderParams::prototypes);
    ++instances;
  }
  const double elapsed = seconds_since(start);
  const bool ok = worst < 1e-4 && elapsed < 30.0;
  return {ok ? Status::pass : Status::fail, std::to_string(instances) + " instances, max relative error " +
                                                fmt("%.2e", worst) + ", " + fmt("%.2f", elapsed) + " s"};
}

Outcome viterbi_optimality() {
  Rng rng(1005);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(4);
    const std::size_t f = k + rng.uniform_index(13 - k);
    Matrix p = oracle::random_matrix(f, k, rng, 0.0, 1.0);
    const Matrix lp = log_probabilities(row_softmax(p, 0.2));
    if (std::abs(viterbi_fixed_order(lp).log_score - oracle::brute_force_viterbi(lp)) > 1e-12) ++mismatches;
  }
  return {mismatches == 0 ? Status::pass : Status::fail, "200 lattices, mismatches " + std::to_string(mismatches)};
}

Outcome hungarian_optimality() {
  Rng rng(1006);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(7);
    const std::size_t k2 = 1 + rng.uniform_index(7);
    const std::size_t n = 10 + rng.uniform_index(300);
    std::vector<int> pred(n), gt(n);
    Matrix counts(k, k2);
    for (std::size_t t = 0; t < n; ++t) {
      pred[t] = static_cast<int>(rng.uniform_index(k));
      gt[t] = static_cast<int>(rng.uniform_index(k2));
      counts(pred[t], gt[t]) += 1.0;
    }
    if (static_cast<double>(hungarian_match(pred, gt, k).matched_frames) != oracle::brute_force_assignment(counts))
      ++mismatches;
  }
  return {mismatches == 0 ? Status::pass : Status::fail, "200 tables, mismatches " + std::to_string(mismatches)};
}

Outcome online_memory() {
  SyntheticSpec spec;
  spec.num_videos = 200;
  spec.mean_segment_len = 80;
  spec.seed = 7;
  const SyntheticDataset data = generate_synthetic(spec);
  TrainConfig cfg;
  cfg.batch_size = 512;
  cfg.embed_dim = 30;
  cfg.iterations = 10;
  const TrainResult r = train(data.catalog, cfg);
  const std::size_t total = data.catalog.total_frames();
  const std::size_t expected = cfg.batch_size * cfg.embed_dim * sizeof(double);
  const bool ok = r.memory.peak_rows < total && r.memory.peak_rows <= cfg.batch_size &&
                  r.memory.embedding_bytes == expected;
  return {ok ? Status::pass : Status::fail,
          "dataset " + std::to_string(total) + " frames, tallest loop matrix " + std::to_string(r.memory.peak_rows) +
              " rows, Z footprint " + std::to_string(r.memory.embedding_bytes) + " bytes (B*D*8 = " +
              std::to_string(expected) + ")"};
}

double nearest_mean_mof(const SyntheticDataset& data) {
  std::vector<VideoPrediction> preds;
  for (std::size_t v = 0; v < data.catalog.size(); ++v) {
    const auto seq = data.catalog.load_video(v);
    preds.push_back({seq.video_id, oracle::nearest_mean_labels(seq.features, data.means), *seq.labels});
  }
  return evaluate_activity("oracle", preds, data.means.rows()).mof;
}

SyntheticSpec benchmark_spec(double noise, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_videos = 20;
  spec.num_actions = 5;
  spec.cluster_separation = 1.0;
  spec.noise_sigma = noise;
  spec.seed = seed;
  return spec;
}

TrainConfig benchmark_config(TrainMode mode, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.batch_size = 64;
  cfg.videos_per_batch = 2;
  cfg.iterations = 1000;
  cfg.freeze_iters = 100;
  cfg.embed_dim = 30;
  cfg.seed = seed;
  return cfg;
}

Outcome end_to_end() {
  const auto start = Clock::now();
  const SyntheticDataset data = generate_synthetic(benchmark_spec(0.1, 20));
  const double ceiling = nearest_mean_mof(data);
  const TrainConfig cfg = benchmark_config(TrainMode::tot, 5);
  const TrainResult r = train(data.catalog, cfg);
  const EvalReport report = evaluate_catalog(r.params, data.catalog, {cfg.loss.temperature, cfg.normalize});
  const double elapsed = seconds_since(start);
  const bool ok = report.mof >= 0.85 && report.f1 >= 0.70 && ceiling >= 0.99 && elapsed < 300.0;
  return {ok ? Status::pass : Status::fail, "MOF " + fmt("%.3f", report.mof) + ", F1 " + fmt("%.3f", report.f1) +
                                                ", nearest-mean oracle MOF " + fmt("%.3f", ceiling) + ", " +
                                                fmt("%.1f", elapsed) + " s"};
}

Outcome ablation() {
  double tot_sum = 0.0, ot_sum = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticDataset data = generate_synthetic(benchmark_spec(0.3, 100 + seed));
    double mofs[2];
    int idx = 0;
    for (TrainMode mode : {TrainMode::tot, TrainMode::ot}) {
      const TrainConfig cfg = benchmark_config(mode, seed);
      const TrainResult r = train(data.catalog, cfg);
      mofs[idx++] = evaluate_catalog(r.params, data.catalog, {cfg.loss.temperature, cfg.normalize}).mof;
    }
    tot_sum += mofs[0];
    ot_sum += mofs[1];
    per_seed << (seed ? " " : "") << fmt("%.2f", mofs[0]) << "/" << fmt("%.2f", mofs[1]);
  }
  const double tot_mean = tot_sum / 5.0, ot_mean = ot_sum / 5.0;
  return {tot_mean >= ot_mean + 0.05 ? Status::pass : Status::fail,
          "mean MOF TOT " + fmt("%.3f", tot_mean) + " vs OT " + fmt("%.3f", ot_mean) + " (TOT/OT per seed: " +
              per_seed.str() + ")"};
}

Outcome dataset_reproduction() {
  const char* root = std::getenv("TOT_50SALADS_ROOT");
  if (root == nullptr) return {Status::skip, "set TOT_50SALADS_ROOT to a converted 50 Salads Eval dataset"};
  const auto activities = list_activities(root);
  if (activities.empty()) return {Status::fail, std::string("no activities under ") + root};
  std::vector<EvalReport> reports;
  for (const auto& act : activities) {
    const DatasetCatalog catalog = load_dataset(root, act, {});
    TrainConfig cfg;  // defaults are the 50 Salads Eval settings
    const TrainResult r = train(catalog, cfg);
    reports.push_back(evaluate_catalog(r.params, catalog, {cfg.loss.temperature, cfg.normalize}));
  }
  const double mof = summarize(std::move(reports)).mof * 100.0;
  return {std::abs(mof - 47.4) <= 3.0 ? Status::pass : Status::fail, "MOF " + fmt("%.1f", mof) + " (target 47.4 +/- 3)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"sinkhorn_correctness", sinkhorn_correctness},
      {"tot_degeneracy", tot_degeneracy},
      {"temporal_prior", temporal_prior_check},
      {"gradient_integrity", gradient_integrity},
      {"viterbi_optimality", viterbi_optimality},
      {"hungarian_optimality", hungarian_optimality},
      {"online_memory", online_memory},
      {"end_to_end_synthetic", end_to_end},
      {"ablation_tot_vs_ot", ablation},
      {"dataset_reproduction", dataset_reproduction},
  };
  const std::string only = argc > 1 ? argv[1] : "";
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && name != only) continue;
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {Status::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = out.status == Status::pass ? "PASS" : out.status == Status::fail ? "FAIL" : "SKIP";
    if (out.status == Status::fail) ++failures;
    std::printf("%s %s: %s\n", tag, name.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
