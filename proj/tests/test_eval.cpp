#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "tot/decode.hpp"
#include "tot/errors.hpp"
#include "tot/eval.hpp"

using namespace tot;

namespace {

std::vector<int> random_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<int> l(n);
  for (int& v : l) v = static_cast<int>(rng.uniform_index(k));
  return l;
}

// Piecewise-constant labels with a few runs.
std::vector<int> random_runs(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<int> l(n);
  int current = static_cast<int>(rng.uniform_index(k));
  for (auto& v : l) {
    if (rng.uniform01() < 0.12) current = static_cast<int>(rng.uniform_index(k));
    v = current;
  }
  return l;
}

}  // namespace

TEST_CASE("identity and renamed predictions") {
  const std::vector<int> gt{0, 0, 1, 1, 1, 2, 2, 3};
  const ClusterMapping id = hungarian_match(gt, gt, 4);
  CHECK(id.cluster_to_action == std::vector<int>{0, 1, 2, 3});
  CHECK(id.matched_frames == gt.size());

  std::vector<int> renamed;
  for (int g : gt) renamed.push_back((g + 1) % 4);
  const ClusterMapping m = hungarian_match(renamed, gt, 4);
  CHECK(m.cluster_to_action == std::vector<int>{3, 0, 1, 2});
  CHECK(mof(apply_mapping(m, renamed), gt) == 1.0);
}

TEST_CASE("assignment matches factorial brute force") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(7);
    const std::size_t k2 = 1 + rng.uniform_index(7);
    const std::size_t n = 20 + rng.uniform_index(200);
    const auto pred = random_labels(n, k, rng);
    const auto gt = random_labels(n, k2, rng);
    const ClusterMapping m = hungarian_match(pred, gt, k);
    Matrix counts(k, k2);
    for (std::size_t t = 0; t < n; ++t) counts(pred[t], gt[t]) += 1.0;
    CHECK(static_cast<double>(m.matched_frames) == oracle::brute_force_assignment(counts));
    // Injective on matched clusters.
    std::vector<int> used(k2, 0);
    for (int a : m.cluster_to_action)
      if (a != kUnmatched) CHECK(++used[a] == 1);
  }
}

TEST_CASE("min cost assignment on a rectangle") {
  const auto a = min_cost_assignment(Matrix({{4, 1, 3}, {2, 0, 5}}));
  CHECK(a == std::vector<int>{1, 0});
  const auto b = min_cost_assignment(Matrix({{4, 2}, {1, 0}, {3, 5}}));
  CHECK(b == std::vector<int>{1, 0, kUnmatched});
}

TEST_CASE("mof examples") {
  const std::vector<int> gt{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  CHECK(mof(gt, gt) == 1.0);
  CHECK(mof(std::vector<int>(10, 5), gt) == 0.0);
  std::vector<int> seven = gt;
  seven[0] = 1;
  seven[4] = 2;
  seven[8] = 0;
  CHECK(mof(seven, gt) == doctest::Approx(0.7));
  CHECK_THROWS_AS(mof(std::vector<int>{1}, gt), ContractError);
}

TEST_CASE("mof is invariant to consistent relabeling") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pred = random_labels(60, 4, rng);
    const auto gt = random_labels(60, 4, rng);
    const std::vector<int> perm{2, 0, 3, 1};
    std::vector<int> p2, g2;
    for (int v : pred) p2.push_back(perm[v]);
    for (int v : gt) g2.push_back(perm[v]);
    CHECK(mof(pred, gt) == mof(p2, g2));
  }
}

TEST_CASE("f1 examples") {
  const std::vector<Segment> gt{{0, 0, 2}, {1, 2, 4}, {2, 4, 10}};
  const F1Result same = f1_score(gt, gt);
  CHECK(same.f1 == 1.0);

  const std::vector<Segment> one{{2, 0, 10}};
  const F1Result r = f1_score(one, gt);
  CHECK(r.true_positives == 1);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == doctest::Approx(1.0 / 3.0));
  CHECK(r.f1 == doctest::Approx(0.5));
  // Under IoU the long segment covers 6 of 10 frames of the union.
  CHECK(f1_score(one, gt, OverlapRule::iou).f1 == doctest::Approx(0.5));

  const std::vector<Segment> half{{0, 0, 1}, {0, 1, 2}};
  CHECK(f1_score(half, std::vector<Segment>{{0, 0, 2}}).true_positives == 0);
  CHECK(f1_score(std::vector<Segment>{}, gt).f1 == 0.0);
}

TEST_CASE("f1 agrees with a frame-counting oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto pred = random_runs(50, 3, rng);
    const auto gt = random_runs(50, 3, rng);
    const auto ps = segments_from_labels(pred);
    const auto gs = segments_from_labels(gt);
    CHECK(std::abs(f1_score(ps, gs).f1 - oracle::naive_f1(pred, gt, true)) < 1e-12);
    CHECK(std::abs(f1_score(ps, gs, OverlapRule::iou).f1 - oracle::naive_f1(pred, gt, false)) < 1e-12);
  }
}

TEST_CASE("background frames do not affect metrics") {
  Rng rng(9);
  const int bg = 9;
  for (int trial = 0; trial < 30; ++trial) {
    auto gt = random_runs(80, 3, rng);
    for (std::size_t t = 0; t < 80; ++t)
      if (t % 13 < 3) gt[t] = bg;
    auto pred_a = random_runs(80, 3, rng);
    auto pred_b = pred_a;
    for (std::size_t t = 0; t < 80; ++t)
      if (gt[t] == bg) pred_b[t] = static_cast<int>(rng.uniform_index(3));
    EvalOptions opts;
    opts.background = bg;
    const VideoPrediction a{"v", pred_a, gt};
    const VideoPrediction b{"v", pred_b, gt};
    const EvalReport ra = evaluate_activity("act", std::span(&a, 1), 3, opts);
    const EvalReport rb = evaluate_activity("act", std::span(&b, 1), 3, opts);
    CHECK(ra.mof == rb.mof);
    CHECK(ra.f1 == rb.f1);
  }
  const std::vector<int> all_bg(5, bg);
  CHECK_THROWS_AS(hungarian_match(all_bg, all_bg, 2, bg), DataError);
}

TEST_CASE("activity and dataset reports") {
  const std::vector<VideoPrediction> act1{{"a", {1, 1, 0, 0}, {0, 0, 1, 1}}, {"b", {1, 0, 0, 0}, {0, 0, 1, 1}}};
  const EvalReport r1 = evaluate_activity("one", act1, 2);
  CHECK(r1.mof == doctest::Approx(7.0 / 8.0));
  REQUIRE(r1.per_video.size() == 2);
  CHECK(r1.per_video[0].f1 == 1.0);
  CHECK(r1.per_video[1].frame_accuracy == doctest::Approx(0.75));

  const std::vector<VideoPrediction> act2{{"c", {0, 0}, {0, 1}}};
  const EvalReport r2 = evaluate_activity("two", act2, 1);
  const DatasetReport d = summarize({r1, r2});
  CHECK(d.mof == doctest::Approx((7.0 / 8.0 + 0.5) / 2.0));
  CHECK(d.f1 == doctest::Approx((r1.per_video[0].f1 + r1.per_video[1].f1 + r2.per_video[0].f1) / 3.0));

  std::ostringstream kv;
  write_report_kv(kv, d);
  CHECK(kv.str().find("mof=") != std::string::npos);
  CHECK(kv.str().find("activity.two.mof=") != std::string::npos);
  std::ostringstream text;
  write_report_text(text, d);
  CHECK(text.str().find("one") != std::string::npos);
}
