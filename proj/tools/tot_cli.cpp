// tot: synth / train / segment / eval for temporal-OT action segmentation.
#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "tot/checkpoint.hpp"
#include "tot/dataio.hpp"
#include "tot/errors.hpp"
#include "tot/pipeline.hpp"
#include "tot/trainer.hpp"

namespace fs = std::filesystem;
using namespace tot;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct DataFlags {
  std::string root;
  std::vector<std::string> activities;
  std::string background;
  bool split_background = false;
  bool eager = false;

  LoadOptions load_options() const {
    LoadOptions o;
    o.lazy = !eager;
    if (!background.empty()) o.background_name = background;
    o.split_background = split_background;
    return o;
  }

  std::vector<std::string> resolve() const {
    if (!activities.empty()) return activities;
    auto all = list_activities(root);
    if (all.empty()) throw DataError(root + ": no activity directories with features/");
    return all;
  }
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--data", d.root, "Dataset root: <root>/<activity>/{features,groundTruth,mapping.txt}")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--activity", d.activities, "Activities to process (default: all under --data)");
  cmd->add_option("--background", d.background, "Name of the background action in mapping.txt");
  cmd->add_flag("--split-background", d.split_background,
                "Relabel leading/trailing background as action_start/action_end");
  cmd->add_flag("--eager", d.eager, "Load all features into memory instead of streaming");
}

// ---- synth ---------------------------------------------------------------

struct SynthFlags {
  SyntheticSpec spec;
  std::string out;
};

void run_synth(const SynthFlags& f) {
  const SyntheticDataset data = generate_synthetic(f.spec);
  save_dataset(data.catalog, f.out);
  std::cout << "wrote " << data.catalog.size() << " videos (" << data.catalog.total_frames() << " frames, "
            << f.spec.num_actions << " actions) to " << (fs::path(f.out) / f.spec.activity_name).string()
            << "\n";
}

// ---- train ---------------------------------------------------------------

struct TrainFlags {
  DataFlags data;
  TrainConfig cfg;
  std::string mode = "tot";
  std::string out = ".";
  std::size_t clusters = 0;
  std::size_t parallel = 1;
  std::size_t log_every = 0;
};

std::string train_one(const TrainFlags& f, const std::string& activity) {
  std::ostringstream msg;
  const DatasetCatalog catalog = load_dataset(f.data.root, activity, f.data.load_options());
  TrainConfig cfg = f.cfg;
  cfg.mode = *parse_train_mode(f.mode);
  cfg.num_prototypes = f.clusters;
  const TrainResult r = train(catalog, cfg, &msg);

  const fs::path out(f.out);
  save_checkpoint(r.checkpoint(cfg), out / (activity + ".totc"));
  std::ofstream log(out / (activity + ".log.csv"));
  write_train_log(log, r.log);
  if (!log) throw DataError((out / (activity + ".log.csv")).string() + ": write failed");

  if (f.log_every > 0) {
    for (const auto& e : r.log) {
      if (e.iteration % f.log_every == 0 || e.iteration + 1 == r.log.size()) {
        msg << activity << " iter " << e.iteration << "  L_CE " << e.cross_entropy << "  L_TC " << e.coherence
            << "  col_err " << e.col_error << "\n";
      }
    }
  }
  const auto& last = r.log.back();
  msg << activity << ": " << r.log.size() << " iterations, final L " << last.total << ", checkpoint "
      << (out / (activity + ".totc")).string() << "\n";
  return msg.str();
}

void run_train(const TrainFlags& f) {
  fs::create_directories(f.out);
  const auto activities = f.data.resolve();
  std::vector<std::string> reports(activities.size());
  std::vector<std::exception_ptr> errors(activities.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < activities.size(); i = next++) {
      try {
        reports[i] = train_one(f, activities[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(f.parallel, 1, activities.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  // Report in activity order regardless of which thread finished first.
  for (std::size_t i = 0; i < activities.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    std::cout << reports[i];
  }
}

// ---- segment -------------------------------------------------------------

struct SegmentFlags {
  DataFlags data;
  std::string model;
  std::string out;
};

void run_segment(const SegmentFlags& f) {
  for (const auto& activity : f.data.resolve()) {
    const fs::path ckpt = fs::path(f.model) / (activity + ".totc");
    const Checkpoint cp = load_checkpoint(ckpt);
    const DatasetCatalog catalog = load_dataset(f.data.root, activity, f.data.load_options());
    const fs::path dir = fs::path(f.out) / activity;
    fs::create_directories(dir);
    std::size_t frames = 0;
    for_each_segmentation(cp.params, catalog, cp.inference, [&](std::size_t v, const SegmentationResult& r) {
      const std::string& id = catalog.videos()[v].video_id;
      std::ofstream labels(dir / (id + ".txt"));
      for (int c : r.labels) labels << c << '\n';
      std::ofstream timeline(dir / (id + ".timeline.csv"));
      timeline << "cluster,start,end\n";
      for (const auto& s : r.segments) timeline << s.label << ',' << s.start << ',' << s.end << '\n';
      if (!labels || !timeline) throw DataError((dir / id).string() + ": write failed");
      frames += r.labels.size();
    });
    std::cout << activity << ": segmented " << catalog.size() << " videos (" << frames << " frames) into "
              << dir.string() << "\n";
  }
}

// ---- eval ----------------------------------------------------------------

struct EvalFlags {
  DataFlags data;
  std::string pred;
  std::string exclude_background;
  std::string overlap = "gt";
  std::string report;
};

// Predicted labels: one per line, either a cluster id or an action name.
std::vector<int> read_predictions(const fs::path& path, const LabelMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    if (line.empty()) continue;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isdigit(c); })) {
      out.push_back(std::stoi(line));
    } else if (auto id = mapping.find(line)) {
      out.push_back(*id);
    } else {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": unknown label \"" + line + "\"");
    }
  }
  return out;
}

void run_eval(const EvalFlags& f) {
  DataFlags data = f.data;
  if (!f.exclude_background.empty()) data.background = f.exclude_background;
  EvalOptions opts;
  opts.overlap = f.overlap == "iou" ? OverlapRule::iou : OverlapRule::ground_truth_fraction;

  std::vector<EvalReport> reports;
  for (const auto& activity : data.resolve()) {
    const DatasetCatalog catalog = load_dataset(data.root, activity, data.load_options());
    opts.background = f.exclude_background.empty() ? std::nullopt : catalog.background_id();
    std::vector<VideoPrediction> videos;
    std::size_t clusters = catalog.num_actions();
    for (const auto& v : catalog.videos()) {
      if (!v.labels) throw DataError(activity + "/" + v.video_id + ": no ground truth");
      const fs::path p = fs::path(f.pred) / activity / (v.video_id + ".txt");
      auto predicted = read_predictions(p, catalog.mapping());
      if (predicted.size() != v.labels->size()) {
        throw DataError(p.string() + ": " + std::to_string(predicted.size()) + " labels but ground truth has " +
                        std::to_string(v.labels->size()) + " frames");
      }
      for (int c : predicted) clusters = std::max(clusters, static_cast<std::size_t>(c) + 1);
      videos.push_back({v.video_id, std::move(predicted), *v.labels});
    }
    reports.push_back(evaluate_activity(activity, videos, clusters, opts));
  }
  const DatasetReport summary = summarize(std::move(reports));
  write_report_text(std::cout, summary);
  if (!f.report.empty()) {
    std::ofstream kv(f.report);
    write_report_kv(kv, summary);
    if (!kv) throw DataError(f.report + ": write failed");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised action segmentation with temporal optimal transport"};
  app.require_subcommand(1);
  const auto config = cli::install_config(app);
  app.option_defaults()->always_capture_default();

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic ordered-action dataset");
  synth_cmd->add_option("--out", synth.out, "Output dataset root")->required();
  synth_cmd->add_option("--activity", synth.spec.activity_name, "Activity name");
  synth_cmd->add_option("--k", synth.spec.num_actions, "Number of actions")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--videos", synth.spec.num_videos, "Number of videos")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", synth.spec.input_dim, "Feature dimension")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--segment-len", synth.spec.mean_segment_len, "Mean frames per action")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--jitter", synth.spec.len_jitter, "Relative segment length jitter")
      ->check(CLI::Range(0.0, 0.99));
  synth_cmd->add_option("--separation", synth.spec.cluster_separation, "Distance between action means");
  synth_cmd->add_option("--noise", synth.spec.noise_sigma, "Per-coordinate noise sigma");
  synth_cmd->add_option("--permute", synth.spec.permute_prob, "Probability of swapping adjacent actions")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--drop", synth.spec.drop_prob, "Probability of dropping an action")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--seed", synth.spec.seed, "Random seed");

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model per activity");
  add_data_flags(train_cmd, tr.data);
  train_cmd->add_option("--out", tr.out, "Directory for <activity>.totc and <activity>.log.csv");
  train_cmd->add_option("--mode", tr.mode, "ot | ot+tcl | tot | tot+tcl")
      ->check(CLI::Validator(
          [](std::string& s) { return parse_train_mode(s) ? std::string() : "unknown mode \"" + s + "\""; },
          "MODE"));
  train_cmd->add_option("--rho", tr.cfg.transport.rho, "KL weight of temporal OT")->check(CLI::PositiveNumber);
  train_cmd->add_option("--sigma", tr.cfg.transport.sigma, "Width of the temporal prior")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epsilon", tr.cfg.transport.epsilon, "Entropy weight of plain OT")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--sinkhorn-iters", tr.cfg.transport.iterations, "Sinkhorn iterations per batch")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tr.cfg.batch_size, "Frames per batch (B)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--videos-per-batch", tr.cfg.videos_per_batch, "Videos sampled per batch")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--tau", tr.cfg.loss.temperature, "Softmax temperature")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda", tr.cfg.loss.positive_window, "Positive window for the coherence loss")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--alpha", tr.cfg.loss.alpha, "Weight of the coherence loss");
  train_cmd->add_option("--lr", tr.cfg.adam.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--wd", tr.cfg.adam.weight_decay, "Decoupled weight decay")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--epochs", tr.cfg.epochs, "Passes over the video list");
  train_cmd->add_option("--iterations", tr.cfg.iterations, "Iteration budget (overrides --epochs when > 0)");
  train_cmd->add_option("--freeze-iters", tr.cfg.freeze_iters, "Iterations with frozen prototypes");
  train_cmd->add_option("--dim", tr.cfg.embed_dim, "Embedding dimension (D)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", tr.cfg.hidden_dim, "Hidden width (0: 2*D)");
  train_cmd->add_option("--clusters", tr.clusters, "Number of prototypes (0: actions in mapping.txt)");
  train_cmd->add_option("--seed", tr.cfg.seed, "Random seed");
  train_cmd->add_flag("--no-normalize{false}", tr.cfg.normalize, "Skip L2 normalization of Z and C");
  train_cmd->add_flag("--renormalize-q", tr.cfg.renormalize_q, "Rescale pseudo-label rows to sum to 1");
  train_cmd->add_flag("--concat-prior", tr.cfg.single_prior, "One transport problem over the whole batch");
  train_cmd->add_option("--parallel-activities", tr.parallel, "Activities trained concurrently")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--log-every", tr.log_every, "Print losses every n iterations (0: off)");

  SegmentFlags seg;
  auto* segment_cmd = app.add_subcommand("segment", "Decode per-video segmentations with a trained model");
  add_data_flags(segment_cmd, seg.data);
  segment_cmd->add_option("--model", seg.model, "Directory holding <activity>.totc")
      ->required()
      ->check(CLI::ExistingDirectory);
  segment_cmd->add_option("--out", seg.out, "Output root for label files and timelines")->required();

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predicted labels against ground truth");
  add_data_flags(eval_cmd, ev.data);
  eval_cmd->add_option("--pred", ev.pred, "Root of predicted label files (<pred>/<activity>/<video>.txt)")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--exclude-background", ev.exclude_background, "Background action name to ignore");
  eval_cmd->add_option("--overlap", ev.overlap, "F1 overlap rule")->check(CLI::IsMember({"gt", "iou"}));
  eval_cmd->add_option("--report", ev.report, "Also write key=value metrics to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App* cmd = app.get_subcommands().front();
  cli::print_settings(std::cerr, *cmd, args, *config);

  try {
    if (cmd == synth_cmd) run_synth(synth);
    if (cmd == train_cmd) run_train(tr);
    if (cmd == segment_cmd) run_segment(seg);
    if (cmd == eval_cmd) run_eval(ev);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
