#include "tot/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <ostream>

#include "tot/errors.hpp"

namespace tot {

std::vector<int> min_cost_assignment(const Matrix& cost) {
  if (cost.rows() > cost.cols()) {
    const std::vector<int> by_col = min_cost_assignment(transpose(cost));
    std::vector<int> out(cost.rows(), kUnmatched);
    for (std::size_t c = 0; c < by_col.size(); ++c) {
      if (by_col[c] >= 0) out[static_cast<std::size_t>(by_col[c])] = static_cast<int>(c);
    }
    return out;
  }

  // Shortest augmenting paths with row/column potentials, 1-based with a
  // sentinel column 0. Rows <= columns here.
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> min_slack(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double slack = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> out(n, kUnmatched);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) out[owner[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

int ClusterMapping::operator()(int cluster) const {
  if (cluster < 0 || static_cast<std::size_t>(cluster) >= cluster_to_action.size()) return kUnmatched;
  return cluster_to_action[static_cast<std::size_t>(cluster)];
}

ClusterMapping hungarian_match(std::span<const int> predicted, std::span<const int> ground_truth,
                               std::size_t num_clusters, std::optional<int> background) {
  if (predicted.size() != ground_truth.size()) {
    throw ContractError("hungarian_match: " + std::to_string(predicted.size()) +
                        " predictions for " + std::to_string(ground_truth.size()) + " frames");
  }
  int max_action = -1;
  int max_cluster = static_cast<int>(num_clusters) - 1;
  std::size_t counted = 0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    if (background && ground_truth[t] == *background) continue;
    if (predicted[t] < 0 || ground_truth[t] < 0) throw ContractError("hungarian_match: negative label");
    max_action = std::max(max_action, ground_truth[t]);
    max_cluster = std::max(max_cluster, predicted[t]);
    ++counted;
  }
  if (counted == 0) throw DataError("hungarian_match: no frames left to match");

  const auto clusters = static_cast<std::size_t>(max_cluster + 1);
  const auto actions = static_cast<std::size_t>(max_action + 1);
  Matrix overlap(clusters, actions);
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    if (background && ground_truth[t] == *background) continue;
    overlap(static_cast<std::size_t>(predicted[t]), static_cast<std::size_t>(ground_truth[t])) += 1.0;
  }
  Matrix cost = overlap;
  for (double& c : cost.values()) c = -c;

  ClusterMapping out;
  out.cluster_to_action = min_cost_assignment(cost);
  out.total_frames = counted;
  for (std::size_t c = 0; c < clusters; ++c) {
    const int a = out.cluster_to_action[c];
    if (a >= 0) out.matched_frames += static_cast<std::size_t>(overlap(c, static_cast<std::size_t>(a)));
  }
  return out;
}

std::vector<int> apply_mapping(const ClusterMapping& mapping, std::span<const int> predicted) {
  std::vector<int> out(predicted.size());
  for (std::size_t t = 0; t < predicted.size(); ++t) out[t] = mapping(predicted[t]);
  return out;
}

double mof(std::span<const int> mapped_predicted, std::span<const int> ground_truth,
           std::optional<int> background) {
  if (mapped_predicted.size() != ground_truth.size()) throw ContractError("mof: length mismatch");
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t t = 0; t < ground_truth.size(); ++t) {
    if (background && ground_truth[t] == *background) continue;
    ++total;
    if (mapped_predicted[t] == ground_truth[t]) ++correct;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

F1Result f1_score(std::span<const Segment> predicted, std::span<const Segment> ground_truth,
                  OverlapRule rule) {
  F1Result out;
  out.num_predicted = predicted.size();
  out.num_ground_truth = ground_truth.size();
  std::vector<bool> consumed(predicted.size(), false);
  for (const Segment& g : ground_truth) {
    for (std::size_t p = 0; p < predicted.size(); ++p) {
      const Segment& s = predicted[p];
      if (consumed[p] || s.label != g.label) continue;
      const std::size_t lo = std::max(s.start, g.start);
      const std::size_t hi = std::min(s.end, g.end);
      if (hi <= lo) continue;
      const double inter = static_cast<double>(hi - lo);
      const double denom = rule == OverlapRule::iou
                               ? static_cast<double>(std::max(s.end, g.end) - std::min(s.start, g.start))
                               : static_cast<double>(g.length());
      if (inter / denom > 0.5) {
        consumed[p] = true;
        ++out.true_positives;
        break;
      }
    }
  }
  if (out.num_predicted > 0) out.precision = static_cast<double>(out.true_positives) / static_cast<double>(out.num_predicted);
  if (out.num_ground_truth > 0) out.recall = static_cast<double>(out.true_positives) / static_cast<double>(out.num_ground_truth);
  if (out.precision + out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

namespace {

// Drops background frames from both sequences so predictions on them cannot
// affect segment-level scores.
void strip_background(std::span<const int> pred, std::span<const int> gt, std::optional<int> background,
                      std::vector<int>& pred_out, std::vector<int>& gt_out) {
  pred_out.clear();
  gt_out.clear();
  for (std::size_t t = 0; t < gt.size(); ++t) {
    if (background && gt[t] == *background) continue;
    pred_out.push_back(pred[t]);
    gt_out.push_back(gt[t]);
  }
}

}  // namespace

EvalReport evaluate_activity(const std::string& activity, std::span<const VideoPrediction> videos,
                             std::size_t num_clusters, const EvalOptions& options) {
  if (videos.empty()) throw DataError("evaluate_activity: no videos for " + activity);
  std::vector<int> all_pred;
  std::vector<int> all_gt;
  for (const auto& v : videos) {
    if (v.predicted.size() != v.ground_truth.size()) {
      throw DataError("video " + v.video_id + ": " + std::to_string(v.predicted.size()) +
                      " predicted labels for " + std::to_string(v.ground_truth.size()) +
                      " ground-truth frames");
    }
    all_pred.insert(all_pred.end(), v.predicted.begin(), v.predicted.end());
    all_gt.insert(all_gt.end(), v.ground_truth.begin(), v.ground_truth.end());
  }

  EvalReport report;
  report.activity = activity;
  report.mapping = hungarian_match(all_pred, all_gt, num_clusters, options.background);
  report.mof = mof(apply_mapping(report.mapping, all_pred), all_gt, options.background);

  double f1_sum = 0.0;
  std::vector<int> pred;
  std::vector<int> gt;
  for (const auto& v : videos) {
    const std::vector<int> mapped = apply_mapping(report.mapping, v.predicted);
    strip_background(mapped, v.ground_truth, options.background, pred, gt);
    VideoScore score;
    score.video_id = v.video_id;
    score.frame_accuracy = mof(pred, gt);
    if (!gt.empty()) {
      score.f1 = f1_score(segments_from_labels(pred), segments_from_labels(gt), options.overlap).f1;
    }
    f1_sum += score.f1;
    report.per_video.push_back(std::move(score));
  }
  report.f1 = f1_sum / static_cast<double>(videos.size());
  return report;
}

DatasetReport summarize(std::vector<EvalReport> activities) {
  DatasetReport out;
  out.activities = std::move(activities);
  std::size_t num_videos = 0;
  double f1_sum = 0.0;
  for (const auto& a : out.activities) {
    out.mof += a.mof;
    for (const auto& v : a.per_video) f1_sum += v.f1;
    num_videos += a.per_video.size();
  }
  if (!out.activities.empty()) out.mof /= static_cast<double>(out.activities.size());
  if (num_videos > 0) out.f1 = f1_sum / static_cast<double>(num_videos);
  return out;
}

void write_report_text(std::ostream& os, const DatasetReport& report) {
  const auto flags = os.flags();
  os << std::fixed << std::setprecision(4);
  for (const auto& a : report.activities) {
    os << "activity " << a.activity << ": MOF " << a.mof << "  F1 " << a.f1 << "  ("
       << a.mapping.matched_frames << "/" << a.mapping.total_frames << " frames matched)\n";
    os << "  mapping:";
    for (std::size_t c = 0; c < a.mapping.cluster_to_action.size(); ++c) {
      os << ' ' << c << "->";
      if (a.mapping.cluster_to_action[c] == kUnmatched) os << "none";
      else os << a.mapping.cluster_to_action[c];
    }
    os << '\n';
    for (const auto& v : a.per_video) {
      os << "  " << v.video_id << "  acc " << v.frame_accuracy << "  F1 " << v.f1 << '\n';
    }
  }
  os << "dataset: MOF " << report.mof << "  F1 " << report.f1 << '\n';
  os.flags(flags);
}

void write_report_kv(std::ostream& os, const DatasetReport& report) {
  const auto precision = os.precision();
  os << std::setprecision(10);
  os << "mof=" << report.mof << '\n' << "f1=" << report.f1 << '\n';
  for (const auto& a : report.activities) {
    os << "activity." << a.activity << ".mof=" << a.mof << '\n';
    os << "activity." << a.activity << ".f1=" << a.f1 << '\n';
    os << "activity." << a.activity << ".matched_frames=" << a.mapping.matched_frames << '\n';
    os << "activity." << a.activity << ".total_frames=" << a.mapping.total_frames << '\n';
    for (std::size_t c = 0; c < a.mapping.cluster_to_action.size(); ++c) {
      os << "activity." << a.activity << ".mapping." << c << '=';
      if (a.mapping.cluster_to_action[c] == kUnmatched) os << "none";
      else os << a.mapping.cluster_to_action[c];
      os << '\n';
    }
    for (const auto& v : a.per_video) {
      os << "video." << a.activity << '.' << v.video_id << ".f1=" << v.f1 << '\n';
      os << "video." << a.activity << '.' << v.video_id << ".frame_accuracy=" << v.frame_accuracy << '\n';
    }
  }
  os.precision(precision);
}

}  // namespace tot
