#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tot/decode.hpp"
#include "tot/matrix.hpp"

namespace tot {

// Minimum-cost assignment on a rectangular cost matrix. Entry r holds the
// column given to row r, or -1 when rows outnumber columns and r is left out.
std::vector<int> min_cost_assignment(const Matrix& cost);

inline constexpr int kUnmatched = -1;

struct ClusterMapping {
  std::vector<int> cluster_to_action;  // kUnmatched for clusters left out
  std::size_t matched_frames = 0;
  std::size_t total_frames = 0;

  int operator()(int cluster) const;
};

// One cluster -> action assignment over all frames of an activity that
// maximizes the number of frames whose mapped cluster equals the action.
// Frames whose ground truth equals `background` are ignored.
ClusterMapping hungarian_match(std::span<const int> predicted, std::span<const int> ground_truth,
                               std::size_t num_clusters, std::optional<int> background = std::nullopt);

std::vector<int> apply_mapping(const ClusterMapping& mapping, std::span<const int> predicted);

// Fraction of (non-background) frames with mapped prediction equal to ground truth.
double mof(std::span<const int> mapped_predicted, std::span<const int> ground_truth,
           std::optional<int> background = std::nullopt);

enum class OverlapRule {
  ground_truth_fraction,  // |pred ∩ gt| / |gt| > 0.5
  iou,                    // |pred ∩ gt| / |pred ∪ gt| > 0.5
};

struct F1Result {
  std::size_t true_positives = 0;
  std::size_t num_predicted = 0;
  std::size_t num_ground_truth = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// A ground-truth segment is detected by a predicted segment with the same
// label overlapping it by more than half; each predicted segment detects at
// most one ground-truth segment.
F1Result f1_score(std::span<const Segment> predicted, std::span<const Segment> ground_truth,
                  OverlapRule rule = OverlapRule::ground_truth_fraction);

struct VideoPrediction {
  std::string video_id;
  std::vector<int> predicted;  // cluster ids
  std::vector<int> ground_truth;
};

struct EvalOptions {
  std::optional<int> background;
  OverlapRule overlap = OverlapRule::ground_truth_fraction;
};

struct VideoScore {
  std::string video_id;
  double f1 = 0.0;
  double frame_accuracy = 0.0;
};

struct EvalReport {
  std::string activity;
  ClusterMapping mapping;
  double mof = 0.0;
  double f1 = 0.0;  // mean over this activity's videos
  std::vector<VideoScore> per_video;
};

EvalReport evaluate_activity(const std::string& activity, std::span<const VideoPrediction> videos,
                             std::size_t num_clusters, const EvalOptions& options = {});

struct DatasetReport {
  std::vector<EvalReport> activities;
  double mof = 0.0;  // mean over activities
  double f1 = 0.0;   // mean over all videos
};

DatasetReport summarize(std::vector<EvalReport> activities);

void write_report_text(std::ostream& os, const DatasetReport& report);
// key=value lines, one per metric.
void write_report_kv(std::ostream& os, const DatasetReport& report);

}  // namespace tot
