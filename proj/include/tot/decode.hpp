#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tot/matrix.hpp"

namespace tot {

// Half-open frame range [start, end) carrying one label.
struct Segment {
  int label = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

struct SegmentationResult {
  std::vector<int> labels;
  double log_score = 0.0;
  std::vector<Segment> segments;
};

inline constexpr double kProbabilityFloor = 1e-12;

// log(max(P, floor)) elementwise.
Matrix log_probabilities(const Matrix& probabilities, double floor = kProbabilityFloor);

// Best path through clusters 0, 1, ..., K-1 in order, each visited for at
// least one frame, moving by 0 or +1 per frame. Ties prefer staying.
SegmentationResult viterbi_fixed_order(const Matrix& log_probs);

// Score of a labelling under log_probs: sum_t log_probs[t, labels[t]].
double path_score(const Matrix& log_probs, std::span<const int> labels);

std::vector<Segment> segments_from_labels(std::span<const int> labels);
std::vector<int> labels_from_segments(std::span<const Segment> segments);

}  // namespace tot
