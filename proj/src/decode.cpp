#include "tot/decode.hpp"

#include <cmath>
#include <limits>

#include "tot/errors.hpp"

namespace tot {

Matrix log_probabilities(const Matrix& probabilities, double floor) {
  Matrix out = probabilities;
  for (double& v : out.values()) v = std::log(std::max(v, floor));
  return out;
}

SegmentationResult viterbi_fixed_order(const Matrix& log_probs) {
  const std::size_t frames = log_probs.rows();
  const std::size_t clusters = log_probs.cols();
  if (clusters == 0) throw ContractError("viterbi_fixed_order: no clusters");
  if (frames < clusters) {
    throw ContractError("viterbi_fixed_order: " + std::to_string(frames) +
                        " frames cannot visit " + std::to_string(clusters) + " clusters in order");
  }
  if (!all_finite(log_probs)) throw ContractError("viterbi_fixed_order: non-finite log probabilities");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> prev(clusters, kNegInf);
  std::vector<double> cur(clusters, kNegInf);
  // advanced[t * K + k]: the best path into (t, k) came from cluster k - 1.
  std::vector<unsigned char> advanced(frames * clusters, 0);

  prev[0] = log_probs(0, 0);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t k = 0; k < clusters; ++k) {
      const double stay = prev[k];
      const double advance = k > 0 ? prev[k - 1] : kNegInf;
      // On a tie, take the advance edge: read forward in time, the path then
      // stays in k - 1 for as long as possible.
      if (advance >= stay && k > 0) {
        cur[k] = advance + log_probs(t, k);
        advanced[t * clusters + k] = 1;
      } else {
        cur[k] = stay + log_probs(t, k);
      }
    }
    std::swap(prev, cur);
  }

  SegmentationResult out;
  out.log_score = prev[clusters - 1];
  out.labels.resize(frames);
  std::size_t k = clusters - 1;
  for (std::size_t t = frames; t-- > 0;) {
    out.labels[t] = static_cast<int>(k);
    if (t > 0 && advanced[t * clusters + k]) --k;
  }
  out.segments = segments_from_labels(out.labels);
  return out;
}

double path_score(const Matrix& log_probs, std::span<const int> labels) {
  if (labels.size() != log_probs.rows()) throw ContractError("path_score: length mismatch");
  double s = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) s += log_probs(t, static_cast<std::size_t>(labels[t]));
  return s;
}

std::vector<Segment> segments_from_labels(std::span<const int> labels) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (out.empty() || out.back().label != labels[t]) {
      out.push_back({labels[t], t, t + 1});
    } else {
      out.back().end = t + 1;
    }
  }
  return out;
}

std::vector<int> labels_from_segments(std::span<const Segment> segments) {
  std::vector<int> out;
  for (const Segment& s : segments) out.insert(out.end(), s.length(), s.label);
  return out;
}

}  // namespace tot
