#pragma once

#include <cstddef>
#include <span>

#include "tot/matrix.hpp"

namespace tot {

struct VideoBlock;

struct LossConfig {
  double temperature = 0.1;
  double alpha = 1.0;               // weight of the temporal coherence term
  std::size_t positive_window = 30;  // consumed by the sampler
};

// P = row_softmax(Z_norm C_norm^T, temperature).
Matrix predicted_codes(const Matrix& z_norm, const Matrix& c_norm, double temperature);

struct CrossEntropyResult {
  double loss = 0.0;
  // d loss / d S where P = softmax(S / temperature).
  Matrix grad_scores;
  // Set when some P entry with positive Q mass hit the log floor.
  bool clamped = false;
};

inline constexpr double kLogFloor = 1e-300;

// loss = -(1/B) sum_ij Q_ij log P_ij. Q is taken as-is: its rows need not sum to 1.
CrossEntropyResult cross_entropy(const Matrix& p, const Matrix& q, double temperature);

struct CoherenceResult {
  double loss = 0.0;
  Matrix grad_anchors;
  Matrix grad_positives;
};

// N-pair loss: -(1/N) sum_i log softmax_j(z_i . z+_j)[i], with no temperature.
CoherenceResult temporal_coherence(const Matrix& anchors, const Matrix& positives);

// Same loss evaluated per block (negatives never cross blocks) and normalized
// by the total number of pairs.
CoherenceResult temporal_coherence(const Matrix& anchors, const Matrix& positives,
                                   std::span<const VideoBlock> blocks);

inline double total_loss(double cross_entropy_loss, double coherence_loss, double alpha) {
  return cross_entropy_loss + alpha * coherence_loss;
}

}  // namespace tot
