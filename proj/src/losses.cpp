#include "tot/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tot/errors.hpp"
#include "tot/sampler.hpp"

namespace tot {

Matrix predicted_codes(const Matrix& z_norm, const Matrix& c_norm, double temperature) {
  return row_softmax(matmul_transposed(z_norm, c_norm), temperature);
}

CrossEntropyResult cross_entropy(const Matrix& p, const Matrix& q, double temperature) {
  if (p.rows() != q.rows() || p.cols() != q.cols()) {
    throw ContractError("cross_entropy: P " + p.shape_string() + " and Q " + q.shape_string() +
                        " disagree");
  }
  if (!(temperature > 0.0)) throw ContractError("cross_entropy: temperature must be positive");
  const double batch = static_cast<double>(p.rows());
  CrossEntropyResult out;
  out.grad_scores = Matrix(p.rows(), p.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto pr = p.row(i);
    auto qr = q.row(i);
    double q_mass = 0.0;
    for (std::size_t j = 0; j < pr.size(); ++j) {
      q_mass += qr[j];
      if (qr[j] == 0.0) continue;
      if (pr[j] < kLogFloor) out.clamped = true;
      acc += qr[j] * std::log(std::max(pr[j], kLogFloor));
    }
    auto g = out.grad_scores.row(i);
    for (std::size_t j = 0; j < pr.size(); ++j) {
      g[j] = (q_mass * pr[j] - qr[j]) / (batch * temperature);
    }
  }
  out.loss = -acc / batch;
  return out;
}

namespace {

// Accumulates the unnormalized loss of one block and writes unnormalized
// gradients into rows [start, start + n) of the output gradients.
double coherence_block(const Matrix& anchors, const Matrix& positives, std::size_t start,
                       std::size_t n, double scale, CoherenceResult& out) {
  const std::size_t dim = anchors.cols();
  std::vector<double> logits(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto a = anchors.row(start + i);
    for (std::size_t j = 0; j < n; ++j) {
      auto p = positives.row(start + j);
      double dot = 0.0;
      for (std::size_t c = 0; c < dim; ++c) dot += a[c] * p[c];
      logits[j] = dot;
    }
    const double lse = log_sum_exp(logits);
    total += lse - logits[i];
    // d loss_i / d logit_ij = softmax_ij - [i == j]
    auto ga = out.grad_anchors.row(start + i);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = scale * (std::exp(logits[j] - lse) - (i == j ? 1.0 : 0.0));
      if (w == 0.0) continue;
      auto p = positives.row(start + j);
      auto gp = out.grad_positives.row(start + j);
      for (std::size_t c = 0; c < dim; ++c) {
        ga[c] += w * p[c];
        gp[c] += w * a[c];
      }
    }
  }
  return total;
}

}  // namespace

CoherenceResult temporal_coherence(const Matrix& anchors, const Matrix& positives,
                                   std::span<const VideoBlock> blocks) {
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols()) {
    throw ContractError("temporal_coherence: anchors " + anchors.shape_string() +
                        " and positives " + positives.shape_string() + " disagree");
  }
  CoherenceResult out;
  out.grad_anchors = Matrix(anchors.rows(), anchors.cols());
  out.grad_positives = Matrix(positives.rows(), positives.cols());
  const std::size_t n = anchors.rows();
  if (n == 0) return out;
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  if (blocks.empty()) {
    total = coherence_block(anchors, positives, 0, n, scale, out);
  } else {
    std::size_t covered = 0;
    for (const VideoBlock& b : blocks) {
      if (b.start_row + b.length > n) throw ContractError("temporal_coherence: block out of range");
      total += coherence_block(anchors, positives, b.start_row, b.length, scale, out);
      covered += b.length;
    }
    if (covered != n) throw ContractError("temporal_coherence: blocks do not cover the batch");
  }
  out.loss = total * scale;
  return out;
}

CoherenceResult temporal_coherence(const Matrix& anchors, const Matrix& positives) {
  return temporal_coherence(anchors, positives, {});
}

}  // namespace tot
