#pragma once

#include <cstddef>
#include <span>

#include "tot/matrix.hpp"

namespace tot {

struct VideoBlock;

struct TransportConfig {
  double epsilon = 0.05;  // entropy weight for plain OT
  double rho = 0.07;      // KL weight for temporal OT
  double sigma = 2.5;     // width of the temporal prior
  std::size_t iterations = 3;
  // When positive, stop early once the column marginal error drops below it.
  double marginal_tolerance = 0.0;
};

struct MarginalError {
  double row = 0.0;  // max |row sum - 1/B|
  double col = 0.0;  // max |col sum - 1/K|
};

// Soft assignment of B frames to K clusters on (or near) the equal-partition
// polytope: rows sum to 1/B, columns to 1/K.
struct CodeMatrix {
  Matrix values;
  MarginalError error;
  std::size_t iterations = 0;
};

MarginalError marginal_error(const Matrix& q);

// Gaussian band around the diagonal i/B = j/K, with 1-based i and j:
//   T_ij = exp(-d_ij^2 / (2 sigma^2)) / (sigma sqrt(2 pi)),
//   d_ij = |i/B - j/K| / sqrt(1/B^2 + 1/K^2)
Matrix temporal_prior(std::size_t frames, std::size_t clusters, double sigma);
// Elementwise log of temporal_prior, evaluated without underflow.
Matrix log_temporal_prior(std::size_t frames, std::size_t clusters, double sigma);

// Scales exp(log_kernel) to the equal-partition marginals by alternating
// column and row normalizations, with scalings kept in log form whenever they
// grow large; each iteration ends on a row update, so row sums are exact on
// return.
CodeMatrix sinkhorn_log_kernel(const Matrix& log_kernel, std::size_t iterations, double tolerance);

// argmax Tr(Q^T S) + epsilon H(Q) over the polytope: Q = diag(u) exp(S/epsilon) diag(v).
CodeMatrix sinkhorn_ot(const Matrix& scores, double epsilon, std::size_t iterations,
                       double tolerance = 0.0);

// argmax Tr(Q^T S) - rho KL(Q || T) over the polytope:
// Q = diag(u) (T * exp(S/rho)) diag(v). `prior` must be strictly positive.
CodeMatrix sinkhorn_tot(const Matrix& scores, const Matrix& prior, double rho,
                        std::size_t iterations, double tolerance = 0.0);
CodeMatrix sinkhorn_tot_log_prior(const Matrix& scores, const Matrix& log_prior, double rho,
                                  std::size_t iterations, double tolerance = 0.0);

enum class TransportKind { ot, tot };

struct BlockCodes {
  Matrix values;  // B x K, each block's rows summing to 1/(block length)
  MarginalError worst_error;
};

// Solves one transport problem per video block, so frames from different
// videos never share a plan. With `single_problem` set, the whole batch is
// treated as one sequence instead.
BlockCodes solve_codes(const Matrix& scores, std::span<const VideoBlock> blocks, TransportKind kind,
                       const TransportConfig& config, bool single_problem = false);

}  // namespace tot
