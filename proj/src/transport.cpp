#include "tot/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "tot/errors.hpp"
#include "tot/sampler.hpp"

namespace tot {

MarginalError marginal_error(const Matrix& q) {
  MarginalError err;
  if (q.empty()) return err;
  const double row_target = 1.0 / static_cast<double>(q.rows());
  const double col_target = 1.0 / static_cast<double>(q.cols());
  std::vector<double> col_sums(q.cols(), 0.0);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double row_sum = 0.0;
    auto r = q.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      row_sum += r[j];
      col_sums[j] += r[j];
    }
    err.row = std::max(err.row, std::abs(row_sum - row_target));
  }
  for (double s : col_sums) err.col = std::max(err.col, std::abs(s - col_target));
  return err;
}

Matrix log_temporal_prior(std::size_t frames, std::size_t clusters, double sigma) {
  if (frames == 0 || clusters == 0) throw ContractError("temporal_prior: empty shape");
  if (!(sigma > 0.0)) throw ContractError("temporal_prior: sigma must be positive");
  const double b = static_cast<double>(frames);
  const double k = static_cast<double>(clusters);
  const double scale = std::sqrt(1.0 / (b * b) + 1.0 / (k * k));
  const double log_peak = -std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
  Matrix out(frames, clusters);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t j = 0; j < clusters; ++j) {
      const double d = std::abs(static_cast<double>(i + 1) / b - static_cast<double>(j + 1) / k) / scale;
      out(i, j) = log_peak - d * d / (2.0 * sigma * sigma);
    }
  }
  return out;
}

Matrix temporal_prior(std::size_t frames, std::size_t clusters, double sigma) {
  Matrix out = log_temporal_prior(frames, clusters, sigma);
  for (double& v : out.values()) v = std::exp(v);
  return out;
}

namespace {

// Scalings further than this from 1 get folded back into the log potentials.
constexpr double kAbsorbAbove = 1e50;
constexpr double kAbsorbBelow = 1e-50;
// exp of anything below this is flushed to zero instead of going subnormal.
constexpr double kLogUnderflow = -700.0;

}  // namespace

// First iteration runs in the log domain, which fixes the scale of every row
// and column. After that the plan is kept as diag(u) G diag(v) with
// G = exp(log_kernel + a + b), and u, v are absorbed into (a, b) whenever they
// drift far from 1. Same iterates as the log-domain recursion, without an exp
// per entry per iteration.
CodeMatrix sinkhorn_log_kernel(const Matrix& log_kernel, std::size_t iterations, double tolerance) {
  if (iterations == 0) throw ContractError("sinkhorn: at least one iteration is required");
  const std::size_t rows = log_kernel.rows();
  const std::size_t cols = log_kernel.cols();
  if (rows == 0 || cols == 0) throw ContractError("sinkhorn: empty score matrix");

  const double row_target = 1.0 / static_cast<double>(rows);
  const double col_target = 1.0 / static_cast<double>(cols);
  const double log_row_target = std::log(row_target);
  const double log_col_target = std::log(col_target);

  std::vector<double> a(rows, 0.0);
  std::vector<double> b(cols, 0.0);
  std::vector<double> scratch(std::max(rows, cols));
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < rows; ++i) scratch[i] = log_kernel(i, j);
    b[j] = log_col_target - log_sum_exp({scratch.data(), rows});
  }
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = log_kernel.row(i);
    for (std::size_t j = 0; j < cols; ++j) scratch[j] = r[j] + b[j];
    a[i] = log_row_target - log_sum_exp({scratch.data(), cols});
  }

  Matrix g(rows, cols);
  std::vector<double> u(rows, 1.0);
  std::vector<double> v(cols, 1.0);
  auto absorb = [&] {
    for (std::size_t i = 0; i < rows; ++i) a[i] += std::log(u[i]);
    for (std::size_t j = 0; j < cols; ++j) b[j] += std::log(v[j]);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const double x = log_kernel(i, j) + a[i] + b[j];
        g(i, j) = x < kLogUnderflow ? 0.0 : std::exp(x);
      }
    }
    std::fill(u.begin(), u.end(), 1.0);
    std::fill(v.begin(), v.end(), 1.0);
  };
  absorb();

  CodeMatrix out;
  out.iterations = 1;
  std::vector<double> col_sums(cols);
  for (std::size_t it = 1; it < iterations; ++it) {
    std::fill(col_sums.begin(), col_sums.end(), 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      auto r = g.row(i);
      for (std::size_t j = 0; j < cols; ++j) col_sums[j] += r[j] * u[i];
    }
    if (tolerance > 0.0) {
      // Rows are exact after a row update, so the columns carry all the error.
      double worst = 0.0;
      for (std::size_t j = 0; j < cols; ++j) worst = std::max(worst, std::abs(v[j] * col_sums[j] - col_target));
      if (worst < tolerance) break;
    }
    bool drifted = false;
    for (std::size_t j = 0; j < cols; ++j) {
      v[j] = col_target / col_sums[j];
      drifted = drifted || !(v[j] < kAbsorbAbove && v[j] > kAbsorbBelow);
    }
    for (std::size_t i = 0; i < rows; ++i) {
      auto r = g.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += r[j] * v[j];
      u[i] = row_target / s;
      drifted = drifted || !(u[i] < kAbsorbAbove && u[i] > kAbsorbBelow);
    }
    if (drifted) absorb();
    out.iterations = it + 1;
  }

  out.values = Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.values(i, j) = u[i] * g(i, j) * v[j];
  out.error = marginal_error(out.values);
  return out;
}

namespace {

void require_finite_kernel(const Matrix& log_kernel, const char* weight_name, double weight) {
  if (!all_finite(log_kernel)) {
    std::ostringstream os;
    os << "sinkhorn: non-finite kernel with " << weight_name << " = " << weight;
    throw NumericalError(os.str());
  }
}

void require_finite_codes(const CodeMatrix& q, const char* weight_name, double weight) {
  if (!all_finite(q.values)) {
    std::ostringstream os;
    os << "sinkhorn: scaling diverged with " << weight_name << " = " << weight;
    throw NumericalError(os.str());
  }
}

}  // namespace

CodeMatrix sinkhorn_ot(const Matrix& scores, double epsilon, std::size_t iterations, double tolerance) {
  if (!(epsilon > 0.0)) throw ContractError("sinkhorn_ot: epsilon must be positive");
  Matrix log_kernel = scores;
  for (double& v : log_kernel.values()) v /= epsilon;
  require_finite_kernel(log_kernel, "epsilon", epsilon);
  CodeMatrix q = sinkhorn_log_kernel(log_kernel, iterations, tolerance);
  require_finite_codes(q, "epsilon", epsilon);
  return q;
}

CodeMatrix sinkhorn_tot_log_prior(const Matrix& scores, const Matrix& log_prior, double rho,
                                  std::size_t iterations, double tolerance) {
  if (!(rho > 0.0)) throw ContractError("sinkhorn_tot: rho must be positive");
  if (scores.rows() != log_prior.rows() || scores.cols() != log_prior.cols()) {
    throw ContractError("sinkhorn_tot: prior " + log_prior.shape_string() +
                        " does not match scores " + scores.shape_string());
  }
  Matrix log_kernel = scores;
  auto k = log_kernel.values();
  auto lp = log_prior.values();
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = k[i] / rho + lp[i];
  require_finite_kernel(log_kernel, "rho", rho);
  CodeMatrix q = sinkhorn_log_kernel(log_kernel, iterations, tolerance);
  require_finite_codes(q, "rho", rho);
  return q;
}

CodeMatrix sinkhorn_tot(const Matrix& scores, const Matrix& prior, double rho,
                        std::size_t iterations, double tolerance) {
  Matrix log_prior = prior;
  for (double& v : log_prior.values()) {
    if (!(v > 0.0)) throw ContractError("sinkhorn_tot: prior must be strictly positive");
    v = std::log(v);
  }
  return sinkhorn_tot_log_prior(scores, log_prior, rho, iterations, tolerance);
}

BlockCodes solve_codes(const Matrix& scores, std::span<const VideoBlock> blocks, TransportKind kind,
                       const TransportConfig& config, bool single_problem) {
  auto solve = [&](const Matrix& s) {
    if (kind == TransportKind::ot) {
      return sinkhorn_ot(s, config.epsilon, config.iterations, config.marginal_tolerance);
    }
    return sinkhorn_tot_log_prior(s, log_temporal_prior(s.rows(), s.cols(), config.sigma),
                                  config.rho, config.iterations, config.marginal_tolerance);
  };

  BlockCodes out;
  if (single_problem || blocks.empty()) {
    CodeMatrix q = solve(scores);
    out.values = std::move(q.values);
    out.worst_error = q.error;
    return out;
  }
  out.values = Matrix(scores.rows(), scores.cols());
  for (const VideoBlock& block : blocks) {
    CodeMatrix q = solve(slice_rows(scores, block.start_row, block.length));
    std::copy(q.values.values().begin(), q.values.values().end(),
              out.values.row(block.start_row).begin());
    out.worst_error.row = std::max(out.worst_error.row, q.error.row);
    out.worst_error.col = std::max(out.worst_error.col, q.error.col);
  }
  return out;
}

}  // namespace tot
