#include "tot/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tot/errors.hpp"

namespace tot {

namespace {

thread_local ScopedAllocationProbe* active_probe = nullptr;

}  // namespace

ScopedAllocationProbe::ScopedAllocationProbe() : previous_(active_probe) {
  active_probe = this;
}

ScopedAllocationProbe::~ScopedAllocationProbe() { active_probe = previous_; }

void detail::note_allocation(std::size_t rows, std::size_t cols) {
  for (auto* p = active_probe; p != nullptr; p = p->previous_) {
    ++p->stats_.count;
    p->stats_.max_rows = std::max(p->stats_.max_rows, rows);
    p->stats_.max_elements = std::max(p->stats_.max_elements, rows * cols);
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  detail::note_allocation(rows, cols);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ContractError("Matrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  detail::note_allocation(rows_, cols_);
}

Matrix::Matrix(const Matrix& other)
    : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
  detail::note_allocation(rows_, cols_);
}

Matrix& Matrix::operator=(const Matrix& other) {
  if (this != &other) {
    rows_ = other.rows_;
    cols_ = other.cols_;
    data_ = other.data_;
    detail::note_allocation(rows_, cols_);
  }
  return *this;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dimensions disagree (" + a.shape_string() +
                        " times " + b.shape_string() + ")");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ContractError("matmul_transposed: inner dimensions disagree (" + a.shape_string() +
                        " times transpose of " + b.shape_string() + ")");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto a_row = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto b_row = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a_row[k] * b_row[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix transposed_matmul(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ContractError("transposed_matmul: inner dimensions disagree (transpose of " +
                        a.shape_string() + " times " + b.shape_string() + ")");
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.rows()) {
    throw ContractError("slice_rows: rows [" + std::to_string(begin) + ", " +
                        std::to_string(begin + count) + ") out of range for " + m.shape_string());
  }
  Matrix out(count, m.cols());
  auto src = m.values().subspan(begin * m.cols(), count * m.cols());
  std::copy(src.begin(), src.end(), out.values().begin());
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) {
    throw ContractError("vstack: column counts disagree (" + top.shape_string() + " over " +
                        bottom.shape_string() + ")");
  }
  Matrix out(top.rows() + bottom.rows(), top.cols());
  std::copy(top.values().begin(), top.values().end(), out.values().begin());
  std::copy(bottom.values().begin(), bottom.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

void add_in_place(Matrix& target, const Matrix& other, double scale) {
  if (target.rows() != other.rows() || target.cols() != other.cols()) {
    throw ContractError("add_in_place: shapes disagree (" + target.shape_string() + " vs " +
                        other.shape_string() + ")");
  }
  auto t = target.values();
  auto o = other.values();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += scale * o[i];
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

Matrix row_softmax(const Matrix& m, double temperature) {
  if (!(temperature > 0.0)) {
    throw ContractError("row_softmax: temperature must be positive, got " +
                        std::to_string(temperature));
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto o = out.row(i);
    if (in.empty()) continue;
    const double peak = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp((in[j] - peak) / temperature);
      total += o[j];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

bool NormalizedRows::any_zero() const {
  return std::find(zero_rows.begin(), zero_rows.end(), true) != zero_rows.end();
}

NormalizedRows l2_normalize_rows(const Matrix& m) {
  NormalizedRows out{m, std::vector<double>(m.rows()), std::vector<bool>(m.rows(), false)};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.values.row(i);
    double sq = 0.0;
    for (double v : r) sq += v * v;
    const double norm = std::sqrt(sq);
    out.norms[i] = norm;
    if (norm == 0.0) {
      out.zero_rows[i] = true;
      continue;
    }
    for (double& v : r) v /= norm;
  }
  return out;
}

Matrix l2_normalize_rows_backward(const NormalizedRows& forward, const Matrix& grad) {
  const Matrix& y = forward.values;
  if (y.rows() != grad.rows() || y.cols() != grad.cols()) {
    throw ContractError("l2_normalize_rows_backward: gradient shape " + grad.shape_string() +
                        " does not match " + y.shape_string());
  }
  Matrix out(grad.rows(), grad.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto dy = grad.row(i);
    auto dx = out.row(i);
    if (forward.zero_rows[i]) {
      std::copy(dy.begin(), dy.end(), dx.begin());
      continue;
    }
    auto yr = y.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * dy[j];
    const double inv = 1.0 / forward.norms[i];
    for (std::size_t j = 0; j < yr.size(); ++j) dx[j] = (dy[j] - yr[j] * dot) * inv;
  }
  return out;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace tot
