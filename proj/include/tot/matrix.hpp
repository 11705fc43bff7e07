#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tot {

namespace detail {
void note_allocation(std::size_t rows, std::size_t cols);
}  // namespace detail

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  Matrix(const Matrix& other);
  Matrix& operator=(const Matrix& other);
  Matrix(Matrix&&) noexcept = default;
  Matrix& operator=(Matrix&&) noexcept = default;

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::string shape_string() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a (M×N) · b (N×P)
Matrix matmul(const Matrix& a, const Matrix& b);
// a (M×N) · bᵀ where b is P×N
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
// aᵀ · b where a is N×M and b is N×P
Matrix transposed_matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// Rows [begin, begin + count).
Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count);
Matrix vstack(const Matrix& top, const Matrix& bottom);
void add_in_place(Matrix& target, const Matrix& other, double scale = 1.0);

// log(sum(exp(x))) with max subtraction.
double log_sum_exp(std::span<const double> x);

// softmax(m / temperature) per row, computed with max subtraction.
Matrix row_softmax(const Matrix& m, double temperature);

struct NormalizedRows {
  Matrix values;
  std::vector<double> norms;
  // Rows with zero norm are passed through unchanged.
  std::vector<bool> zero_rows;

  bool any_zero() const;
};

NormalizedRows l2_normalize_rows(const Matrix& m);

// Pulls a gradient w.r.t. the normalized rows back to the raw rows:
// dx = (dy - y (y·dy)) / |x|. Zero rows pass the gradient through.
Matrix l2_normalize_rows_backward(const NormalizedRows& forward, const Matrix& grad);

bool all_finite(const Matrix& m);

// Allocation accounting for the training loop. While a probe is alive on a
// thread, every Matrix constructed on that thread is recorded.
struct AllocationStats {
  std::size_t count = 0;
  std::size_t max_rows = 0;
  std::size_t max_elements = 0;
};

class ScopedAllocationProbe {
 public:
  ScopedAllocationProbe();
  ~ScopedAllocationProbe();
  ScopedAllocationProbe(const ScopedAllocationProbe&) = delete;
  ScopedAllocationProbe& operator=(const ScopedAllocationProbe&) = delete;

  const AllocationStats& stats() const { return stats_; }

 private:
  friend void detail::note_allocation(std::size_t rows, std::size_t cols);

  AllocationStats stats_;
  ScopedAllocationProbe* previous_ = nullptr;
};

}  // namespace tot
