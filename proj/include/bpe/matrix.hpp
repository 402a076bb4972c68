#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bpe {

// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return v_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {v_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {v_.data() + i * cols_, cols_}; }

  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> v_;
};

inline constexpr double kProbFloor = 1e-15;

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax_row(std::span<const double> row);

// Floors entries at kProbFloor and rescales the row to sum 1.
void clamp_renormalize_row(std::span<double> row);

bool is_prob_row(std::span<const double> row, double tol = 1e-9);

// Throws std::invalid_argument if any row violates the probability contract.
void validate_prob_matrix(const Matrix& m, double tol = 1e-9);

}  // namespace bpe
