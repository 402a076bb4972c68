#include "bpe/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bpe {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw std::invalid_argument("from_rows: ragged input");
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

void clamp_renormalize_row(std::span<double> row) {
  double sum = 0.0;
  for (double& v : row) {
    if (!(v >= kProbFloor)) v = kProbFloor;
    if (v > 1.0) v = 1.0;
    sum += v;
  }
  for (double& v : row) v /= sum;
}

bool is_prob_row(std::span<const double> row, double tol) {
  double sum = 0.0;
  for (double v : row) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    sum += v;
  }
  return std::fabs(sum - 1.0) <= tol;
}

void validate_prob_matrix(const Matrix& m, double tol) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (!is_prob_row(m.row(i), tol))
      throw std::invalid_argument("invalid probability row at index " + std::to_string(i));
}

}  // namespace bpe
