#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "bpe/matrix.hpp"

namespace bpe::stats {

// Fraction of rows whose argmax (lowest-index tie-break) equals the label.
double accuracy(const Matrix& pred, const std::vector<int>& y);

struct ResultsMatrix {
  std::vector<std::string> datasets;  // rows
  std::vector<std::string> methods;   // columns
  Matrix acc;                         // mean accuracy per (dataset, method)
};

// Ascending ranks with mean ranks for ties (1-based).
std::vector<double> rank_with_ties(std::span<const double> values);

// Average rank per method; rank 1 is the best accuracy on a dataset.
std::vector<double> friedman_ranks(const ResultsMatrix& m);

struct WilcoxonOutcome {
  double r_plus = 0.0;
  double r_minus = 0.0;
  int n_effective = 0;
  double p_value = 1.0;
  bool rejected_at_005 = false;
};

// Two-sided signed-rank test on paired vectors; zero differences dropped,
// exact enumeration up to n_eff = 12, tie-corrected normal approximation with
// continuity correction above.
WilcoxonOutcome wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Same decision machinery starting from reported rank sums; n_eff is implied
// by r_plus + r_minus = n(n+1)/2.
WilcoxonOutcome wilcoxon_from_rank_sums(double r_plus, double r_minus);

// Exact two-sided p by enumerating all sign assignments of the given ranks.
double wilcoxon_exact_p(std::span<const double> ranks, double r_plus);

// Standard normal CDF and its inverse (Acklam's rational approximation).
double normal_cdf(double z);
double normal_quantile(double p);

struct WinTieLoss {
  int wins = 0;
  int ties = 0;
  int losses = 0;
  double score = 0.0;                    // wins + ties / 2
  std::array<double, 3> critical{};      // alpha = 0.10, 0.05, 0.01
  std::array<bool, 3> significant{};
};

// Sign-test critical value n/2 + z_(1-alpha) * sqrt(n)/2; n = 42 uses the
// pinned three-level table {24.05, 25.20, 27.36}.
double sign_test_critical_value(int n, double alpha);

WinTieLoss win_tie_loss(std::span<const double> a, std::span<const double> b,
                        double tie_epsilon = 1e-9);

}  // namespace bpe::stats
