#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpe/matrix.hpp"

namespace bpe::theory {

// Two probabilistic models evaluated on the same labeled samples; q is the
// primary model, q_prime the secondary.
struct TwoModelInstance {
  Matrix q;
  Matrix q_prime;
  std::vector<int> y;
};

// Disjoint index sets: t = only the secondary is right, f = only the primary
// is right, n = both agree in correctness.
struct Partition {
  std::vector<std::size_t> t;
  std::vector<std::size_t> f;
  std::vector<std::size_t> n;
};

Partition partition(const TwoModelInstance& inst);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Weight-ratio bound above which the fused argmax can move from class i to
// class j on this sample; +inf when the secondary model does not rank j above
// i (no weight can force the move).
double exchange_threshold(std::span<const double> q_s, std::span<const double> qp_s, std::size_t i,
                          std::size_t j);

struct TauInterval {
  double lo = 0.0;
  double hi = kInfinity;
  bool empty() const { return !(lo < hi); }
};

struct FeasibilityResult {
  bool feasible = false;
  TauInterval tau;
  std::optional<double> witness_w;
};

// Whether a single static weight w in (0, 1) classifies every sample in
// T u F correctly. The tau interval comes from the pairwise thresholds; the
// witness (interval midpoint mapped to w) is then checked by direct fused
// evaluation, which also covers the multi-class landing condition.
FeasibilityResult static_feasibility(const TwoModelInstance& inst, const Partition& part);

// p[true_class] minus the best competing class probability.
double discriminative_margin(std::span<const double> p_row, int true_class);

// Weighted sum of per-model margins; positive means the fused prediction is
// correct in the binary case.
double ensemble_margin(std::span<const double> margins, std::span<const double> w);

struct GridSearchResult {
  double accuracy = 0.0;
  std::vector<double> weights;
};

// Exhaustive accuracy over the weight simplex with step 1/grid_resolution;
// returns the lexicographically-first argmax. K <= 3 only.
GridSearchResult best_static_accuracy(const std::vector<Matrix>& outputs,
                                      const std::vector<int>& y, int grid_resolution);

// Accuracy of w*q + (1-w)*q' restricted to an index subset.
double fused_accuracy_on(const TwoModelInstance& inst, double w,
                         std::span<const std::size_t> subset);

// Randomized property suites shared by the verify-theory command, the unit
// tests and the acceptance gate. Deterministic in (seed, trials).
struct SuiteReport {
  std::string name;
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
  bool ok() const { return violations == 0; }
};

// Fused-argmax flips happen exactly when the strict exchange condition holds.
SuiteReport check_exchange_lemma(std::uint64_t seed, std::uint64_t trials);

// static_feasibility agrees with an exhaustive interior grid search on
// whether 100% accuracy on T u F is attainable.
SuiteReport check_feasibility_vs_grid(std::uint64_t seed, std::uint64_t trials,
                                      int grid_resolution);

// Redistributing probability mass toward the true class never lowers the
// grid-search optimum.
SuiteReport check_margin_monotonicity(std::uint64_t seed, std::uint64_t trials,
                                      int grid_resolution);

// |T| + |F| + |N| covers every sample exactly once.
SuiteReport check_partition_covers(std::uint64_t seed, std::uint64_t trials);

}  // namespace bpe::theory
