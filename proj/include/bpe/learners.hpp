#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpe/matrix.hpp"

namespace bpe::learners {

enum class LearnerKind { decision_tree, gaussian_nb, logistic_regression, knn };

std::string kind_name(LearnerKind kind);
std::optional<LearnerKind> kind_from_name(std::string_view name);

struct LearnerSpec {
  LearnerKind kind = LearnerKind::decision_tree;
  // decision tree: gini splits, unlimited depth, single-sample leaves
  int min_leaf = 1;
  // knn
  int k = 5;
  // logistic regression
  int max_iter = 1000;
  double l2 = 1.0;
  // gaussian nb
  double var_smoothing = 1e-9;
};

// Fitted classifiers are immutable; predict_proba is const and thread-safe.
class Classifier {
public:
  virtual ~Classifier() = default;

  // N x C row-stochastic matrix; rows clamped to [1e-15, 1] and renormalized.
  virtual Matrix predict_proba(const Matrix& x) const = 0;

  std::size_t n_features() const { return d_; }
  int n_classes() const { return c_; }

protected:
  void check_input(const Matrix& x) const;
  std::size_t d_ = 0;
  int c_ = 0;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

ClassifierPtr fit(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y,
                  int n_classes, std::uint64_t seed);

struct TrainedPool {
  std::vector<ClassifierPtr> learners;
  std::vector<std::string> ids;
  std::optional<std::vector<double>> screening_acc;

  std::size_t size() const { return learners.size(); }
};

// Bootstrap resample indices for bag member `m` (n draws with replacement).
std::vector<std::size_t> bootstrap_indices(std::size_t n, int member, std::uint64_t seed);

// Fits member `m` of a homogeneous bagged pool on its bootstrap resample.
ClassifierPtr bag_member(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y,
                         int n_classes, int member, std::uint64_t seed);

// Homogeneous pool of M members, ids "bag-000".."bag-(M-1)".
TrainedPool bag(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y, int n_classes,
                int m, std::uint64_t seed);

}  // namespace bpe::learners
