#include "bpe/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "bpe/rng.hpp"

namespace bpe::learners {

namespace {

void check_training_set(const Matrix& x, const std::vector<int>& y, int n_classes) {
  if (x.rows() != y.size()) throw std::invalid_argument("fit: X/y length mismatch");
  if (x.rows() < 2) throw std::invalid_argument("degenerate training set: fewer than 2 samples");
  if (n_classes < 2) throw std::invalid_argument("degenerate training set: fewer than 2 classes");
  int distinct = 0;
  std::vector<char> seen(n_classes, 0);
  for (int v : y) {
    if (v < 0 || v >= n_classes) throw std::invalid_argument("fit: label out of range");
    if (!seen[v]) {
      seen[v] = 1;
      ++distinct;
    }
  }
  if (distinct < 2) throw std::invalid_argument("degenerate training set: single-class labels");
}

Matrix finalize_proba(Matrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) clamp_renormalize_row(m.row(i));
  return m;
}

// ---------------------------------------------------------------------------
// CART with gini impurity. Split quality is compared exactly via integer
// cross-multiplication, so tree construction is bit-reproducible.

class DecisionTree final : public Classifier {
public:
  DecisionTree(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y,
               int n_classes) {
    d_ = x.cols();
    c_ = n_classes;
    min_leaf_ = std::max(1, spec.min_leaf);
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    build(x, y, std::move(idx));
  }

  Matrix predict_proba(const Matrix& x) const override {
    check_input(x);
    Matrix out(x.rows(), static_cast<std::size_t>(c_));
    for (std::size_t i = 0; i < x.rows(); ++i) {
      int node = 0;
      while (nodes_[node].feature >= 0) {
        const auto& nd = nodes_[node];
        node = x(i, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left : nd.right;
      }
      const auto& probs = nodes_[node].probs;
      std::copy(probs.begin(), probs.end(), out.row(i).begin());
    }
    return finalize_proba(std::move(out));
  }

private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> probs;
  };

  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    // children purity score as an exact fraction: (sl*nr + sr*nl) / (nl*nr)
    long long num = 0;
    long long den = 1;
  };

  // Purity score of a count vector: sum of squared counts. Larger weighted
  // score means lower gini impurity.
  static long long sq_sum(const std::vector<long long>& counts) {
    long long s = 0;
    for (long long c : counts) s += c * c;
    return s;
  }

  static bool fraction_greater(long long a_num, long long a_den, long long b_num,
                               long long b_den) {
    return static_cast<__int128>(a_num) * b_den > static_cast<__int128>(b_num) * a_den;
  }

  int build(const Matrix& x, const std::vector<int>& y, std::vector<std::size_t> idx) {
    std::vector<long long> counts(c_, 0);
    for (std::size_t i : idx) ++counts[y[i]];
    const long long n = static_cast<long long>(idx.size());

    bool pure = false;
    for (long long c : counts) pure |= (c == n);

    Split best;
    if (!pure && n >= 2 * min_leaf_) best = best_split(x, y, idx, counts, n);

    int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    if (!best.found) {
      auto& probs = nodes_[id].probs;
      probs.resize(c_);
      for (int c = 0; c < c_; ++c)
        probs[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
      return id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (x(i, best.feature) <= best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    nodes_[id].feature = static_cast<int>(best.feature);
    nodes_[id].threshold = best.threshold;
    int l = build(x, y, std::move(left));
    int r = build(x, y, std::move(right));
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  Split best_split(const Matrix& x, const std::vector<int>& y,
                   const std::vector<std::size_t>& idx, const std::vector<long long>& counts,
                   long long n) {
    Split best;
    const long long parent_num = sq_sum(counts);  // parent score = parent_num / n

    std::vector<std::pair<double, int>> vals(idx.size());
    std::vector<long long> left_counts(c_);
    for (std::size_t f = 0; f < x.cols(); ++f) {
      for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = {x(idx[i], f), y[idx[i]]};
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;

      std::fill(left_counts.begin(), left_counts.end(), 0);
      long long sl = 0;
      long long sr = parent_num;
      long long nl = 0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        int cls = vals[i].second;
        // move one sample left; update squared sums incrementally
        sl += 2 * left_counts[cls] + 1;
        sr -= 2 * (counts[cls] - left_counts[cls]) - 1;
        ++left_counts[cls];
        ++nl;
        if (vals[i].first == vals[i + 1].first) continue;
        long long nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        long long num = sl * nr + sr * nl;
        long long den = nl * nr;
        // gain > 0 iff children score beats the parent score
        if (!fraction_greater(num, den, parent_num, n)) continue;
        if (!best.found || fraction_greater(num, den, best.num, best.den)) {
          best.found = true;
          best.feature = f;
          best.threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
          best.num = num;
          best.den = den;
        }
        // equal quality keeps the earlier (lower feature, lower threshold) split
      }
    }
    return best;
  }

  std::vector<Node> nodes_;
  int min_leaf_ = 1;
};

// ---------------------------------------------------------------------------

class GaussianNb final : public Classifier {
public:
  GaussianNb(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y, int n_classes) {
    d_ = x.cols();
    c_ = n_classes;
    const std::size_t n = x.rows();

    // Smoothing proportional to the largest global feature variance.
    double max_var = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = x(i, j) - mean;
        ss += d * d;
      }
      max_var = std::max(max_var, ss / static_cast<double>(n));
    }
    double eps = spec.var_smoothing * max_var;
    if (!(eps > 0.0)) eps = spec.var_smoothing;

    mean_ = Matrix(c_, d_);
    var_ = Matrix(c_, d_, eps);
    log_prior_.assign(c_, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> class_n(c_, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++class_n[y[i]];
      for (std::size_t j = 0; j < d_; ++j) mean_(y[i], j) += x(i, j);
    }
    for (int c = 0; c < c_; ++c) {
      if (class_n[c] == 0) continue;
      for (std::size_t j = 0; j < d_; ++j) mean_(c, j) /= static_cast<double>(class_n[c]);
      log_prior_[c] = std::log(static_cast<double>(class_n[c]) / static_cast<double>(n));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d_; ++j) {
        double d = x(i, j) - mean_(y[i], j);
        var_(y[i], j) += d * d / static_cast<double>(class_n[y[i]]);
      }
  }

  Matrix predict_proba(const Matrix& x) const override {
    check_input(x);
    Matrix out(x.rows(), static_cast<std::size_t>(c_));
    std::vector<double> loglik(c_);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (int c = 0; c < c_; ++c) {
        double ll = log_prior_[c];
        if (std::isfinite(ll)) {
          for (std::size_t j = 0; j < d_; ++j) {
            double d = x(i, j) - mean_(c, j);
            ll -= 0.5 * (std::log(2.0 * std::numbers::pi * var_(c, j)) + d * d / var_(c, j));
          }
        }
        loglik[c] = ll;
      }
      double m = *std::max_element(loglik.begin(), loglik.end());
      double sum = 0.0;
      for (int c = 0; c < c_; ++c) {
        out(i, c) = std::isfinite(loglik[c]) ? std::exp(loglik[c] - m) : 0.0;
        sum += out(i, c);
      }
      for (int c = 0; c < c_; ++c) out(i, c) /= sum;
    }
    return finalize_proba(std::move(out));
  }

private:
  Matrix mean_, var_;
  std::vector<double> log_prior_;
};

// ---------------------------------------------------------------------------
// Multinomial logistic regression trained with Nesterov-accelerated gradient
// descent (fixed Lipschitz step), L2 on weights but not on the intercept.

class LogisticRegression final : public Classifier {
public:
  LogisticRegression(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y,
                     int n_classes) {
    d_ = x.cols();
    c_ = n_classes;
    const std::size_t n = x.rows();
    const std::size_t dim = d_ + 1;  // bias appended

    double sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 1.0;  // bias component
      for (std::size_t j = 0; j < d_; ++j) s += x(i, j) * x(i, j);
      sumsq += s;
    }
    const double lipschitz = 0.5 * sumsq / static_cast<double>(n) + spec.l2 / static_cast<double>(n);
    const double step = 1.0 / lipschitz;

    w_.assign(c_ * dim, 0.0);
    std::vector<double> w_prev = w_;
    std::vector<double> lookahead(w_.size());
    std::vector<double> grad(w_.size());
    std::vector<double> probs(c_);

    for (int iter = 0; iter < spec.max_iter; ++iter) {
      const double momentum = static_cast<double>(iter) / static_cast<double>(iter + 3);
      for (std::size_t t = 0; t < w_.size(); ++t)
        lookahead[t] = w_[t] + momentum * (w_[t] - w_prev[t]);

      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < c_; ++c) {
          double z = lookahead[c * dim + d_];
          for (std::size_t j = 0; j < d_; ++j) z += lookahead[c * dim + j] * x(i, j);
          probs[c] = z;
          m = std::max(m, z);
        }
        double sum = 0.0;
        for (int c = 0; c < c_; ++c) {
          probs[c] = std::exp(probs[c] - m);
          sum += probs[c];
        }
        for (int c = 0; c < c_; ++c) {
          double r = probs[c] / sum - (y[i] == c ? 1.0 : 0.0);
          for (std::size_t j = 0; j < d_; ++j) grad[c * dim + j] += r * x(i, j);
          grad[c * dim + d_] += r;
        }
      }
      double gmax = 0.0;
      for (std::size_t t = 0; t < w_.size(); ++t) {
        grad[t] /= static_cast<double>(n);
        if (t % dim != d_) grad[t] += spec.l2 / static_cast<double>(n) * lookahead[t];
        gmax = std::max(gmax, std::fabs(grad[t]));
      }
      w_prev = w_;
      for (std::size_t t = 0; t < w_.size(); ++t) w_[t] = lookahead[t] - step * grad[t];
      if (gmax < 1e-10) break;
    }
    dim_ = dim;
  }

  Matrix predict_proba(const Matrix& x) const override {
    check_input(x);
    Matrix out(x.rows(), static_cast<std::size_t>(c_));
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < c_; ++c) {
        double z = w_[c * dim_ + d_];
        for (std::size_t j = 0; j < d_; ++j) z += w_[c * dim_ + j] * x(i, j);
        out(i, c) = z;
        m = std::max(m, z);
      }
      double sum = 0.0;
      for (int c = 0; c < c_; ++c) {
        out(i, c) = std::exp(out(i, c) - m);
        sum += out(i, c);
      }
      for (int c = 0; c < c_; ++c) out(i, c) /= sum;
    }
    return finalize_proba(std::move(out));
  }

private:
  std::vector<double> w_;
  std::size_t dim_ = 0;
};

// ---------------------------------------------------------------------------

class Knn final : public Classifier {
public:
  Knn(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y, int n_classes)
      : x_(x), y_(y) {
    d_ = x.cols();
    c_ = n_classes;
    k_ = std::min<std::size_t>(std::max(1, spec.k), x.rows());  // clamp to training size
  }

  Matrix predict_proba(const Matrix& x) const override {
    check_input(x);
    Matrix out(x.rows(), static_cast<std::size_t>(c_));
    std::vector<std::pair<double, std::size_t>> dist(x_.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto q = x.row(i);
      for (std::size_t r = 0; r < x_.rows(); ++r) {
        double s = 0.0;
        auto t = x_.row(r);
        for (std::size_t j = 0; j < d_; ++j) {
          double d = q[j] - t[j];
          s += d * d;
        }
        dist[r] = {s, r};
      }
      std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
      for (std::size_t m = 0; m < k_; ++m)
        out(i, y_[dist[m].second]) += 1.0 / static_cast<double>(k_);
    }
    return finalize_proba(std::move(out));
  }

private:
  Matrix x_;
  std::vector<int> y_;
  std::size_t k_ = 5;
};

}  // namespace

void Classifier::check_input(const Matrix& x) const {
  if (x.cols() != d_)
    throw std::invalid_argument("predict_proba: expected " + std::to_string(d_) +
                                " features, got " + std::to_string(x.cols()));
}

std::string kind_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::decision_tree: return "decision_tree";
    case LearnerKind::gaussian_nb: return "gaussian_nb";
    case LearnerKind::logistic_regression: return "logistic_regression";
    case LearnerKind::knn: return "knn";
  }
  return "unknown";
}

std::optional<LearnerKind> kind_from_name(std::string_view name) {
  if (name == "decision_tree") return LearnerKind::decision_tree;
  if (name == "gaussian_nb") return LearnerKind::gaussian_nb;
  if (name == "logistic_regression") return LearnerKind::logistic_regression;
  if (name == "knn") return LearnerKind::knn;
  return std::nullopt;
}

ClassifierPtr fit(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y,
                  int n_classes, std::uint64_t seed) {
  (void)seed;  // all in-scope learners are deterministic given (spec, X, y)
  check_training_set(x, y, n_classes);
  switch (spec.kind) {
    case LearnerKind::decision_tree: return std::make_shared<DecisionTree>(spec, x, y, n_classes);
    case LearnerKind::gaussian_nb: return std::make_shared<GaussianNb>(spec, x, y, n_classes);
    case LearnerKind::logistic_regression:
      return std::make_shared<LogisticRegression>(spec, x, y, n_classes);
    case LearnerKind::knn: return std::make_shared<Knn>(spec, x, y, n_classes);
  }
  throw std::invalid_argument("unknown learner kind");
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, int member, std::uint64_t seed) {
  rng::Stream stream(seed, "bag-bootstrap", {static_cast<std::uint64_t>(member)});
  std::vector<std::size_t> idx(n);
  for (auto& v : idx) v = static_cast<std::size_t>(stream.next_below(n));
  return idx;
}

ClassifierPtr bag_member(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y,
                         int n_classes, int member, std::uint64_t seed) {
  auto idx = bootstrap_indices(x.rows(), member, seed);
  Matrix bx(idx.size(), x.cols());
  std::vector<int> by(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = x.row(idx[i]);
    std::copy(src.begin(), src.end(), bx.row(i).begin());
    by[i] = y[idx[i]];
  }
  return fit(spec, bx, by, n_classes,
             rng::derive_key(seed, "bag-fit", {static_cast<std::uint64_t>(member)}));
}

TrainedPool bag(const LearnerSpec& spec, const Matrix& x, const std::vector<int>& y, int n_classes,
                int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("bag: pool size must be >= 1");
  TrainedPool pool;
  for (int i = 0; i < m; ++i) {
    pool.learners.push_back(bag_member(spec, x, y, n_classes, i, seed));
    char buf[16];
    std::snprintf(buf, sizeof buf, "bag-%03d", i);
    pool.ids.emplace_back(buf);
  }
  return pool;
}

}  // namespace bpe::learners
