#include "bpe/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bpe/rng.hpp"

namespace bpe::theory {

namespace {

bool row_correct(std::span<const double> row, int label) {
  return argmax_row(row) == static_cast<std::size_t>(label);
}

void fused_row(const TwoModelInstance& inst, std::size_t s, double w, std::vector<double>& out) {
  out.resize(inst.q.cols());
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = w * inst.q(s, c) + (1.0 - w) * inst.q_prime(s, c);
}

}  // namespace

Partition partition(const TwoModelInstance& inst) {
  if (inst.q.rows() != inst.q_prime.rows() || inst.q.cols() != inst.q_prime.cols() ||
      inst.q.rows() != inst.y.size())
    throw std::invalid_argument("partition: shape mismatch");
  Partition part;
  for (std::size_t s = 0; s < inst.y.size(); ++s) {
    bool pm = row_correct(inst.q.row(s), inst.y[s]);
    bool sm = row_correct(inst.q_prime.row(s), inst.y[s]);
    if (!pm && sm)
      part.t.push_back(s);
    else if (pm && !sm)
      part.f.push_back(s);
    else
      part.n.push_back(s);
  }
  return part;
}

double exchange_threshold(std::span<const double> q_s, std::span<const double> qp_s, std::size_t i,
                          std::size_t j) {
  if (i == j) throw std::invalid_argument("exchange_threshold: i and j must differ");
  double denom = qp_s[j] - qp_s[i];
  if (denom <= 0.0) return kInfinity;
  return (q_s[i] - q_s[j]) / denom;
}

double fused_accuracy_on(const TwoModelInstance& inst, double w,
                         std::span<const std::size_t> subset) {
  if (subset.empty()) return 1.0;
  std::vector<double> row;
  std::size_t correct = 0;
  for (std::size_t s : subset) {
    fused_row(inst, s, w, row);
    if (row_correct(row, inst.y[s])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(subset.size());
}

FeasibilityResult static_feasibility(const TwoModelInstance& inst, const Partition& part) {
  FeasibilityResult res;
  double lo = 0.0;
  for (std::size_t s : part.t) {
    auto i = argmax_row(inst.q.row(s));
    auto k = static_cast<std::size_t>(inst.y[s]);
    lo = std::max(lo, exchange_threshold(inst.q.row(s), inst.q_prime.row(s), i, k));
  }
  double hi = kInfinity;
  for (std::size_t s : part.f) {
    auto k = static_cast<std::size_t>(inst.y[s]);
    for (std::size_t j = 0; j < inst.q.cols(); ++j) {
      if (j == k) continue;
      hi = std::min(hi, exchange_threshold(inst.q.row(s), inst.q_prime.row(s), k, j));
    }
  }
  res.tau = {lo, hi};
  if (res.tau.empty()) return res;

  double tau_star = std::isinf(hi) ? lo + 1.0 : (lo + hi) / 2.0;
  double w = 1.0 / (1.0 + tau_star);  // midpoint witness: 2 / (2 + lo + hi)

  // Direct check at the witness; in the multi-class case the interval is only
  // a necessary condition (the flip on T must land on the true class).
  std::vector<std::size_t> tf;
  tf.insert(tf.end(), part.t.begin(), part.t.end());
  tf.insert(tf.end(), part.f.begin(), part.f.end());
  if (fused_accuracy_on(inst, w, tf) == 1.0) {
    res.feasible = true;
    res.witness_w = w;
  } else {
    res.tau = {0.0, 0.0};
  }
  return res;
}

double discriminative_margin(std::span<const double> p_row, int true_class) {
  auto k = static_cast<std::size_t>(true_class);
  double best_other = -kInfinity;
  for (std::size_t j = 0; j < p_row.size(); ++j)
    if (j != k) best_other = std::max(best_other, p_row[j]);
  return p_row[k] - best_other;
}

double ensemble_margin(std::span<const double> margins, std::span<const double> w) {
  if (margins.size() != w.size()) throw std::invalid_argument("ensemble_margin: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    if (w[i] < 0.0) throw std::invalid_argument("ensemble_margin: negative weight");
    sum += w[i] * margins[i];
  }
  return sum;
}

namespace {

double grid_accuracy(const std::vector<Matrix>& outputs, const std::vector<int>& y,
                     std::span<const double> w) {
  const std::size_t n = y.size();
  const std::size_t c = outputs[0].cols();
  std::size_t correct = 0;
  std::vector<double> row(c);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < outputs.size(); ++k) acc += w[k] * outputs[k](s, j);
      row[j] = acc;
    }
    if (row_correct(row, y[s])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

GridSearchResult best_static_accuracy(const std::vector<Matrix>& outputs,
                                      const std::vector<int>& y, int grid_resolution) {
  if (outputs.empty() || outputs.size() > 3)
    throw std::invalid_argument("best_static_accuracy: exhaustive mode supports 1 <= K <= 3");
  if (grid_resolution < 2) throw std::invalid_argument("best_static_accuracy: resolution >= 2");
  const auto r = static_cast<double>(grid_resolution);

  GridSearchResult best;
  best.accuracy = -1.0;
  auto consider = [&](std::span<const double> w) {
    double acc = grid_accuracy(outputs, y, w);
    if (acc > best.accuracy) {
      best.accuracy = acc;
      best.weights.assign(w.begin(), w.end());
    }
  };

  // Lexicographic iteration keeps the first maximizer.
  if (outputs.size() == 1) {
    double w[1] = {1.0};
    consider(w);
  } else if (outputs.size() == 2) {
    for (int a = 0; a <= grid_resolution; ++a) {
      double w[2] = {a / r, (grid_resolution - a) / r};
      consider(w);
    }
  } else {
    for (int a = 0; a <= grid_resolution; ++a)
      for (int b = 0; b + a <= grid_resolution; ++b) {
        double w[3] = {a / r, b / r, (grid_resolution - a - b) / r};
        consider(w);
      }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Randomized suites.

namespace {

std::vector<double> random_prob_row(rng::Stream& stream, std::size_t c) {
  std::vector<double> row(c);
  double sum = 0.0;
  for (double& v : row) {
    v = -std::log(1.0 - stream.next_double());  // exponential -> Dirichlet(1)
    sum += v;
  }
  for (double& v : row) v /= sum;
  return row;
}

TwoModelInstance random_binary_instance(rng::Stream& stream, std::size_t max_n) {
  std::size_t n = 2 + static_cast<std::size_t>(stream.next_below(max_n - 1));
  TwoModelInstance inst;
  inst.q = Matrix(n, 2);
  inst.q_prime = Matrix(n, 2);
  inst.y.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    double u = stream.next_double();
    inst.q(s, 0) = u;
    inst.q(s, 1) = 1.0 - u;
    double v = stream.next_double();
    inst.q_prime(s, 0) = v;
    inst.q_prime(s, 1) = 1.0 - v;
    inst.y[s] = static_cast<int>(stream.next_below(2));
  }
  return inst;
}

}  // namespace

SuiteReport check_exchange_lemma(std::uint64_t seed, std::uint64_t trials) {
  rng::Stream stream(seed, "lemma-exchange");
  SuiteReport report{"exchange-lemma", trials, 0};
  std::vector<double> fused(2);
  for (std::uint64_t t = 0; t < trials; ++t) {
    double u = stream.next_double();
    double v = stream.next_double();
    double q[2] = {u, 1.0 - u};
    double qp[2] = {v, 1.0 - v};
    double w = stream.next_double();
    if (w <= 0.0 || w >= 1.0) continue;
    std::size_t i = argmax_row(q);
    std::size_t j = 1 - i;
    double tau = (1.0 - w) / w;
    double et = exchange_threshold(q, qp, i, j);
    bool predicted = qp[j] > qp[i] && et < tau;
    fused[0] = w * q[0] + (1.0 - w) * qp[0];
    fused[1] = w * q[1] + (1.0 - w) * qp[1];
    bool observed = argmax_row(fused) == j;
    if (predicted != observed) ++report.violations;
  }
  return report;
}

SuiteReport check_feasibility_vs_grid(std::uint64_t seed, std::uint64_t trials,
                                      int grid_resolution) {
  rng::Stream stream(seed, "feasibility-grid");
  SuiteReport report{"feasibility-vs-grid", trials, 0};
  for (std::uint64_t t = 0; t < trials; ++t) {
    TwoModelInstance inst = random_binary_instance(stream, 8);
    Partition part = partition(inst);
    FeasibilityResult res = static_feasibility(inst, part);

    std::vector<std::size_t> tf;
    tf.insert(tf.end(), part.t.begin(), part.t.end());
    tf.insert(tf.end(), part.f.begin(), part.f.end());

    if (res.feasible) {
      // The witness itself must attain 100% on T u F.
      if (fused_accuracy_on(inst, *res.witness_w, tf) != 1.0) ++report.violations;
    } else {
      // No interior grid weight may attain it.
      bool found = false;
      for (int a = 1; a < grid_resolution && !found; ++a) {
        double w = static_cast<double>(a) / static_cast<double>(grid_resolution);
        found = fused_accuracy_on(inst, w, tf) == 1.0;
      }
      if (found) ++report.violations;
    }
  }
  return report;
}

SuiteReport check_margin_monotonicity(std::uint64_t seed, std::uint64_t trials,
                                      int grid_resolution) {
  rng::Stream stream(seed, "margin-monotonicity");
  SuiteReport report{"margin-monotonicity", trials, 0};
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::size_t k = 1 + static_cast<std::size_t>(stream.next_below(3));
    std::size_t n = 2 + static_cast<std::size_t>(stream.next_below(49));
    std::size_t c = 2 + static_cast<std::size_t>(stream.next_below(3));
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(stream.next_below(c));

    std::vector<Matrix> outputs(k, Matrix(n, c));
    for (auto& m : outputs)
      for (std::size_t s = 0; s < n; ++s) {
        auto row = random_prob_row(stream, c);
        std::copy(row.begin(), row.end(), m.row(s).begin());
      }

    double before = best_static_accuracy(outputs, y, grid_resolution).accuracy;

    // Move a random fraction of every off-class mass onto the true class;
    // every per-sample margin weakly increases.
    std::vector<Matrix> improved = outputs;
    for (auto& m : improved)
      for (std::size_t s = 0; s < n; ++s) {
        double f = 0.3 * stream.next_double();
        auto row = m.row(s);
        double moved = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          if (j == static_cast<std::size_t>(y[s])) continue;
          double take = f * row[j];
          row[j] -= take;
          moved += take;
        }
        row[y[s]] += moved;
      }

    double after = best_static_accuracy(improved, y, grid_resolution).accuracy;
    if (after < before) ++report.violations;
  }
  return report;
}

SuiteReport check_partition_covers(std::uint64_t seed, std::uint64_t trials) {
  rng::Stream stream(seed, "partition-covers");
  SuiteReport report{"partition-covers", trials, 0};
  for (std::uint64_t t = 0; t < trials; ++t) {
    TwoModelInstance inst = random_binary_instance(stream, 16);
    Partition part = partition(inst);
    std::vector<char> seen(inst.y.size(), 0);
    auto mark = [&](const std::vector<std::size_t>& v) {
      for (std::size_t s : v) ++seen[s];
    };
    mark(part.t);
    mark(part.f);
    mark(part.n);
    bool ok = part.t.size() + part.f.size() + part.n.size() == inst.y.size();
    for (char v : seen) ok = ok && v == 1;
    if (!ok) ++report.violations;
  }
  return report;
}

}  // namespace bpe::theory
