#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "bpe/theory.hpp"

using namespace bpe;
using namespace bpe::theory;

namespace {

TwoModelInstance instance_from(const std::vector<std::vector<double>>& q,
                               const std::vector<std::vector<double>>& qp, std::vector<int> y) {
  return TwoModelInstance{Matrix::from_rows(q), Matrix::from_rows(qp), std::move(y)};
}

}  // namespace

TEST_CASE("partition follows per-model correctness") {
  auto inst = instance_from({{0.9, 0.1}, {0.4, 0.6}, {0.2, 0.8}},
                            {{0.8, 0.2}, {0.7, 0.3}, {0.6, 0.4}}, {0, 0, 0});
  // s0: both right -> N; s1: PM wrong, SM right -> T; s2: PM wrong, SM wrong... SM right
  Partition part = partition(inst);
  CHECK(part.n == std::vector<std::size_t>{0});
  CHECK(part.t == std::vector<std::size_t>{1, 2});

  auto both_wrong = instance_from({{0.1, 0.9}}, {{0.2, 0.8}}, {0});
  Partition bw = partition(both_wrong);
  CHECK(bw.n == std::vector<std::size_t>{0});

  auto f_case = instance_from({{0.7, 0.3}}, {{0.4, 0.6}}, {0});
  Partition pf = partition(f_case);
  CHECK(pf.f == std::vector<std::size_t>{0});
}

TEST_CASE("exchange threshold arithmetic") {
  std::vector<double> q = {0.6, 0.4};
  std::vector<double> qp = {0.3, 0.7};
  CHECK(exchange_threshold(q, qp, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));

  // identical secondary cannot move the argmax: condition unmet
  CHECK(exchange_threshold(q, q, 0, 1) == kInfinity);

  // w = 0.5 gives tau = 1 > 0.5, so the fused argmax flips to class 1
  double w = 0.5;
  double f0 = w * q[0] + (1 - w) * qp[0];
  double f1 = w * q[1] + (1 - w) * qp[1];
  CHECK(f0 == doctest::Approx(0.45).epsilon(1e-12));
  CHECK(f1 == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(f1 > f0);
}

TEST_CASE("static feasibility with no conflicts covers every tau") {
  auto inst = instance_from({{0.9, 0.1}, {0.2, 0.8}}, {{0.8, 0.2}, {0.3, 0.7}}, {0, 1});
  Partition part = partition(inst);
  CHECK(part.t.empty());
  CHECK(part.f.empty());
  auto res = static_feasibility(inst, part);
  CHECK(res.feasible);
  CHECK(res.tau.lo == 0.0);
  CHECK(std::isinf(res.tau.hi));
  CHECK(res.witness_w.has_value());
}

TEST_CASE("static feasibility finds the (0.5, 2) interval") {
  auto inst = instance_from({{0.6, 0.4}, {0.7, 0.3}}, {{0.3, 0.7}, {0.4, 0.6}}, {1, 0});
  Partition part = partition(inst);
  REQUIRE(part.t.size() == 1);
  REQUIRE(part.f.size() == 1);
  auto res = static_feasibility(inst, part);
  REQUIRE(res.feasible);
  CHECK(res.tau.lo == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.tau.hi == doctest::Approx(2.0).epsilon(1e-12));
  // midpoint witness: w = 2 / (2 + lo + hi) = 4/9
  CHECK(*res.witness_w == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
  std::vector<std::size_t> tf = {0, 1};
  CHECK(fused_accuracy_on(inst, *res.witness_w, tf) == 1.0);
  // any w with tau in (0.5, 2) works, e.g. tau = 1 -> w = 0.5
  CHECK(fused_accuracy_on(inst, 0.5, tf) == 1.0);
}

TEST_CASE("margin overlap makes static perfection impossible") {
  // ET(t) = 1.5 >= ET(f) = 0.8
  auto inst = instance_from({{0.8, 0.2}, {0.7, 0.3}}, {{0.3, 0.7}, {0.25, 0.75}}, {1, 0});
  Partition part = partition(inst);
  REQUIRE(part.t.size() == 1);
  REQUIRE(part.f.size() == 1);
  auto res = static_feasibility(inst, part);
  CHECK_FALSE(res.feasible);
  CHECK(res.tau.empty());
  CHECK_FALSE(res.witness_w.has_value());
  // no interior weight reaches 100% on T u F
  std::vector<std::size_t> tf = {0, 1};
  for (int a = 1; a < 1000; ++a) {
    double w = a / 1000.0;
    CHECK(fused_accuracy_on(inst, w, tf) < 1.0);
  }
}

TEST_CASE("discriminative margin") {
  std::vector<double> onehot = {0.0, 1.0, 0.0};
  CHECK(discriminative_margin(onehot, 1) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> uniform = {0.5, 0.5};
  CHECK(discriminative_margin(uniform, 0) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<double> wrong = {0.3, 0.5, 0.2};
  CHECK(discriminative_margin(wrong, 0) == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("ensemble margin is the weighted margin sum") {
  std::vector<double> margins = {0.4, -0.1};
  std::vector<double> w1 = {1.0, 0.0};
  CHECK(ensemble_margin(margins, w1) == doctest::Approx(0.4).epsilon(1e-12));
  std::vector<double> w2 = {0.3, 0.7};
  CHECK(ensemble_margin(margins, w2) == doctest::Approx(0.05).epsilon(1e-12));
  std::vector<double> pos = {0.2, 0.3};
  std::vector<double> w3 = {0.5, 0.5};
  CHECK(ensemble_margin(pos, w3) > 0.0);
  std::vector<double> neg_w = {-0.1, 1.1};
  CHECK_THROWS_AS(ensemble_margin(margins, neg_w), std::invalid_argument);
}

TEST_CASE("grid search over the weight simplex") {
  auto inst = instance_from({{0.6, 0.4}, {0.7, 0.3}}, {{0.3, 0.7}, {0.4, 0.6}}, {1, 0});
  // K = 1: the model's own accuracy at w = [1]
  auto single = best_static_accuracy({inst.q}, inst.y, 10);
  CHECK(single.accuracy == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(single.weights == std::vector<double>{1.0});

  // identical models: accuracy constant across the grid
  auto twin = best_static_accuracy({inst.q, inst.q}, inst.y, 25);
  CHECK(twin.accuracy == doctest::Approx(0.5).epsilon(1e-12));

  // the feasible two-model conflict resolves to 100% at resolution 1000
  auto best = best_static_accuracy({inst.q, inst.q_prime}, inst.y, 1000);
  CHECK(best.accuracy == 1.0);

  CHECK_THROWS_AS(best_static_accuracy({}, inst.y, 10), std::invalid_argument);
  CHECK_THROWS_AS(best_static_accuracy({inst.q, inst.q, inst.q, inst.q}, inst.y, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(best_static_accuracy({inst.q}, inst.y, 1), std::invalid_argument);
}

TEST_CASE("paired margin violations stay infeasible for three models") {
  // sample 0 (class 0): only model A is right; sample 1 (class 1): only B and C
  Matrix a = Matrix::from_rows({{0.9, 0.1}, {0.9, 0.1}});
  Matrix b = Matrix::from_rows({{0.1, 0.9}, {0.1, 0.9}});
  Matrix c = b;
  std::vector<int> y = {0, 1};
  auto best = best_static_accuracy({a, b, c}, y, 100);
  CHECK(best.accuracy == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("randomized property suites hold at unit scale") {
  CHECK(check_partition_covers(11, 300).ok());
  CHECK(check_exchange_lemma(12, 3000).ok());
  CHECK(check_feasibility_vs_grid(13, 150, 1000).ok());
  CHECK(check_margin_monotonicity(14, 120, 20).ok());
}
