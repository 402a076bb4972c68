#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "bpe/ensemble.hpp"
#include "bpe/rng.hpp"

using namespace bpe;

namespace {

// Always answers with the same probability row.
struct ConstantModel final : learners::Classifier {
  std::vector<double> row;
  ConstantModel(std::vector<double> r, std::size_t d) : row(std::move(r)) {
    d_ = d;
    c_ = static_cast<int>(row.size());
  }
  Matrix predict_proba(const Matrix& x) const override {
    Matrix out(x.rows(), row.size());
    for (std::size_t i = 0; i < x.rows(); ++i)
      std::copy(row.begin(), row.end(), out.row(i).begin());
    return out;
  }
};

learners::TrainedPool constant_pool(const std::vector<std::vector<double>>& rows, std::size_t d) {
  learners::TrainedPool pool;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    pool.learners.push_back(std::make_shared<ConstantModel>(rows[k], d));
    pool.ids.push_back("m" + std::to_string(k));
  }
  return pool;
}

std::vector<Matrix> random_outputs(std::size_t k, std::size_t n, std::size_t c,
                                   std::uint64_t seed) {
  rng::Stream stream(seed, "rand-outputs");
  std::vector<Matrix> outputs(k, Matrix(n, c));
  for (auto& m : outputs)
    for (std::size_t i = 0; i < n; ++i) {
      auto row = m.row(i);
      double sum = 0.0;
      for (double& v : row) {
        v = -std::log(1.0 - stream.next_double());
        sum += v;
      }
      for (double& v : row) v /= sum;
    }
  return outputs;
}

}  // namespace

TEST_CASE("negative entropy of known rows") {
  std::vector<double> uniform2 = {0.5, 0.5};
  CHECK(score(uniform2, ScoreKind::neg_entropy) ==
        doctest::Approx(-0.6931471805599453).epsilon(1e-12));

  std::vector<double> onehot = {1.0, 0.0};
  CHECK(std::fabs(score(onehot, ScoreKind::neg_entropy)) < 1e-12);

  std::vector<double> skewed = {0.7, 0.2, 0.1};
  CHECK(score(skewed, ScoreKind::neg_entropy) == doctest::Approx(-0.8018185525433372).epsilon(1e-9));
}

TEST_CASE("uniform rows score exactly minus log C") {
  for (std::size_t c : {2, 3, 5, 10, 17}) {
    std::vector<double> row(c, 1.0 / static_cast<double>(c));
    CHECK(std::fabs(score(row, ScoreKind::neg_entropy) + std::log(static_cast<double>(c))) <
          1e-12);
  }
}

TEST_CASE("top margin is the gap between the two largest entries") {
  std::vector<double> row = {0.6, 0.3, 0.1};
  CHECK(score(row, ScoreKind::top_margin) == doctest::Approx(0.3).epsilon(1e-12));
  std::vector<double> tied = {0.5, 0.5};
  CHECK(score(tied, ScoreKind::top_margin) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mean and sample sd use the N-1 denominator") {
  std::vector<double> scores = {-1.0, -3.0};
  auto [mu, sigma] = mean_and_sample_sd(scores);
  CHECK(mu == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(sigma == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("a constant model has zero profile spread") {
  ConstantModel model({0.8, 0.2}, 3);
  auto profile = build_profile(model, "const", Matrix(20, 3, 0.0), 0.5, 42, ScoreKind::neg_entropy);
  CHECK(profile.sigma == 0.0);
  CHECK(profile.mu == doctest::Approx(score(model.row, ScoreKind::neg_entropy)).epsilon(1e-12));
  CHECK(profile.n == 20);
  CHECK(profile.delta == 0.5);
}

TEST_CASE("profiles are deterministic in their inputs") {
  ConstantModel model({0.8, 0.2}, 2);
  Matrix x(10, 2, 1.0);
  auto a = build_profile(model, "m", x, 0.5, 7, ScoreKind::neg_entropy);
  auto b = build_profile(model, "m", x, 0.5, 7, ScoreKind::neg_entropy);
  CHECK(a.mu == b.mu);
  CHECK(a.sigma == b.sigma);
}

TEST_CASE("z-score transformation and clipping") {
  BehavioralProfile p;
  p.mu = -0.5;
  p.sigma = 0.1;
  CHECK(z_score(-0.5, p) == 0.0);
  CHECK(z_score(-0.2, p) == doctest::Approx(3.0).epsilon(1e-9));

  BehavioralProfile flat;
  flat.mu = 0.0;
  flat.sigma = 0.0;
  CHECK(z_score(1.0, flat, 1e-12, 5.0) == 5.0);   // raw z = 1e12, clipped
  CHECK(z_score(-1.0, flat, 1e-12, 5.0) == -5.0);
}

TEST_CASE("softmax weights on known inputs") {
  std::vector<double> zeros = {0.0, 0.0, 0.0};
  auto w = softmax_weights(zeros, 2.7);
  for (double v : w.w) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  std::vector<double> z = {0.4, -1.0, 2.2};
  auto uniform = softmax_weights(z, 0.0);
  for (double v : uniform.w) CHECK(v == 1.0 / 3.0);

  std::vector<double> pair = {1.0, 0.0};
  auto wp = softmax_weights(pair, 1.0);
  CHECK(wp.w[0] == doctest::Approx(0.7310585786300049).epsilon(1e-9));
  CHECK(wp.w[1] == doctest::Approx(0.2689414213699951).epsilon(1e-9));
}

TEST_CASE("dominant clipped z wins almost all weight for K up to 13") {
  for (std::size_t k = 2; k <= 13; ++k) {
    std::vector<double> z(k, -5.0);
    z[0] = 5.0;
    auto w = softmax_weights(z, 1.0);
    CHECK(w.w[0] > 0.999);
  }
}

TEST_CASE("weight simplex invariant on random inputs") {
  rng::Stream stream(5, "simplex");
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t k = 1 + stream.next_below(12);
    std::vector<double> z(k);
    for (double& v : z) v = 10.0 * stream.next_double() - 5.0;
    double lambda = 3.0 * stream.next_double();
    auto w = softmax_weights(z, lambda);
    double sum = 0.0;
    for (double v : w.w) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("larger lambda never shrinks the argmax weight") {
  rng::Stream stream(6, "lambda-mono");
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t k = 2 + stream.next_below(8);
    std::vector<double> z(k);
    for (double& v : z) v = 4.0 * stream.next_double() - 2.0;
    std::size_t best = argmax_row(z);
    double prev = -1.0;
    for (double lambda : {0.0, 0.3, 0.7, 1.0, 1.6, 2.5}) {
      double w = softmax_weights(z, lambda).w[best];
      CHECK(w >= prev - 1e-15);
      prev = w;
    }
  }
}

TEST_CASE("weights are invariant to a constant z shift") {
  std::vector<double> z = {0.3, -1.2, 0.9, 0.0};
  std::vector<double> shifted = z;
  for (double& v : shifted) v += 2.5;
  auto a = softmax_weights(z, 1.3);
  auto b = softmax_weights(shifted, 1.3);
  for (std::size_t i = 0; i < z.size(); ++i)
    CHECK(a.w[i] == doctest::Approx(b.w[i]).epsilon(1e-12));
}

TEST_CASE("fuse on known inputs") {
  Matrix a(1, 2), b(1, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 0.0;
  b(0, 0) = 0.0;
  b(0, 1) = 1.0;

  Matrix single = fuse({a}, WeightVector{{1.0}});
  CHECK(single(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix even = fuse({a, b}, WeightVector{{0.5, 0.5}});
  CHECK(even(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(even(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

  Matrix p(1, 2), q(1, 2);
  p(0, 0) = 0.9;
  p(0, 1) = 0.1;
  q(0, 0) = 0.2;
  q(0, 1) = 0.8;
  Matrix mixed = fuse({p, q}, WeightVector{{0.731059, 0.268941}});
  CHECK(mixed(0, 0) == doctest::Approx(0.7117413).epsilon(1e-9));
  CHECK(mixed(0, 1) == doctest::Approx(0.2882587).epsilon(1e-9));
}

TEST_CASE("fuse rejects shape mismatches") {
  Matrix a(2, 2), b(3, 2);
  CHECK_THROWS_AS(fuse({a, b}, WeightVector{{0.5, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(fuse({a}, WeightVector{{0.5, 0.5}}), std::invalid_argument);
}

TEST_CASE("borda rank fusion uses descending-order points with tie averaging") {
  std::vector<double> row = {0.2, 0.5, 0.3};
  auto ranks = borda_row(row);
  CHECK(ranks[1] == doctest::Approx(2.0));
  CHECK(ranks[2] == doctest::Approx(1.0));
  CHECK(ranks[0] == doctest::Approx(0.0));

  std::vector<double> tied = {0.4, 0.4, 0.2};
  auto tr = borda_row(tied);
  CHECK(tr[0] == doctest::Approx(1.5));
  CHECK(tr[1] == doctest::Approx(1.5));
  CHECK(tr[2] == doctest::Approx(0.0));
}

TEST_CASE("identical models and profiles reproduce the single-model output") {
  auto pool = constant_pool({{0.7, 0.3}, {0.7, 0.3}, {0.7, 0.3}}, 2);
  Matrix x(5, 2, 0.0);
  auto profiles = build_profiles(pool, Matrix(10, 2, 0.0), 0.5, 3, ScoreKind::neg_entropy);
  Matrix pred = bpe_predict(pool, profiles, x, BpeParams{});
  Matrix single = pool.learners[0]->predict_proba(x);
  for (std::size_t i = 0; i < pred.rows(); ++i)
    for (std::size_t c = 0; c < pred.cols(); ++c)
      CHECK(pred(i, c) == doctest::Approx(single(i, c)).epsilon(1e-12));
}

TEST_CASE("an unusually confident model dominates the fusion") {
  auto pool = constant_pool({{0.99, 0.01}, {0.5, 0.5}}, 2);
  std::vector<BehavioralProfile> profiles(2);
  double s0 = score(std::vector<double>{0.99, 0.01}, ScoreKind::neg_entropy);
  double s1 = score(std::vector<double>{0.5, 0.5}, ScoreKind::neg_entropy);
  profiles[0] = {"m0", ScoreKind::neg_entropy, s0 - 10.0, 1.0, 0.5, 10};  // z clips to +5
  profiles[1] = {"m1", ScoreKind::neg_entropy, s1 + 10.0, 1.0, 0.5, 10};  // z clips to -5
  Matrix pred = bpe_predict(pool, profiles, Matrix(1, 2, 0.0), BpeParams{});
  CHECK(pred(0, 0) > 0.989);
}

TEST_CASE("lambda zero reduces to the simple average bitwise") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto outputs = random_outputs(4, 20, 3, seed);
    std::vector<BehavioralProfile> profiles(4);
    for (int k = 0; k < 4; ++k) profiles[k] = {"m" + std::to_string(k), ScoreKind::neg_entropy,
                                               -0.5 - k * 0.1, 0.05 + 0.01 * k, 0.5, 10};
    BpeParams params;
    params.lambda = 0.0;
    Matrix bpe_out = bpe_predict_from_outputs(outputs, profiles, params);
    Matrix avg = fuse(outputs, WeightVector::uniform(4));
    CHECK(bpe_out == avg);
  }
}

TEST_CASE("profile ids must match the pool") {
  auto pool = constant_pool({{0.6, 0.4}, {0.4, 0.6}}, 2);
  auto profiles = build_profiles(pool, Matrix(10, 2, 0.0), 0.5, 3, ScoreKind::neg_entropy);
  std::swap(profiles[0], profiles[1]);
  CHECK_THROWS_WITH_AS(bpe_predict(pool, profiles, Matrix(1, 2, 0.0), BpeParams{}),
                       doctest::Contains("id mismatch"), std::invalid_argument);
}

TEST_CASE("profile store round-trips bit-exactly") {
  std::vector<BehavioralProfile> profiles;
  profiles.push_back({"gnarly", ScoreKind::neg_entropy, -0.1 + 0.3 - 0.2, 1.0 / 3.0, 0.5, 12345});
  profiles.push_back({"bag-007", ScoreKind::top_margin, 0.9999999999999999, 1e-17, 1.0, 2});
  auto restored = profiles_from_csv(profiles_to_csv(profiles));
  REQUIRE(restored.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(restored[i].model_id == profiles[i].model_id);
    CHECK(restored[i].score_kind == profiles[i].score_kind);
    CHECK(restored[i].mu == profiles[i].mu);
    CHECK(restored[i].sigma == profiles[i].sigma);
    CHECK(restored[i].delta == profiles[i].delta);
    CHECK(restored[i].n == profiles[i].n);
  }
}

TEST_CASE("profile store size depends on the pool, not the data") {
  auto pool = constant_pool({{0.7, 0.3}, {0.25, 0.75}}, 2);
  auto small = build_profiles(pool, Matrix(100, 2, 0.0), 0.5, 9, ScoreKind::neg_entropy);
  auto large = build_profiles(pool, Matrix(2000, 2, 0.5), 0.5, 9, ScoreKind::neg_entropy);
  CHECK(profiles_to_csv(small).size() == profiles_to_csv(large).size());
}
