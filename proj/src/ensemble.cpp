#include "bpe/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bpe/data.hpp"

namespace bpe {

std::string score_kind_name(ScoreKind kind) {
  return kind == ScoreKind::neg_entropy ? "neg_entropy" : "top_margin";
}

std::optional<ScoreKind> score_kind_from_name(std::string_view name) {
  if (name == "neg_entropy") return ScoreKind::neg_entropy;
  if (name == "top_margin") return ScoreKind::top_margin;
  return std::nullopt;
}

double score(std::span<const double> p, ScoreKind kind) {
  if (kind == ScoreKind::neg_entropy) {
    double s = 0.0;
    for (double v : p) s += v * std::log(std::max(v, kProbFloor));
    return s;
  }
  double top1 = -1.0, top2 = -1.0;
  for (double v : p) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return top1 - top2;
}

std::pair<double, double> mean_and_sample_sd(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("need at least 2 values");
  bool constant = true;
  for (double v : values) constant = constant && v == values[0];
  if (constant) return {values[0], 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) {
    double d = v - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

BehavioralProfile build_profile(const learners::Classifier& model, std::string model_id,
                                const Matrix& x_train, double delta, std::uint64_t seed,
                                ScoreKind kind) {
  if (x_train.rows() < 2) throw std::invalid_argument("build_profile: need at least 2 samples");
  Matrix perturbed = data::perturb(x_train, delta, seed);
  Matrix probs = model.predict_proba(perturbed);
  std::vector<double> scores(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) scores[i] = score(probs.row(i), kind);
  auto [mu, sigma] = mean_and_sample_sd(scores);
  return BehavioralProfile{std::move(model_id), kind, mu, sigma, delta, probs.rows()};
}

std::vector<BehavioralProfile> build_profiles(const learners::TrainedPool& pool,
                                              const Matrix& x_train, double delta,
                                              std::uint64_t seed, ScoreKind kind) {
  if (x_train.rows() < 2) throw std::invalid_argument("build_profiles: need at least 2 samples");
  Matrix perturbed = data::perturb(x_train, delta, seed);
  std::vector<BehavioralProfile> profiles;
  profiles.reserve(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    Matrix probs = pool.learners[k]->predict_proba(perturbed);
    std::vector<double> scores(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) scores[i] = score(probs.row(i), kind);
    auto [mu, sigma] = mean_and_sample_sd(scores);
    profiles.push_back({pool.ids[k], kind, mu, sigma, delta, probs.rows()});
  }
  return profiles;
}

double z_score(double s_test, const BehavioralProfile& profile, double xi, double clip) {
  if (!(xi > 0.0)) throw std::invalid_argument("z_score: xi must be > 0");
  if (!(clip > 0.0)) throw std::invalid_argument("z_score: clip must be > 0");
  double z = (s_test - profile.mu) / (profile.sigma + xi);
  return std::clamp(z, -clip, clip);
}

WeightVector WeightVector::uniform(std::size_t k) {
  return WeightVector{std::vector<double>(k, 1.0 / static_cast<double>(k))};
}

WeightVector softmax_weights(std::span<const double> z, double lambda) {
  if (z.empty()) throw std::invalid_argument("softmax_weights: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : z) {
    if (!std::isfinite(v)) throw std::invalid_argument("softmax_weights: non-finite input");
    m = std::max(m, lambda * v);
  }
  WeightVector out;
  out.w.resize(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    out.w[k] = std::exp(lambda * z[k] - m);
    sum += out.w[k];
  }
  for (double& v : out.w) v /= sum;
  return out;
}

std::vector<double> borda_row(std::span<const double> p) {
  const std::size_t c = p.size();
  std::vector<std::size_t> order(c);
  for (std::size_t j = 0; j < c; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  // Position i (0 = best) is worth c-1-i points; ties share the mean.
  std::vector<double> out(c, 0.0);
  std::size_t i = 0;
  while (i < c) {
    std::size_t j = i;
    while (j + 1 < c && p[order[j + 1]] == p[order[i]]) ++j;
    double points = 0.0;
    for (std::size_t t = i; t <= j; ++t) points += static_cast<double>(c - 1 - t);
    points /= static_cast<double>(j - i + 1);
    for (std::size_t t = i; t <= j; ++t) out[order[t]] = points;
    i = j + 1;
  }
  return out;
}

void fuse_row_into(const std::vector<Matrix>& outputs, std::size_t row, std::span<const double> w,
                   std::span<double> out, FuseMode mode) {
  if (mode == FuseMode::probability) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < outputs.size(); ++k) acc += w[k] * outputs[k](row, c);
      out[c] = acc;
    }
    clamp_renormalize_row(out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    auto ranks = borda_row(outputs[k].row(row));
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[k] * ranks[c];
  }
}

Matrix fuse(const std::vector<Matrix>& outputs, const WeightVector& w, FuseMode mode) {
  if (outputs.empty()) throw std::invalid_argument("fuse: no model outputs");
  if (outputs.size() != w.w.size())
    throw std::invalid_argument("fuse: weight count does not match model count");
  const std::size_t rows = outputs[0].rows();
  const std::size_t cols = outputs[0].cols();
  for (const auto& m : outputs)
    if (m.rows() != rows || m.cols() != cols) throw std::invalid_argument("fuse: shape mismatch");
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) fuse_row_into(outputs, i, w.w, out.row(i), mode);
  return out;
}

Matrix bpe_predict_from_outputs(const std::vector<Matrix>& outputs,
                                const std::vector<BehavioralProfile>& profiles,
                                const BpeParams& params) {
  if (outputs.size() != profiles.size())
    throw std::invalid_argument("bpe_predict: one profile per model required");
  if (outputs.empty()) throw std::invalid_argument("bpe_predict: no model outputs");
  const std::size_t rows = outputs[0].rows();
  const std::size_t cols = outputs[0].cols();
  for (const auto& m : outputs)
    if (m.rows() != rows || m.cols() != cols)
      throw std::invalid_argument("bpe_predict: shape mismatch");

  Matrix out(rows, cols);
  std::vector<double> z(outputs.size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      double s = score(outputs[k].row(i), params.score_kind);
      z[k] = z_score(s, profiles[k], params.xi, params.clip);
    }
    WeightVector w = softmax_weights(z, params.lambda);
    fuse_row_into(outputs, i, w.w, out.row(i), params.fuse_mode);
  }
  return out;
}

Matrix bpe_predict(const learners::TrainedPool& pool,
                   const std::vector<BehavioralProfile>& profiles, const Matrix& x_test,
                   const BpeParams& params) {
  if (pool.size() != profiles.size())
    throw std::invalid_argument("bpe_predict: one profile per pool member required");
  for (std::size_t k = 0; k < pool.size(); ++k)
    if (pool.ids[k] != profiles[k].model_id)
      throw std::invalid_argument("bpe_predict: profile id mismatch at position " +
                                  std::to_string(k) + " (" + pool.ids[k] + " vs " +
                                  profiles[k].model_id + ")");
  std::vector<Matrix> outputs;
  outputs.reserve(pool.size());
  for (const auto& model : pool.learners) outputs.push_back(model->predict_proba(x_test));
  return bpe_predict_from_outputs(outputs, profiles, params);
}

namespace {

// Fixed-width fields keep the store size a function of the pool alone and
// 17 significant digits make the round-trip bit-exact.
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%+.16e", v);
  return buf;
}

}  // namespace

std::string profiles_to_csv(const std::vector<BehavioralProfile>& profiles) {
  std::ostringstream out;
  out << "model_id,score_kind,mu,sigma,delta,n\n";
  for (const auto& p : profiles) {
    char nbuf[16];
    std::snprintf(nbuf, sizeof nbuf, "%010llu", static_cast<unsigned long long>(p.n));
    out << p.model_id << ',' << score_kind_name(p.score_kind) << ',' << format_double(p.mu) << ','
        << format_double(p.sigma) << ',' << format_double(p.delta) << ',' << nbuf << '\n';
  }
  return out.str();
}

std::vector<BehavioralProfile> profiles_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("profile store: empty file");
  std::vector<BehavioralProfile> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    cells.push_back(cur);
    if (cells.size() != 6) throw std::invalid_argument("profile store: malformed record");
    auto kind = score_kind_from_name(cells[1]);
    if (!kind) throw std::invalid_argument("profile store: unknown score kind " + cells[1]);
    BehavioralProfile p;
    p.model_id = cells[0];
    p.score_kind = *kind;
    p.mu = std::strtod(cells[2].c_str(), nullptr);
    p.sigma = std::strtod(cells[3].c_str(), nullptr);
    p.delta = std::strtod(cells[4].c_str(), nullptr);
    p.n = std::strtoull(cells[5].c_str(), nullptr, 10);
    out.push_back(std::move(p));
  }
  return out;
}

void save_profiles(const std::string& path, const std::vector<BehavioralProfile>& profiles) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write profile store: " + path);
  out << profiles_to_csv(profiles);
}

std::vector<BehavioralProfile> load_profiles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open profile store: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return profiles_from_csv(buf.str());
}

}  // namespace bpe
