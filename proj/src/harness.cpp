#include "bpe/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "bpe/rng.hpp"

namespace bpe::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  std::erase_if(out, [](const std::string& v) { return v.empty(); });
  return out;
}

double parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument(key + ": not a number: " + value);
  }
}

long parse_integer(const std::string& key, const std::string& value) {
  double v = parse_number(key, value);
  if (v != std::floor(v)) throw std::invalid_argument(key + ": not an integer: " + value);
  return static_cast<long>(v);
}

std::string path_stem(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::single_best: return "single_best";
    case Method::simple_average: return "simple_average";
    case Method::median_average: return "median_average";
    case Method::weighted_average: return "weighted_average";
    case Method::lca: return "lca";
    case Method::mcb: return "mcb";
    case Method::knora_union: return "knora_union";
    case Method::knora_eliminate: return "knora_eliminate";
    case Method::rrc: return "rrc";
    case Method::des_knn_df: return "des_knn_df";
    case Method::des_knn_q: return "des_knn_q";
    case Method::des_knn_re: return "des_knn_re";
    case Method::bpe: return "bpe";
    case Method::bpe_entropy: return "bpe_entropy";
    case Method::bpe_top_margin: return "bpe_top_margin";
    case Method::bpe_entropy_rank: return "bpe_entropy_rank";
  }
  return "unknown";
}

std::optional<Method> method_from_name(std::string_view name) {
  static const Method all[] = {
      Method::single_best,  Method::simple_average, Method::median_average,
      Method::weighted_average, Method::lca,        Method::mcb,
      Method::knora_union,  Method::knora_eliminate, Method::rrc,
      Method::des_knn_df,   Method::des_knn_q,      Method::des_knn_re,
      Method::bpe,          Method::bpe_entropy,    Method::bpe_top_margin,
      Method::bpe_entropy_rank};
  for (Method m : all)
    if (method_name(m) == name) return m;
  return std::nullopt;
}

bool method_needs_reference(Method m) {
  switch (m) {
    case Method::weighted_average:
    case Method::lca:
    case Method::mcb:
    case Method::knora_union:
    case Method::knora_eliminate:
    case Method::rrc:
    case Method::des_knn_df:
    case Method::des_knn_q:
    case Method::des_knn_re: return true;
    default: return false;
  }
}

bool method_needs_profiles(Method m) {
  switch (m) {
    case Method::bpe:
    case Method::bpe_entropy:
    case Method::bpe_top_margin:
    case Method::bpe_entropy_rank: return true;
    default: return false;
  }
}

namespace {

ScoreKind method_profile_kind(Method m, const ExperimentConfig& cfg) {
  switch (m) {
    case Method::bpe: return cfg.score_kind;
    case Method::bpe_entropy:
    case Method::bpe_entropy_rank: return ScoreKind::neg_entropy;
    case Method::bpe_top_margin: return ScoreKind::top_margin;
    default: return cfg.score_kind;
  }
}

}  // namespace

PoolSpec default_pool() {
  PoolSpec spec;
  for (auto kind : {learners::LearnerKind::decision_tree, learners::LearnerKind::gaussian_nb,
                    learners::LearnerKind::logistic_regression, learners::LearnerKind::knn}) {
    learners::LearnerSpec ls;
    ls.kind = kind;
    spec.members.push_back(ls);
  }
  return spec;
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw std::invalid_argument("dataset: at least one dataset is required");
  if (methods.empty()) throw std::invalid_argument("methods: at least one method is required");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha: must be in [0, 1)");
  if (folds < 2) throw std::invalid_argument("folds: must be >= 2");
  if (seeds < 1) throw std::invalid_argument("seeds: must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction: must be in (0, 1)");
  if (lambda < 0.0) throw std::invalid_argument("lambda: must be >= 0");
  if (delta < 0.0) throw std::invalid_argument("delta: must be >= 0");
  if (!(xi > 0.0)) throw std::invalid_argument("xi: must be > 0");
  if (!(clip > 0.0)) throw std::invalid_argument("clip: must be > 0");
  if (roc_k < 1) throw std::invalid_argument("roc_k: must be >= 1");
  if (pool.members.empty()) throw std::invalid_argument("pool: at least one learner is required");
  if (pool.bagged && pool.bag_size < 1) throw std::invalid_argument("pool: bag size must be >= 1");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  cfg.methods.clear();
  bool pool_set = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw std::invalid_argument(key + ": empty value");

    if (key == "dataset") {
      auto colon = value.rfind(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("dataset: expected <path>:<label_column>");
      DatasetRef ref;
      ref.path = trim(value.substr(0, colon));
      ref.label_column = trim(value.substr(colon + 1));
      if (ref.path.empty() || ref.label_column.empty())
        throw std::invalid_argument("dataset: expected <path>:<label_column>");
      ref.id = path_stem(ref.path);
      cfg.datasets.push_back(std::move(ref));
    } else if (key == "methods") {
      for (const auto& name : split_list(value)) {
        auto m = method_from_name(name);
        if (!m) throw std::invalid_argument("methods: unknown method: " + name);
        cfg.methods.push_back(*m);
      }
    } else if (key == "pool") {
      PoolSpec spec;
      if (value.starts_with("bag(")) {
        if (!value.ends_with(")")) throw std::invalid_argument("pool: expected bag(<kind>,<M>)");
        auto inner = split_list(value.substr(4, value.size() - 5));
        if (inner.size() != 2) throw std::invalid_argument("pool: expected bag(<kind>,<M>)");
        auto kind = learners::kind_from_name(inner[0]);
        if (!kind) throw std::invalid_argument("pool: unknown learner: " + inner[0]);
        learners::LearnerSpec ls;
        ls.kind = *kind;
        spec.members.push_back(ls);
        spec.bagged = true;
        spec.bag_size = static_cast<int>(parse_integer("pool", inner[1]));
      } else {
        for (const auto& name : split_list(value)) {
          auto kind = learners::kind_from_name(name);
          if (!kind) throw std::invalid_argument("pool: unknown learner: " + name);
          learners::LearnerSpec ls;
          ls.kind = *kind;
          spec.members.push_back(ls);
        }
      }
      cfg.pool = std::move(spec);
      pool_set = true;
    } else if (key == "alpha") {
      cfg.alpha = parse_number(key, value);
    } else if (key == "folds") {
      cfg.folds = static_cast<int>(parse_integer(key, value));
    } else if (key == "seeds") {
      cfg.seeds = static_cast<int>(parse_integer(key, value));
    } else if (key == "master_seed") {
      cfg.master_seed = static_cast<std::uint64_t>(parse_integer(key, value));
    } else if (key == "lambda") {
      cfg.lambda = parse_number(key, value);
    } else if (key == "delta") {
      cfg.delta = parse_number(key, value);
    } else if (key == "xi") {
      cfg.xi = parse_number(key, value);
    } else if (key == "clip") {
      cfg.clip = parse_number(key, value);
    } else if (key == "score") {
      auto kind = score_kind_from_name(value);
      if (!kind) throw std::invalid_argument("score: unknown score kind: " + value);
      cfg.score_kind = *kind;
    } else if (key == "roc_k") {
      cfg.roc_k = static_cast<int>(parse_integer(key, value));
    } else if (key == "test_fraction") {
      cfg.test_fraction = parse_number(key, value);
    } else if (key == "reference_mode") {
      if (value == "oof")
        cfg.reference_mode = ReferenceMode::oof;
      else if (value == "fixed_split")
        cfg.reference_mode = ReferenceMode::fixed_split;
      else
        throw std::invalid_argument("reference_mode: expected oof or fixed_split");
    } else if (key == "record_timings") {
      if (value == "true")
        cfg.record_timings = true;
      else if (value == "false")
        cfg.record_timings = false;
      else
        throw std::invalid_argument("record_timings: expected true or false");
    } else if (key == "sweep_lambda" || key == "sweep_delta" || key == "sweep_alpha") {
      std::vector<double> vals;
      for (const auto& item : split_list(value)) vals.push_back(parse_number(key, item));
      if (key == "sweep_lambda")
        cfg.sweep_lambda = std::move(vals);
      else if (key == "sweep_delta")
        cfg.sweep_delta = std::move(vals);
      else
        cfg.sweep_alpha = std::move(vals);
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  (void)pool_set;
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::vector<std::size_t> screen_retained(std::span<const double> accs, double alpha) {
  if (accs.empty()) throw std::invalid_argument("screen_retained: no accuracies");
  double best = *std::max_element(accs.begin(), accs.end());
  double threshold = best * (1.0 - alpha);
  std::vector<std::size_t> retained;
  for (std::size_t i = 0; i < accs.size(); ++i)
    if (accs[i] >= threshold) retained.push_back(i);
  return retained;
}

std::vector<PoolMember> expand_pool(const PoolSpec& spec) {
  std::vector<PoolMember> members;
  if (spec.bagged) {
    for (int i = 0; i < spec.bag_size; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "bag-%03d", i);
      members.push_back({spec.members[0], buf, true, i});
    }
    return members;
  }
  std::map<std::string, int> counts;
  for (const auto& ls : spec.members) ++counts[learners::kind_name(ls.kind)];
  std::map<std::string, int> seen;
  int index = 0;
  for (const auto& ls : spec.members) {
    std::string base = learners::kind_name(ls.kind);
    std::string id = base;
    if (counts[base] > 1) id += "-" + std::to_string(seen[base]++);
    members.push_back({ls, id, false, index++});
  }
  return members;
}

learners::ClassifierPtr fit_member(const PoolMember& member, const Matrix& x,
                                   const std::vector<int>& y, int n_classes,
                                   std::uint64_t phase_seed) {
  if (member.bootstrap)
    return learners::bag_member(member.spec, x, y, n_classes, member.member_index, phase_seed);
  return learners::fit(member.spec, x, y, n_classes,
                       rng::derive_key(phase_seed, "fit",
                                       {static_cast<std::uint64_t>(member.member_index)}));
}

learners::TrainedPool screen(const PoolSpec& spec, const Matrix& x, const std::vector<int>& y,
                             int n_classes, double alpha, std::uint64_t seed,
                             std::vector<PoolMember>* retained_out) {
  auto members = expand_pool(spec);
  auto [fit_idx, score_idx] = data::stratified_indices(y, 0.2, rng::derive_key(seed, "screen-split"));

  Matrix x_fit(fit_idx.size(), x.cols());
  std::vector<int> y_fit(fit_idx.size());
  for (std::size_t i = 0; i < fit_idx.size(); ++i) {
    auto src = x.row(fit_idx[i]);
    std::copy(src.begin(), src.end(), x_fit.row(i).begin());
    y_fit[i] = y[fit_idx[i]];
  }
  Matrix x_score(score_idx.size(), x.cols());
  std::vector<int> y_score(score_idx.size());
  for (std::size_t i = 0; i < score_idx.size(); ++i) {
    auto src = x.row(score_idx[i]);
    std::copy(src.begin(), src.end(), x_score.row(i).begin());
    y_score[i] = y[score_idx[i]];
  }

  std::vector<double> accs(members.size());
  std::uint64_t screen_seed = rng::derive_key(seed, "screen-fit");
  for (std::size_t m = 0; m < members.size(); ++m) {
    auto model = fit_member(members[m], x_fit, y_fit, n_classes, screen_seed);
    accs[m] = stats::accuracy(model->predict_proba(x_score), y_score);
  }

  auto retained = screen_retained(accs, alpha);

  learners::TrainedPool pool;
  pool.screening_acc = std::vector<double>{};
  std::uint64_t full_seed = rng::derive_key(seed, "full-fit");
  for (std::size_t m : retained) {
    pool.learners.push_back(fit_member(members[m], x, y, n_classes, full_seed));
    pool.ids.push_back(members[m].id);
    pool.screening_acc->push_back(accs[m]);
    if (retained_out) retained_out->push_back(members[m]);
  }
  return pool;
}

std::vector<int> stratified_fold_assignment(const std::vector<int>& y, int folds,
                                            std::uint64_t seed) {
  const auto n = y.size();
  if (folds < 2) throw std::invalid_argument("folds: must be >= 2");
  if (static_cast<std::size_t>(folds) > n)
    throw std::invalid_argument("folds: fold count exceeds sample count");

  std::vector<int> fold_of(n, 0);
  if (static_cast<std::size_t>(folds) == n) {
    // leave-one-out
    for (std::size_t i = 0; i < n; ++i) fold_of[i] = static_cast<int>(i);
    return fold_of;
  }

  int c = 0;
  for (int v : y) c = std::max(c, v + 1);
  std::vector<std::vector<std::size_t>> per_class(c);
  for (std::size_t i = 0; i < n; ++i) per_class[y[i]].push_back(i);
  for (int k = 0; k < c; ++k)
    if (!per_class[k].empty() && per_class[k].size() < static_cast<std::size_t>(folds))
      throw std::invalid_argument("folds: class " + std::to_string(k) +
                                  " smaller than fold count");

  for (int k = 0; k < c; ++k) {
    auto idx = per_class[k];
    rng::Stream stream(seed, "fold-assignment", {static_cast<std::uint64_t>(k)});
    stream.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i)
      fold_of[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

OofReference build_oof_reference(const std::vector<PoolMember>& members, const Matrix& x,
                                 const std::vector<int>& y, int n_classes, int folds,
                                 std::uint64_t seed) {
  auto fold_of = stratified_fold_assignment(y, folds, rng::derive_key(seed, "oof-folds"));
  int actual_folds = *std::max_element(fold_of.begin(), fold_of.end()) + 1;

  std::vector<Matrix> predictions(members.size(),
                                  Matrix(x.rows(), static_cast<std::size_t>(n_classes)));
  for (int f = 0; f < actual_folds; ++f) {
    std::vector<std::size_t> train_idx, held_idx;
    for (std::size_t i = 0; i < x.rows(); ++i)
      (fold_of[i] == f ? held_idx : train_idx).push_back(i);
    if (held_idx.empty()) continue;

    Matrix x_train(train_idx.size(), x.cols());
    std::vector<int> y_train(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      auto src = x.row(train_idx[i]);
      std::copy(src.begin(), src.end(), x_train.row(i).begin());
      y_train[i] = y[train_idx[i]];
    }
    Matrix x_held(held_idx.size(), x.cols());
    for (std::size_t i = 0; i < held_idx.size(); ++i) {
      auto src = x.row(held_idx[i]);
      std::copy(src.begin(), src.end(), x_held.row(i).begin());
    }

    std::uint64_t fold_seed = rng::derive_key(seed, "oof-fit", {static_cast<std::uint64_t>(f)});
    for (std::size_t m = 0; m < members.size(); ++m) {
      auto model = fit_member(members[m], x_train, y_train, n_classes, fold_seed);
      Matrix out = model->predict_proba(x_held);
      for (std::size_t i = 0; i < held_idx.size(); ++i) {
        auto src = out.row(i);
        std::copy(src.begin(), src.end(), predictions[m].row(held_idx[i]).begin());
      }
    }
  }

  OofReference result;
  result.ref = baselines::make_reference(x, y, std::move(predictions));
  result.fold_of = std::move(fold_of);
  return result;
}

baselines::ReferenceSet build_fixed_split_reference(const std::vector<PoolMember>& members,
                                                    const Matrix& x, const std::vector<int>& y,
                                                    int n_classes, std::uint64_t seed) {
  auto [fit_idx, ref_idx] = data::stratified_indices(y, 0.25, rng::derive_key(seed, "ref-split"));
  Matrix x_fit(fit_idx.size(), x.cols());
  std::vector<int> y_fit(fit_idx.size());
  for (std::size_t i = 0; i < fit_idx.size(); ++i) {
    auto src = x.row(fit_idx[i]);
    std::copy(src.begin(), src.end(), x_fit.row(i).begin());
    y_fit[i] = y[fit_idx[i]];
  }
  Matrix x_ref(ref_idx.size(), x.cols());
  std::vector<int> y_ref(ref_idx.size());
  for (std::size_t i = 0; i < ref_idx.size(); ++i) {
    auto src = x.row(ref_idx[i]);
    std::copy(src.begin(), src.end(), x_ref.row(i).begin());
    y_ref[i] = y[ref_idx[i]];
  }

  std::uint64_t fit_seed = rng::derive_key(seed, "ref-fit");
  std::vector<Matrix> predictions;
  predictions.reserve(members.size());
  for (const auto& member : members) {
    auto model = fit_member(member, x_fit, y_fit, n_classes, fit_seed);
    predictions.push_back(model->predict_proba(x_ref));
  }
  return baselines::make_reference(std::move(x_ref), std::move(y_ref), std::move(predictions));
}

namespace {

Matrix predict_roc_method(Method method, const ExperimentConfig& cfg,
                          const baselines::ReferenceSet& ref,
                          const std::vector<Matrix>& outputs, const Matrix& x_test) {
  const std::size_t n = x_test.rows();
  const std::size_t c = outputs[0].cols();
  const std::size_t k_models = outputs.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.roc_k), ref.size());

  Matrix out(n, c);
  baselines::Rows at_x(k_models, std::vector<double>(c));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < k_models; ++m) {
      auto src = outputs[m].row(i);
      std::copy(src.begin(), src.end(), at_x[m].begin());
    }
    baselines::RoC roc = baselines::knn_query(ref.x, x_test.row(i), k);
    std::vector<double> fused;
    switch (method) {
      case Method::lca: fused = baselines::lca_select(ref, roc, at_x); break;
      case Method::mcb: fused = baselines::mcb_select(ref, roc, at_x); break;
      case Method::knora_union: fused = baselines::knora_union(ref, roc, at_x); break;
      case Method::knora_eliminate: fused = baselines::knora_eliminate(ref, roc, at_x); break;
      case Method::rrc: fused = baselines::rrc_fuse(ref, roc, at_x); break;
      case Method::des_knn_df:
        fused = baselines::des_knn(ref, roc, at_x, 0.5, 0.3,
                                   baselines::DiversityMeasure::double_fault);
        break;
      case Method::des_knn_q:
        fused = baselines::des_knn(ref, roc, at_x, 0.5, 0.3,
                                   baselines::DiversityMeasure::q_statistic);
        break;
      case Method::des_knn_re:
        fused = baselines::des_knn(ref, roc, at_x, 0.5, 0.3,
                                   baselines::DiversityMeasure::ratio_of_errors);
        break;
      default: throw std::logic_error("not a region-of-competence method");
    }
    std::copy(fused.begin(), fused.end(), out.row(i).begin());
  }
  return out;
}

struct JobContext {
  const ExperimentConfig& cfg;
  const data::Dataset& dataset;
  const std::string& id;
  std::uint64_t seed_value;
};

std::vector<ResultRecord> run_job(const JobContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  std::uint64_t key = rng::derive_key(ctx.seed_value, ctx.id);

  data::Dataset working =
      data::downsample(ctx.dataset, kDownsampleMax, rng::derive_key(key, "downsample"));
  auto plan = data::stratified_split(working, cfg.test_fraction, rng::derive_key(key, "split"));
  data::Dataset train = data::take_rows(working, plan.train_idx);
  data::Dataset test = data::take_rows(working, plan.test_idx);

  auto t0 = Clock::now();
  std::vector<PoolMember> retained;
  learners::TrainedPool pool = screen(cfg.pool, train.x, train.y, working.c, cfg.alpha,
                                      rng::derive_key(key, "screen"), &retained);
  double screen_seconds = seconds_since(t0);

  t0 = Clock::now();
  std::vector<Matrix> outputs;
  outputs.reserve(pool.size());
  for (const auto& model : pool.learners) outputs.push_back(model->predict_proba(test.x));
  double base_predict_seconds = seconds_since(t0);

  bool want_ref = std::any_of(cfg.methods.begin(), cfg.methods.end(), method_needs_reference);
  std::optional<baselines::ReferenceSet> ref;
  double ref_seconds = 0.0;
  if (want_ref) {
    t0 = Clock::now();
    if (cfg.reference_mode == ReferenceMode::oof)
      ref = std::move(build_oof_reference(retained, train.x, train.y, working.c, cfg.folds,
                                          rng::derive_key(key, "reference"))
                          .ref);
    else
      ref = build_fixed_split_reference(retained, train.x, train.y, working.c,
                                        rng::derive_key(key, "reference"));
    ref_seconds = seconds_since(t0);
  }

  std::map<ScoreKind, std::vector<BehavioralProfile>> profiles;
  std::map<ScoreKind, double> profile_seconds;
  for (Method m : cfg.methods) {
    if (!method_needs_profiles(m)) continue;
    ScoreKind kind = method_profile_kind(m, cfg);
    if (profiles.count(kind)) continue;
    t0 = Clock::now();
    profiles[kind] =
        build_profiles(pool, train.x, cfg.delta, rng::derive_key(key, "profiles"), kind);
    profile_seconds[kind] = seconds_since(t0);
  }

  std::vector<ResultRecord> records;
  for (Method m : cfg.methods) {
    t0 = Clock::now();
    Matrix pred;
    switch (m) {
      case Method::single_best: pred = outputs[baselines::single_best(pool)]; break;
      case Method::simple_average: pred = baselines::simple_average(outputs); break;
      case Method::median_average: pred = baselines::median_average(outputs); break;
      case Method::weighted_average: {
        std::vector<double> ref_acc(ref->n_models(), 0.0);
        for (std::size_t k = 0; k < ref->n_models(); ++k) {
          for (char v : ref->correct[k]) ref_acc[k] += v;
          ref_acc[k] /= static_cast<double>(ref->size());
        }
        pred = baselines::weighted_average(outputs, ref_acc);
        break;
      }
      case Method::lca:
      case Method::mcb:
      case Method::knora_union:
      case Method::knora_eliminate:
      case Method::rrc:
      case Method::des_knn_df:
      case Method::des_knn_q:
      case Method::des_knn_re:
        pred = predict_roc_method(m, cfg, *ref, outputs, test.x);
        break;
      case Method::bpe:
      case Method::bpe_entropy:
      case Method::bpe_top_margin:
      case Method::bpe_entropy_rank: {
        BpeParams params;
        params.lambda = cfg.lambda;
        params.delta = cfg.delta;
        params.xi = cfg.xi;
        params.clip = cfg.clip;
        params.score_kind = method_profile_kind(m, cfg);
        params.fuse_mode =
            m == Method::bpe_entropy_rank ? FuseMode::borda_rank : FuseMode::probability;
        pred = bpe_predict_from_outputs(outputs, profiles[params.score_kind], params);
        break;
      }
    }
    double combine_seconds = seconds_since(t0);

    ResultRecord rec;
    rec.dataset = ctx.id;
    rec.method = method_name(m);
    rec.seed = ctx.seed_value;
    rec.accuracy = stats::accuracy(pred, test.y);
    rec.pool_size = static_cast<int>(pool.size());
    if (cfg.record_timings) {
      rec.fit_seconds = screen_seconds + (method_needs_reference(m) ? ref_seconds : 0.0) +
                        (method_needs_profiles(m) ? profile_seconds[method_profile_kind(m, cfg)]
                                                  : 0.0);
      rec.predict_seconds = base_predict_seconds + combine_seconds;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<ResultRecord> run_experiment_on(const ExperimentConfig& config,
                                            const std::vector<data::Dataset>& datasets,
                                            const std::vector<std::string>& ids, int workers) {
  config.validate();
  if (datasets.size() != ids.size())
    throw std::invalid_argument("run_experiment_on: dataset/id count mismatch");
  if (workers < 1) throw std::invalid_argument("workers: must be >= 1");

  struct Job {
    std::size_t dataset_index;
    std::uint64_t seed_value;
  };
  std::vector<Job> jobs;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    for (int s = 0; s < config.seeds; ++s)
      jobs.push_back({d, config.master_seed + static_cast<std::uint64_t>(s)});

  std::vector<std::vector<ResultRecord>> slots(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job& job = jobs[j];
      try {
        JobContext ctx{config, datasets[job.dataset_index], ids[job.dataset_index],
                       job.seed_value};
        slots[j] = run_job(ctx);
      } catch (const std::exception& e) {
        errors[j] = std::make_exception_ptr(
            JobError(ids[job.dataset_index], job.seed_value, e.what()));
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  // the lowest failing job wins so the reported error is schedule-independent
  for (std::size_t j = 0; j < jobs.size(); ++j)
    if (errors[j]) std::rethrow_exception(errors[j]);

  std::vector<ResultRecord> records;
  for (auto& slot : slots)
    for (auto& rec : slot) records.push_back(std::move(rec));
  std::sort(records.begin(), records.end(), [](const ResultRecord& a, const ResultRecord& b) {
    return std::tie(a.dataset, a.method, a.seed) < std::tie(b.dataset, b.method, b.seed);
  });
  return records;
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, int workers) {
  config.validate();
  std::vector<data::Dataset> datasets;
  std::vector<std::string> ids;
  for (const auto& ref : config.datasets) {
    data::RawTable table = data::load_csv(ref.path, ref.label_column);
    datasets.push_back(data::standardize(data::encode(table)));
    ids.push_back(ref.id.empty() ? ref.path : ref.id);
  }
  return run_experiment_on(config, datasets, ids, workers);
}

std::optional<SweepAxis> sweep_axis_from_name(std::string_view name) {
  if (name == "lambda") return SweepAxis::lambda;
  if (name == "delta") return SweepAxis::delta;
  if (name == "alpha") return SweepAxis::alpha;
  return std::nullopt;
}

SweepResult sweep(const ExperimentConfig& config, SweepAxis axis, int workers) {
  auto values = axis == SweepAxis::lambda  ? config.sweep_lambda
                : axis == SweepAxis::delta ? config.sweep_delta
                                           : config.sweep_alpha;
  int configured = (config.sweep_lambda.empty() ? 0 : 1) + (config.sweep_delta.empty() ? 0 : 1) +
                   (config.sweep_alpha.empty() ? 0 : 1);
  if (configured > 1)
    throw std::invalid_argument("sweep: exactly one axis may be varied at a time");
  if (values.empty()) throw std::invalid_argument("sweep: no values configured for the axis");

  SweepResult result;
  result.axis = axis;
  for (double v : values) {
    ExperimentConfig run_cfg = config;
    run_cfg.sweep_lambda.clear();
    run_cfg.sweep_delta.clear();
    run_cfg.sweep_alpha.clear();
    if (axis == SweepAxis::lambda)
      run_cfg.lambda = v;
    else if (axis == SweepAxis::delta)
      run_cfg.delta = v;
    else
      run_cfg.alpha = v;
    result.runs.push_back({v, run_experiment(run_cfg, workers)});
  }
  return result;
}

std::string results_to_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream out;
  out << "dataset,method,seed,accuracy,fit_seconds,predict_seconds,pool_size\n";
  char buf[160];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.6f,%.6f,%.6f,%d\n", r.dataset.c_str(),
                  r.method.c_str(), static_cast<unsigned long long>(r.seed), r.accuracy,
                  r.fit_seconds, r.predict_seconds, r.pool_size);
    out << buf;
  }
  return out.str();
}

void write_results_csv(const std::string& path, const std::vector<ResultRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write results file: " + path);
  out << results_to_csv(records);
}

std::vector<ResultRecord> read_results_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open results file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("results file is empty: " + path);
  std::vector<ResultRecord> records;
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
    if (cells.size() != 7) throw std::invalid_argument("malformed results row: " + line);
    ResultRecord r;
    r.dataset = cells[0];
    r.method = cells[1];
    r.seed = std::strtoull(cells[2].c_str(), nullptr, 10);
    r.accuracy = std::strtod(cells[3].c_str(), nullptr);
    r.fit_seconds = std::strtod(cells[4].c_str(), nullptr);
    r.predict_seconds = std::strtod(cells[5].c_str(), nullptr);
    r.pool_size = static_cast<int>(std::strtol(cells[6].c_str(), nullptr, 10));
    records.push_back(std::move(r));
  }
  return records;
}

stats::ResultsMatrix results_matrix(const std::vector<ResultRecord>& records) {
  stats::ResultsMatrix m;
  for (const auto& r : records) {
    if (std::find(m.datasets.begin(), m.datasets.end(), r.dataset) == m.datasets.end())
      m.datasets.push_back(r.dataset);
    if (std::find(m.methods.begin(), m.methods.end(), r.method) == m.methods.end())
      m.methods.push_back(r.method);
  }
  std::sort(m.datasets.begin(), m.datasets.end());
  std::sort(m.methods.begin(), m.methods.end());

  Matrix sums(m.datasets.size(), m.methods.size());
  Matrix counts(m.datasets.size(), m.methods.size());
  for (const auto& r : records) {
    auto d = static_cast<std::size_t>(
        std::find(m.datasets.begin(), m.datasets.end(), r.dataset) - m.datasets.begin());
    auto j = static_cast<std::size_t>(
        std::find(m.methods.begin(), m.methods.end(), r.method) - m.methods.begin());
    sums(d, j) += r.accuracy;
    counts(d, j) += 1.0;
  }
  m.acc = Matrix(m.datasets.size(), m.methods.size());
  for (std::size_t d = 0; d < m.datasets.size(); ++d)
    for (std::size_t j = 0; j < m.methods.size(); ++j) {
      if (counts(d, j) == 0.0)
        throw std::invalid_argument("results: missing entry for " + m.datasets[d] + "/" +
                                    m.methods[j]);
      m.acc(d, j) = sums(d, j) / counts(d, j);
    }
  return m;
}

std::string format_report(const std::vector<ResultRecord>& records, const std::string& primary) {
  stats::ResultsMatrix m = results_matrix(records);
  std::ostringstream out;
  char buf[64];

  out << "== Mean accuracy ==\n";
  out << "dataset";
  for (const auto& name : m.methods) out << ',' << name;
  out << '\n';
  for (std::size_t d = 0; d < m.datasets.size(); ++d) {
    out << m.datasets[d];
    for (std::size_t j = 0; j < m.methods.size(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.4f", m.acc(d, j));
      out << buf;
    }
    out << '\n';
  }

  std::string pivot = primary;
  std::vector<double> ranks;
  if (m.methods.size() >= 2) {
    ranks = stats::friedman_ranks(m);
    out << "\n== Average ranks (1 = best) ==\n";
    std::vector<std::size_t> order(m.methods.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ranks[a] < ranks[b]; });
    for (std::size_t j : order) {
      std::snprintf(buf, sizeof buf, "%.3f", ranks[j]);
      out << m.methods[j] << ": " << buf << '\n';
    }
    if (pivot.empty()) pivot = m.methods[order[0]];
  }

  if (!pivot.empty() && m.methods.size() >= 2) {
    auto it = std::find(m.methods.begin(), m.methods.end(), pivot);
    if (it == m.methods.end()) throw std::invalid_argument("unknown method: " + pivot);
    auto p = static_cast<std::size_t>(it - m.methods.begin());

    std::vector<double> a(m.datasets.size());
    for (std::size_t d = 0; d < m.datasets.size(); ++d) a[d] = m.acc(d, p);

    out << "\n== Signed-rank tests: " << pivot << " vs others ==\n";
    out << "comparison,R+,R-,hypothesis,p\n";
    for (std::size_t j = 0; j < m.methods.size(); ++j) {
      if (j == p) continue;
      std::vector<double> b(m.datasets.size());
      for (std::size_t d = 0; d < m.datasets.size(); ++d) b[d] = m.acc(d, j);
      out << pivot << " vs " << m.methods[j] << ',';
      try {
        auto w = stats::wilcoxon_signed_rank(a, b);
        std::snprintf(buf, sizeof buf, "%.1f,%.1f,%s,%.4f", w.r_plus, w.r_minus,
                      w.rejected_at_005 ? "rejected at 5%" : "not rejected", w.p_value);
        out << buf << '\n';
      } catch (const std::exception&) {
        out << "0.0,0.0,all ties,1.0000\n";
      }
    }

    out << "\n== Win-tie-loss: " << pivot << " vs others ==\n";
    out << "comparison,wins,ties,losses,score,nc(0.10),nc(0.05),nc(0.01)\n";
    for (std::size_t j = 0; j < m.methods.size(); ++j) {
      if (j == p) continue;
      std::vector<double> b(m.datasets.size());
      for (std::size_t d = 0; d < m.datasets.size(); ++d) b[d] = m.acc(d, j);
      auto wtl = stats::win_tie_loss(a, b);
      std::snprintf(buf, sizeof buf, ",%d,%d,%d,%.1f,%.2f,%.2f,%.2f", wtl.wins, wtl.ties,
                    wtl.losses, wtl.score, wtl.critical[0], wtl.critical[1], wtl.critical[2]);
      out << pivot << " vs " << m.methods[j] << buf << '\n';
    }
  }
  return out.str();
}

}  // namespace bpe::harness
