#include "bpe/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "bpe/rng.hpp"

namespace bpe::data {

namespace {

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return false;
  if (!std::isfinite(v)) return false;  // nan/inf tokens are not numeric data
  out = v;
  return true;
}

std::vector<std::string> split_line(const std::string& line) {
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
  return cells;
}

}  // namespace

std::size_t RawTable::label_index() const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == label_column) return i;
  throw std::invalid_argument("label column not found: " + label_column);
}

std::size_t EncodingSpec::encoded_width() const {
  std::size_t w = 0;
  for (const auto& f : features) w += f.nominal ? f.categories.size() : 1;
  return w;
}

int EncodingSpec::label_index(const std::string& value) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == value) return static_cast<int>(i);
  return -1;
}

RawTable parse_csv_text(const std::string& text, const std::string& label_column) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty table: no header row");
  std::vector<std::string> header = split_line(line);

  RawTable table;
  table.label_column = label_column;
  table.columns.reserve(header.size());
  for (auto& name : header) table.columns.push_back({name, ColumnKind::numeric});

  bool label_found = false;
  for (const auto& col : table.columns) label_found |= (col.name == label_column);
  if (!label_found) throw std::invalid_argument("missing label column: " + label_column);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("ragged row at line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(cells.size()));
    for (const auto& cell : cells)
      if (cell.empty())
        throw std::invalid_argument("missing value at line " + std::to_string(line_no));
    table.rows.push_back(std::move(cells));
  }
  if (table.rows.empty()) throw std::invalid_argument("empty table: no data rows");

  // A column is numeric iff every value parses as a finite real.
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    for (const auto& row : table.rows) {
      double v;
      if (!parse_real(row[j], v)) {
        table.columns[j].kind = ColumnKind::nominal;
        break;
      }
    }
  }

  std::size_t li = table.label_index();
  std::vector<std::string> distinct;
  for (const auto& row : table.rows)
    if (std::find(distinct.begin(), distinct.end(), row[li]) == distinct.end())
      distinct.push_back(row[li]);
  if (distinct.size() < 2) throw std::invalid_argument("label column has fewer than 2 classes");
  return table;
}

RawTable load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_text(buf.str(), label_column);
}

Matrix encode_features(const EncodingSpec& spec, const std::vector<std::vector<std::string>>& rows,
                       std::size_t label_index) {
  Matrix x(rows.size(), spec.encoded_width());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t out = 0;
    std::size_t src = 0;
    for (const auto& f : spec.features) {
      if (src == label_index) ++src;
      const std::string& cell = rows[i][src];
      if (f.nominal) {
        for (std::size_t c = 0; c < f.categories.size(); ++c)
          x(i, out + c) = (f.categories[c] == cell) ? 1.0 : 0.0;  // unseen -> all zeros
        out += f.categories.size();
      } else {
        double v;
        if (!parse_real(cell, v))
          throw std::invalid_argument("non-numeric value in numeric column " + f.name);
        x(i, out++) = v;
      }
      ++src;
    }
  }
  return x;
}

Dataset encode(const RawTable& table) {
  std::size_t li = table.label_index();

  Dataset ds;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j == li) continue;
    EncodingSpec::Feature f;
    f.name = table.columns[j].name;
    f.nominal = table.columns[j].kind == ColumnKind::nominal;
    if (f.nominal)
      for (const auto& row : table.rows)
        if (std::find(f.categories.begin(), f.categories.end(), row[j]) == f.categories.end())
          f.categories.push_back(row[j]);
    ds.encoder.features.push_back(std::move(f));
  }

  for (const auto& row : table.rows) {
    int idx = ds.encoder.label_index(row[li]);
    if (idx < 0) {
      idx = static_cast<int>(ds.encoder.labels.size());
      ds.encoder.labels.push_back(row[li]);
    }
    ds.y.push_back(idx);
  }
  ds.c = static_cast<int>(ds.encoder.labels.size());

  ds.x = encode_features(ds.encoder, table.rows, li);

  const std::size_t n = ds.x.rows();
  const std::size_t d = ds.x.cols();
  ds.scaler.mean.assign(d, 0.0);
  ds.scaler.sd.assign(d, 1.0);
  ds.scaler.numeric.assign(d, 0);
  std::size_t out = 0;
  for (const auto& f : ds.encoder.features) {
    if (f.nominal) {
      out += f.categories.size();
      continue;
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += ds.x(i, out);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double dlt = ds.x(i, out) - mean;
      ss += dlt * dlt;
    }
    double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    ds.scaler.mean[out] = mean;
    ds.scaler.sd[out] = sd > 0.0 ? sd : 1.0;
    ds.scaler.numeric[out] = 1;
    ++out;
  }
  return ds;
}

Dataset standardize(const Dataset& ds) {
  Dataset out = ds;
  for (std::size_t j = 0; j < out.x.cols(); ++j) {
    if (!ds.scaler.numeric[j]) continue;
    for (std::size_t i = 0; i < out.x.rows(); ++i)
      out.x(i, j) = (out.x(i, j) - ds.scaler.mean[j]) / ds.scaler.sd[j];
  }
  out.standardized = true;
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_indices(
    const std::vector<int>& y, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must be in (0, 1)");
  int c = 0;
  for (int v : y) c = std::max(c, v + 1);

  std::vector<std::vector<std::size_t>> per_class(c);
  for (std::size_t i = 0; i < y.size(); ++i) per_class[y[i]].push_back(i);
  for (int k = 0; k < c; ++k)
    if (per_class[k].size() == 1)
      throw std::invalid_argument("unstratifiable: class " + std::to_string(k) +
                                  " has a single sample");

  // Largest-remainder apportionment keeps every class within one sample of
  // its exact share.
  auto total_test =
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(y.size())));
  total_test = std::min(std::max<std::size_t>(total_test, 1), y.size() - 1);
  std::vector<std::size_t> take(c, 0);
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (int k = 0; k < c; ++k) {
    double exact = test_fraction * static_cast<double>(per_class[k].size());
    take[k] = static_cast<std::size_t>(std::floor(exact));
    take[k] = std::min(take[k], per_class[k].size());
    assigned += take[k];
    remainders.push_back({-(exact - std::floor(exact)), k});
  }
  std::sort(remainders.begin(), remainders.end());
  for (const auto& [neg_rem, k] : remainders) {
    if (assigned >= total_test) break;
    if (take[k] < per_class[k].size()) {
      ++take[k];
      ++assigned;
    }
  }

  std::vector<std::size_t> test_idx;
  for (int k = 0; k < c; ++k) {
    auto idx = per_class[k];
    rng::Stream stream(seed, "stratified-split", {static_cast<std::uint64_t>(k)});
    stream.shuffle(idx);
    for (std::size_t i = 0; i < take[k]; ++i) test_idx.push_back(idx[i]);
  }
  std::sort(test_idx.begin(), test_idx.end());

  std::vector<std::size_t> train_idx;
  std::size_t t = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (t < test_idx.size() && test_idx[t] == i)
      ++t;
    else
      train_idx.push_back(i);
  }
  return {train_idx, test_idx};
}

SplitPlan stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  auto [train_idx, test_idx] = stratified_indices(ds.y, test_fraction, seed);
  return SplitPlan{std::move(train_idx), std::move(test_idx), seed};
}

Dataset downsample(const Dataset& ds, std::size_t max_n, std::uint64_t seed) {
  if (max_n < static_cast<std::size_t>(ds.c))
    throw std::invalid_argument("downsample: max_n below class count");
  if (ds.size() <= max_n) return ds;

  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng::Stream stream(seed, "downsample");
  // Partial Fisher-Yates: the first max_n entries are a uniform sample
  // without replacement.
  for (std::size_t i = 0; i < max_n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(stream.next_below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_n);
  std::sort(idx.begin(), idx.end());
  return take_rows(ds, idx);
}

Matrix perturb(const Matrix& x, double delta, std::uint64_t seed) {
  if (delta < 0.0) throw std::invalid_argument("perturb: delta must be >= 0");
  if (delta == 0.0) return x;
  Matrix out = x;
  rng::Stream stream(seed, "perturb");
  for (double& v : out.data()) v += delta * stream.next_gaussian();
  return out;
}

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.c = ds.c;
  out.encoder = ds.encoder;
  out.scaler = ds.scaler;
  out.standardized = ds.standardized;
  out.x = Matrix(idx.size(), ds.x.cols());
  out.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = ds.x.row(idx[i]);
    auto dst = out.x.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    out.y[i] = ds.y[idx[i]];
  }
  return out;
}

}  // namespace bpe::data
