#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpe/matrix.hpp"

namespace bpe::data {

enum class ColumnKind { numeric, nominal };

struct RawTable {
  struct Column {
    std::string name;
    ColumnKind kind;
  };
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> rows;  // one cell per column
  std::string label_column;

  std::size_t label_index() const;
};

struct EncodingSpec {
  struct Feature {
    std::string name;
    bool nominal = false;
    std::vector<std::string> categories;  // first-appearance order; empty for numeric
  };
  std::vector<Feature> features;   // source-column order, label excluded
  std::vector<std::string> labels; // class names, first-appearance order

  std::size_t encoded_width() const;
  // Class index for a label value; -1 when unseen.
  int label_index(const std::string& value) const;
};

struct Scaler {
  std::vector<double> mean;      // per encoded column
  std::vector<double> sd;        // sample sd (N-1); zero sd stored as 1
  std::vector<char> numeric;     // 1 where the encoded column came from a numeric source
};

struct Dataset {
  Matrix x;
  std::vector<int> y;
  int c = 0;
  EncodingSpec encoder;
  Scaler scaler;
  bool standardized = false;

  std::size_t size() const { return x.rows(); }
  std::size_t dim() const { return x.cols(); }
};

struct SplitPlan {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

// CSV: UTF-8, comma separated, header row, '.' decimal point. A column is
// numeric iff every value parses as a finite real. Empty cells are rejected.
RawTable load_csv(const std::string& path, const std::string& label_column);
RawTable parse_csv_text(const std::string& text, const std::string& label_column);

// One-hot encodes nominal columns (first-appearance category order), copies
// numeric columns, maps labels to [0, C), and fits the per-column scaler.
Dataset encode(const RawTable& table);

// Encodes feature cells of arbitrary rows with a fitted spec; unseen
// categories map to an all-zero block.
Matrix encode_features(const EncodingSpec& spec, const std::vector<std::vector<std::string>>& rows,
                       std::size_t label_index);

// (x - mean) / sd on originally-numeric columns; one-hot columns untouched.
Dataset standardize(const Dataset& ds);

SplitPlan stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

// Same stratified selection on a label vector: returns kept-out ("test") index
// list; the complement is the "train" side. Both sides ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_indices(
    const std::vector<int>& y, double test_fraction, std::uint64_t seed);

Dataset downsample(const Dataset& ds, std::size_t max_n, std::uint64_t seed);

// X + E with E ~ iid N(0, delta^2), Philox stream seeded by `seed`.
Matrix perturb(const Matrix& x, double delta, std::uint64_t seed);

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx);

}  // namespace bpe::data
