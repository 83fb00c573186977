#include "claimnet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "claimnet/csv.hpp"

namespace claimnet {

namespace {

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NULL";
}

double parse_numeric(const std::string& cell, const std::string& column) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("column " + column + ": unparseable numeric '" + cell + "'");
  }
  while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
  if (pos != cell.size())
    throw std::runtime_error("column " + column + ": unparseable numeric '" + cell + "'");
  return v;
}

}  // namespace

int Frame::numeric_index(const std::string& name) const {
  for (std::size_t i = 0; i < numeric_names.size(); ++i)
    if (numeric_names[i] == name) return static_cast<int>(i);
  return -1;
}

int Frame::categorical_index(const std::string& name) const {
  for (std::size_t i = 0; i < categorical_names.size(); ++i)
    if (categorical_names[i] == name) return static_cast<int>(i);
  return -1;
}

std::string zone_prefix(const std::string& label) {
  if (label.empty()) throw std::invalid_argument("zone_prefix: empty label");
  std::size_t n = 0;
  while (n < label.size() && std::isalpha(static_cast<unsigned char>(label[n]))) ++n;
  if (n == 0) return label;
  return label.substr(0, n);
}

Frame frame_from_cells(const std::vector<std::vector<std::string>>& cells,
                       const std::vector<ColumnSchema>& schema) {
  if (cells.empty()) throw std::runtime_error("empty file: no header row");
  const std::vector<std::string>& header = cells[0];
  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t i = 0; i < header.size(); ++i) col_of[header[i]] = i;

  int response_schema = -1, exposure_schema = -1;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!col_of.count(schema[i].name))
      throw std::runtime_error("unknown column: " + schema[i].name);
    if (schema[i].kind == ColumnKind::response) {
      if (response_schema >= 0) throw std::runtime_error("two response columns declared");
      response_schema = static_cast<int>(i);
    }
    if (schema[i].kind == ColumnKind::exposure) {
      if (exposure_schema >= 0) throw std::runtime_error("two exposure columns declared");
      exposure_schema = static_cast<int>(i);
    }
  }
  if (response_schema < 0) throw std::runtime_error("schema declares no response column");

  Frame f;
  f.response_name = schema[response_schema].name;
  if (exposure_schema >= 0) f.exposure_name = schema[exposure_schema].name;

  // numeric slots: plain numeric columns plus a numeric copy of the exposure
  struct NumSlot {
    const ColumnSchema* sch;
    std::size_t file_col;
    std::vector<double> values;            // NaN marks missing until imputation
    std::size_t missing = 0;
  };
  std::vector<NumSlot> num_slots;
  struct CatSlot {
    const ColumnSchema* sch;
    std::size_t file_col;
    std::vector<std::string> values;
    std::size_t missing = 0;
  };
  std::vector<CatSlot> cat_slots;
  for (const auto& sch : schema) {
    if (sch.kind == ColumnKind::numeric || sch.kind == ColumnKind::exposure)
      num_slots.push_back({&sch, col_of.at(sch.name), {}, 0});
    else if (sch.kind == ColumnKind::categorical)
      cat_slots.push_back({&sch, col_of.at(sch.name), {}, 0});
  }
  const std::size_t response_col = col_of.at(f.response_name);

  f.report.rows_read = cells.size() - 1;
  for (std::size_t r = 1; r < cells.size(); ++r) {
    const auto& row = cells[r];
    auto cell = [&](std::size_t c) -> const std::string& {
      static const std::string empty;
      return c < row.size() ? row[c] : empty;
    };
    if (is_missing(cell(response_col))) {
      ++f.report.dropped_missing_response;
      continue;
    }
    double y = parse_numeric(cell(response_col), f.response_name);
    double expo = 0.0;
    if (exposure_schema >= 0) {
      const std::string& e = cell(col_of.at(f.exposure_name));
      if (is_missing(e) || (expo = parse_numeric(e, f.exposure_name)) <= 0.0) {
        ++f.report.dropped_bad_exposure;
        continue;
      }
    }
    f.response.push_back(y);
    if (exposure_schema >= 0) f.exposure.push_back(expo);
    for (auto& slot : num_slots) {
      const std::string& c = cell(slot.file_col);
      if (is_missing(c)) {
        slot.values.push_back(std::numeric_limits<double>::quiet_NaN());
        ++slot.missing;
      } else {
        slot.values.push_back(parse_numeric(c, slot.sch->name));
      }
    }
    for (auto& slot : cat_slots) {
      const std::string& c = cell(slot.file_col);
      if (is_missing(c)) {
        slot.values.push_back("(missing)");
        ++slot.missing;
      } else {
        slot.values.push_back(c);
      }
    }
  }
  f.report.rows_kept = f.response.size();

  for (auto& slot : num_slots) {
    if (slot.missing > 0) {
      std::vector<double> present;
      present.reserve(slot.values.size());
      for (double v : slot.values)
        if (!std::isnan(v)) present.push_back(v);
      if (present.empty())
        throw std::runtime_error("column " + slot.sch->name + ": all values missing");
      double med = quantile(std::move(present), 0.5);
      for (double& v : slot.values)
        if (std::isnan(v)) v = med;
      f.report.numeric_imputations[slot.sch->name] = slot.missing;
    }
    if (slot.sch->transform == Transform::log_e) {
      for (double& v : slot.values) {
        if (v <= 0.0)
          throw std::runtime_error("column " + slot.sch->name +
                                   ": log of non-positive value");
        v = std::log(v);
      }
    }
    f.numeric_names.push_back(slot.sch->name);
    f.numeric_normalize.push_back(slot.sch->transform == Transform::normalize);
    f.numeric_cols.push_back(std::move(slot.values));
  }
  for (auto& slot : cat_slots) {
    if (slot.sch->transform == Transform::zone_prefix)
      for (auto& v : slot.values) v = zone_prefix(v);
    if (slot.missing > 0) f.report.missing_categoricals[slot.sch->name] = slot.missing;
    f.categorical_names.push_back(slot.sch->name);
    f.categorical_cols.push_back(std::move(slot.values));
  }
  return f;
}

Frame load_csv(const std::string& path, const std::vector<ColumnSchema>& schema) {
  return frame_from_cells(read_csv(path), schema);
}

Frame select_rows(const Frame& frame, const std::vector<int>& rows) {
  Frame out;
  out.numeric_names = frame.numeric_names;
  out.numeric_normalize = frame.numeric_normalize;
  out.categorical_names = frame.categorical_names;
  out.response_name = frame.response_name;
  out.exposure_name = frame.exposure_name;
  for (const auto& col : frame.numeric_cols) {
    std::vector<double> c;
    c.reserve(rows.size());
    for (int r : rows) c.push_back(col.at(r));
    out.numeric_cols.push_back(std::move(c));
  }
  for (const auto& col : frame.categorical_cols) {
    std::vector<std::string> c;
    c.reserve(rows.size());
    for (int r : rows) c.push_back(col.at(r));
    out.categorical_cols.push_back(std::move(c));
  }
  for (int r : rows) out.response.push_back(frame.response.at(r));
  if (frame.has_exposure())
    for (int r : rows) out.exposure.push_back(frame.exposure.at(r));
  out.report.rows_read = rows.size();
  out.report.rows_kept = rows.size();
  return out;
}

void write_frame_csv(const std::string& path, const Frame& frame) {
  std::vector<std::string> header;
  header.push_back(frame.response_name);
  for (const auto& n : frame.numeric_names) header.push_back(n);
  for (const auto& n : frame.categorical_names) header.push_back(n);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(frame.rows());
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    std::vector<std::string> row;
    row.push_back(format_double(frame.response[r]));
    for (const auto& col : frame.numeric_cols) row.push_back(format_double(col[r]));
    for (const auto& col : frame.categorical_cols) row.push_back(col[r]);
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

Vocabulary::Vocabulary(std::string variable, std::vector<std::string> sorted_levels)
    : variable_(std::move(variable)), levels_(std::move(sorted_levels)) {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    index_[levels_[i]] = static_cast<int>(i);
  if (index_.size() != levels_.size())
    throw std::invalid_argument("Vocabulary: duplicate levels for " + variable_);
}

Vocabulary Vocabulary::build(const std::string& variable,
                             const std::vector<std::string>& labels,
                             const std::vector<int>& rows) {
  std::vector<std::string> lv;
  {
    std::unordered_map<std::string, char> seen;
    for (int r : rows)
      if (seen.emplace(labels.at(r), 0).second) lv.push_back(labels.at(r));
  }
  std::sort(lv.begin(), lv.end());
  return Vocabulary(variable, std::move(lv));
}

Vocabulary Vocabulary::build_all(const std::string& variable,
                                 const std::vector<std::string>& labels) {
  std::vector<int> rows(labels.size());
  std::iota(rows.begin(), rows.end(), 0);
  return build(variable, labels, rows);
}

int Vocabulary::index_of(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? unseen_index() : it->second;
}

std::vector<Vocabulary> build_vocabularies(const Frame& frame, const std::vector<int>& rows) {
  std::vector<Vocabulary> vocabs;
  vocabs.reserve(frame.categorical_names.size());
  for (std::size_t j = 0; j < frame.categorical_names.size(); ++j)
    vocabs.push_back(Vocabulary::build(frame.categorical_names[j],
                                       frame.categorical_cols[j], rows));
  return vocabs;
}

const Vocabulary& vocabulary_for(const std::vector<Vocabulary>& vocabs,
                                 const std::string& variable) {
  for (const auto& v : vocabs)
    if (v.variable() == variable) return v;
  throw std::out_of_range("no vocabulary for variable " + variable);
}

int Dataset::categorical_index(const std::string& name) const {
  for (std::size_t i = 0; i < categorical_names.size(); ++i)
    if (categorical_names[i] == name) return static_cast<int>(i);
  throw std::out_of_range("dataset has no categorical column " + name);
}

Dataset encode_dataset(const Frame& frame, const std::vector<Vocabulary>& vocabs,
                       const std::vector<int>& rows) {
  Dataset ds;
  ds.numeric_names = frame.numeric_names;
  ds.numeric_normalize = frame.numeric_normalize;
  ds.categorical_names = frame.categorical_names;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  ds.X_num.resize(n, static_cast<Eigen::Index>(frame.numeric_cols.size()));
  for (std::size_t j = 0; j < frame.numeric_cols.size(); ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      ds.X_num(i, static_cast<Eigen::Index>(j)) = frame.numeric_cols[j].at(rows[i]);
  ds.X_cat.resize(n, static_cast<Eigen::Index>(frame.categorical_cols.size()));
  for (std::size_t j = 0; j < frame.categorical_cols.size(); ++j) {
    const Vocabulary& vocab = vocabulary_for(vocabs, frame.categorical_names[j]);
    for (Eigen::Index i = 0; i < n; ++i)
      ds.X_cat(i, static_cast<Eigen::Index>(j)) =
          vocab.index_of(frame.categorical_cols[j].at(rows[i]));
  }
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) ds.y(i) = frame.response.at(rows[i]);
  if (frame.has_exposure()) {
    ds.exposure.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) ds.exposure(i) = frame.exposure.at(rows[i]);
  }
  return ds;
}

Dataset encode_dataset(const Frame& frame, const std::vector<Vocabulary>& vocabs) {
  std::vector<int> rows(frame.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return encode_dataset(frame, vocabs, rows);
}

Eigen::MatrixXd encode_one_hot(const Dataset& ds, const std::string& variable,
                               const Vocabulary& vocab) {
  const int j = ds.categorical_index(variable);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ds.rows(), vocab.cardinality());
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    int idx = ds.X_cat(i, j);
    if (idx >= vocab.cardinality())
      throw std::runtime_error("encode_one_hot: unseen level in " + variable);
    out(i, idx) = 1.0;
  }
  return out;
}

Eigen::MatrixXd encode_dummy(const Dataset& ds, const std::string& variable,
                             const Vocabulary& vocab, int baseline_index,
                             bool allow_unseen) {
  if (baseline_index < 0 || baseline_index >= vocab.cardinality())
    throw std::invalid_argument("encode_dummy: baseline index out of range");
  const int j = ds.categorical_index(variable);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ds.rows(), vocab.cardinality() - 1);
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    int idx = ds.X_cat(i, j);
    if (idx >= vocab.cardinality()) {
      if (!allow_unseen)
        throw std::runtime_error("encode_dummy: unseen level in " + variable);
      continue;  // scored as the baseline
    }
    if (idx == baseline_index) continue;
    out(i, idx < baseline_index ? idx : idx - 1) = 1.0;
  }
  return out;
}

Normalizer Normalizer::fit(const Dataset& ds, const std::vector<int>& local_rows) {
  if (local_rows.empty()) throw std::invalid_argument("Normalizer: no rows to fit on");
  Normalizer nz;
  const Eigen::Index p = ds.X_num.cols();
  nz.mean_.resize(p);
  nz.sd_.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sum = 0.0;
    for (int r : local_rows) sum += ds.X_num(r, j);
    double mean = sum / static_cast<double>(local_rows.size());
    double ss = 0.0;
    for (int r : local_rows) {
      double d = ds.X_num(r, j) - mean;
      ss += d * d;
    }
    double sd = local_rows.size() > 1
                    ? std::sqrt(ss / static_cast<double>(local_rows.size() - 1))
                    : 0.0;
    nz.mean_[j] = mean;
    nz.sd_[j] = sd > 1e-12 ? sd : 1.0;  // constant column passes through centered
  }
  return nz;
}

Normalizer Normalizer::fit_all_rows(const Dataset& ds) {
  std::vector<int> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return fit(ds, rows);
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& x_num) const {
  if (static_cast<std::size_t>(x_num.cols()) != mean_.size())
    throw std::invalid_argument("Normalizer: column count mismatch");
  Eigen::MatrixXd out = x_num;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    out.col(j) = (out.col(j).array() - mean_[j]) / sd_[j];
  return out;
}

std::vector<int> SplitPlan::training_rows(int fold) const {
  std::vector<int> rows;
  rows.reserve(fold_of_row.size() - test_rows.at(fold).size());
  for (std::size_t r = 0; r < fold_of_row.size(); ++r)
    if (fold_of_row[r] != fold) rows.push_back(static_cast<int>(r));
  return rows;
}

namespace {

// The analysis/assessment partition is a pure function of (seed, fold,
// training rows) so a plan read back from disk reconstructs it exactly.
void derive_partitions(SplitPlan& plan) {
  RngStream base(plan.seed);
  plan.analysis_rows.assign(plan.k, {});
  plan.assessment_rows.assign(plan.k, {});
  for (int f = 0; f < plan.k; ++f) {
    std::vector<int> train = plan.training_rows(f);
    RngStream rng = base.derive(0x5eed0000ULL + static_cast<std::uint64_t>(f));
    rng.shuffle(train);
    std::size_t n_analysis = train.size() * 4 / 5;
    plan.analysis_rows[f].assign(train.begin(), train.begin() + n_analysis);
    plan.assessment_rows[f].assign(train.begin() + n_analysis, train.end());
    std::sort(plan.analysis_rows[f].begin(), plan.analysis_rows[f].end());
    std::sort(plan.assessment_rows[f].begin(), plan.assessment_rows[f].end());
  }
}

}  // namespace

SplitPlan make_splits(std::size_t n_rows, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_splits: k must be at least 2");
  if (n_rows < static_cast<std::size_t>(k))
    throw std::invalid_argument("make_splits: fewer rows than folds");
  SplitPlan plan;
  plan.seed = seed;
  plan.k = k;
  std::vector<int> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed);
  rng.shuffle(order);
  plan.fold_of_row.assign(n_rows, 0);
  plan.test_rows.assign(k, {});
  // first (n mod k) folds take the extra row
  std::size_t at = 0;
  for (int f = 0; f < k; ++f) {
    std::size_t size = n_rows / k + (static_cast<std::size_t>(f) < n_rows % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i, ++at) {
      plan.fold_of_row[order[at]] = f;
      plan.test_rows[f].push_back(order[at]);
    }
    std::sort(plan.test_rows[f].begin(), plan.test_rows[f].end());
  }
  derive_partitions(plan);
  return plan;
}

void write_split_plan(const std::string& path, const SplitPlan& plan) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(plan.fold_of_row.size());
  for (std::size_t r = 0; r < plan.fold_of_row.size(); ++r)
    rows.push_back({std::to_string(r), std::to_string(plan.fold_of_row[r])});
  write_csv(path, {"row", "fold"}, rows,
            {"seed=" + std::to_string(plan.seed), "k=" + std::to_string(plan.k)});
}

SplitPlan read_split_plan(const std::string& path) {
  // comments carry the metadata; reparse them manually
  std::ifstream probe(path);
  if (!probe) throw std::runtime_error("cannot open split plan: " + path);
  SplitPlan plan;
  bool have_seed = false, have_k = false;
  std::string line;
  while (std::getline(probe, line)) {
    if (line.rfind("# seed=", 0) == 0) {
      plan.seed = std::stoull(line.substr(7));
      have_seed = true;
    } else if (line.rfind("# k=", 0) == 0) {
      plan.k = std::stoi(line.substr(4));
      have_k = true;
    }
  }
  if (!have_seed || !have_k)
    throw std::runtime_error("split plan missing seed/k metadata: " + path);
  auto cells = read_csv(path);
  if (cells.empty() || cells[0] != std::vector<std::string>{"row", "fold"})
    throw std::runtime_error("split plan has unexpected header: " + path);
  plan.fold_of_row.assign(cells.size() - 1, -1);
  plan.test_rows.assign(plan.k, {});
  for (std::size_t i = 1; i < cells.size(); ++i) {
    int row = std::stoi(cells[i].at(0));
    int fold = std::stoi(cells[i].at(1));
    if (row < 0 || static_cast<std::size_t>(row) >= plan.fold_of_row.size() ||
        fold < 0 || fold >= plan.k)
      throw std::runtime_error("split plan row out of range: " + path);
    plan.fold_of_row[row] = fold;
    plan.test_rows[fold].push_back(row);
  }
  for (auto& v : plan.test_rows) std::sort(v.begin(), v.end());
  derive_partitions(plan);
  return plan;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile: empty vector");
  std::sort(v.begin(), v.end());
  double h = p * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

void append_histogram(SummaryReport& report, const std::string& name,
                      const std::vector<double>& values, int bins = 20) {
  if (values.empty()) return;
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi <= lo) hi = lo + 1.0;
  double width = (hi - lo) / bins;
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    if (b < 0) b = 0;
    ++counts[b];
  }
  for (int b = 0; b < bins; ++b)
    report.histograms.emplace_back(name, lo + b * width, lo + (b + 1) * width, counts[b]);
}

}  // namespace

SummaryReport summarize(const Frame& frame) {
  SummaryReport report;
  for (std::size_t j = 0; j < frame.categorical_names.size(); ++j) {
    std::map<std::string, std::size_t> freq;
    for (const auto& label : frame.categorical_cols[j]) ++freq[label];
    for (const auto& [label, count] : freq)
      report.categorical_frequencies.emplace_back(frame.categorical_names[j], label, count);
  }
  auto numeric_summary = [&report](const std::string& name, const std::vector<double>& col) {
    double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    double sd = col.size() > 1 ? std::sqrt(ss / (col.size() - 1)) : 0.0;
    report.numeric_stats.emplace_back(
        name, *std::min_element(col.begin(), col.end()), quantile(col, 0.25),
        quantile(col, 0.5), quantile(col, 0.75),
        *std::max_element(col.begin(), col.end()), mean, sd);
    report.histograms.reserve(report.histograms.size() + 20);
  };
  for (std::size_t j = 0; j < frame.numeric_names.size(); ++j) {
    numeric_summary(frame.numeric_names[j], frame.numeric_cols[j]);
    append_histogram(report, frame.numeric_names[j], frame.numeric_cols[j]);
  }
  numeric_summary(frame.response_name, frame.response);
  append_histogram(report, frame.response_name, frame.response);
  std::vector<double> log_response;
  log_response.reserve(frame.rows());
  for (double y : frame.response)
    if (y > 0.0) log_response.push_back(std::log(y));
  if (!log_response.empty())
    append_histogram(report, "log(" + frame.response_name + ")", log_response);
  return report;
}

void write_summary(const std::string& out_prefix, const SummaryReport& report) {
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [var, level, count] : report.categorical_frequencies)
      rows.push_back({var, level, std::to_string(count)});
    write_csv(out_prefix + "_levels.csv", {"variable", "level", "count"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [var, mn, q25, med, q75, mx, mean, sd] : report.numeric_stats)
      rows.push_back({var, format_double(mn), format_double(q25), format_double(med),
                      format_double(q75), format_double(mx), format_double(mean),
                      format_double(sd)});
    write_csv(out_prefix + "_numeric.csv",
              {"variable", "min", "q25", "median", "q75", "max", "mean", "sd"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [var, lo, hi, count] : report.histograms)
      rows.push_back({var, format_double(lo), format_double(hi), std::to_string(count)});
    write_csv(out_prefix + "_histograms.csv", {"variable", "bin_lo", "bin_hi", "count"}, rows);
  }
}

}  // namespace claimnet
