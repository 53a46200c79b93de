#include "fsgen/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fsgen {

std::string to_string(TaskKind task) {
  return task == TaskKind::Classification ? "classification" : "regression";
}

TaskKind task_from_string(const std::string& name) {
  if (name == "classification") return TaskKind::Classification;
  if (name == "regression") return TaskKind::Regression;
  throw ConfigError("unknown task kind '" + name +
                    "' (expected classification|regression)");
}

int Dataset::n_classes() const {
  if (task != TaskKind::Classification || target.size() == 0) return 0;
  return static_cast<int>(target.maxCoeff()) + 1;
}

void validate(const Dataset& ds) {
  if (ds.features.rows() != ds.target.size())
    throw DataError("feature row count does not match target length");
  if (ds.features.cols() < 1) throw DataError("dataset needs at least one feature");
  if (!ds.features.allFinite() || !ds.target.allFinite())
    throw DataError("dataset contains NaN/Inf entries");
  if (ds.feature_names.size() != static_cast<std::size_t>(ds.features.cols()))
    throw DataError("feature name count does not match feature columns");
  if (ds.task == TaskKind::Classification) {
    std::set<int> classes;
    for (Index i = 0; i < ds.target.size(); ++i) {
      double v = ds.target[i];
      if (v != std::floor(v) || v < 0)
        throw DataError("classification targets must be non-negative integers");
      classes.insert(static_cast<int>(v));
    }
    int c = static_cast<int>(classes.size());
    if (c < 2) throw DataError("classification target has a single class");
    if (*classes.begin() != 0 || *classes.rbegin() != c - 1)
      throw DataError("classification labels must be contiguous 0..C-1");
  }
}

namespace {

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

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_double(const std::string& cell, double& out) {
  std::string t = trim(cell);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) return false;
  return std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 TaskKind task) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file: " + path.string());
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);

  Index target_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == trim(target_column)) target_idx = static_cast<Index>(i);
  if (target_idx < 0) {
    // Fall back to a numeric column index.
    std::string t = trim(target_column);
    Index idx = -1;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
    if (ec == std::errc() && ptr == t.data() + t.size() && idx >= 0 &&
        idx < static_cast<Index>(header.size()))
      target_idx = idx;
  }
  if (target_idx < 0)
    throw DataError("target column '" + target_column + "' not found in " +
                    path.string());
  if (header.size() < 2)
    throw DataError("dataset needs at least one feature column besides the target");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_targets;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    std::vector<double> row;
    row.reserve(header.size() - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<Index>(c) == target_idx) {
        raw_targets.push_back(trim(cells[c]));
        continue;
      }
      double v;
      if (!parse_double(cells[c], v))
        throw DataError("non-numeric feature cell '" + trim(cells[c]) + "' at row " +
                        std::to_string(line_no) + ", column '" + header[c] + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("dataset has no data rows: " + path.string());

  Dataset ds;
  ds.task = task;
  ds.features.resize(static_cast<Index>(rows.size()),
                     static_cast<Index>(header.size() - 1));
  for (Index r = 0; r < ds.features.rows(); ++r)
    for (Index c = 0; c < ds.features.cols(); ++c)
      ds.features(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  for (std::size_t i = 0; i < header.size(); ++i)
    if (static_cast<Index>(i) != target_idx) ds.feature_names.push_back(header[i]);

  ds.target.resize(static_cast<Index>(raw_targets.size()));
  if (task == TaskKind::Classification) {
    // First-appearance encoding keeps the mapping stable for a given file.
    std::unordered_map<std::string, int> ids;
    for (Index i = 0; i < ds.target.size(); ++i) {
      const std::string& label = raw_targets[static_cast<std::size_t>(i)];
      if (label.empty())
        throw DataError("empty target cell at row " + std::to_string(i + 2));
      auto [it, _] = ids.emplace(label, static_cast<int>(ids.size()));
      ds.target[i] = it->second;
    }
  } else {
    for (Index i = 0; i < ds.target.size(); ++i) {
      double v;
      if (!parse_double(raw_targets[static_cast<std::size_t>(i)], v))
        throw DataError("non-numeric regression target '" +
                        raw_targets[static_cast<std::size_t>(i)] + "' at row " +
                        std::to_string(i + 2));
      ds.target[i] = v;
    }
  }
  validate(ds);
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path,
               const std::string& target_name) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  for (const auto& name : ds.feature_names) out << name << ',';
  out << target_name << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Index r = 0; r < ds.n_samples(); ++r) {
    for (Index c = 0; c < ds.n_features(); ++c) {
      put(ds.features(r, c));
      out << ',';
    }
    if (ds.task == TaskKind::Classification)
      out << static_cast<long long>(ds.target[r]);
    else
      put(ds.target[r]);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Dataset select_rows(const Dataset& ds, const std::vector<Index>& rows) {
  Dataset out;
  out.task = ds.task;
  out.feature_names = ds.feature_names;
  out.features.resize(static_cast<Index>(rows.size()), ds.n_features());
  out.target.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = ds.features.row(rows[i]);
    out.target[static_cast<Index>(i)] = ds.target[rows[i]];
  }
  return out;
}

RowPartition split_ab_rows(const Dataset& ds, double ratio_a, std::uint64_t seed) {
  if (!(ratio_a > 0.0 && ratio_a < 1.0))
    throw ConfigError("split ratio must lie in (0,1)");
  Index n = ds.n_samples();
  Index na = static_cast<Index>(std::floor(ratio_a * static_cast<double>(n)));
  Index nb = n - na;
  if (na < 1 || nb < 1) throw DataError("split would leave an empty subset");

  if (ds.task == TaskKind::Classification) {
    std::vector<Index> counts(static_cast<std::size_t>(ds.n_classes()), 0);
    for (Index i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(ds.target[i])];
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (counts[c] < 2)
        throw DataError("class " + std::to_string(c) +
                        " has fewer than 2 samples; cannot appear in both splits");
  }

  std::mt19937_64 rng(seed);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});

  const int max_retries = 1000;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Index> rows_a(perm.begin(), perm.begin() + na);
    std::vector<Index> rows_b(perm.begin() + na, perm.end());
    if (ds.task == TaskKind::Classification) {
      int nc = ds.n_classes();
      std::vector<char> in_a(static_cast<std::size_t>(nc), 0),
          in_b(static_cast<std::size_t>(nc), 0);
      for (Index r : rows_a) in_a[static_cast<std::size_t>(ds.target[r])] = 1;
      for (Index r : rows_b) in_b[static_cast<std::size_t>(ds.target[r])] = 1;
      bool ok = true;
      for (int c = 0; c < nc; ++c)
        ok = ok && in_a[static_cast<std::size_t>(c)] && in_b[static_cast<std::size_t>(c)];
      if (!ok) continue;
    }
    std::sort(rows_a.begin(), rows_a.end());
    std::sort(rows_b.begin(), rows_b.end());
    return {std::move(rows_a), std::move(rows_b)};
  }
  throw DataError("could not stratify split after bounded retries");
}

std::pair<Dataset, Dataset> split_ab(const Dataset& ds, double ratio_a,
                                     std::uint64_t seed) {
  RowPartition part = split_ab_rows(ds, ratio_a, seed);
  return {select_rows(ds, part.a_rows), select_rows(ds, part.b_rows)};
}

std::pair<Dataset, Dataset> internal_split(const Dataset& ds, std::uint64_t seed) {
  return split_ab(ds, 0.75, derive_seed(seed, "internal-split"));
}

std::pair<Dataset, SyntheticTruth> make_synthetic_planted(const SyntheticSpec& spec) {
  if (spec.n_real < 1) throw ConfigError("synthetic spec needs n_real >= 1");
  if (spec.n_fake < 0) throw ConfigError("synthetic spec needs n_fake >= 0");
  if (spec.n_samples < 2) throw ConfigError("synthetic spec needs n_samples >= 2");
  if (spec.noise_std < 0) throw ConfigError("synthetic noise_std must be >= 0");

  int nf = spec.n_real + spec.n_fake;
  std::mt19937_64 rng(derive_seed(spec.seed, "synthetic"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(0.5, 2.0);

  Dataset ds;
  ds.task = TaskKind::Regression;
  ds.features.resize(spec.n_samples, nf);
  for (Index r = 0; r < spec.n_samples; ++r)
    for (Index c = 0; c < nf; ++c) ds.features(r, c) = gauss(rng);
  ds.feature_names.reserve(static_cast<std::size_t>(nf));
  for (int c = 0; c < nf; ++c) ds.feature_names.push_back("x" + std::to_string(c));

  // Scatter the planted columns so recovery cannot rely on position.
  std::vector<int> cols(static_cast<std::size_t>(nf));
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(cols.begin(), cols.end(), rng);

  SyntheticTruth truth;
  truth.informative.assign(cols.begin(), cols.begin() + spec.n_real);
  std::sort(truth.informative.begin(), truth.informative.end());
  truth.weights.resize(spec.n_real);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int i = 0; i < spec.n_real; ++i)
    truth.weights[i] = wdist(rng) * (coin(rng) ? 1.0 : -1.0);
  truth.interaction_weight = wdist(rng);

  ds.target.resize(spec.n_samples);
  for (Index r = 0; r < spec.n_samples; ++r) {
    double y = 0.0;
    for (int i = 0; i < spec.n_real; ++i)
      y += truth.weights[i] * ds.features(r, truth.informative[static_cast<std::size_t>(i)]);
    if (spec.n_real >= 2)
      y += truth.interaction_weight *
           ds.features(r, truth.informative[0]) * ds.features(r, truth.informative[1]);
    else
      y += truth.interaction_weight *
           ds.features(r, truth.informative[0]) * ds.features(r, truth.informative[0]);
    ds.target[r] = y;
  }
  if (spec.noise_std > 0)
    for (Index r = 0; r < spec.n_samples; ++r)
      ds.target[r] += spec.noise_std * gauss(rng);

  validate(ds);
  return {std::move(ds), std::move(truth)};
}

}  // namespace fsgen
