#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "emoe/content_encoder.hpp"
#include "emoe/data_io.hpp"
#include "emoe/errors.hpp"
#include "emoe/label_format.hpp"
#include "emoe/mapper.hpp"

namespace emoe {

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw DimensionError("pearson_r: lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()) + " differ");
  if (x.size() < 2) throw ValidationError("pearson_r needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateError("pearson_r: a sequence has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Index of the largest entry; the lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ValidationError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  if (predicted.size() != gold.size())
    throw DimensionError("accuracy: prediction and gold counts differ");
  if (predicted.empty()) throw ValidationError("accuracy of an empty sample");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

enum class Scenario { supervised, zero_shot, mapping };
enum class Metric { pearson_r, accuracy };

inline const char* to_string(Scenario s) {
  switch (s) {
  case Scenario::supervised: return "supervised";
  case Scenario::zero_shot: return "zero-shot";
  case Scenario::mapping: return "mapping";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "supervised") return Scenario::supervised;
  if (s == "zero-shot" || s == "zero_shot") return Scenario::zero_shot;
  if (s == "mapping") return Scenario::mapping;
  throw ConfigError("unknown scenario '" + s + "' (expected supervised, zero-shot or mapping)");
}

inline const char* to_string(Metric m) { return m == Metric::pearson_r ? "pearson_r" : "accuracy"; }

struct EvalReport {
  std::string dataset_id;
  Scenario scenario = Scenario::supervised;
  std::string source;  // encoder name, or source format for mapping
  std::string format_id;
  Metric metric = Metric::pearson_r;
  std::vector<std::string> variables;
  std::vector<double> per_variable;
  double aggregate = 0.0;
  std::size_t n = 0;
};

/// Scores predictions against gold labels with the format's metric:
/// per-variable Pearson r averaged for regression, argmax accuracy for
/// single-label, and per-variable accuracy at threshold 0.5 averaged for
/// multi-label.
inline EvalReport score_labels(const LabelFormat& f, const Matrix& predicted, const Matrix& gold) {
  if (!predicted.same_shape(gold) || gold.cols() != f.arity())
    throw DimensionError("score_labels: shapes " + predicted.shape_string() + " and " +
                         gold.shape_string() + " for format " + f.id());
  EvalReport r;
  r.format_id = f.id();
  r.n = gold.rows();
  switch (f.problem()) {
  case Problem::regression: {
    r.metric = Metric::pearson_r;
    Vector p(gold.rows()), g(gold.rows());
    for (std::size_t j = 0; j < f.arity(); ++j) {
      for (std::size_t i = 0; i < gold.rows(); ++i) {
        p[i] = predicted(i, j);
        g[i] = gold(i, j);
      }
      r.variables.push_back(f.variables()[j]);
      r.per_variable.push_back(pearson_r(p, g));
    }
    break;
  }
  case Problem::single_label: {
    r.metric = Metric::accuracy;
    std::vector<std::size_t> p, g;
    for (std::size_t i = 0; i < gold.rows(); ++i) {
      p.push_back(argmax(predicted.row(i)));
      g.push_back(argmax(gold.row(i)));
    }
    r.variables.push_back("accuracy");
    r.per_variable.push_back(accuracy(p, g));
    break;
  }
  case Problem::multi_label: {
    r.metric = Metric::accuracy;
    for (std::size_t j = 0; j < f.arity(); ++j) {
      std::vector<std::size_t> p, g;
      for (std::size_t i = 0; i < gold.rows(); ++i) {
        p.push_back(predicted(i, j) >= 0.5);
        g.push_back(gold(i, j) >= 0.5);
      }
      r.variables.push_back(f.variables()[j]);
      r.per_variable.push_back(accuracy(p, g));
    }
    break;
  }
  }
  double sum = 0.0;
  for (double s : r.per_variable) sum += s;
  r.aggregate = sum / static_cast<double>(r.per_variable.size());
  return r;
}

/// Translates every source label of a mapping dataset and scores it against
/// the matched target labels. `reverse` maps second → first.
inline EvalReport evaluate_mapping(const MultiWayMapper& mapper, const MappingDataset& ds,
                                   bool reverse = false) {
  validate_mapping_dataset(mapper.registry(), ds);
  const std::string& src = reverse ? ds.second_format : ds.first_format;
  const std::string& dst = reverse ? ds.first_format : ds.second_format;
  const Matrix& x = reverse ? ds.second : ds.first;
  const Matrix& y = reverse ? ds.first : ds.second;
  EvalReport r = score_labels(mapper.registry().find(dst), translate_batch(mapper, src, x, dst), y);
  r.dataset_id = ds.id;
  r.scenario = Scenario::mapping;
  r.source = src;
  return r;
}

namespace detail {
inline void require_held_out(const ContentDataset& ds) {
  if (ds.split == Split::train)
    throw ValidationError("dataset " + ds.id + ": evaluation on a training split is not allowed");
}
} // namespace detail

/// Encoder trained on this dataset's train split, scored on its test split.
inline EvalReport evaluate_supervised(const ContentEncoder& encoder, const MultiWayMapper& mapper,
                                      const ContentDataset& test) {
  detail::require_held_out(test);
  validate_content_dataset(mapper.registry(), test);
  EvalReport r = score_labels(mapper.registry().find(test.format_id),
                              predict_batch(encoder, mapper, test.features, test.format_id),
                              test.labels);
  r.dataset_id = test.id;
  r.scenario = Scenario::supervised;
  r.source = encoder.name;
  return r;
}

/// Encoder trained on another dataset, decoded with this dataset's head.
inline EvalReport evaluate_zero_shot(const ContentEncoder& encoder_from_other,
                                     const MultiWayMapper& mapper, const ContentDataset& test) {
  if (encoder_from_other.name == test.id)
    throw ValidationError("zero-shot evaluation of " + test.id +
                          " needs an encoder trained on a different dataset");
  EvalReport r = evaluate_supervised(encoder_from_other, mapper, test);
  r.scenario = Scenario::zero_shot;
  return r;
}

// ---------------------------------------------------------------------------
// Results table

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

/// Tab-separated: dataset, scenario, source, format, metric, n,
/// per-variable scores as name=value pairs, mean.
inline void write_results_table(std::ostream& out, std::span<const EvalReport> reports) {
  out << "dataset\tscenario\tsource\tformat\tmetric\tn\tper_variable\tmean\n";
  for (const auto& r : reports) {
    out << r.dataset_id << '\t' << to_string(r.scenario) << '\t' << r.source << '\t'
        << r.format_id << '\t' << to_string(r.metric) << '\t' << r.n << '\t';
    for (std::size_t i = 0; i < r.per_variable.size(); ++i)
      out << (i ? ";" : "") << r.variables[i] << '=' << format_number(r.per_variable[i]);
    out << '\t' << format_number(r.aggregate) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Experiment suite

/// Pairs of datasets sharing a domain with different formats.
///
///   registry = formats.txt      (optional; default registry otherwise)
///   pair = en1.manifest en2.manifest
struct SuiteManifest {
  std::string registry_path;
  std::vector<std::pair<std::string, std::string>> pairs;
};

inline SuiteManifest load_suite_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open suite manifest " + path);
  const std::string base = std::filesystem::path(path).parent_path().string();
  SuiteManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    std::istringstream value(line.substr(eq + 1));
    if (key == "registry") {
      value >> m.registry_path;
      m.registry_path = detail::resolve_path(base, m.registry_path);
    } else if (key == "pair") {
      std::string a, b, extra;
      if (!(value >> a >> b) || (value >> extra))
        throw ParseError(where + ": pair needs exactly two manifest paths");
      m.pairs.emplace_back(detail::resolve_path(base, a), detail::resolve_path(base, b));
    } else {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
  if (m.pairs.empty()) throw ConfigError(path + ": suite manifest lists no pairs");
  return m;
}

struct DatasetPair {
  ContentDataset first;
  ContentDataset second;
  std::array<double, 3> split{8, 1, 1};
};

struct SuiteConfig {
  MapperTrainConfig mapper;
  EncoderTrainConfig encoder;  // augmentation formats are filled in per pair
  std::uint64_t split_seed = 0;
};

struct SuiteResult {
  std::vector<EvalReport> reports;
  MultiWayMapper mapper;
  std::vector<ContentEncoder> encoders;
};

/// Runs the full protocol. Each pair is split once over the union of its
/// ids. One mapper is trained on the double-annotated train items of all
/// pairs; then one content encoder per dataset. Per pair the reports are,
/// in order: supervised first, supervised second, zero-shot first (encoder of
/// second), zero-shot second, mapping first→second, mapping second→first.
inline SuiteResult run_suite(std::span<const DatasetPair> pairs, const FormatRegistry& registry,
                             const SuiteConfig& config) {
  if (pairs.empty()) throw ConfigError("run_suite: no dataset pairs");
  struct Prepared {
    DatasetSplit a, b;
    MappingDataset test_mapping;
  };
  std::vector<Prepared> prepared;
  std::vector<MappingDataset> train_mapping;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::string where = "pair " + std::to_string(i + 1) + " (" + p.first.id + ", " +
                              p.second.id + ")";
    try {
      validate_content_dataset(registry, p.first);
      validate_content_dataset(registry, p.second);
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (p.first.domain != p.second.domain)
      throw ValidationError(where + ": datasets are from different domains");
    if (p.first.format_id == p.second.format_id)
      throw ValidationError(where + ": datasets share format " + p.first.format_id);
    auto [a, b] = split_pair(p.first, p.second, p.split, config.split_seed);
    MappingDataset train_m = make_mapping_dataset(p.first.id + "~" + p.second.id, a.train, b.train);
    MappingDataset test_m = make_mapping_dataset(p.first.id + "~" + p.second.id, a.test, b.test);
    if (train_m.size() == 0 || test_m.size() < 2)
      throw ValidationError(where + ": too few double-annotated items to train and test a mapping");
    train_mapping.push_back(std::move(train_m));
    prepared.push_back({std::move(a), std::move(b), std::move(test_m)});
  }

  MultiWayMapper mapper = train_mapper(train_mapping, registry, config.mapper);
  SuiteResult out{{}, mapper, {}};

  for (auto& p : prepared) {
    auto fit = [&](const DatasetSplit& own, const DatasetSplit& other) {
      EncoderTrainConfig ec = config.encoder;
      if (ec.mode == EncoderMode::augmented) ec.augmentation_formats = {other.train.format_id};
      const ContentDataset* dev = own.dev.size() > 0 ? &own.dev : nullptr;
      return train_content_encoder({&own.train, dev, &other.train}, mapper, ec);
    };
    ContentEncoder ea = fit(p.a, p.b);
    ContentEncoder eb = fit(p.b, p.a);
    out.reports.push_back(evaluate_supervised(ea, mapper, p.a.test));
    out.reports.push_back(evaluate_supervised(eb, mapper, p.b.test));
    out.reports.push_back(evaluate_zero_shot(eb, mapper, p.a.test));
    out.reports.push_back(evaluate_zero_shot(ea, mapper, p.b.test));
    out.reports.push_back(evaluate_mapping(mapper, p.test_mapping, false));
    out.reports.push_back(evaluate_mapping(mapper, p.test_mapping, true));
    out.encoders.push_back(std::move(ea));
    out.encoders.push_back(std::move(eb));
  }
  return out;
}

} // namespace emoe
