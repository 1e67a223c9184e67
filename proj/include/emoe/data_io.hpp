#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "emoe/content_encoder.hpp"
#include "emoe/errors.hpp"
#include "emoe/label_format.hpp"
#include "emoe/log.hpp"
#include "emoe/mapper.hpp"
#include "emoe/tensor.hpp"

namespace emoe {

// ---------------------------------------------------------------------------
// Small text helpers

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

/// One CSV record. Fields may be double-quoted; "" inside quotes is a quote.
inline std::vector<std::string> parse_csv_line(const std::string& line, std::size_t line_no,
                                               const std::string& path) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      if (!trim(cur).empty())
        throw ParseError(path + ":" + std::to_string(line_no) + ": stray quote in field");
      cur.clear();
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ParseError(path + ":" + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

inline Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  return gather_rows(m, rows);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Embedding tables

/// Token to feature-vector table. Vectors are held at binary32 precision.
class EmbeddingTable {
public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  void add(const std::string& token, std::span<const double> values) {
    if (values.size() != dim_)
      throw DimensionError("embedding for '" + token + "' has width " +
                           std::to_string(values.size()) + ", table width is " +
                           std::to_string(dim_));
    if (index_.count(token)) throw ValidationError("duplicate embedding token '" + token + "'");
    index_.emplace(token, tokens_.size());
    tokens_.push_back(token);
    for (double v : values) store_.push_back(static_cast<float>(v));
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  /// Exact lookup, then optionally the lowercased token.
  std::optional<Vector> find(const std::string& token, bool lowercase_fallback = false) const {
    auto it = index_.find(token);
    if (it == index_.end() && lowercase_fallback) it = index_.find(detail::lowercase(token));
    if (it == index_.end()) return std::nullopt;
    const float* p = store_.data() + it->second * dim_;
    return Vector(p, p + dim_);
  }

private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> store_;
};

/// Reads a whitespace-separated text table: an optional "<count> <dim>"
/// header, then one "<token> <v1> ... <vdim>" line per token. Without a
/// header the width of the first line sets the dimension. When `keep` is
/// given, other tokens are skipped (after their line is checked).
inline EmbeddingTable load_embedding_table(const std::string& path,
                                           const std::unordered_set<std::string>* keep = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding table " + path);
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared_count, dim;
  std::size_t rows = 0;
  EmbeddingTable table;
  auto fail = [&](const std::string& msg) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (line_no == 1 && tok.size() == 2 && !dim) {
      std::size_t c = 0, d = 0;
      auto r1 = std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), c);
      auto r2 = std::from_chars(tok[1].data(), tok[1].data() + tok[1].size(), d);
      if (r1.ec == std::errc() && r1.ptr == tok[0].data() + tok[0].size() &&
          r2.ec == std::errc() && r2.ptr == tok[1].data() + tok[1].size()) {
        if (d == 0) fail("header declares dimension 0");
        declared_count = c;
        dim = d;
        table = EmbeddingTable(d);
        continue;
      }
    }
    if (tok.size() < 2) fail("expected a token followed by values");
    if (!dim) {
      dim = tok.size() - 1;
      table = EmbeddingTable(*dim);
    }
    if (tok.size() - 1 != *dim)
      fail("expected " + std::to_string(*dim) + " values, found " +
           std::to_string(tok.size() - 1));
    values.clear();
    for (std::size_t i = 1; i < tok.size(); ++i) {
      auto v = detail::parse_double(tok[i]);
      if (!v || !std::isfinite(*v)) fail("bad number '" + tok[i] + "'");
      values.push_back(*v);
    }
    ++rows;
    if (keep != nullptr && !keep->count(tok[0])) continue;
    if (table.contains(tok[0])) fail("duplicate token '" + tok[0] + "'");
    table.add(tok[0], values);
  }
  if (!dim) throw ParseError(path + ": embedding table is empty");
  if (declared_count && *declared_count != rows)
    throw ParseError(path + ": header declares " + std::to_string(*declared_count) +
                     " vectors, file has " + std::to_string(rows));
  return table;
}

inline void write_embedding_table(const std::string& path, const std::vector<std::string>& tokens,
                                  const Matrix& vectors) {
  if (tokens.size() != vectors.rows())
    throw DimensionError("write_embedding_table: token and vector counts differ");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(9);
  out << tokens.size() << ' ' << vectors.cols() << '\n';
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out << tokens[i];
    for (double v : vectors.row(i)) out << ' ' << static_cast<float>(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Dataset manifests

/// Key-value description of one labelled dataset.
///
///   id = en1
///   domain = words-en
///   format = VAD
///   data = en1.csv
///   scale.Valence = 1,9
///   split = 8,1,1
///   features = vectors.txt
///   lowercase_fallback = true
///   registry = formats.txt
///
/// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::string id;
  std::string domain;
  std::string format_id;
  std::string data_path;
  std::vector<VariableScale> scales;
  std::array<double, 3> split{8, 1, 1};
  std::string features_path;
  bool lowercase_fallback = false;
  std::string registry_path;
};

namespace detail {
inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

inline std::array<double, 3> parse_ratios(const std::string& s, const std::string& where) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw ConfigError(where + ": split needs three ratios, got '" + s + "'");
  std::array<double, 3> r{};
  for (std::size_t i = 0; i < 3; ++i) {
    auto v = parse_double(parts[i]);
    if (!v || !(*v > 0.0) || !std::isfinite(*v))
      throw ConfigError(where + ": split ratios must be positive numbers, got '" + s + "'");
    r[i] = *v;
  }
  return r;
}

inline bool parse_bool(const std::string& s, const std::string& where) {
  const std::string t = lowercase(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(where + ": expected a boolean, got '" + s + "'");
}
} // namespace detail

inline DatasetManifest parse_manifest(std::istream& in, const std::string& name = "manifest",
                                      const std::string& base_dir = "") {
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) throw ParseError(where + ": duplicate key '" + key + "'");
    if (key == "id") m.id = value;
    else if (key == "domain") m.domain = value;
    else if (key == "format") m.format_id = value;
    else if (key == "data") m.data_path = detail::resolve_path(base_dir, value);
    else if (key == "features") m.features_path = detail::resolve_path(base_dir, value);
    else if (key == "registry") m.registry_path = detail::resolve_path(base_dir, value);
    else if (key == "split") m.split = detail::parse_ratios(value, where);
    else if (key == "lowercase_fallback") m.lowercase_fallback = detail::parse_bool(value, where);
    else if (key.rfind("scale.", 0) == 0 && key.size() > 6) {
      const auto parts = detail::split(value, ',');
      std::optional<double> lo, hi;
      if (parts.size() == 2) {
        lo = detail::parse_double(parts[0]);
        hi = detail::parse_double(parts[1]);
      }
      if (!lo || !hi || !(*lo < *hi))
        throw ParseError(where + ": scale needs 'min,max' with min < max");
      m.scales.push_back({key.substr(6), *lo, *hi});
    } else {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
  if (m.id.empty()) throw ConfigError(name + ": missing 'id'");
  if (m.format_id.empty()) throw ConfigError(name + ": missing 'format'");
  if (m.data_path.empty()) throw ConfigError(name + ": missing 'data'");
  if (m.domain.empty()) m.domain = m.id;
  return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  return parse_manifest(in, path, std::filesystem::path(path).parent_path().string());
}

/// Checks the manifest against a registry: the format exists and every
/// variable of a regression format has a source scale.
inline void validate_manifest(const DatasetManifest& m, const FormatRegistry& reg) {
  if (!reg.contains(m.format_id))
    throw RegistryError("manifest " + m.id + " references unknown format " + m.format_id);
  const auto& f = reg.find(m.format_id);
  if (f.problem() != Problem::regression) return;
  for (const auto& v : f.variables()) detail::scale_for(m.scales, v, f.id());
  for (const auto& s : m.scales)
    if (!f.index_of(s.variable))
      throw ConfigError("manifest " + m.id + " has a scale for unknown variable " + f.id() + ":" +
                        s.variable);
}

inline void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "id = " << m.id << "\ndomain = " << m.domain << "\nformat = " << m.format_id
      << "\ndata = " << m.data_path << '\n';
  for (const auto& s : m.scales)
    out << "scale." << s.variable << " = " << s.source_min << ',' << s.source_max << '\n';
  out << "split = " << m.split[0] << ',' << m.split[1] << ',' << m.split[2] << '\n';
  if (!m.features_path.empty()) out << "features = " << m.features_path << '\n';
  if (m.lowercase_fallback) out << "lowercase_fallback = true\n";
  if (!m.registry_path.empty()) out << "registry = " << m.registry_path << '\n';
}

// ---------------------------------------------------------------------------
// Lexicons

/// Reads the labelled rows of a lexicon and normalizes them. The returned
/// dataset has zero-width features; load_lexicon attaches them.
inline ContentDataset load_label_table(const std::string& path, const DatasetManifest& manifest,
                                       const FormatRegistry& reg) {
  validate_manifest(manifest, reg);
  const auto& f = reg.find(manifest.format_id);
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::parse_csv_line(line, line_no, path);
      break;
    }
  }
  if (header.empty()) throw ParseError(path + ":1: lexicon file is empty");
  if (header[0] != "id")
    throw ParseError(path + ":" + std::to_string(line_no) + ": first column must be 'id'");
  const bool has_text = header.size() > 1 && header[1] == "text";
  const std::size_t first_var = has_text ? 2 : 1;
  std::vector<std::string> vars(header.begin() + static_cast<std::ptrdiff_t>(first_var),
                                header.end());
  if (vars != f.variables())
    throw ValidationError("lexicon " + path + " has variables [" + detail::join(vars, ", ") +
                          "] but manifest " + manifest.id + " (format " + f.id() +
                          ") expects [" + detail::join(f.variables(), ", ") + "]");

  ContentDataset ds;
  ds.id = manifest.id;
  ds.domain = manifest.domain;
  ds.format_id = f.id();
  std::vector<double> flat;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::parse_csv_line(line, line_no, path);
    auto fail = [&](const std::string& msg) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (fields.size() != header.size())
      fail("expected " + std::to_string(header.size()) + " fields, found " +
           std::to_string(fields.size()));
    if (fields[0].empty()) fail("empty id");
    if (!ids.insert(fields[0]).second) fail("duplicate id '" + fields[0] + "'");
    Vector raw;
    for (std::size_t i = first_var; i < fields.size(); ++i) {
      auto v = detail::parse_double(fields[i]);
      if (!v || !std::isfinite(*v)) fail("bad number '" + fields[i] + "' for " + header[i]);
      raw.push_back(*v);
    }
    EmotionLabel label;
    try {
      label = normalize(raw, manifest.scales, f);
    } catch (const ValidationError& e) {
      fail(e.what());
    }
    ds.ids.push_back(fields[0]);
    if (has_text) ds.texts.push_back(fields[1]);
    flat.insert(flat.end(), label.values.begin(), label.values.end());
  }
  ds.labels = Matrix(ds.ids.size(), f.arity(), std::move(flat));
  ds.features = Matrix(ds.ids.size(), 0);
  ds.normalized = true;
  return ds;
}

/// Loads a lexicon and resolves each row's id (or text, when present)
/// through the embedding table. Rows whose token is missing are dropped and
/// counted; more than half missing is a coverage error.
inline ContentDataset load_lexicon(const std::string& path, const DatasetManifest& manifest,
                                   const FormatRegistry& reg, const EmbeddingTable& table,
                                   std::size_t* dropped = nullptr) {
  ContentDataset all = load_label_table(path, manifest, reg);
  if (all.size() == 0) throw ParseError(path + ": lexicon has no rows");
  std::vector<std::size_t> keep;
  std::vector<double> feats;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::string& token = all.texts.empty() ? all.ids[i] : all.texts[i];
    if (auto v = table.find(token, manifest.lowercase_fallback)) {
      keep.push_back(i);
      feats.insert(feats.end(), v->begin(), v->end());
    }
  }
  const std::size_t missed = all.size() - keep.size();
  if (2 * missed > all.size())
    throw CoverageError("lexicon " + manifest.id + ": " + std::to_string(missed) + " of " +
                        std::to_string(all.size()) + " tokens missing from the embedding table");
  if (missed > 0)
    warn("lexicon " + manifest.id + ": dropped " + std::to_string(missed) +
         " rows without an embedding");
  if (dropped != nullptr) *dropped = missed;

  ContentDataset ds;
  ds.id = all.id;
  ds.domain = all.domain;
  ds.format_id = all.format_id;
  ds.normalized = true;
  for (std::size_t i : keep) {
    ds.ids.push_back(all.ids[i]);
    if (!all.texts.empty()) ds.texts.push_back(all.texts[i]);
  }
  ds.labels = detail::select_rows(all.labels, keep);
  ds.features = Matrix(keep.size(), table.dim(), std::move(feats));
  return ds;
}

/// Loads the dataset a manifest describes, reading the embedding table it
/// names (restricted to the tokens the lexicon needs).
inline ContentDataset load_dataset(const DatasetManifest& manifest, const FormatRegistry& reg,
                                   std::size_t* dropped = nullptr) {
  if (manifest.features_path.empty()) return load_label_table(manifest.data_path, manifest, reg);
  const ContentDataset labels = load_label_table(manifest.data_path, manifest, reg);
  std::unordered_set<std::string> wanted;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& t = labels.texts.empty() ? labels.ids[i] : labels.texts[i];
    wanted.insert(t);
    if (manifest.lowercase_fallback) wanted.insert(detail::lowercase(t));
  }
  const EmbeddingTable table = load_embedding_table(manifest.features_path, &wanted);
  return load_lexicon(manifest.data_path, manifest, reg, table, dropped);
}

/// Writes labels that are already on the format's target scale. Callers
/// pair the file with a manifest whose scales equal the target interval.
inline void write_lexicon(const std::string& path, const ContentDataset& ds,
                          const FormatRegistry& reg) {
  const auto& f = reg.find(ds.format_id);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "id";
  if (!ds.texts.empty()) out << ",text";
  for (const auto& v : f.variables()) out << ',' << detail::csv_field(v);
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << detail::csv_field(ds.ids[i]);
    if (!ds.texts.empty()) out << ',' << detail::csv_field(ds.texts[i]);
    for (double v : ds.labels.row(i)) out << ',' << v;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Subsets and splits

/// Rows of `ds` whose ids are in `keep`, in the dataset's order.
inline ContentDataset subset(const ContentDataset& ds, const std::set<std::string>& keep,
                             Split tag) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (keep.count(ds.ids[i])) rows.push_back(i);
  ContentDataset out;
  out.id = ds.id;
  out.domain = ds.domain;
  out.format_id = ds.format_id;
  out.normalized = ds.normalized;
  out.split = tag;
  for (std::size_t r : rows) {
    out.ids.push_back(ds.ids[r]);
    if (!ds.texts.empty()) out.texts.push_back(ds.texts[r]);
  }
  out.features = detail::select_rows(ds.features, rows);
  out.labels = detail::select_rows(ds.labels, rows);
  return out;
}

struct IdSplit {
  std::set<std::string> train, dev, test;
};

/// Seeded split of a set of ids. Counts are rounded from the ratios, with at
/// least one item in dev and test; train takes the remainder.
inline IdSplit split_ids(const std::set<std::string>& ids, const std::array<double, 3>& ratios,
                         std::uint64_t seed) {
  for (double r : ratios)
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("split ratios must be positive");
  const std::size_t n = ids.size();
  if (n < 3) throw ValidationError("cannot split fewer than 3 items (got " +
                                   std::to_string(n) + ")");
  const double total = ratios[0] + ratios[1] + ratios[2];
  auto count = [&](double r) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(
                                        std::llround(static_cast<double>(n) * r / total)));
  };
  std::size_t n_dev = count(ratios[1]), n_test = count(ratios[2]);
  while (n_dev + n_test >= n) (n_dev >= n_test ? n_dev : n_test)--;
  std::vector<std::string> order(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(order);
  IdSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_dev) out.dev.insert(order[i]);
    else if (i < n_dev + n_test) out.test.insert(order[i]);
    else out.train.insert(order[i]);
  }
  return out;
}

struct DatasetSplit {
  ContentDataset train, dev, test;
};

inline DatasetSplit apply_split(const ContentDataset& ds, const IdSplit& s) {
  return {subset(ds, s.train, Split::train), subset(ds, s.dev, Split::dev),
          subset(ds, s.test, Split::test)};
}

inline DatasetSplit split_dataset(const ContentDataset& ds, const std::array<double, 3>& ratios,
                                  std::uint64_t seed) {
  const std::set<std::string> ids(ds.ids.begin(), ds.ids.end());
  if (ids.size() != ds.size()) throw ValidationError("dataset " + ds.id + " has duplicate ids");
  return apply_split(ds, split_ids(ids, ratios, seed));
}

/// Splits two datasets with one assignment over the union of their ids, so
/// an item shared by both lands in the same part of each.
inline std::pair<DatasetSplit, DatasetSplit> split_pair(const ContentDataset& a,
                                                        const ContentDataset& b,
                                                        const std::array<double, 3>& ratios,
                                                        std::uint64_t seed) {
  std::set<std::string> ids(a.ids.begin(), a.ids.end());
  ids.insert(b.ids.begin(), b.ids.end());
  const IdSplit s = split_ids(ids, ratios, seed);
  return {apply_split(a, s), apply_split(b, s)};
}

/// Double-annotated items: the id intersection of two datasets, in id order.
inline MappingDataset make_mapping_dataset(const std::string& id, const ContentDataset& a,
                                           const ContentDataset& b) {
  if (a.format_id == b.format_id)
    throw ValidationError("mapping dataset " + id + ": both datasets use format " + a.format_id);
  std::map<std::string, std::size_t> in_b;
  for (std::size_t i = 0; i < b.size(); ++i) in_b.emplace(b.ids[i], i);
  std::map<std::string, std::size_t> shared;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (in_b.count(a.ids[i])) shared.emplace(a.ids[i], i);
  std::vector<std::size_t> ra, rb;
  MappingDataset m;
  m.id = id;
  m.first_format = a.format_id;
  m.second_format = b.format_id;
  for (const auto& [key, i] : shared) {
    m.item_ids.push_back(key);
    ra.push_back(i);
    rb.push_back(in_b[key]);
  }
  m.first = detail::select_rows(a.labels, ra);
  m.second = detail::select_rows(b.labels, rb);
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic oracle

/// Two regression formats related by a fixed smooth map T:
///   SYNA = (a1, a2) on [-1, 1],   SYNB = (b1, b2, b3) on [0, 1],
///   b1 = 0.5 + 0.5 sin(pi/2 a1)
///   b2 = clip(0.5 + 0.6 a2 + 0.2 a1 a2)
///   b3 = clip(0.5 + 0.4 (a2 - a1))
/// with clip to [0, 1]. a1 and b1 are declared equivalent.
inline FormatRegistry synthetic_registry() {
  FormatRegistry r;
  r.add_format({"SYNA", {"a1", "a2"}, ValueRange::interval(-1, 1), Problem::regression});
  r.add_format({"SYNB", {"b1", "b2", "b3"}, ValueRange::interval(0, 1), Problem::regression});
  r.add_class({{"SYNA", "a1"}, {"SYNB", "b1"}});
  return r;
}

inline Vector synthetic_truth(std::span<const double> a) {
  if (a.size() != 2) throw DimensionError("synthetic_truth expects a SYNA label");
  auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {0.5 + 0.5 * std::sin(std::numbers::pi / 2.0 * a[0]),
          clip(0.5 + 0.6 * a[1] + 0.2 * a[0] * a[1]), clip(0.5 + 0.4 * (a[1] - a[0]))};
}

struct SyntheticSpec {
  std::size_t n = 2000;
  double sigma = 0.05;
  std::size_t feature_width = 32;
  double feature_noise = 0.05;
  std::uint64_t seed = 0;
};

/// Double-annotated synthetic items. `first` carries SYNA labels and
/// `second` SYNB labels for the same ids; both share one content domain whose
/// features are a fixed random linear image of the SYNA label plus noise.
struct SyntheticPair {
  FormatRegistry registry;
  MappingDataset mapping;
  ContentDataset first;
  ContentDataset second;
  Matrix projection; // feature_width x 2
};

inline SyntheticPair generate_synthetic_pair(const SyntheticSpec& spec) {
  if (spec.n == 0) throw ConfigError("synthetic pair needs n > 0");
  if (!(spec.sigma >= 0.0) || !(spec.feature_noise >= 0.0))
    throw ConfigError("synthetic noise levels must be non-negative");
  if (spec.feature_width < 2) throw ConfigError("synthetic feature width must be at least 2");
  Rng rng(spec.seed);
  Matrix proj(spec.feature_width, 2);
  for (double& x : proj.data()) x = rng.normal();

  SyntheticPair out{synthetic_registry(), {}, {}, {}, proj};
  Matrix ya(spec.n, 2), yb(spec.n, 3), feats(spec.n, spec.feature_width);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < spec.n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%05zu", i);
    ids.emplace_back(buf);
    ya(i, 0) = rng.uniform(-1.0, 1.0);
    ya(i, 1) = rng.uniform(-1.0, 1.0);
    const Vector t = synthetic_truth(ya.row(i));
    for (std::size_t k = 0; k < 3; ++k)
      yb(i, k) = std::clamp(t[k] + spec.sigma * rng.normal(), 0.0, 1.0);
    for (std::size_t j = 0; j < spec.feature_width; ++j)
      feats(i, j) = proj(j, 0) * ya(i, 0) + proj(j, 1) * ya(i, 1) +
                    spec.feature_noise * rng.normal();
  }
  auto content = [&](const std::string& id, const std::string& fmt, const Matrix& labels) {
    ContentDataset ds;
    ds.id = id;
    ds.domain = "synthetic";
    ds.format_id = fmt;
    ds.ids = ids;
    ds.features = feats;
    ds.labels = labels;
    ds.normalized = true;
    return ds;
  };
  out.first = content("synA", "SYNA", ya);
  out.second = content("synB", "SYNB", yb);
  out.mapping = make_mapping_dataset("synAB", out.first, out.second);
  return out;
}

} // namespace emoe
