#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emoe/autodiff.hpp"
#include "emoe/errors.hpp"
#include "emoe/log.hpp"

namespace emoe {

enum class Problem { regression, single_label, multi_label };

inline const char* to_string(Problem p) {
  switch (p) {
  case Problem::regression: return "regression";
  case Problem::single_label: return "single_label";
  case Problem::multi_label: return "multi_label";
  }
  return "?";
}

inline Problem parse_problem(const std::string& s) {
  if (s == "regression") return Problem::regression;
  if (s == "single_label") return Problem::single_label;
  if (s == "multi_label") return Problem::multi_label;
  throw ConfigError("unknown problem type '" + s + "'");
}

/// Closed interval [lo, hi], or the binary set {0, 1}.
struct ValueRange {
  bool binary = false;
  double lo = 0.0;
  double hi = 1.0;

  static ValueRange interval(double lo, double hi) { return {false, lo, hi}; }
  static ValueRange binary_set() { return {true, 0.0, 1.0}; }
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

class LabelFormat {
public:
  LabelFormat(std::string id, std::vector<std::string> variables, ValueRange range,
              Problem problem)
      : id_(std::move(id)), variables_(std::move(variables)), range_(range),
        problem_(problem) {
    if (id_.empty()) throw ValidationError("label format id must not be empty");
    if (variables_.empty())
      throw ValidationError("label format " + id_ + " has no variables");
    std::set<std::string> seen;
    for (const auto& v : variables_)
      if (!seen.insert(v).second)
        throw ValidationError("label format " + id_ + ": duplicate variable '" + v + "'");
    if (problem_ == Problem::regression) {
      if (range_.binary || !(range_.lo < range_.hi))
        throw ValidationError("label format " + id_ + ": regression needs an interval range");
    } else if (!range_.binary) {
      throw ValidationError("label format " + id_ + ": classification needs the {0,1} range");
    }
  }

  const std::string& id() const noexcept { return id_; }
  const std::vector<std::string>& variables() const noexcept { return variables_; }
  std::size_t arity() const noexcept { return variables_.size(); }
  const ValueRange& range() const noexcept { return range_; }
  Problem problem() const noexcept { return problem_; }

  std::optional<std::size_t> index_of(const std::string& variable) const {
    auto it = std::find(variables_.begin(), variables_.end(), variable);
    if (it == variables_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - variables_.begin());
  }

  /// z in h(x) = z(Wx).
  Activation head_activation() const noexcept {
    switch (problem_) {
    case Problem::single_label: return Activation::softmax;
    case Problem::multi_label: return Activation::sigmoid;
    case Problem::regression: break;
    }
    return Activation::identity;
  }

  Criterion criterion() const noexcept {
    switch (problem_) {
    case Problem::single_label: return Criterion::cross_entropy;
    case Problem::multi_label: return Criterion::binary_cross_entropy;
    case Problem::regression: break;
    }
    return Criterion::mse;
  }

  friend bool operator==(const LabelFormat&, const LabelFormat&) = default;

private:
  std::string id_;
  std::vector<std::string> variables_;
  ValueRange range_;
  Problem problem_;
};

struct EmotionLabel {
  std::string format_id;
  Vector values;
  friend bool operator==(const EmotionLabel&, const EmotionLabel&) = default;
};

struct VariableScale {
  std::string variable;
  double source_min = 0.0;
  double source_max = 1.0;
};

struct VariableRef {
  std::string format_id;
  std::string variable;
  std::string to_string() const { return format_id + ":" + variable; }
  friend auto operator<=>(const VariableRef&, const VariableRef&) = default;
};

inline VariableRef parse_variable_ref(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size())
    throw ConfigError("expected FORMAT:Variable, got '" + s + "'");
  return {s.substr(0, colon), s.substr(colon + 1)};
}

/// Groups of variables, across formats, that share one affective meaning.
using EquivalenceClass = std::vector<VariableRef>;

class FormatRegistry {
public:
  FormatRegistry() = default;

  void add_format(LabelFormat format) {
    if (contains(format.id()))
      throw RegistryError("duplicate label format id '" + format.id() + "'");
    formats_.push_back(std::move(format));
  }

  void add_class(EquivalenceClass cls) {
    for (const auto& ref : cls) {
      const LabelFormat& f = find(ref.format_id);
      if (!f.index_of(ref.variable))
        throw RegistryError("equivalence class references unknown variable " +
                            ref.to_string());
      for (const auto& existing : classes_)
        if (std::find(existing.begin(), existing.end(), ref) != existing.end())
          throw RegistryError(ref.to_string() + " already belongs to an equivalence class");
    }
    for (std::size_t i = 0; i < cls.size(); ++i)
      for (std::size_t j = i + 1; j < cls.size(); ++j)
        if (cls[i] == cls[j])
          throw RegistryError(cls[i].to_string() + " listed twice in one equivalence class");
    classes_.push_back(std::move(cls));
  }

  bool contains(const std::string& id) const {
    return std::any_of(formats_.begin(), formats_.end(),
                       [&](const LabelFormat& f) { return f.id() == id; });
  }

  const LabelFormat& find(const std::string& id) const {
    for (const auto& f : formats_)
      if (f.id() == id) return f;
    throw RegistryError("unknown label format '" + id + "'");
  }

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < formats_.size(); ++i)
      if (formats_[i].id() == id) return i;
    throw RegistryError("unknown label format '" + id + "'");
  }

  const std::vector<LabelFormat>& formats() const noexcept { return formats_; }
  const std::vector<EquivalenceClass>& classes() const noexcept { return classes_; }
  std::size_t size() const noexcept { return formats_.size(); }

  friend bool operator==(const FormatRegistry&, const FormatRegistry&) = default;

private:
  std::vector<LabelFormat> formats_;
  std::vector<EquivalenceClass> classes_;
};

/// The five standard formats (VA, VAD, BE5, BE7, BE8) and the nine
/// cross-format equivalence classes.
inline FormatRegistry default_registry() {
  FormatRegistry r;
  r.add_format({"VA", {"Valence", "Arousal"}, ValueRange::interval(-1, 1), Problem::regression});
  r.add_format({"VAD", {"Valence", "Arousal", "Dominance"}, ValueRange::interval(-1, 1),
                Problem::regression});
  r.add_format({"BE5", {"Joy", "Anger", "Sadness", "Fear", "Disgust"},
                ValueRange::interval(0, 1), Problem::regression});
  r.add_format({"BE7", {"Happy", "Anger", "Sad", "Fear", "Disgust", "Surprise", "Neutral"},
                ValueRange::binary_set(), Problem::single_label});
  r.add_format({"BE8",
                {"Happiness", "Anger", "Sadness", "Fear", "Disgust", "Surprise", "Neutral",
                 "Contempt"},
                ValueRange::binary_set(), Problem::single_label});

  r.add_class({{"VA", "Valence"}, {"VAD", "Valence"}});
  r.add_class({{"VA", "Arousal"}, {"VAD", "Arousal"}});
  r.add_class({{"BE5", "Joy"}, {"BE7", "Happy"}, {"BE8", "Happiness"}});
  r.add_class({{"BE5", "Anger"}, {"BE7", "Anger"}, {"BE8", "Anger"}});
  r.add_class({{"BE5", "Sadness"}, {"BE7", "Sad"}, {"BE8", "Sadness"}});
  r.add_class({{"BE5", "Fear"}, {"BE7", "Fear"}, {"BE8", "Fear"}});
  r.add_class({{"BE5", "Disgust"}, {"BE7", "Disgust"}, {"BE8", "Disgust"}});
  r.add_class({{"BE7", "Surprise"}, {"BE8", "Surprise"}});
  r.add_class({{"BE7", "Neutral"}, {"BE8", "Neutral"}});
  return r;
}

/// Throws ValidationError unless `values` is a valid label of `format`.
inline void validate_label(const LabelFormat& format, std::span<const double> values) {
  if (values.size() != format.arity())
    throw ValidationError("label for " + format.id() + " has " +
                          std::to_string(values.size()) + " values, expected " +
                          std::to_string(format.arity()));
  constexpr double tol = 1e-9;
  switch (format.problem()) {
  case Problem::regression:
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = values[i];
      if (!std::isfinite(v) || v < format.range().lo - tol || v > format.range().hi + tol)
        throw ValidationError(format.id() + ":" + format.variables()[i] + " value " +
                              std::to_string(v) + " outside the normalized range");
    }
    break;
  case Problem::single_label: {
    std::size_t ones = 0;
    bool binary = true;
    for (double v : values) {
      if (v == 1.0) ++ones;
      else if (v != 0.0) binary = false;
    }
    if (!binary || ones != 1) throw ValidationError(format.id() + " label is not a one-hot vector");
    break;
  }
  case Problem::multi_label:
    for (double v : values)
      if (v != 0.0 && v != 1.0)
        throw ValidationError(format.id() + " label contains a non-binary value");
    break;
  }
}

inline void validate_label(const LabelFormat& format, const EmotionLabel& label) {
  if (label.format_id != format.id())
    throw ValidationError("label has format " + label.format_id + ", expected " + format.id());
  validate_label(format, label.values);
}

namespace detail {
inline const VariableScale& scale_for(std::span<const VariableScale> scales,
                                      const std::string& variable, const std::string& format) {
  for (const auto& s : scales)
    if (s.variable == variable) {
      if (!(s.source_min < s.source_max))
        throw ConfigError("scale for " + format + ":" + variable +
                          " needs source_min < source_max");
      return s;
    }
  throw ConfigError("missing source scale for " + format + ":" + variable);
}
} // namespace detail

/// Min-max maps raw ratings from each variable's source scale onto the
/// format's target interval. Out-of-range raw values are clamped with a
/// warning. Classification labels are validated and passed through.
inline EmotionLabel normalize(std::span<const double> raw, std::span<const VariableScale> scales,
                              const LabelFormat& format) {
  if (raw.size() != format.arity())
    throw ValidationError("normalize: " + std::to_string(raw.size()) + " values for format " +
                          format.id() + " with " + std::to_string(format.arity()) +
                          " variables");
  EmotionLabel out{format.id(), Vector(raw.begin(), raw.end())};
  if (format.problem() != Problem::regression) {
    validate_label(format, out.values);
    return out;
  }
  const double lo = format.range().lo, hi = format.range().hi;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& s = detail::scale_for(scales, format.variables()[i], format.id());
    double v = raw[i];
    if (!std::isfinite(v))
      throw ValidationError("normalize: non-finite value for " + format.variables()[i]);
    if (v < s.source_min || v > s.source_max) {
      warn("clamping " + format.id() + ":" + format.variables()[i] + " value " +
           std::to_string(v) + " into [" + std::to_string(s.source_min) + ", " +
           std::to_string(s.source_max) + "]");
      v = std::clamp(v, s.source_min, s.source_max);
    }
    out.values[i] = lo + (v - s.source_min) * (hi - lo) / (s.source_max - s.source_min);
  }
  return out;
}

/// Inverse of normalize for regression formats.
inline Vector denormalize(const EmotionLabel& label, std::span<const VariableScale> scales,
                          const LabelFormat& format) {
  if (format.problem() != Problem::regression)
    throw UnsupportedError("denormalize: format " + format.id() + " is not a regression format");
  if (label.values.size() != format.arity())
    throw ValidationError("denormalize: label arity does not match format " + format.id());
  const double lo = format.range().lo, hi = format.range().hi;
  Vector out(label.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = detail::scale_for(scales, format.variables()[i], format.id());
    out[i] = s.source_min + (label.values[i] - lo) * (s.source_max - s.source_min) / (hi - lo);
  }
  return out;
}

/// Input vector fed to a label encoder. All problem types pass values
/// through after validation.
inline Vector encode_input(const LabelFormat& format, const EmotionLabel& label) {
  validate_label(format, label);
  return label.values;
}

/// One-hot label for class `index` of a single-label format.
inline EmotionLabel one_hot(const LabelFormat& format, std::size_t index) {
  if (index >= format.arity())
    throw ValidationError("class index out of range for format " + format.id());
  EmotionLabel l{format.id(), Vector(format.arity(), 0.0)};
  l.values[index] = 1.0;
  return l;
}

/// Parses a registry description. One directive per line, '#' starts a
/// comment:
///
///   format <id> regression <lo> <hi> <var>...
///   format <id> single_label|multi_label <var>...
///   class <FORMAT:Variable> <FORMAT:Variable>...
inline FormatRegistry parse_registry(std::istream& in) {
  FormatRegistry reg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string directive;
    if (!(ls >> directive)) continue;
    auto fail = [&](const std::string& msg) {
      throw ParseError("registry line " + std::to_string(line_no) + ": " + msg);
    };
    try {
      if (directive == "format") {
        std::string id, problem_s;
        if (!(ls >> id >> problem_s)) fail("expected 'format <id> <problem> ...'");
        const Problem problem = parse_problem(problem_s);
        ValueRange range = ValueRange::binary_set();
        if (problem == Problem::regression) {
          double lo, hi;
          if (!(ls >> lo >> hi)) fail("regression format needs '<lo> <hi>'");
          range = ValueRange::interval(lo, hi);
        }
        std::vector<std::string> vars;
        for (std::string v; ls >> v;) vars.push_back(v);
        reg.add_format(LabelFormat(id, std::move(vars), range, problem));
      } else if (directive == "class") {
        EquivalenceClass cls;
        for (std::string ref; ls >> ref;) cls.push_back(parse_variable_ref(ref));
        if (cls.size() < 2) fail("an equivalence class needs at least two members");
        reg.add_class(std::move(cls));
      } else {
        fail("unknown directive '" + directive + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  if (reg.size() == 0) throw ParseError("registry defines no label formats");
  return reg;
}

inline FormatRegistry load_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open registry file " + path);
  return parse_registry(in);
}

inline void write_registry(std::ostream& out, const FormatRegistry& reg) {
  out.precision(17);
  for (const auto& f : reg.formats()) {
    out << "format " << f.id() << ' ' << to_string(f.problem());
    if (f.problem() == Problem::regression) out << ' ' << f.range().lo << ' ' << f.range().hi;
    for (const auto& v : f.variables()) out << ' ' << v;
    out << '\n';
  }
  for (const auto& c : reg.classes()) {
    out << "class";
    for (const auto& r : c) out << ' ' << r.to_string();
    out << '\n';
  }
}

} // namespace emoe
