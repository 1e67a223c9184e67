#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emoe/autodiff.hpp"
#include "emoe/errors.hpp"
#include "emoe/ffn.hpp"
#include "emoe/label_format.hpp"
#include "emoe/optim.hpp"
#include "emoe/tensor.hpp"

namespace emoe {

/// A point in the shared emotion space.
using EmotionEmbedding = Vector;

struct MapperArchitecture {
  std::size_t embedding_dim = 100;
  std::vector<std::size_t> encoder_hidden{128, 128};
};

/// Label encoder g and prediction head h for one label format. The head is
/// a bias-free weight matrix of shape (variables x d).
struct FormatComponents {
  FeedForward encoder;
  Parameter head;
};

/// Location of one head row: (format index in the registry, variable index).
struct HeadRowRef {
  std::size_t format = 0;
  std::size_t row = 0;
};

/// Label encoders and prediction heads for every registered format, all
/// meeting in one d-dimensional space. Datasets that share a format share
/// that format's components.
class MultiWayMapper {
public:
  MultiWayMapper(FormatRegistry registry, const MapperArchitecture& arch, std::uint64_t seed)
      : registry_(std::move(registry)), dim_(arch.embedding_dim), seed_(seed) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
    Rng rng(seed);
    for (const auto& f : registry_.formats()) {
      FeedForward enc(f.arity(), arch.encoder_hidden, dim_, rng);
      const double limit = std::sqrt(6.0 / static_cast<double>(f.arity() + dim_));
      Matrix w(f.arity(), dim_);
      for (double& x : w.data()) x = rng.uniform(-limit, limit);
      components_.push_back({std::move(enc), Parameter(std::move(w))});
    }
    resolve_sharing_pairs();
  }

  MultiWayMapper(FormatRegistry registry, std::size_t dim,
                 std::vector<FormatComponents> components, std::uint64_t seed = 0)
      : registry_(std::move(registry)), dim_(dim), seed_(seed),
        components_(std::move(components)) {
    if (components_.size() != registry_.size())
      throw DimensionError("mapper needs one encoder/head per registered format");
    for (std::size_t i = 0; i < components_.size(); ++i) {
      const auto& f = registry_.formats()[i];
      const auto& c = components_[i];
      if (c.encoder.input_width() != f.arity() || c.encoder.output_width() != dim_)
        throw DimensionError("label encoder for " + f.id() + " has wrong widths");
      if (c.head.value.rows() != f.arity() || c.head.value.cols() != dim_)
        throw DimensionError("head for " + f.id() + " has shape " +
                             c.head.value.shape_string());
    }
    resolve_sharing_pairs();
  }

  const FormatRegistry& registry() const noexcept { return registry_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }

  const FormatComponents& components(const std::string& format_id) const {
    return components_[registry_.index_of(format_id)];
  }
  FormatComponents& components(const std::string& format_id) {
    return components_[registry_.index_of(format_id)];
  }
  const std::vector<FormatComponents>& all_components() const noexcept { return components_; }
  std::vector<FormatComponents>& all_components() noexcept { return components_; }

  /// Unordered pairs of equivalent head rows.
  const std::vector<std::pair<HeadRowRef, HeadRowRef>>& sharing_pairs() const noexcept {
    return sharing_pairs_;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& c : components_) {
      for (Parameter* p : c.encoder.parameters()) out.push_back(p);
      out.push_back(&c.head);
    }
    return out;
  }

  void round_to_float() {
    for (auto& c : components_) {
      c.encoder.round_to_float();
      emoe::round_to_float(c.head.value);
    }
  }

  friend bool operator==(const MultiWayMapper& a, const MultiWayMapper& b) {
    if (!(a.registry_ == b.registry_) || a.dim_ != b.dim_) return false;
    for (std::size_t i = 0; i < a.components_.size(); ++i)
      if (!(a.components_[i].encoder == b.components_[i].encoder) ||
          a.components_[i].head.value != b.components_[i].head.value)
        return false;
    return true;
  }

private:
  void resolve_sharing_pairs() {
    sharing_pairs_.clear();
    for (const auto& cls : registry_.classes()) {
      std::vector<HeadRowRef> refs;
      for (const auto& v : cls) {
        const std::size_t fi = registry_.index_of(v.format_id);
        refs.push_back({fi, *registry_.formats()[fi].index_of(v.variable)});
      }
      for (std::size_t i = 0; i < refs.size(); ++i)
        for (std::size_t j = i + 1; j < refs.size(); ++j)
          sharing_pairs_.emplace_back(refs[i], refs[j]);
    }
  }

  FormatRegistry registry_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<FormatComponents> components_;
  std::vector<std::pair<HeadRowRef, HeadRowRef>> sharing_pairs_;
};

// ---------------------------------------------------------------------------
// Inference

/// Label encoder over a batch (one label per row).
inline Matrix encode_labels(const MultiWayMapper& mapper, const std::string& format_id,
                            const Matrix& labels) {
  const auto& f = mapper.registry().find(format_id);
  if (labels.cols() != f.arity())
    throw DimensionError("encode_labels: " + std::to_string(labels.cols()) +
                         " columns for format " + format_id);
  return mapper.components(format_id).encoder.forward(labels);
}

inline EmotionEmbedding encode_label(const MultiWayMapper& mapper, const EmotionLabel& label) {
  const auto& f = mapper.registry().find(label.format_id);
  const Vector input = encode_input(f, label);
  return encode_labels(mapper, f.id(), Matrix::row_vector(input)).data();
}

/// Head logits Wx for a batch of embeddings.
inline Matrix head_logits(const MultiWayMapper& mapper, const std::string& format_id,
                          const Matrix& embeddings) {
  if (embeddings.cols() != mapper.dim())
    throw DimensionError("embedding width " + std::to_string(embeddings.cols()) +
                         " does not match mapper dimension " + std::to_string(mapper.dim()));
  return affine(embeddings, mapper.components(format_id).head.value);
}

/// z(Wx) for a batch. Single-label formats yield probability rows.
inline Matrix decode_embeddings(const MultiWayMapper& mapper, const std::string& format_id,
                                const Matrix& embeddings) {
  const auto& f = mapper.registry().find(format_id);
  return activate(f.head_activation(), head_logits(mapper, format_id, embeddings));
}

inline EmotionLabel decode_embedding(const MultiWayMapper& mapper, const EmotionEmbedding& e,
                                     const std::string& target_format) {
  return {target_format, decode_embeddings(mapper, target_format, Matrix::row_vector(e)).data()};
}

inline EmotionLabel translate(const MultiWayMapper& mapper, const EmotionLabel& label,
                              const std::string& target_format) {
  return decode_embedding(mapper, encode_label(mapper, label), target_format);
}

inline Matrix translate_batch(const MultiWayMapper& mapper, const std::string& source_format,
                              const Matrix& labels, const std::string& target_format) {
  return decode_embeddings(mapper, target_format, encode_labels(mapper, source_format, labels));
}

/// Head rows of a format, in variable order.
inline std::vector<std::pair<std::string, Vector>> head_rows(const MultiWayMapper& mapper,
                                                             const std::string& format_id) {
  const auto& f = mapper.registry().find(format_id);
  const Matrix& w = mapper.components(format_id).head.value;
  std::vector<std::pair<std::string, Vector>> out;
  for (std::size_t r = 0; r < f.arity(); ++r) out.emplace_back(f.variables()[r], w.row_copy(r));
  return out;
}

// ---------------------------------------------------------------------------
// Training objectives

/// Loss of predicted head output against gold labels of a format. The
/// prediction is taken as logits; the format's activation is folded into
/// the criterion (softmax inside cross entropy, sigmoid before BCE).
inline double format_loss(const LabelFormat& f, const Matrix& gold, const Matrix& logits) {
  switch (f.problem()) {
  case Problem::regression: return loss(Criterion::mse, logits, gold);
  case Problem::single_label: return loss(Criterion::cross_entropy, logits, gold);
  case Problem::multi_label:
    return loss(Criterion::binary_cross_entropy, activate(Activation::sigmoid, logits), gold);
  }
  return 0.0;
}

inline Graph::Var record_format_loss(Graph& g, const LabelFormat& f, const Matrix& gold,
                                     Graph::Var logits, bool soft_targets = false) {
  switch (f.problem()) {
  case Problem::regression: return g.loss(Criterion::mse, logits, gold);
  case Problem::single_label:
    return soft_targets ? g.soft_cross_entropy(logits, gold)
                        : g.loss(Criterion::cross_entropy, logits, gold);
  case Problem::multi_label:
    return g.loss(Criterion::binary_cross_entropy, g.activation(Activation::sigmoid, logits),
                  gold);
  }
  return logits;
}

/// Per-format weights balancing loss criteria; missing entries weigh 1.
using FormatWeights = std::map<std::string, double>;

inline double weight_for(const FormatWeights& w, const std::string& format_id) {
  auto it = w.find(format_id);
  return it == w.end() ? 1.0 : it->second;
}

struct PairLosses {
  double map = 0.0;
  double autoenc = 0.0;
  double sim = 0.0;
};

namespace detail {
inline void check_pair(const MultiWayMapper& mapper, const std::string& f1, const Matrix& y1,
                       const std::string& f2, const Matrix& y2) {
  if (f1 == f2) throw ValidationError("mapping pair needs two distinct formats, got " + f1 + " twice");
  const auto& a = mapper.registry().find(f1);
  const auto& b = mapper.registry().find(f2);
  if (y1.rows() != y2.rows() || y1.rows() == 0)
    throw DimensionError("mapping pair needs equally many (>0) labels on both sides");
  if (y1.cols() != a.arity() || y2.cols() != b.arity())
    throw DimensionError("label widths do not match formats " + f1 + "/" + f2);
}
} // namespace detail

/// L_map, L_auto and L_sim for a batch of matched labels, by plain forward
/// evaluation.
inline PairLosses pair_losses(const MultiWayMapper& mapper, const std::string& f1,
                              const Matrix& y1, const std::string& f2, const Matrix& y2,
                              double alpha1 = 1.0, double alpha2 = 1.0) {
  detail::check_pair(mapper, f1, y1, f2, y2);
  const auto& a = mapper.registry().find(f1);
  const auto& b = mapper.registry().find(f2);
  const Matrix e1 = encode_labels(mapper, f1, y1);
  const Matrix e2 = encode_labels(mapper, f2, y2);
  PairLosses out;
  out.map = alpha1 * format_loss(a, y1, head_logits(mapper, f1, e2)) +
            alpha2 * format_loss(b, y2, head_logits(mapper, f2, e1));
  out.autoenc = alpha1 * format_loss(a, y1, head_logits(mapper, f1, e1)) +
                alpha2 * format_loss(b, y2, head_logits(mapper, f2, e2));
  out.sim = loss(Criterion::mse, e1, e2);
  return out;
}

inline double mapping_loss(const MultiWayMapper& mapper, const EmotionLabel& y1,
                           const EmotionLabel& y2, double alpha1 = 1.0, double alpha2 = 1.0) {
  validate_label(mapper.registry().find(y1.format_id), y1);
  validate_label(mapper.registry().find(y2.format_id), y2);
  return pair_losses(mapper, y1.format_id, Matrix::row_vector(y1.values), y2.format_id,
                     Matrix::row_vector(y2.values), alpha1, alpha2)
      .map;
}

inline double autoencoder_loss(const MultiWayMapper& mapper, const EmotionLabel& y1,
                               const EmotionLabel& y2, double alpha1 = 1.0,
                               double alpha2 = 1.0) {
  validate_label(mapper.registry().find(y1.format_id), y1);
  validate_label(mapper.registry().find(y2.format_id), y2);
  return pair_losses(mapper, y1.format_id, Matrix::row_vector(y1.values), y2.format_id,
                     Matrix::row_vector(y2.values), alpha1, alpha2)
      .autoenc;
}

inline double similarity_loss(const MultiWayMapper& mapper, const EmotionLabel& y1,
                              const EmotionLabel& y2) {
  validate_label(mapper.registry().find(y1.format_id), y1);
  validate_label(mapper.registry().find(y2.format_id), y2);
  return pair_losses(mapper, y1.format_id, Matrix::row_vector(y1.values), y2.format_id,
                     Matrix::row_vector(y2.values))
      .sim;
}

/// Sum over equivalence classes and unordered pairs {u, v} of head rows of
/// 1 - cos(u, v).
inline double parameter_sharing_loss(const MultiWayMapper& mapper) {
  double total = 0.0;
  const auto& comps = mapper.all_components();
  for (const auto& [a, b] : mapper.sharing_pairs()) {
    const auto u = comps[a.format].head.value.row(a.row);
    const auto v = comps[b.format].head.value.row(b.row);
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0)
      throw DegenerateError("parameter sharing: equivalence class references a zero head row");
    total += 1.0 - dot(u, v) / (nu * nv);
  }
  return total;
}

struct RecordedPairLosses {
  Graph::Var map;
  Graph::Var autoenc;
  Graph::Var sim;
};

/// Records the three local objectives for one batch on `g`.
inline RecordedPairLosses record_pair_losses(Graph& g, MultiWayMapper& mapper,
                                             const std::string& f1, const Matrix& y1,
                                             const std::string& f2, const Matrix& y2,
                                             double alpha1 = 1.0, double alpha2 = 1.0) {
  detail::check_pair(mapper, f1, y1, f2, y2);
  const auto& a = mapper.registry().find(f1);
  const auto& b = mapper.registry().find(f2);
  auto& ca = mapper.components(f1);
  auto& cb = mapper.components(f2);
  const Graph::Var e1 = ca.encoder.forward(g, g.input(y1));
  const Graph::Var e2 = cb.encoder.forward(g, g.input(y2));
  const Graph::Var ha = g.param(ca.head);
  const Graph::Var hb = g.param(cb.head);
  const Graph::Var y11 = g.affine(e1, ha);
  const Graph::Var y12 = g.affine(e1, hb);
  const Graph::Var y21 = g.affine(e2, ha);
  const Graph::Var y22 = g.affine(e2, hb);
  const std::pair<double, Graph::Var> map_terms[] = {
      {alpha1, record_format_loss(g, a, y1, y21)}, {alpha2, record_format_loss(g, b, y2, y12)}};
  const std::pair<double, Graph::Var> auto_terms[] = {
      {alpha1, record_format_loss(g, a, y1, y11)}, {alpha2, record_format_loss(g, b, y2, y22)}};
  return {g.weighted_sum(map_terms), g.weighted_sum(auto_terms), g.mse(e1, e2)};
}

inline Graph::Var record_parameter_sharing_loss(Graph& g, MultiWayMapper& mapper) {
  auto& comps = mapper.all_components();
  std::vector<Graph::Var> heads;
  heads.reserve(comps.size());
  for (auto& c : comps) heads.push_back(g.param(c.head));
  std::vector<Graph::Var> terms;
  for (const auto& [a, b] : mapper.sharing_pairs())
    terms.push_back(g.cosine_distance(g.row(heads[a.format], a.row), g.row(heads[b.format], b.row)));
  return g.sum(terms);
}

// ---------------------------------------------------------------------------
// Datasets and training

/// Two aligned label lists in distinct formats; row i on both sides
/// describes the same item.
struct MappingDataset {
  std::string id;
  std::string first_format;
  std::string second_format;
  Matrix first;
  Matrix second;
  std::vector<std::string> item_ids;

  std::size_t size() const noexcept { return first.rows(); }
};

inline void validate_mapping_dataset(const FormatRegistry& reg, const MappingDataset& ds) {
  if (ds.first_format == ds.second_format)
    throw ValidationError("mapping dataset " + ds.id + " uses format " + ds.first_format +
                          " on both sides");
  const auto& a = reg.find(ds.first_format);
  const auto& b = reg.find(ds.second_format);
  if (ds.first.rows() != ds.second.rows())
    throw ValidationError("mapping dataset " + ds.id + " has unequal side lengths");
  if (ds.first.rows() == 0) throw ValidationError("mapping dataset " + ds.id + " is empty");
  if (!ds.item_ids.empty() && ds.item_ids.size() != ds.first.rows())
    throw ValidationError("mapping dataset " + ds.id + " has wrong number of item ids");
  if (ds.first.cols() != a.arity() || ds.second.cols() != b.arity())
    throw DimensionError("mapping dataset " + ds.id + " label widths do not match formats");
  for (std::size_t i = 0; i < ds.first.rows(); ++i) {
    validate_label(a, ds.first.row(i));
    validate_label(b, ds.second.row(i));
  }
}

/// Relative weights of the four objectives in the total loss.
struct ObjectiveWeights {
  double map = 1.0;
  double autoenc = 1.0;
  double sim = 1.0;
  double para = 1.0;
};

struct MapperStepLog {
  std::size_t step = 0;
  double l_map = 0.0;
  double l_auto = 0.0;
  double l_sim = 0.0;
  double l_para = 0.0;
  double l_total = 0.0;
};

/// `step=<n> l_map=<f> l_auto=<f> l_sim=<f> l_para=<f>`
inline std::string format_log_line(const MapperStepLog& log) {
  std::ostringstream os;
  os.precision(6);
  os << "step=" << log.step << " l_map=" << log.l_map << " l_auto=" << log.l_auto
     << " l_sim=" << log.l_sim << " l_para=" << log.l_para;
  return os.str();
}

struct MapperTrainConfig {
  MapperArchitecture architecture;
  std::size_t n_steps = 10000;
  std::size_t batch_size = 32;
  FormatWeights alpha;
  /// Dataset sampling weights; empty means uniform.
  std::vector<double> dataset_weights;
  bool size_proportional_sampling = false;
  ObjectiveWeights objectives;
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;
  std::size_t log_every = 0;
  std::function<void(const MapperStepLog&)> on_log;
};

namespace detail {
inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
  return out;
}

inline std::size_t sample_weighted(Rng& rng, std::span<const double> cumulative) {
  const double u = rng.uniform() * cumulative.back();
  for (std::size_t i = 0; i < cumulative.size(); ++i)
    if (u < cumulative[i]) return i;
  return cumulative.size() - 1;
}
} // namespace detail

/// Trains a fresh mapper over the registry's formats. Each step samples a
/// dataset, then a batch of matched label pairs, and descends on
/// w_map L_map + w_auto L_auto + w_sim L_sim + w_para L_para. The result is
/// rounded to binary32 precision so that it round-trips through the model
/// file unchanged.
inline MultiWayMapper train_mapper(std::span<const MappingDataset> datasets,
                                   const FormatRegistry& registry,
                                   const MapperTrainConfig& config) {
  if (datasets.empty()) throw ValidationError("train_mapper: no mapping datasets");
  if (config.n_steps == 0) throw ConfigError("n_steps must be at least 1");
  if (config.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  for (const auto& [fmt, w] : config.alpha) {
    registry.find(fmt);
    if (!(w > 0.0)) throw ConfigError("alpha for " + fmt + " must be positive");
  }
  for (const auto& ds : datasets) validate_mapping_dataset(registry, ds);

  std::vector<double> cumulative;
  {
    std::vector<double> w = config.dataset_weights;
    if (w.empty()) {
      for (const auto& ds : datasets)
        w.push_back(config.size_proportional_sampling ? static_cast<double>(ds.size()) : 1.0);
    }
    if (w.size() != datasets.size())
      throw ConfigError("dataset_weights must have one entry per dataset");
    double acc = 0.0;
    for (double x : w) {
      if (!(x > 0.0)) throw ConfigError("dataset sampling weights must be positive");
      cumulative.push_back(acc += x);
    }
  }

  MultiWayMapper mapper(registry, config.architecture, config.seed);
  Optimizer opt(mapper.parameters(), config.optimizer);
  Rng rng(config.seed ^ 0x5eed5a3b1e5ULL);
  std::vector<std::size_t> idx(config.batch_size);

  for (std::size_t step = 1; step <= config.n_steps; ++step) {
    const auto& ds = datasets[detail::sample_weighted(rng, cumulative)];
    for (auto& i : idx) i = rng.index(ds.size());
    const Matrix y1 = detail::gather_rows(ds.first, idx);
    const Matrix y2 = detail::gather_rows(ds.second, idx);

    Graph g;
    const auto pair = record_pair_losses(g, mapper, ds.first_format, y1, ds.second_format, y2,
                                         weight_for(config.alpha, ds.first_format),
                                         weight_for(config.alpha, ds.second_format));
    const Graph::Var para = record_parameter_sharing_loss(g, mapper);
    const std::pair<double, Graph::Var> terms[] = {{config.objectives.map, pair.map},
                                                   {config.objectives.autoenc, pair.autoenc},
                                                   {config.objectives.sim, pair.sim},
                                                   {config.objectives.para, para}};
    const Graph::Var total = g.weighted_sum(terms);
    const double total_value = g.scalar(total);
    if (!std::isfinite(total_value))
      throw DivergenceError("mapper training diverged: non-finite total loss at step " +
                            std::to_string(step));
    g.backward(total);
    opt.step();

    if (config.on_log && config.log_every > 0 &&
        (step % config.log_every == 0 || step == config.n_steps)) {
      config.on_log({step, g.scalar(pair.map), g.scalar(pair.autoenc), g.scalar(pair.sim),
                     g.scalar(para), total_value});
    }
  }
  mapper.round_to_float();
  return mapper;
}

} // namespace emoe
