#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "emoe/autodiff.hpp"
#include "emoe/errors.hpp"
#include "emoe/ffn.hpp"
#include "emoe/label_format.hpp"
#include "emoe/mapper.hpp"
#include "emoe/optim.hpp"

namespace emoe {

enum class Split { all, train, dev, test };

inline const char* to_string(Split s) {
  switch (s) {
  case Split::all: return "all";
  case Split::train: return "train";
  case Split::dev: return "dev";
  case Split::test: return "test";
  }
  return "?";
}

struct ContentSample {
  std::string id;
  Vector features;
  std::string text;
};

/// Samples from one domain with labels in one format. Features and labels
/// are stored one row per sample.
struct ContentDataset {
  std::string id;
  std::string domain;
  std::string format_id;
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  Matrix features;
  Matrix labels;
  Split split = Split::all;
  bool normalized = false;

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t feature_width() const noexcept { return features.cols(); }
  ContentSample sample(std::size_t i) const {
    return {ids.at(i), features.row_copy(i), texts.empty() ? ids[i] : texts[i]};
  }
  EmotionLabel label(std::size_t i) const { return {format_id, labels.row_copy(i)}; }
};

inline void validate_content_dataset(const FormatRegistry& reg, const ContentDataset& ds) {
  const auto& f = reg.find(ds.format_id);
  if (ds.features.rows() != ds.size() || ds.labels.rows() != ds.size())
    throw ValidationError("content dataset " + ds.id + ": samples and labels differ in count");
  if (!ds.texts.empty() && ds.texts.size() != ds.size())
    throw ValidationError("content dataset " + ds.id + ": wrong number of texts");
  if (ds.size() > 0 && ds.labels.cols() != f.arity())
    throw DimensionError("content dataset " + ds.id + ": label width does not match " + f.id());
  if (!ds.features.all_finite())
    throw ValidationError("content dataset " + ds.id + " has non-finite features");
  for (std::size_t i = 0; i < ds.size(); ++i) validate_label(f, ds.labels.row(i));
}

/// Domain-specific network f mapping feature vectors into the emotion space.
struct ContentEncoder {
  std::string name;   // usually the id of the dataset it was trained on
  std::string domain;
  FeedForward network;

  std::size_t feature_width() const { return network.input_width(); }

  friend bool operator==(const ContentEncoder& a, const ContentEncoder& b) {
    return a.name == b.name && a.domain == b.domain && a.network == b.network;
  }
};

inline Matrix encode_content_batch(const ContentEncoder& encoder, const Matrix& features) {
  if (features.cols() != encoder.feature_width())
    throw DimensionError("content encoder " + encoder.name + " expects " +
                         std::to_string(encoder.feature_width()) + " features, got " +
                         std::to_string(features.cols()));
  return encoder.network.forward(features);
}

inline EmotionEmbedding encode_content(const ContentEncoder& encoder,
                                       std::span<const double> features) {
  return encode_content_batch(encoder, Matrix::row_vector(features)).data();
}

inline EmotionEmbedding encode_content(const ContentEncoder& encoder, const ContentSample& s) {
  return encode_content(encoder, s.features);
}

inline Matrix predict_batch(const ContentEncoder& encoder, const MultiWayMapper& mapper,
                            const Matrix& features, const std::string& format_id) {
  return decode_embeddings(mapper, format_id, encode_content_batch(encoder, features));
}

inline EmotionLabel predict(const ContentEncoder& encoder, const MultiWayMapper& mapper,
                            const ContentSample& sample, const std::string& format_id) {
  return decode_embedding(mapper, encode_content(encoder, sample), format_id);
}

/// Prediction for a format the encoder never saw gold labels for. Same
/// computation as predict.
inline EmotionLabel zero_shot_predict(const ContentEncoder& encoder, const MultiWayMapper& mapper,
                                      const ContentSample& sample,
                                      const std::string& unseen_format) {
  return predict(encoder, mapper, sample, unseen_format);
}

/// Teacher label y* = h_target(g_source(y)) used for label augmentation.
inline EmotionLabel synthesize_label(const MultiWayMapper& mapper, const EmotionLabel& gold,
                                     const std::string& target_format) {
  if (gold.format_id == target_format)
    throw ValidationError("synthesize_label: target format equals the gold format " +
                          target_format);
  mapper.registry().find(target_format);
  return translate(mapper, gold, target_format);
}

inline Matrix synthesize_labels(const MultiWayMapper& mapper, const std::string& source_format,
                                const Matrix& gold, const std::string& target_format) {
  if (source_format == target_format)
    throw ValidationError("synthesize_labels: target format equals the gold format " +
                          target_format);
  return translate_batch(mapper, source_format, gold, target_format);
}

// ---------------------------------------------------------------------------
// Training

enum class EncoderMode { augmented, plain, multitask };

inline const char* to_string(EncoderMode m) {
  switch (m) {
  case EncoderMode::augmented: return "augmented";
  case EncoderMode::plain: return "plain";
  case EncoderMode::multitask: return "multitask";
  }
  return "?";
}

inline EncoderMode parse_encoder_mode(const std::string& s) {
  if (s == "augmented") return EncoderMode::augmented;
  if (s == "plain") return EncoderMode::plain;
  if (s == "multitask") return EncoderMode::multitask;
  throw ConfigError("unknown encoder mode '" + s + "' (expected augmented, plain or multitask)");
}

struct EncoderEpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_loss = std::numeric_limits<double>::quiet_NaN();
};

struct EncoderTrainConfig {
  EncoderMode mode = EncoderMode::augmented;
  /// Formats whose teacher labels supervise the encoder in augmented mode.
  std::vector<std::string> augmentation_formats;
  double augmentation_weight = 1.0;
  std::vector<std::size_t> hidden{256, 128};
  double dropout = 0.2;
  std::size_t n_epochs = 100;
  std::size_t batch_size = 32;
  /// Early stopping patience in epochs; only used when a dev set is given.
  std::size_t patience = 10;
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;
  std::function<void(const EncoderEpochLog&)> on_epoch;
};

struct EncoderTrainingData {
  const ContentDataset* train = nullptr;
  const ContentDataset* dev = nullptr;
  /// Second dataset of the pair, for multitask mode.
  const ContentDataset* second = nullptr;
};

/// Records L_pred (+ weighted L_aug per augmentation format) for one batch.
/// Mapper weights enter the graph as constants.
inline Graph::Var record_encoder_objective(Graph& g, FeedForward& network,
                                           const MultiWayMapper& mapper,
                                           const std::string& format_id, const Matrix& features,
                                           const Matrix& gold,
                                           std::span<const std::string> augmentation_formats,
                                           double augmentation_weight = 1.0,
                                           Rng* dropout_rng = nullptr) {
  const auto& f = mapper.registry().find(format_id);
  const Graph::Var e = network.forward(g, g.input(features), dropout_rng);
  const Graph::Var logits = g.affine(e, g.constant_ref(mapper.components(format_id).head.value));
  std::vector<std::pair<double, Graph::Var>> terms{{1.0, record_format_loss(g, f, gold, logits)}};
  for (const auto& aug : augmentation_formats) {
    const auto& fa = mapper.registry().find(aug);
    const Matrix target = synthesize_labels(mapper, format_id, gold, aug);
    const Graph::Var aug_logits = g.affine(e, g.constant_ref(mapper.components(aug).head.value));
    terms.emplace_back(augmentation_weight,
                       record_format_loss(g, fa, target, aug_logits, /*soft_targets=*/true));
  }
  return g.weighted_sum(terms);
}

namespace detail {

inline std::uint64_t fingerprint(const MultiWayMapper& mapper) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const Matrix& m) {
    for (double x : m.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      h = (h ^ bits) * 0x100000001b3ULL;
    }
  };
  for (const auto& c : mapper.all_components()) {
    for (const auto& l : c.encoder.layers()) {
      mix(l.weight.value);
      mix(l.bias.value);
    }
    mix(c.head.value);
  }
  return h;
}

inline double dataset_loss(const FeedForward& network, const MultiWayMapper& mapper,
                           const ContentDataset& ds) {
  const auto& f = mapper.registry().find(ds.format_id);
  const Matrix logits = head_logits(mapper, ds.format_id, network.forward(ds.features));
  return format_loss(f, ds.labels, logits);
}

} // namespace detail

/// Fits a content encoder against the mapper's frozen heads. In augmented
/// mode the mapper also acts as teacher: gold labels are translated on the
/// fly into each augmentation format and the encoder is trained to match
/// those too. Multitask mode instead alternates batches with the second
/// dataset's gold labels. With a dev set, training stops after `patience`
/// epochs without dev-loss improvement and the best epoch is kept.
inline ContentEncoder train_content_encoder(const EncoderTrainingData& data,
                                            const MultiWayMapper& mapper,
                                            const EncoderTrainConfig& config) {
  if (data.train == nullptr) throw ConfigError("train_content_encoder: no training dataset");
  const ContentDataset& train = *data.train;
  const auto& reg = mapper.registry();
  validate_content_dataset(reg, train);
  if (train.size() == 0) throw ValidationError("training dataset " + train.id + " is empty");
  if (config.batch_size == 0 || config.n_epochs == 0)
    throw ConfigError("batch_size and n_epochs must be positive");

  std::vector<std::string> aug;
  if (config.mode == EncoderMode::augmented) {
    if (config.augmentation_formats.empty())
      throw ConfigError("augmented mode needs an augmentation format");
    for (const auto& f : config.augmentation_formats) {
      reg.find(f);
      if (f == train.format_id)
        throw ConfigError("augmentation format must differ from the dataset format " + f);
      aug.push_back(f);
    }
  }
  if (config.mode == EncoderMode::multitask) {
    if (data.second == nullptr) throw ConfigError("multitask mode needs a second dataset");
    validate_content_dataset(reg, *data.second);
    if (data.second->feature_width() != train.feature_width())
      throw DimensionError("multitask datasets differ in feature width");
    if (data.second->size() == 0) throw ValidationError("second dataset is empty");
  }
  if (data.dev != nullptr) {
    validate_content_dataset(reg, *data.dev);
    if (data.dev->format_id != train.format_id)
      throw ValidationError("dev set format differs from training format");
  }

  const std::uint64_t before = detail::fingerprint(mapper);

  Rng rng(config.seed);
  ContentEncoder enc{train.id, train.domain,
                     FeedForward(train.feature_width(), config.hidden, mapper.dim(), rng,
                                 config.dropout)};
  Optimizer opt(enc.network.parameters(), config.optimizer);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> second_order;
  std::size_t second_pos = 0;
  if (config.mode == EncoderMode::multitask) {
    second_order.resize(data.second->size());
    std::iota(second_order.begin(), second_order.end(), std::size_t{0});
    rng.shuffle(second_order);
  }

  FeedForward best = enc.network;
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.n_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      auto step = [&](const ContentDataset& ds, std::span<const std::size_t> rows,
                      std::span<const std::string> aug_formats) {
        const Matrix x = detail::gather_rows(ds.features, rows);
        const Matrix y = detail::gather_rows(ds.labels, rows);
        Graph g;
        const Graph::Var total = record_encoder_objective(
            g, enc.network, mapper, ds.format_id, x, y, aug_formats,
            config.augmentation_weight, &rng);
        const double v = g.scalar(total);
        if (!std::isfinite(v))
          throw DivergenceError("content encoder training diverged: non-finite loss in epoch " +
                                std::to_string(epoch));
        g.backward(total);
        opt.step();
        epoch_loss += v;
        ++batches;
      };
      step(train, idx, aug);

      if (config.mode == EncoderMode::multitask) {
        std::vector<std::size_t> rows;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          if (second_pos == second_order.size()) {
            rng.shuffle(second_order);
            second_pos = 0;
          }
          rows.push_back(second_order[second_pos++]);
        }
        step(*data.second, rows, {});
      }
    }

    EncoderEpochLog log{epoch, epoch_loss / static_cast<double>(batches)};
    if (data.dev != nullptr && data.dev->size() > 0) {
      log.dev_loss = detail::dataset_loss(enc.network, mapper, *data.dev);
      if (!std::isfinite(log.dev_loss))
        throw DivergenceError("content encoder dev loss is non-finite in epoch " +
                              std::to_string(epoch));
      if (log.dev_loss < best_dev) {
        best_dev = log.dev_loss;
        best = enc.network;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (config.on_epoch) config.on_epoch(log);
    if (data.dev != nullptr && data.dev->size() > 0 && since_best >= config.patience) break;
  }
  if (data.dev != nullptr && data.dev->size() > 0) enc.network = std::move(best);

  if (detail::fingerprint(mapper) != before)
    throw InternalError("mapper parameters changed during content encoder training");
  enc.network.round_to_float();
  return enc;
}

} // namespace emoe
