#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "emoe/autodiff.hpp"
#include "emoe/tensor.hpp"

namespace emoe {

struct DenseLayer {
  Parameter weight; // out x in
  Parameter bias;   // 1 x out
};

/// Feed-forward stack: affine layers with relu between them and a linear
/// output layer. Dropout, when set, applies to hidden activations during
/// training only.
class FeedForward {
public:
  FeedForward() = default;

  FeedForward(std::size_t input_width, std::span<const std::size_t> hidden,
              std::size_t output_width, Rng& rng, double dropout = 0.0)
      : dropout_(dropout) {
    std::size_t in = input_width;
    for (std::size_t h : hidden) {
      layers_.push_back(make_layer(in, h, std::sqrt(6.0 / static_cast<double>(in)), rng));
      in = h;
    }
    layers_.push_back(make_layer(
        in, output_width, std::sqrt(6.0 / static_cast<double>(in + output_width)), rng));
  }

  explicit FeedForward(std::vector<DenseLayer> layers, double dropout = 0.0)
      : layers_(std::move(layers)), dropout_(dropout) {
    for (std::size_t i = 1; i < layers_.size(); ++i)
      if (layers_[i].weight.value.cols() != layers_[i - 1].weight.value.rows())
        throw DimensionError("FeedForward: layer widths do not chain");
  }

  std::size_t input_width() const {
    return layers_.empty() ? 0 : layers_.front().weight.value.cols();
  }
  std::size_t output_width() const {
    return layers_.empty() ? 0 : layers_.back().weight.value.rows();
  }
  double dropout() const noexcept { return dropout_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  /// Records the network on `g`. Pass a generator to enable dropout.
  Graph::Var forward(Graph& g, Graph::Var x, Rng* dropout_rng = nullptr) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = g.affine(x, g.param(layers_[i].weight), g.param(layers_[i].bias));
      if (i + 1 < layers_.size()) {
        x = g.activation(Activation::relu, x);
        if (dropout_rng != nullptr && dropout_ > 0.0) x = g.dropout(x, dropout_, *dropout_rng);
      }
    }
    return x;
  }

  /// Same network as a constant (no gradient) subgraph.
  Graph::Var forward_frozen(Graph& g, Graph::Var x) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = g.affine(x, g.constant_ref(layers_[i].weight.value),
                   g.constant_ref(layers_[i].bias.value));
      if (i + 1 < layers_.size()) x = g.activation(Activation::relu, x);
    }
    return x;
  }

  Matrix forward(const Matrix& x) const {
    if (layers_.empty()) return x;
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = affine(h, layers_[i].weight.value, layers_[i].bias.value);
      if (i + 1 < layers_.size()) h = activate(Activation::relu, h);
    }
    return h;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  void round_to_float() {
    for (auto& l : layers_) {
      emoe::round_to_float(l.weight.value);
      emoe::round_to_float(l.bias.value);
    }
  }

  friend bool operator==(const FeedForward& a, const FeedForward& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i)
      if (a.layers_[i].weight.value != b.layers_[i].weight.value ||
          a.layers_[i].bias.value != b.layers_[i].bias.value)
        return false;
    return true;
  }

private:
  static DenseLayer make_layer(std::size_t in, std::size_t out, double limit, Rng& rng) {
    Matrix w(out, in);
    for (double& x : w.data()) x = rng.uniform(-limit, limit);
    return {Parameter(std::move(w)), Parameter(Matrix(1, out))};
  }

  std::vector<DenseLayer> layers_;
  double dropout_ = 0.0;
};

} // namespace emoe
