#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emoe/errors.hpp"
#include "emoe/tensor.hpp"

namespace emoe {

enum class Activation { identity, relu, tanh, sigmoid, softmax };
enum class Criterion { mse, cross_entropy, binary_cross_entropy };

/// Probability clamp used by binary cross-entropy.
inline constexpr double bce_epsilon = 1e-7;

inline const char* to_string(Activation a) {
  switch (a) {
  case Activation::identity: return "identity";
  case Activation::relu: return "relu";
  case Activation::tanh: return "tanh";
  case Activation::sigmoid: return "sigmoid";
  case Activation::softmax: return "softmax";
  }
  return "?";
}

/// A trainable tensor. Frozen parameters (trainable == false) are never
/// touched by an optimizer and never receive gradient from a backward pass.
struct Parameter {
  Matrix value;
  Matrix grad;
  bool trainable = true;

  Parameter() = default;
  explicit Parameter(Matrix v, bool train = true)
      : value(std::move(v)), grad(value.rows(), value.cols()), trainable(train) {}

  void zero_grad() { grad.fill(0.0); }
};

// ---------------------------------------------------------------------------
// Pure forward functions. The graph operations below reuse these so recorded
// and unrecorded evaluation agree bit for bit.

/// Batched affine map: rows of x times W^T, plus an optional bias row.
inline Matrix affine(const Matrix& x, const Matrix& w) {
  if (x.cols() != w.cols())
    throw DimensionError("affine: input width " + std::to_string(x.cols()) +
                         " does not match weight " + w.shape_string());
  return matmul_nt(x, w);
}

inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = affine(x, w);
  if (b.rows() != 1 || b.cols() != w.rows())
    throw DimensionError("affine: bias " + b.shape_string() + " does not match weight " +
                         w.shape_string());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b(0, j);
  }
  return y;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Elementwise activation; softmax normalizes each row.
inline Matrix activate(Activation kind, const Matrix& v) {
  Matrix out = v;
  switch (kind) {
  case Activation::identity: break;
  case Activation::relu:
    for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
    break;
  case Activation::tanh:
    for (double& x : out.data()) x = std::tanh(x);
    break;
  case Activation::sigmoid:
    for (double& x : out.data()) x = sigmoid(x);
    break;
  case Activation::softmax:
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto r = out.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (double x : r) mx = std::max(mx, x);
      double s = 0.0;
      for (double& x : r) {
        x = std::exp(x - mx);
        s += x;
      }
      for (double& x : r) x /= s;
    }
    break;
  }
  return out;
}

inline Vector activate(Activation kind, std::span<const double> v) {
  return activate(kind, Matrix::row_vector(v)).data();
}

namespace detail {

inline double log_sum_exp(std::span<const double> r) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : r) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : r) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline void validate_one_hot(const Matrix& gold) {
  for (std::size_t i = 0; i < gold.rows(); ++i) {
    int ones = 0;
    for (double x : gold.row(i)) {
      if (x == 1.0) ++ones;
      else if (x != 0.0)
        throw ValidationError("cross_entropy: gold row " + std::to_string(i) +
                              " is not one-hot");
    }
    if (ones != 1)
      throw ValidationError("cross_entropy: gold row " + std::to_string(i) +
                            " is not one-hot");
  }
}

inline void validate_unit_interval(const Matrix& gold, const char* what) {
  for (double x : gold.data())
    if (!(x >= 0.0 && x <= 1.0))
      throw ValidationError(std::string(what) + ": target outside [0, 1]");
}

// Soft-target cross entropy on logits, averaged over rows.
inline double soft_cross_entropy_value(const Matrix& logits, const Matrix& target) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const auto t = target.row(i);
    const double lse = log_sum_exp(z);
    double mass = 0.0, lin = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      mass += t[j];
      lin += t[j] * z[j];
    }
    total += mass * lse - lin;
  }
  return total / static_cast<double>(logits.rows());
}

inline double bce_value(const Matrix& prob, const Matrix& gold) {
  double total = 0.0;
  for (std::size_t k = 0; k < prob.size(); ++k) {
    const double p = std::clamp(prob.data()[k], bce_epsilon, 1.0 - bce_epsilon);
    const double g = gold.data()[k];
    total -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
  }
  return total / static_cast<double>(prob.size());
}

inline double mse_value(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    total += d * d;
  }
  return total / static_cast<double>(a.size());
}

} // namespace detail

/// Batch-mean loss. cross_entropy takes logits and one-hot gold rows;
/// binary_cross_entropy takes probabilities (clamped to [eps, 1-eps]).
inline double loss(Criterion criterion, const Matrix& prediction, const Matrix& gold) {
  require_same_shape(prediction, gold, "loss");
  if (prediction.empty()) throw DimensionError("loss: empty input");
  switch (criterion) {
  case Criterion::mse: return detail::mse_value(prediction, gold);
  case Criterion::cross_entropy:
    detail::validate_one_hot(gold);
    return detail::soft_cross_entropy_value(prediction, gold);
  case Criterion::binary_cross_entropy:
    detail::validate_unit_interval(gold, "binary_cross_entropy");
    return detail::bce_value(prediction, gold);
  }
  return 0.0;
}

inline double loss(Criterion criterion, std::span<const double> prediction,
                   std::span<const double> gold) {
  return loss(criterion, Matrix::row_vector(prediction), Matrix::row_vector(gold));
}

// ---------------------------------------------------------------------------

/// Tape of primitive operations recorded during one forward pass. Nodes are
/// appended in evaluation order, so the tape is topologically sorted and
/// backward simply walks it in reverse.
class Graph {
public:
  struct Var {
    std::size_t id = 0;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::size_t size() const noexcept { return nodes_.size(); }
  const Matrix& value(Var v) const { return node_value(v.id); }
  double scalar(Var v) const {
    const Matrix& m = value(v);
    if (m.rows() != 1 || m.cols() != 1)
      throw DimensionError("scalar: node has shape " + m.shape_string());
    return m(0, 0);
  }
  /// Gradient of the last backward root with respect to a node.
  const Matrix& gradient(Var v) const { return nodes_.at(v.id).grad; }

  /// Hash of every piecewise decision taken in the forward pass (relu masks,
  /// probability clamps). Finite-difference checks discard a coordinate when a
  /// perturbation changes it.
  std::uint64_t kink_signature() const noexcept { return signature_; }

  Var input(Matrix value) { return push(std::move(value), {}, {}); }

  /// Caller guarantees `value` outlives the graph.
  Var constant_ref(const Matrix& value) {
    Node n;
    n.ref = &value;
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  Var param(Parameter& p) {
    Node n;
    n.ref = &p.value;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  Var affine(Var x, Var w) {
    Matrix y = emoe::affine(value(x), value(w));
    return push(std::move(y), {x, w}, [x, w](Graph& g, const Matrix& dy) {
      if (g.wants(x)) matmul_acc(dy, g.value(w), g.grad_of(x));
      if (g.wants(w)) matmul_tn_acc(dy, g.value(x), g.grad_of(w));
    });
  }

  Var affine(Var x, Var w, Var b) {
    Matrix y = emoe::affine(value(x), value(w), value(b));
    return push(std::move(y), {x, w, b}, [x, w, b](Graph& g, const Matrix& dy) {
      if (g.wants(x)) matmul_acc(dy, g.value(w), g.grad_of(x));
      if (g.wants(w)) matmul_tn_acc(dy, g.value(x), g.grad_of(w));
      if (g.wants(b)) {
        Matrix& db = g.grad_of(b);
        for (std::size_t i = 0; i < dy.rows(); ++i)
          for (std::size_t j = 0; j < dy.cols(); ++j) db(0, j) += dy(i, j);
      }
    });
  }

  Var activation(Activation kind, Var x) {
    Matrix y = activate(kind, value(x));
    if (kind == Activation::relu) {
      for (double v : value(x).data()) mix(v > 0.0 ? 1u : 0u);
    }
    const std::size_t self = nodes_.size();
    return push(std::move(y), {x}, [kind, x, self](Graph& g, const Matrix& dy) {
      if (!g.wants(x)) return;
      Matrix& dx = g.grad_of(x);
      const Matrix& xin = g.value(x);
      const Matrix& out = g.node_value(self);
      switch (kind) {
      case Activation::identity:
        for (std::size_t k = 0; k < dy.size(); ++k) dx.data()[k] += dy.data()[k];
        break;
      case Activation::relu:
        for (std::size_t k = 0; k < dy.size(); ++k)
          if (xin.data()[k] > 0.0) dx.data()[k] += dy.data()[k];
        break;
      case Activation::tanh:
        for (std::size_t k = 0; k < dy.size(); ++k) {
          const double t = out.data()[k];
          dx.data()[k] += dy.data()[k] * (1.0 - t * t);
        }
        break;
      case Activation::sigmoid:
        for (std::size_t k = 0; k < dy.size(); ++k) {
          const double s = out.data()[k];
          dx.data()[k] += dy.data()[k] * s * (1.0 - s);
        }
        break;
      case Activation::softmax:
        for (std::size_t i = 0; i < dy.rows(); ++i) {
          const auto yr = out.row(i);
          const auto gr = dy.row(i);
          double s = 0.0;
          for (std::size_t j = 0; j < yr.size(); ++j) s += gr[j] * yr[j];
          auto xr = dx.row(i);
          for (std::size_t j = 0; j < yr.size(); ++j) xr[j] += yr[j] * (gr[j] - s);
        }
        break;
      }
    });
  }

  /// Inverted dropout with keep probability 1 - p.
  Var dropout(Var x, double p, Rng& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
    const Matrix& xin = value(x);
    Matrix mask(xin.rows(), xin.cols());
    const double keep = 1.0 - p;
    for (double& m : mask.data()) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    Matrix y = xin;
    for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] *= mask.data()[k];
    return push(std::move(y), {x}, [x, mask = std::move(mask)](Graph& g, const Matrix& dy) {
      if (!g.wants(x)) return;
      Matrix& dx = g.grad_of(x);
      for (std::size_t k = 0; k < dy.size(); ++k)
        dx.data()[k] += dy.data()[k] * mask.data()[k];
    });
  }

  /// Loss against a constant gold matrix; same contract as emoe::loss.
  Var loss(Criterion criterion, Var prediction, const Matrix& gold) {
    const Matrix& p = value(prediction);
    const double v = emoe::loss(criterion, p, gold);
    return criterion_node(criterion, prediction, gold, v);
  }

  /// Cross entropy against soft probability targets (rows summing to one).
  Var soft_cross_entropy(Var logits, const Matrix& target) {
    require_same_shape(value(logits), target, "soft_cross_entropy");
    detail::validate_unit_interval(target, "soft_cross_entropy");
    const double v = detail::soft_cross_entropy_value(value(logits), target);
    return criterion_node(Criterion::cross_entropy, logits, target, v);
  }

  /// Mean squared error between two recorded nodes; both receive gradient.
  Var mse(Var a, Var b) {
    require_same_shape(value(a), value(b), "mse");
    const double v = detail::mse_value(value(a), value(b));
    return push(Matrix(1, 1, v), {a, b}, [a, b](Graph& g, const Matrix& dy) {
      const Matrix& av = g.value(a);
      const Matrix& bv = g.value(b);
      const double scale = 2.0 * dy(0, 0) / static_cast<double>(av.size());
      const bool ga = g.wants(a), gb = g.wants(b);
      for (std::size_t k = 0; k < av.size(); ++k) {
        const double d = scale * (av.data()[k] - bv.data()[k]);
        if (ga) g.grad_of(a).data()[k] += d;
        if (gb) g.grad_of(b).data()[k] -= d;
      }
    });
  }

  Var row(Var m, std::size_t r) {
    const Matrix& mv = value(m);
    if (r >= mv.rows())
      throw DimensionError("row: index " + std::to_string(r) + " out of range for " +
                           mv.shape_string());
    return push(Matrix::row_vector(mv.row(r)), {m}, [m, r](Graph& g, const Matrix& dy) {
      if (!g.wants(m)) return;
      auto dst = g.grad_of(m).row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += dy(0, j);
    });
  }

  /// 1 - cos(u, v) for two row vectors.
  Var cosine_distance(Var u, Var v) {
    const Matrix& uv = value(u);
    const Matrix& vv = value(v);
    if (uv.rows() != 1 || vv.rows() != 1 || uv.cols() != vv.cols())
      throw DimensionError("cosine_distance: expects two equal-length row vectors, got " +
                           uv.shape_string() + " and " + vv.shape_string());
    const double nu = norm(uv.row(0));
    const double nv = norm(vv.row(0));
    if (nu == 0.0 || nv == 0.0) throw DegenerateError("cosine of a zero-norm vector");
    const double c = dot(uv.row(0), vv.row(0)) / (nu * nv);
    return push(Matrix(1, 1, 1.0 - c), {u, v}, [u, v, nu, nv, c](Graph& g, const Matrix& dy) {
      const auto ur = g.value(u).row(0);
      const auto vr = g.value(v).row(0);
      const double s = dy(0, 0);
      if (g.wants(u)) {
        auto du = g.grad_of(u).row(0);
        for (std::size_t j = 0; j < du.size(); ++j)
          du[j] -= s * (vr[j] / (nu * nv) - c * ur[j] / (nu * nu));
      }
      if (g.wants(v)) {
        auto dv = g.grad_of(v).row(0);
        for (std::size_t j = 0; j < dv.size(); ++j)
          dv[j] -= s * (ur[j] / (nu * nv) - c * vr[j] / (nv * nv));
      }
    });
  }

  /// Column-wise concatenation of two matrices with equal row counts.
  Var concat(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows())
      throw DimensionError("concat: row counts differ " + av.shape_string() + " vs " +
                           bv.shape_string());
    Matrix y(av.rows(), av.cols() + bv.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
      std::copy(av.row(i).begin(), av.row(i).end(), y.row(i).begin());
      std::copy(bv.row(i).begin(), bv.row(i).end(), y.row(i).begin() + av.cols());
    }
    const std::size_t split = av.cols();
    return push(std::move(y), {a, b}, [a, b, split](Graph& g, const Matrix& dy) {
      for (std::size_t i = 0; i < dy.rows(); ++i) {
        if (g.wants(a)) {
          auto da = g.grad_of(a).row(i);
          for (std::size_t j = 0; j < split; ++j) da[j] += dy(i, j);
        }
        if (g.wants(b)) {
          auto db = g.grad_of(b).row(i);
          for (std::size_t j = 0; j < db.size(); ++j) db[j] += dy(i, split + j);
        }
      }
    });
  }

  /// Sum of weighted scalar nodes.
  Var weighted_sum(std::span<const std::pair<double, Var>> terms) {
    double v = 0.0;
    for (const auto& [w, t] : terms) v += w * scalar(t);
    std::vector<std::pair<double, Var>> copy(terms.begin(), terms.end());
    std::vector<Var> inputs;
    for (const auto& t : copy) inputs.push_back(t.second);
    return push(Matrix(1, 1, v), inputs, [copy = std::move(copy)](Graph& g, const Matrix& dy) {
      for (const auto& [w, t] : copy)
        if (g.wants(t)) g.grad_of(t)(0, 0) += w * dy(0, 0);
    });
  }

  Var sum(std::span<const Var> terms) {
    std::vector<std::pair<double, Var>> w;
    w.reserve(terms.size());
    for (Var t : terms) w.emplace_back(1.0, t);
    return weighted_sum(w);
  }

  /// Reverse sweep from a scalar root. Gradients of trainable parameters are
  /// accumulated (added) into Parameter::grad.
  void backward(Var root) {
    if (nodes_.empty()) throw EmptyGraphError("backward called on an empty graph");
    if (root.id >= nodes_.size()) throw EmptyGraphError("backward: root is not in the graph");
    const Matrix& rv = value(root);
    if (rv.rows() != 1 || rv.cols() != 1)
      throw DimensionError("backward: root must be a scalar, got " + rv.shape_string());

    for (Node& n : nodes_) {
      n.grad = Matrix();
      n.active = false;
    }
    mark_reachable(root.id);
    grad_of(root)(0, 0) = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.active || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param != nullptr && n.param->trainable) {
        Matrix& pg = n.param->grad;
        for (std::size_t k = 0; k < pg.size(); ++k) pg.data()[k] += n.grad.data()[k];
      }
    }
  }

private:
  using BackwardFn = std::function<void(Graph&, const Matrix&)>;

  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Parameter* param = nullptr;
    Matrix grad;
    BackwardFn backward;
    std::vector<std::size_t> inputs;
    bool needs = false;
    bool active = false;
  };

  const Matrix& node_value(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.ref != nullptr ? *n.ref : n.value;
  }

  bool wants(Var v) const { return nodes_[v.id].active && needs_grad(v.id); }

  Matrix& grad_of(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) {
      const Matrix& val = node_value(v.id);
      n.grad = Matrix(val.rows(), val.cols());
    }
    return n.grad;
  }

  // A node needs gradient only if a trainable parameter lies below it.
  bool needs_grad(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.param != nullptr ? n.param->trainable : n.needs;
  }

  void mark_reachable(std::size_t root) {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
      const std::size_t id = stack.back();
      stack.pop_back();
      if (seen[id]) continue;
      seen[id] = 1;
      nodes_[id].active = true;
      for (std::size_t in : nodes_[id].inputs) stack.push_back(in);
    }
  }

  Var push(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
  }

  Var push(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.backward = std::move(fn);
    for (Var in : inputs) {
      n.inputs.push_back(in.id);
      n.needs = n.needs || needs_grad(in.id);
    }
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  Var criterion_node(Criterion criterion, Var prediction, const Matrix& gold, double v) {
    if (criterion == Criterion::binary_cross_entropy) {
      for (double p : value(prediction).data())
        mix(p < bce_epsilon ? 0u : (p > 1.0 - bce_epsilon ? 2u : 1u));
    }
    return push(Matrix(1, 1, v), {prediction}, [criterion, prediction, gold](Graph& g, const Matrix& dy) {
      if (!g.wants(prediction)) return;
      const Matrix& p = g.value(prediction);
      Matrix& dp = g.grad_of(prediction);
      const double s = dy(0, 0);
      switch (criterion) {
      case Criterion::mse: {
        const double scale = 2.0 * s / static_cast<double>(p.size());
        for (std::size_t k = 0; k < p.size(); ++k)
          dp.data()[k] += scale * (p.data()[k] - gold.data()[k]);
        break;
      }
      case Criterion::cross_entropy: {
        const Matrix probs = activate(Activation::softmax, p);
        const double scale = s / static_cast<double>(p.rows());
        for (std::size_t i = 0; i < p.rows(); ++i) {
          double mass = 0.0;
          for (double t : gold.row(i)) mass += t;
          for (std::size_t j = 0; j < p.cols(); ++j)
            dp(i, j) += scale * (mass * probs(i, j) - gold(i, j));
        }
        break;
      }
      case Criterion::binary_cross_entropy: {
        const double scale = s / static_cast<double>(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) {
          const double pk = p.data()[k];
          if (pk < bce_epsilon || pk > 1.0 - bce_epsilon) continue;
          const double g0 = gold.data()[k];
          dp.data()[k] += scale * (-g0 / pk + (1.0 - g0) / (1.0 - pk));
        }
        break;
      }
      }
    });
  }

  void mix(std::uint64_t bits) {
    signature_ ^= bits + 0x9e3779b97f4a7c15ULL + (signature_ << 6) + (signature_ >> 2);
  }

  std::vector<Node> nodes_;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

} // namespace emoe
