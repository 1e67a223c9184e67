#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "emoe/autodiff.hpp"
#include "emoe/errors.hpp"

namespace emoe {

enum class OptimizerKind { sgd, adam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

/// Plain gradient descent or Adam (with bias correction) over a fixed set of
/// parameters. Each step consumes and then zeroes the accumulated gradients.
class Optimizer {
public:
  Optimizer(std::vector<Parameter*> params, OptimizerSettings settings)
      : params_(std::move(params)), settings_(settings) {
    if (!(settings_.learning_rate > 0.0))
      throw ConfigError("learning rate must be positive");
    if (settings_.kind == OptimizerKind::adam) {
      for (const Parameter* p : params_) {
        first_.emplace_back(p->value.rows(), p->value.cols());
        second_.emplace_back(p->value.rows(), p->value.cols());
      }
    }
  }

  const OptimizerSettings& settings() const noexcept { return settings_; }
  std::uint64_t steps() const noexcept { return step_; }

  void step() {
    ++step_;
    const double lr = settings_.learning_rate;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(settings_.beta1, t);
    const double c2 = 1.0 - std::pow(settings_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      if (!p.trainable) {
        p.zero_grad();
        continue;
      }
      auto& val = p.value.data();
      const auto& g = p.grad.data();
      if (settings_.kind == OptimizerKind::sgd) {
        for (std::size_t k = 0; k < val.size(); ++k) val[k] -= lr * g[k];
      } else {
        auto& m = first_[i].data();
        auto& v = second_[i].data();
        const double b1 = settings_.beta1, b2 = settings_.beta2;
        for (std::size_t k = 0; k < val.size(); ++k) {
          m[k] = b1 * m[k] + (1.0 - b1) * g[k];
          v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
          const double mhat = m[k] / c1;
          const double vhat = v[k] / c2;
          val[k] -= lr * mhat / (std::sqrt(vhat) + settings_.epsilon);
        }
      }
      p.zero_grad();
    }
  }

  void zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
  }

private:
  std::vector<Parameter*> params_;
  OptimizerSettings settings_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::uint64_t step_ = 0;
};

} // namespace emoe
