#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "emoe/autodiff.hpp"
#include "emoe/errors.hpp"

namespace emoe {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates skipped because a +/- eps step crossed a kink (relu boundary
  /// or probability clamp), where the derivative is undefined.
  std::size_t excluded = 0;
};

/// Builds the loss on a fresh graph; must be deterministic.
using LossBuilder = std::function<Graph::Var(Graph&)>;

/// Compares backpropagated gradients with central differences on at most
/// `max_coords` sampled coordinates per parameter. Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|).
inline GradCheckReport grad_check(const LossBuilder& build, std::span<Parameter* const> params,
                                  double eps = 1e-5, std::uint64_t seed = 0,
                                  std::size_t max_coords = 64) {
  if (!(eps >= 1e-6 && eps <= 1e-4)) throw ConfigError("grad_check: eps must be in [1e-6, 1e-4]");

  for (Parameter* p : params) p->zero_grad();
  std::uint64_t base_signature;
  {
    Graph g;
    const Graph::Var root = build(g);
    base_signature = g.kink_signature();
    g.backward(root);
  }
  std::vector<Matrix> analytic;
  for (Parameter* p : params) {
    analytic.push_back(p->grad);
    p->zero_grad();
  }

  auto evaluate = [&](std::uint64_t& signature) {
    Graph g;
    const Graph::Var root = build(g);
    signature = g.kink_signature();
    return g.scalar(root);
  };

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    if (!p.trainable) continue;
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      rng.shuffle(coords);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t k : coords) {
      double& x = p.value.data()[k];
      const double saved = x;
      std::uint64_t sig_plus, sig_minus;
      x = saved + eps;
      const double plus = evaluate(sig_plus);
      x = saved - eps;
      const double minus = evaluate(sig_minus);
      x = saved;
      if (sig_plus != base_signature || sig_minus != base_signature) {
        ++report.excluded;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[pi].data()[k];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      report.max_relative_error = std::max(report.max_relative_error, rel);
      ++report.checked;
    }
  }
  return report;
}

} // namespace emoe
