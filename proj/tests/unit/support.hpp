#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "saarn/nn/params.hpp"
#include "saarn/random.hpp"
#include "saarn/tensor/autograd.hpp"
#include "saarn/tensor/ops.hpp"

namespace saarn::testing {

inline std::vector<double> random_values(Rng& rng, std::size_t n, double sd = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = sd * normal(rng);
  return v;
}

inline Var<double> random_param(Rng& rng, Shape shape, double sd = 1.0) {
  const auto n = numel(shape);
  return Var<double>::parameter(std::move(shape), random_values(rng, n, sd));
}

// Every parameter of the store gets fresh N(0, sd) values, so zero-initialised
// layers do not hide gradient paths.
inline void randomize(nn::ParameterStore<double>& store, Rng& rng, double sd = 0.5) {
  for (auto& [_, p] : store.all())
    for (auto& v : p.mutable_value()) v = sd * normal(rng);
}

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Central differences against backward() for a scalar loss. Up to
// `per_tensor` entries of each input are perturbed. The denominator has a
// floor of 1e-6: entries whose true gradient is exactly zero (key biases
// under softmax shift invariance) otherwise compare rounding noise to noise.
inline GradCheck grad_check(const std::function<Var<double>()>& loss,
                            std::vector<std::pair<std::string, Var<double>>> inputs,
                            double eps = 1e-6, std::size_t per_tensor = 12) {
  for (auto& [_, v] : inputs) v.zero_grad();
  auto l = loss();
  backward(l);
  GradCheck out;
  for (auto& [name, v] : inputs) {
    const std::vector<double> analytic(v.grad().begin(), v.grad().end());
    const std::size_t n = v.size();
    const std::size_t step = std::max<std::size_t>(1, n / per_tensor);
    for (std::size_t i = 0; i < n; i += step) {
      auto w = v.mutable_value();
      const double orig = w[i];
      w[i] = orig + eps;
      const double fp = loss().item();
      w[i] = orig - eps;
      const double fm = loss().item();
      w[i] = orig;
      const double num = (fp - fm) / (2 * eps);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6});
      ++out.checked;
      if (rel > out.max_rel) {
        out.max_rel = rel;
        out.worst = name + "[" + std::to_string(i) + "] analytic " + std::to_string(a) + " numeric " +
                    std::to_string(num);
      }
    }
  }
  return out;
}

inline std::vector<std::pair<std::string, Var<double>>> store_inputs(nn::ParameterStore<double>& store) {
  std::vector<std::pair<std::string, Var<double>>> out;
  for (auto& [name, p] : store.all()) out.emplace_back(name, p);
  return out;
}

// Random projection of an output to a scalar.
inline Var<double> project(const Var<double>& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return ops::weighted_sum(y, random_values(rng, y.size()));
}

inline ops::ByteMask random_mask(Rng& rng, std::size_t n, double p = 0.5) {
  ops::ByteMask m(n);
  for (auto& b : m) b = bernoulli(rng, p) ? 1 : 0;
  return m;
}

// Brute-force metric oracle, written against the definitions directly.
struct BruteReport {
  std::vector<double> ious;
  double oiou = 0, miou = 0;
  std::vector<double> p_at;  // thresholds 0.5 .. 0.9
};

inline BruteReport brute_metrics(const std::vector<std::pair<ops::ByteMask, ops::ByteMask>>& pairs) {
  BruteReport r;
  std::uint64_t I = 0, U = 0;
  for (const auto& [p, g] : pairs) {
    std::uint64_t i = 0, u = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (p[k] == 1 && g[k] == 1) ++i;
      if (p[k] == 1 || g[k] == 1) ++u;
    }
    I += i;
    U += u;
    r.ious.push_back(u == 0 ? 1.0 : double(i) / double(u));
  }
  r.oiou = U == 0 ? 1.0 : double(I) / double(U);
  double s = 0;
  for (double v : r.ious) s += v;
  r.miou = s / double(r.ious.size());
  for (double t : {0.5, 0.6, 0.7, 0.8, 0.9}) {
    std::size_t c = 0;
    for (double v : r.ious) c += v > t;
    r.p_at.push_back(double(c) / double(r.ious.size()));
  }
  return r;
}

}  // namespace saarn::testing
