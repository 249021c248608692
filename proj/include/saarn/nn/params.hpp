#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "saarn/errors.hpp"
#include "saarn/random.hpp"
#include "saarn/tensor/autograd.hpp"
#include "saarn/tensor/ops.hpp"

namespace saarn::nn {

enum class Init {
  kFanIn,  // N(0, gain^2 / fan_in), fan_in = leading dimension
  kZeros,
  kOnes,
};

// Named trainable tensors. Each parameter draws its initial values from a
// stream seeded by (root seed, name), so enabling or disabling a module never
// changes how the remaining parameters start out.
template <class T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

  const Var<T>& add(const std::string& name, Shape shape, Init init, double gain = 1.0) {
    if (params_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
    std::vector<T> values(numel(shape), T(0));
    switch (init) {
      case Init::kZeros:
        break;
      case Init::kOnes:
        std::fill(values.begin(), values.end(), T(1));
        break;
      case Init::kFanIn: {
        Rng rng(derive_seed(seed_, name));
        const double sd = gain / std::sqrt(static_cast<double>(shape.empty() ? 1 : shape[0]));
        for (auto& v : values) v = static_cast<T>(sd * normal(rng));
        break;
      }
    }
    auto [it, _] = params_.emplace(name, Var<T>::parameter(std::move(shape), std::move(values)));
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.contains(name); }

  const Var<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw RangeError("no parameter named '" + name + "'");
    return it->second;
  }
  Var<T>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw RangeError("no parameter named '" + name + "'");
    return it->second;
  }

  // Sorted by name.
  const std::map<std::string, Var<T>>& all() const { return params_; }
  std::map<std::string, Var<T>>& all() { return params_; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.size();
    return n;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, Var<T>> params_;
};

// Per-position channel projection (a 1x1 convolution).
template <class T>
struct Linear {
  Var<T> weight;
  Var<T> bias;

  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
         Init init = Init::kFanIn, double gain = 1.0)
      : weight(store.add(name + ".w", {in, out}, init, gain)),
        bias(store.add(name + ".b", {out}, Init::kZeros)) {}

  Var<T> operator()(const Var<T>& x) const { return ops::linear(x, weight, bias); }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

template <class T>
struct Conv2d {
  Var<T> weight;
  Var<T> bias;
  ops::ConvSpec spec;

  Conv2d() = default;
  Conv2d(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
         ops::ConvSpec s, double gain = 1.0)
      : weight(store.add(name + ".w", {s.kernel * s.kernel * in, out}, Init::kFanIn, gain)),
        bias(store.add(name + ".b", {out}, Init::kZeros)),
        spec(s) {}

  Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight, bias, spec); }
};

template <class T>
struct LayerNorm {
  Var<T> gamma;
  Var<T> beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore<T>& store, const std::string& name, std::size_t channels)
      : gamma(store.add(name + ".g", {channels}, Init::kOnes)),
        beta(store.add(name + ".b", {channels}, Init::kZeros)) {}

  Var<T> operator()(const Var<T>& x) const { return ops::layer_norm(x, gamma, beta); }
};

}  // namespace saarn::nn
