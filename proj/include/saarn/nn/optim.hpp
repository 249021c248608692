#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "saarn/errors.hpp"
#include "saarn/nn/params.hpp"

namespace saarn::nn {

// lr(t) = base * (1 - t / total)^power, clamped to zero past the end.
inline double poly_lr(double base, std::size_t step, std::size_t total, double power) {
  if (total == 0) throw ConfigError("poly_lr: total steps must be positive");
  if (step >= total) return 0.0;
  return base * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total), power);
}

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay. Decay applies to matrices only; biases,
// norm gains and 1-D vectors are left undecayed.
template <class T>
class AdamW {
 public:
  explicit AdamW(AdamWOptions opts = {}) : opts_(opts) {}

  void step(ParameterStore<T>& store, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : store.all()) {
      auto g = p.grad();
      if (g.empty()) continue;
      auto& st = state_[name];
      if (st.m.empty()) {
        st.m.assign(p.size(), 0.0);
        st.v.assign(p.size(), 0.0);
      }
      auto w = p.mutable_value();
      const bool decay = p.rank() >= 2;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        st.m[i] = opts_.beta1 * st.m[i] + (1.0 - opts_.beta1) * gi;
        st.v[i] = opts_.beta2 * st.v[i] + (1.0 - opts_.beta2) * gi * gi;
        double wi = static_cast<double>(w[i]);
        if (decay) wi -= lr * opts_.weight_decay * wi;
        wi -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + opts_.eps);
        w[i] = static_cast<T>(wi);
      }
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamWOptions opts_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace saarn::nn
