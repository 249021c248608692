#pragma once

// Category-dominated linguistic enhancement. After every encoder stage the
// visual map first attends to the class-level text c, passes through a
// residual gate, then attends to the global text l and passes through a
// second gate:
//
//   a_c = softmax(q(x) k_c(c)^T / sqrt(D)) v_c(c)
//   z_c = o(w(a_c) * m(x));           f_c = x + z_c * gate(z_c)
//   a_l = softmax(q'(f_c) k_l(l)^T / sqrt(D)) v_l(l)
//   z_l = o'(w'(a_l) * m'(f_c));      f_l = f_c + z_l * gate'(z_l)
//
// m and o are projection + GELU; gate is Linear-ReLU-Linear-Tanh. The last
// gate layer starts at zero, so an untrained stack is the identity.
// Descriptive text never enters this module.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "saarn/encoders.hpp"
#include "saarn/nn/params.hpp"
#include "saarn/tensor/ops.hpp"

namespace saarn {

// One attention + residual-gate pass over a (B, HW, D) map.
template <class T>
class CdlePass {
 public:
  CdlePass() = default;
  CdlePass(nn::ParameterStore<T>& store, const std::string& prefix, std::size_t dim,
           std::size_t text_dim)
      : query(store, prefix + ".q", dim, dim),
        key(store, prefix + ".k", text_dim, dim),
        value(store, prefix + ".v", text_dim, dim),
        weigh(store, prefix + ".w", dim, dim),
        visual(store, prefix + ".m", dim, dim),
        out(store, prefix + ".o", dim, dim),
        gate_hidden(store, prefix + ".f1", dim, dim),
        gate_out(store, prefix + ".f2", dim, dim, nn::Init::kZeros),
        dim_(dim) {}

  // Scaled dot-product attention of map positions over text tokens,
  // d_scale = D. weights, if given, receives (B, 1, HW, N).
  Var<T> attend(const Var<T>& x, const LinguisticEmbedding<T>& text,
                std::vector<T>* weights = nullptr) const {
    const T scale = T(1) / std::sqrt(static_cast<T>(dim_));
    return ops::attention(query(x), key(text.tokens), value(text.tokens), text.mask, 1, scale,
                          weights);
  }

  // z = o(w(alpha) * m(x)), f = x + z * tanh(f2(relu(f1(z)))).
  Var<T> gate(const Var<T>& alpha, const Var<T>& x) const {
    if (alpha.shape() != x.shape())
      throw ShapeError("residual gate: attention " + to_string(alpha.shape()) + " vs map " +
                       to_string(x.shape()));
    auto z = ops::gelu(out(ops::mul(weigh(alpha), ops::gelu(visual(x)))));
    auto g = ops::tanh(gate_out(ops::relu(gate_hidden(z))));
    return ops::add(x, ops::mul(z, g));
  }

  Var<T> forward(const Var<T>& x, const LinguisticEmbedding<T>& text) const {
    return gate(attend(x, text), x);
  }

  std::size_t dim() const { return dim_; }

  nn::Linear<T> query, key, value, weigh, visual, out, gate_hidden, gate_out;

 private:
  std::size_t dim_ = 0;
};

template <class T>
class CdleStage {
 public:
  CdleStage() = default;
  CdleStage(nn::ParameterStore<T>& store, const std::string& prefix, std::size_t dim,
            std::size_t text_dim)
      : class_pass(store, prefix + ".class", dim, text_dim),
        global_pass(store, prefix + ".global", dim, text_dim) {}

  // x: (B, H, W, D). Returns f_l with the same shape.
  Var<T> forward(const Var<T>& x, const ClassCue<T>& c, const GlobalCue<T>& l) const {
    if (x.rank() != 4) throw ShapeError("cdle: expected (B, H, W, D), got " + to_string(x.shape()));
    const Shape spatial = x.shape();
    auto flat = ops::reshape(x, {spatial[0], spatial[1] * spatial[2], spatial[3]});
    auto f_c = class_pass.forward(flat, c.embedding);
    auto f_l = global_pass.forward(f_c, l.embedding);
    return ops::reshape(f_l, spatial);
  }

  CdlePass<T> class_pass;
  CdlePass<T> global_pass;
};

// One CdleStage per encoder stage.
template <class T>
class CdleStack {
 public:
  CdleStack() = default;
  CdleStack(nn::ParameterStore<T>& store, const std::array<std::size_t, kNumStages>& channels,
            std::size_t text_dim) {
    for (std::size_t i = 0; i < kNumStages; ++i)
      stages_[i] = CdleStage<T>(store, "cdle.s" + std::to_string(i + 1), channels[i], text_dim);
  }

  const CdleStage<T>& stage(std::size_t i) const { return stages_.at(i); }

  // Binds the cues of one batch so the stack can run as an encoder hook.
  class Bound : public StageEnhancer<T> {
   public:
    Bound(const CdleStack& stack, const ClassCue<T>& c, const GlobalCue<T>& l)
        : stack_(stack), c_(c), l_(l) {}
    Var<T> enhance(std::size_t stage, const Var<T>& x) const override {
      return stack_.stages_.at(stage).forward(x, c_, l_);
    }

   private:
    const CdleStack& stack_;
    const ClassCue<T>& c_;
    const GlobalCue<T>& l_;
  };

  Bound bind(const ClassCue<T>& c, const GlobalCue<T>& l) const { return Bound(*this, c, l); }

 private:
  std::array<CdleStage<T>, kNumStages> stages_;
};

}  // namespace saarn
