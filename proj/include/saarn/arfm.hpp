#pragma once

// Adaptive reasoning fusion. The pyramid is average-pooled to the coarsest
// stage's resolution, projected to a shared width C' and summed into X_fp.
// Three multi-head cross-attention branches read the global (l),
// descriptive (d) and class (c) token sequences; a scale reasoning gate turns
// pooled X_fp into softmax weights (w_l, w_d, w_c); the weighted branch
// outputs are concatenated and projected back to C', added to X_fp and passed
// through a feed-forward block. A per-scale sigmoid gate then redistributes
// the result to the four pyramid resolutions.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "saarn/encoders.hpp"
#include "saarn/errors.hpp"
#include "saarn/nn/params.hpp"
#include "saarn/tensor/ops.hpp"

namespace saarn {

enum Branch : std::size_t { kBranchGlobal = 0, kBranchDescriptive = 1, kBranchClass = 2 };
inline constexpr std::size_t kNumBranches = 3;

struct ArfmOptions {
  std::size_t heads = 4;
  std::array<bool, kNumBranches> branches{true, true, true};  // l, d, c
};

template <class T>
struct AlignedPyramid {
  std::array<Var<T>, kNumStages> pooled;   // (B, H', W', D_i)
  std::array<Var<T>, kNumStages> aligned;  // (B, H', W', C')
  Var<T> merged;                           // X_fp, (B, H', W', C')
};

template <class T>
struct FusedFeature {
  Var<T> fused;                 // (B, H', W', C'), after residual + feed-forward
  Var<T> branch_weights;        // (B, 3): w_l, w_d, w_c
  MultiScaleFeatures<T> scales; // pyramid after the scale gate, fed to the decoder
};

template <class T>
class ArfbBranch {
 public:
  ArfbBranch() = default;
  ArfbBranch(nn::ParameterStore<T>& store, const std::string& prefix, std::size_t dim,
             std::size_t text_dim, std::size_t heads)
      : query(store, prefix + ".q", dim, dim),
        key(store, prefix + ".k", text_dim, dim),
        value(store, prefix + ".v", text_dim, dim),
        out(store, prefix + ".out", dim, dim),
        heads_(heads) {
    if (heads == 0 || dim % heads != 0) throw ConfigError("arfb: head count must divide C'");
  }

  // x: (B, P, C') flattened X_fp. Returns alpha_s with the same shape.
  Var<T> forward(const Var<T>& x, const LinguisticEmbedding<T>& s,
                 std::vector<T>* weights = nullptr) const {
    const std::size_t head_dim = x.shape().back() / heads_;
    const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
    return out(ops::attention(query(x), key(s.tokens), value(s.tokens), s.mask, heads_, scale,
                              weights));
  }

  nn::Linear<T> query, key, value, out;

 private:
  std::size_t heads_ = 1;
};

template <class T>
class Arfm {
 public:
  Arfm() = default;
  Arfm(nn::ParameterStore<T>& store, const std::array<std::size_t, kNumStages>& channels,
       std::size_t text_dim, ArfmOptions opts)
      : channels_(channels), width_(channels.back()), opts_(opts) {
    bool any = false;
    for (bool b : opts.branches) any = any || b;
    if (!any) throw ConfigError("arfm: at least one linguistic branch must be enabled");
    const std::array<const char*, kNumBranches> names{"l", "d", "c"};
    for (std::size_t s = 0; s < kNumBranches; ++s)
      if (opts.branches[s])
        branches_[s] = ArfbBranch<T>(store, std::string("arfm.branch.") + names[s], width_,
                                     text_dim, opts.heads);
    for (std::size_t i = 0; i < kNumStages; ++i) {
      align_[i] = nn::Linear<T>(store, "arfm.align.s" + std::to_string(i + 1), channels[i], width_);
      scale_gate_[i] = nn::Linear<T>(store, "arfm.sgf.s" + std::to_string(i + 1), width_, channels[i]);
    }
    srg_hidden_ = nn::Linear<T>(store, "arfm.srg.1", width_, std::max<std::size_t>(width_ / 4, 1));
    srg_out_ = nn::Linear<T>(store, "arfm.srg.2", srg_hidden_.out_features(), kNumBranches);
    fuse_ = nn::Linear<T>(store, "arfm.fuse", kNumBranches * width_, width_);
    ffn_in_ = nn::Linear<T>(store, "arfm.ffn.1", width_, 2 * width_);
    ffn_out_ = nn::Linear<T>(store, "arfm.ffn.2", 2 * width_, width_, nn::Init::kFanIn, 0.5);
  }

  // Pools every stage to target_hw x target_hw and projects to C'.
  AlignedPyramid<T> align(const MultiScaleFeatures<T>& features, std::size_t target_hw) const {
    AlignedPyramid<T> out;
    for (std::size_t i = 0; i < kNumStages; ++i) {
      const auto& x = features.stages[i];
      if (x.rank() != 4 || x.dim(3) != channels_[i])
        throw ShapeError("arfm: stage " + std::to_string(i + 1) + " has shape " + to_string(x.shape()));
      if (target_hw == 0 || target_hw > x.dim(1) || x.dim(1) % target_hw != 0 ||
          x.dim(2) % target_hw != 0 || x.dim(1) != x.dim(2))
        throw ConfigError("arfm: cannot pool stage " + std::to_string(i + 1) + " of size " +
                          std::to_string(x.dim(1)) + " to " + std::to_string(target_hw));
      out.pooled[i] = ops::avg_pool(x, x.dim(1) / target_hw);
      out.aligned[i] = align_[i](out.pooled[i]);
      out.merged = i == 0 ? out.aligned[i] : ops::add(out.merged, out.aligned[i]);
    }
    return out;
  }

  // Coarsest stage's spatial size.
  AlignedPyramid<T> align(const MultiScaleFeatures<T>& features) const {
    return align(features, features.stages.back().dim(1));
  }

  // Branch weights (B, 3); disabled branches get exactly zero.
  Var<T> scale_reasoning_gate(const Var<T>& merged) const {
    auto pooled = ops::mean_positions(merged);
    auto logits = srg_out_(ops::relu(srg_hidden_(pooled)));
    return ops::softmax_rows(logits, std::vector<bool>(opts_.branches.begin(), opts_.branches.end()));
  }

  // concat(w_l a_l, w_d a_d, w_c a_c) -> C'. Undefined branch outputs count
  // as zero.
  Var<T> fuse(const std::array<Var<T>, kNumBranches>& alphas, const Var<T>& weights) const {
    Shape shape;
    for (const auto& a : alphas)
      if (a.defined()) {
        if (!shape.empty() && a.shape() != shape)
          throw ShapeError("fuse: branch outputs differ in shape");
        shape = a.shape();
      }
    if (shape.empty()) throw InvalidInputError("fuse: no branch output");
    std::vector<Var<T>> parts;
    for (std::size_t s = 0; s < kNumBranches; ++s)
      parts.push_back(alphas[s].defined() ? ops::scale_per_sample(alphas[s], weights, s)
                                          : Var<T>::constant(shape));
    return fuse_(ops::concat_last(parts));
  }

  // x_i + up(sigmoid(u_i) * u_i), u_i = proj_i(y).
  MultiScaleFeatures<T> scale_gate(const MultiScaleFeatures<T>& features, const Var<T>& y) const {
    MultiScaleFeatures<T> out;
    for (std::size_t i = 0; i < kNumStages; ++i) {
      const auto& x = features.stages[i];
      auto u = scale_gate_[i](y);
      auto g = ops::mul(ops::sigmoid(u), u);
      out.stages[i] = ops::add(x, ops::upsample_nearest(g, x.dim(1) / y.dim(1)));
    }
    return out;
  }

  // Cues for disabled branches are ignored and may be empty.
  FusedFeature<T> forward(const MultiScaleFeatures<T>& features, const GlobalCue<T>& l,
                          const DescriptiveCue<T>& d, const ClassCue<T>& c) const {
    auto pyramid = align(features);
    const Shape grid = pyramid.merged.shape();
    auto flat = ops::reshape(pyramid.merged, {grid[0], grid[1] * grid[2], grid[3]});

    const std::array<const LinguisticEmbedding<T>*, kNumBranches> cues{&l.embedding, &d.embedding,
                                                                       &c.embedding};
    std::array<Var<T>, kNumBranches> alphas;
    for (std::size_t s = 0; s < kNumBranches; ++s)
      if (opts_.branches[s]) alphas[s] = branches_[s].forward(flat, *cues[s]);

    FusedFeature<T> out;
    out.branch_weights = scale_reasoning_gate(pyramid.merged);
    auto alpha_f = fuse(alphas, out.branch_weights);
    auto residual = ops::add(flat, alpha_f);
    auto y = ops::add(residual, ffn_out_(ops::gelu(ffn_in_(residual))));
    out.fused = ops::reshape(y, grid);
    out.scales = scale_gate(features, out.fused);
    return out;
  }

  const ArfbBranch<T>& branch(std::size_t s) const { return branches_.at(s); }
  const ArfmOptions& options() const { return opts_; }
  std::size_t width() const { return width_; }

  // Exposed for tests that zero specific projections.
  nn::Linear<T>& fuse_projection() { return fuse_; }
  nn::Linear<T>& ffn_output() { return ffn_out_; }
  nn::Linear<T>& srg_output() { return srg_out_; }

 private:
  std::array<std::size_t, kNumStages> channels_{};
  std::size_t width_ = 0;
  ArfmOptions opts_;
  std::array<ArfbBranch<T>, kNumBranches> branches_;
  std::array<nn::Linear<T>, kNumStages> align_;
  std::array<nn::Linear<T>, kNumStages> scale_gate_;
  nn::Linear<T> srg_hidden_, srg_out_, fuse_, ffn_in_, ffn_out_;
};

}  // namespace saarn
