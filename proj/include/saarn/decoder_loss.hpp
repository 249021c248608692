#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "saarn/encoders.hpp"
#include "saarn/errors.hpp"
#include "saarn/nn/params.hpp"
#include "saarn/tensor/ops.hpp"

namespace saarn {

// Progressive 2x upsampling from the coarsest pyramid stage. Each step
// concatenates the next finer skip (pyramid stages 3, 2, 1, then the image
// at half and full resolution), applies a 3x3 convolution and GELU. A final
// per-pixel projection yields one logit per pixel.
template <class T>
class MaskDecoder {
 public:
  static constexpr std::size_t kSteps = 5;

  MaskDecoder() = default;
  MaskDecoder(nn::ParameterStore<T>& store, const std::array<std::size_t, kNumStages>& channels,
              const std::array<std::size_t, kSteps>& widths) {
    std::size_t in = channels[3];
    for (std::size_t s = 0; s < kSteps; ++s) {
      const std::size_t skip = s < 3 ? channels[2 - s] : 3;
      convs_[s] = nn::Conv2d<T>(store, "decoder.up" + std::to_string(s + 1), in + skip, widths[s],
                                {3, 1, 1});
      in = widths[s];
    }
    head_ = nn::Linear<T>(store, "decoder.head", in, 1);
  }

  // pyramid: encoder (or scale-gated) stages; images: (B, H0, W0, 3).
  // Returns (B, H0, W0, 1) logits.
  Var<T> forward(const MultiScaleFeatures<T>& pyramid, const Var<T>& images) const {
    if (images.rank() != 4 || images.dim(1) != pyramid.stages[0].dim(1) * 4 ||
        images.dim(2) != pyramid.stages[0].dim(2) * 4)
      throw ShapeError("decode_mask: image " + to_string(images.shape()) +
                       " does not match pyramid stage 1 " + to_string(pyramid.stages[0].shape()));
    Var<T> y = pyramid.stages[3];
    const Var<T> half = ops::avg_pool(images, 2);
    for (std::size_t s = 0; s < kSteps; ++s) {
      const Var<T>& skip = s < 3 ? pyramid.stages[2 - s] : (s == 3 ? half : images);
      auto up = ops::upsample_nearest(y, 2);
      if (up.dim(1) != skip.dim(1) || up.dim(2) != skip.dim(2) || up.dim(0) != skip.dim(0))
        throw ShapeError("decode_mask: skip " + to_string(skip.shape()) + " vs upsampled " +
                         to_string(up.shape()));
      y = ops::gelu(convs_[s](ops::concat_last<T>({up, skip})));
    }
    return head_(y);
  }

  nn::Linear<T>& head() { return head_; }

 private:
  std::array<nn::Conv2d<T>, kSteps> convs_;
  nn::Linear<T> head_;
};

namespace detail {

inline void check_mask_size(std::size_t logits, const ops::ByteMask& gt, const char* who) {
  if (logits != gt.size())
    throw ShapeError(std::string(who) + ": " + std::to_string(logits) + " logits vs " +
                     std::to_string(gt.size()) + " mask pixels");
}

}  // namespace detail

// Mean over all pixels of max(z, 0) - z*y + log(1 + exp(-|z|)).
template <class T>
Var<T> binary_cross_entropy(const Var<T>& logits, const ops::ByteMask& gt) {
  detail::check_mask_size(logits.size(), gt, "binary_cross_entropy");
  const std::size_t n = gt.size();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T z = logits.value()[i];
    const T y = gt[i] ? T(1) : T(0);
    total += std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return Var<T>::make({1}, {total / T(n)}, {logits}, [gt, n](Node<T>& self) {
    auto& in = *self.parents[0];
    auto& g = in.ensure_grad();
    const T s = self.grad[0] / T(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T p = T(1) / (T(1) + std::exp(-in.value[i]));
      g[i] += s * (p - (gt[i] ? T(1) : T(0)));
    }
  });
}

// Soft Dice on sigmoid probabilities, per sample, averaged over the batch:
// 1 - (2 sum(p y) + smooth) / (sum(p) + sum(y) + smooth).
template <class T>
Var<T> dice_loss(const Var<T>& logits, const ops::ByteMask& gt, T smooth = T(1)) {
  detail::check_mask_size(logits.size(), gt, "dice_loss");
  if (logits.rank() < 1) throw ShapeError("dice_loss: logits need a batch axis");
  const std::size_t B = logits.dim(0), P = logits.size() / B;
  std::vector<T> inter(B, T(0)), denom(B, T(0));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < P; ++i) {
      const T p = T(1) / (T(1) + std::exp(-logits.value()[b * P + i]));
      const T y = gt[b * P + i] ? T(1) : T(0);
      inter[b] += p * y;
      denom[b] += p + y;
    }
  T loss = 0;
  for (std::size_t b = 0; b < B; ++b) loss += T(1) - (T(2) * inter[b] + smooth) / (denom[b] + smooth);
  loss /= T(B);
  return Var<T>::make({1}, {loss}, {logits}, [=](Node<T>& self) {
    auto& in = *self.parents[0];
    auto& g = in.ensure_grad();
    for (std::size_t b = 0; b < B; ++b) {
      const T num = T(2) * inter[b] + smooth;
      const T den = denom[b] + smooth;
      for (std::size_t i = 0; i < P; ++i) {
        const T p = T(1) / (T(1) + std::exp(-in.value[b * P + i]));
        const T y = gt[b * P + i] ? T(1) : T(0);
        const T dp = -(T(2) * y * den - num) / (den * den);
        g[b * P + i] += self.grad[0] / T(B) * dp * p * (T(1) - p);
      }
    }
  });
}

// BCE + Dice with equal weights.
template <class T>
Var<T> segmentation_loss(const Var<T>& logits, const ops::ByteMask& gt) {
  return ops::add(binary_cross_entropy(logits, gt), dice_loss(logits, gt));
}

// Foreground where sigmoid(z) > 0.5, i.e. z > 0.
template <class T>
ops::ByteMask binarize(std::span<const T> logits) {
  ops::ByteMask out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] > T(0) ? 1 : 0;
  return out;
}

}  // namespace saarn
