#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "saarn/arfm.hpp"
#include "saarn/cdle.hpp"
#include "saarn/decoder_loss.hpp"
#include "saarn/encoders.hpp"
#include "saarn/nn/params.hpp"

namespace saarn {

struct ModelConfig {
  std::array<std::size_t, kNumStages> channels{32, 64, 128, 256};
  std::size_t text_dim = 64;
  std::size_t heads = 4;
  std::size_t max_tokens = 24;
  bool cdle = true;
  bool arfm = true;
  std::array<bool, kNumBranches> branches{true, true, true};  // l, d, c
  std::array<std::size_t, MaskDecoder<float>::kSteps> decoder_widths{64, 48, 32, 16, 8};
  // false gives l, c and d separate text encoders.
  bool share_text_encoder = true;

  void validate() const {
    for (auto c : channels)
      if (c == 0) throw ConfigError("model.channels must be positive");
    if (text_dim == 0 || max_tokens == 0 || heads == 0)
      throw ConfigError("model.text_dim, max_tokens and heads must be positive");
    for (auto w : decoder_widths)
      if (w == 0) throw ConfigError("model.decoder_widths must be positive");
    const bool any_branch = branches[0] || branches[1] || branches[2];
    if (!arfm && any_branch)
      throw ConfigError("model.branches: branch toggles require model.arfm = true");
    if (arfm && !any_branch)
      throw ConfigError("model.branches: ARFM needs at least one enabled branch");
    if (arfm && channels.back() % heads != 0)
      throw ConfigError("model.heads must divide the coarsest stage width");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::ordered_json& j, const ModelConfig& c) {
  j = nlohmann::ordered_json{
      {"channels", c.channels},
      {"text_dim", c.text_dim},
      {"heads", c.heads},
      {"max_tokens", c.max_tokens},
      {"cdle", c.cdle},
      {"arfm", c.arfm},
      {"branches", {{"l", c.branches[0]}, {"c", c.branches[2]}, {"d", c.branches[1]}}},
      {"decoder_widths", c.decoder_widths},
      {"share_text_encoder", c.share_text_encoder},
  };
}

inline void from_json(const nlohmann::ordered_json& j, ModelConfig& c) {
  c = ModelConfig{};
  if (j.contains("channels")) j.at("channels").get_to(c.channels);
  if (j.contains("text_dim")) j.at("text_dim").get_to(c.text_dim);
  if (j.contains("heads")) j.at("heads").get_to(c.heads);
  if (j.contains("max_tokens")) j.at("max_tokens").get_to(c.max_tokens);
  if (j.contains("cdle")) j.at("cdle").get_to(c.cdle);
  if (j.contains("arfm")) j.at("arfm").get_to(c.arfm);
  if (j.contains("branches")) {
    const auto& b = j.at("branches");
    c.branches = {b.value("l", true), b.value("d", true), b.value("c", true)};
  }
  if (!c.arfm && !(j.contains("branches"))) c.branches = {false, false, false};
  if (j.contains("decoder_widths")) j.at("decoder_widths").get_to(c.decoder_widths);
  if (j.contains("share_text_encoder")) j.at("share_text_encoder").get_to(c.share_text_encoder);
}

template <class T>
struct ModelInput {
  Var<T> images;  // (B, H0, W0, 3), values roughly in [-0.5, 0.5]
  TokenBatch global;
  TokenBatch klass;
  TokenBatch descriptive;
};

template <class T>
struct ModelOutput {
  Var<T> logits;          // (B, H0, W0, 1)
  Var<T> branch_weights;  // (B, 3) when ARFM is on
  MultiScaleFeatures<T> pyramid;
};

template <class T>
class SaarnModel {
 public:
  SaarnModel(const ModelConfig& config, std::uint64_t seed)
      : config_(config), store_(seed), tokenizer_(Tokenizer::standard()) {
    config_.validate();
    const std::array<const char*, 3> prefixes{"text", "text.c", "text.d"};
    const std::size_t n_text = config_.share_text_encoder ? 1 : 3;
    for (std::size_t i = 0; i < n_text; ++i)
      text_[i] = TextEncoder<T>(store_, tokenizer_.size(), config_.text_dim, config_.max_tokens,
                                prefixes[i]);
    image_ = ImageEncoder<T>(store_, config_.channels);
    if (config_.cdle) cdle_ = CdleStack<T>(store_, config_.channels, config_.text_dim);
    if (config_.arfm)
      arfm_ = Arfm<T>(store_, config_.channels, config_.text_dim,
                      ArfmOptions{config_.heads, config_.branches});
    decoder_ = MaskDecoder<T>(store_, config_.channels, config_.decoder_widths);
  }

  ModelOutput<T> forward(const ModelInput<T>& in) const {
    const bool need_l = config_.cdle || (config_.arfm && config_.branches[kBranchGlobal]);
    const bool need_c = config_.cdle || (config_.arfm && config_.branches[kBranchClass]);
    const bool need_d = config_.arfm && config_.branches[kBranchDescriptive];
    GlobalCue<T> l;
    ClassCue<T> c;
    DescriptiveCue<T> d;
    if (need_l) l.embedding = global_encoder().forward(in.global);
    if (need_c) c.embedding = class_encoder().forward(in.klass);
    if (need_d) d.embedding = descriptive_encoder().forward(in.descriptive);

    ModelOutput<T> out;
    if (cdle_) {
      auto hook = cdle_->bind(c, l);
      out.pyramid = image_.forward(in.images, &hook);
    } else {
      out.pyramid = image_.forward(in.images, nullptr);
    }
    if (arfm_) {
      auto fused = arfm_->forward(out.pyramid, l, d, c);
      out.branch_weights = fused.branch_weights;
      out.logits = decoder_.forward(fused.scales, in.images);
    } else {
      out.logits = decoder_.forward(out.pyramid, in.images);
    }
    return out;
  }

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore<T>& store() { return store_; }
  const nn::ParameterStore<T>& store() const { return store_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const ImageEncoder<T>& image_encoder() const { return image_; }
  const TextEncoder<T>& global_encoder() const { return text_[0]; }
  const TextEncoder<T>& class_encoder() const { return text_[config_.share_text_encoder ? 0 : 1]; }
  const TextEncoder<T>& descriptive_encoder() const {
    return text_[config_.share_text_encoder ? 0 : 2];
  }
  const CdleStack<T>* cdle() const { return cdle_ ? &*cdle_ : nullptr; }
  const Arfm<T>* arfm() const { return arfm_ ? &*arfm_ : nullptr; }
  Arfm<T>* arfm() { return arfm_ ? &*arfm_ : nullptr; }
  MaskDecoder<T>& decoder() { return decoder_; }

 private:
  ModelConfig config_;
  nn::ParameterStore<T> store_;
  Tokenizer tokenizer_;
  std::array<TextEncoder<T>, 3> text_;
  ImageEncoder<T> image_;
  std::optional<CdleStack<T>> cdle_;
  std::optional<Arfm<T>> arfm_;
  MaskDecoder<T> decoder_;
};

}  // namespace saarn
