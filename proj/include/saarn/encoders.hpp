#pragma once

// Trainable stand-ins for the visual backbone and the text encoder. Anything
// that yields a four-stage pyramid with spatial strides 4/8/16/32 and the
// declared channel schedule, or (B, N, D_b) token embeddings with a validity
// mask, can be slotted in behind these types.

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "saarn/errors.hpp"
#include "saarn/lexicon.hpp"
#include "saarn/lingdecomp.hpp"
#include "saarn/nn/params.hpp"
#include "saarn/tensor/ops.hpp"

namespace saarn {

inline constexpr std::string_view kPadToken = "[pad]";
inline constexpr std::string_view kUnkToken = "[unk]";

// ---------------------------------------------------------------------------
// Tokenizer

struct TokenBatch {
  std::vector<std::size_t> ids;  // batch * length, row-major
  ops::ByteMask mask;            // 1 = real token
  std::size_t batch = 0;
  std::size_t length = 0;
};

// Lowercases, keeps bracketed markers ("[masked]") whole, splits everything
// else on whitespace and punctuation. Unknown words map to [unk].
class Tokenizer {
 public:
  explicit Tokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
    if (vocab_.size() < 2 || vocab_[0] != kPadToken || vocab_[1] != kUnkToken)
      throw ConfigError("tokenizer vocabulary must start with [pad], [unk]");
  }

  // Specials, then every word the expression lexicon and the category
  // vocabulary can produce, in first-seen order.
  static Tokenizer standard() {
    std::vector<std::string> words{std::string(kPadToken), std::string(kUnkToken),
                                   std::string(kMaskToken), std::string(kUnknownCategoryToken)};
    std::set<std::string> seen(words.begin(), words.end());
    auto add_text = [&](std::string_view text) {
      for (auto& w : split(text))
        if (seen.insert(w).second) words.push_back(w);
    };
    std::vector<std::string_view> templates(lexicon::kTemplates.begin(), lexicon::kTemplates.end());
    templates.push_back(lexicon::kRelationTemplate);
    for (const auto& tpl : templates) {
      std::string plain;
      for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] == '{') {
          i = tpl.find('}', i);
          plain += ' ';
        } else {
          plain += tpl[i];
        }
      }
      add_text(plain);
    }
    for (const auto& c : lexicon::kColors) add_text(c.name);
    add_text(lexicon::kLargestWord);
    add_text(lexicon::kSmallestWord);
    for (const auto& r : lexicon::kRegionPhrases) add_text(r);
    for (const auto& e : CategoryVocabulary::builtin().entries())
      for (const auto& f : e.surface_forms) add_text(f);
    return Tokenizer(std::move(words));
  }

  static std::vector<std::string> split(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char ch = text[i];
      if (ch == '[') {
        const auto close = text.find(']', i);
        if (close != std::string_view::npos) {
          flush();
          out.push_back(text::to_lower(text.substr(i, close - i + 1)));
          i = close;
          continue;
        }
      }
      if (text::is_word_char(ch)) {
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      } else {
        flush();
      }
    }
    flush();
    return out;
  }

  std::vector<std::size_t> encode(std::string_view text, std::size_t max_tokens) const {
    std::vector<std::size_t> ids;
    for (const auto& w : split(text)) {
      if (ids.size() == max_tokens) break;
      auto it = index_.find(w);
      ids.push_back(it == index_.end() ? 1 : it->second);
    }
    if (ids.empty()) throw InvalidInputError("text has no tokens: '" + std::string(text) + "'");
    return ids;
  }

  TokenBatch encode_batch(const std::vector<std::string>& texts, std::size_t max_tokens) const {
    std::vector<std::vector<std::size_t>> rows;
    std::size_t len = 0;
    for (const auto& t : texts) {
      rows.push_back(encode(t, max_tokens));
      len = std::max(len, rows.back().size());
    }
    TokenBatch tb;
    tb.batch = texts.size();
    tb.length = len;
    tb.ids.assign(tb.batch * len, 0);
    tb.mask.assign(tb.batch * len, 0);
    for (std::size_t b = 0; b < rows.size(); ++b)
      for (std::size_t i = 0; i < rows[b].size(); ++i) {
        tb.ids[b * len + i] = rows[b][i];
        tb.mask[b * len + i] = 1;
      }
    return tb;
  }

  std::size_t size() const { return vocab_.size(); }
  const std::vector<std::string>& words() const { return vocab_; }

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Linguistic embeddings

template <class T>
struct LinguisticEmbedding {
  Var<T> tokens;       // (B, N, D_b)
  ops::ByteMask mask;  // B * N, 1 = valid
  Var<T> pooled;       // (B, D_b), mean of valid tokens

  std::size_t batch() const { return tokens.dim(0); }
  std::size_t length() const { return tokens.dim(1); }
  std::size_t dim() const { return tokens.dim(2); }
};

enum class CueKind { kGlobal, kClass, kDescriptive };

// An embedding tagged with the role of the text it came from, so modules can
// state in their signatures which components they accept.
template <class T, CueKind K>
struct Cue {
  LinguisticEmbedding<T> embedding;
};

template <class T>
using GlobalCue = Cue<T, CueKind::kGlobal>;
template <class T>
using ClassCue = Cue<T, CueKind::kClass>;
template <class T>
using DescriptiveCue = Cue<T, CueKind::kDescriptive>;

// Embedding table + learned positions + one residual single-head
// self-attention block. By default one instance serves l, c and d.
template <class T>
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(nn::ParameterStore<T>& store, std::size_t vocab_size, std::size_t dim,
              std::size_t max_tokens, const std::string& prefix = "text")
      : table_(store.add(prefix + ".embed", {vocab_size, dim}, nn::Init::kFanIn,
                         std::sqrt(static_cast<double>(vocab_size)))),
        positions_(store.add(prefix + ".pos", {max_tokens, dim}, nn::Init::kFanIn,
                             0.1 * std::sqrt(static_cast<double>(max_tokens)))),
        q_(store, prefix + ".attn.q", dim, dim),
        k_(store, prefix + ".attn.k", dim, dim),
        v_(store, prefix + ".attn.v", dim, dim),
        o_(store, prefix + ".attn.o", dim, dim, nn::Init::kFanIn, 0.5),
        dim_(dim),
        max_tokens_(max_tokens) {}

  // Token + position embeddings before any mixing between tokens.
  Var<T> embed_tokens(const TokenBatch& tb) const {
    if (tb.length > max_tokens_) throw ShapeError("token batch longer than max_tokens");
    return ops::add_positional(ops::embedding(table_, tb.ids, tb.batch, tb.length), positions_);
  }

  LinguisticEmbedding<T> forward(const TokenBatch& tb) const {
    auto e = embed_tokens(tb);
    const T scale = T(1) / std::sqrt(static_cast<T>(dim_));
    auto mixed = ops::attention(q_(e), k_(e), v_(e), tb.mask, 1, scale);
    auto h = ops::add(e, o_(mixed));
    LinguisticEmbedding<T> out;
    out.tokens = h;
    out.mask = tb.mask;
    out.pooled = ops::masked_mean(h, tb.mask);
    return out;
  }

  std::size_t dim() const { return dim_; }
  std::size_t max_tokens() const { return max_tokens_; }

 private:
  Var<T> table_;
  Var<T> positions_;
  nn::Linear<T> q_, k_, v_, o_;
  std::size_t dim_ = 0;
  std::size_t max_tokens_ = 0;
};

// Single text -> (1, D_b, N) embedding.
template <class T>
LinguisticEmbedding<T> encode_text(const TextEncoder<T>& encoder, const Tokenizer& tokenizer,
                                   std::string_view text, std::size_t max_tokens) {
  return encoder.forward(tokenizer.encode_batch({std::string(text)}, max_tokens));
}

// ---------------------------------------------------------------------------
// Visual pyramid

inline constexpr std::size_t kNumStages = 4;

// Stage i (0-based) is (B, H0 / 2^(i+2), W0 / 2^(i+2), channels[i]).
template <class T>
struct MultiScaleFeatures {
  std::array<Var<T>, kNumStages> stages;
};

// Hook run on the output of every encoder stage.
template <class T>
class StageEnhancer {
 public:
  virtual ~StageEnhancer() = default;
  virtual Var<T> enhance(std::size_t stage, const Var<T>& x) const = 0;
};

// Patch embedding (4x4, stride 4) followed by 2x2 stride-2 patch merging
// between stages; each stage holds one pre-norm residual 3x3 convolution.
template <class T>
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(nn::ParameterStore<T>& store, std::array<std::size_t, kNumStages> channels)
      : channels_(channels) {
    for (std::size_t i = 0; i < kNumStages; ++i) {
      const std::string p = "encoder.s" + std::to_string(i + 1);
      if (i == 0)
        down_[i] = nn::Conv2d<T>(store, p + ".patch", 3, channels[0], {4, 4, 0});
      else
        down_[i] = nn::Conv2d<T>(store, p + ".merge", channels[i - 1], channels[i], {2, 2, 0});
      down_norm_[i] = nn::LayerNorm<T>(store, p + ".norm", channels[i]);
      block_norm_[i] = nn::LayerNorm<T>(store, p + ".block.norm", channels[i]);
      block_[i] = nn::Conv2d<T>(store, p + ".block.conv", channels[i], channels[i], {3, 1, 1}, 0.5);
    }
  }

  // images: (B, H0, W0, 3). enhancer may be null (plain pyramid).
  MultiScaleFeatures<T> forward(const Var<T>& images, const StageEnhancer<T>* enhancer) const {
    if (images.rank() != 4 || images.dim(3) != 3)
      throw ShapeError("encode_image: expected (B, H, W, 3), got " + to_string(images.shape()));
    if (images.dim(1) % 32 != 0 || images.dim(2) % 32 != 0)
      throw ShapeError("encode_image: H and W must be divisible by 32, got " +
                       to_string(images.shape()));
    MultiScaleFeatures<T> out;
    Var<T> x = images;
    for (std::size_t i = 0; i < kNumStages; ++i) {
      x = down_norm_[i](down_[i](x));
      x = ops::add(x, block_[i](ops::gelu(block_norm_[i](x))));
      if (enhancer) x = enhancer->enhance(i, x);
      out.stages[i] = x;
    }
    return out;
  }

  const std::array<std::size_t, kNumStages>& channels() const { return channels_; }

 private:
  std::array<std::size_t, kNumStages> channels_{};
  std::array<nn::Conv2d<T>, kNumStages> down_;
  std::array<nn::LayerNorm<T>, kNumStages> down_norm_;
  std::array<nn::LayerNorm<T>, kNumStages> block_norm_;
  std::array<nn::Conv2d<T>, kNumStages> block_;
};

}  // namespace saarn
