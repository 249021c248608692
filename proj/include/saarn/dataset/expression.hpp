#pragma once

// Template referring expressions for synthetic scenes. An expression names
// the target's category once as head noun, its colour, optionally a size
// superlative, its 3x3 image region and, inside a cluster, the colour of the
// nearest same-category neighbour.

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saarn/dataset/scene.hpp"
#include "saarn/errors.hpp"
#include "saarn/lexicon.hpp"
#include "saarn/lingdecomp.hpp"
#include "saarn/random.hpp"

namespace saarn::dataset {

enum class SizeWord { kNone, kLargest, kSmallest };

struct ExpressionSpec {
  int category = 0;
  int color = 0;
  SizeWord size = SizeWord::kNone;
  int region = 4;
  std::optional<int> neighbour_color;
  bool operator==(const ExpressionSpec&) const = default;
};

struct GeneratedExpression {
  std::string text;
  ExpressionSpec spec;
  std::size_t template_index = 0;
};

// Index of the closest other instance of the same category, by centre
// distance; ties go to the lower index.
inline std::optional<std::size_t> nearest_same_category(const Scene& scene, std::size_t i) {
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  const auto& a = scene.instances[i];
  for (std::size_t j = 0; j < scene.instances.size(); ++j) {
    const auto& b = scene.instances[j];
    if (j == i || b.category != a.category) continue;
    const double d = std::hypot(a.box.cx - b.box.cx, a.box.cy - b.box.cy);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

inline bool is_extreme_size(const Scene& scene, std::size_t i, SizeWord which) {
  const auto& a = scene.instances[i];
  for (std::size_t j = 0; j < scene.instances.size(); ++j) {
    const auto& b = scene.instances[j];
    if (j == i || b.category != a.category) continue;
    if (which == SizeWord::kLargest && b.mask.count() >= a.mask.count()) return false;
    if (which == SizeWord::kSmallest && b.mask.count() <= a.mask.count()) return false;
  }
  return true;
}

inline bool satisfies(const Scene& scene, std::size_t i, const ExpressionSpec& spec) {
  const auto& inst = scene.instances[i];
  if (inst.category != spec.category || inst.color != spec.color) return false;
  if (region_of(inst.box, scene.image.width) != spec.region) return false;
  if (spec.size != SizeWord::kNone && !is_extreme_size(scene, i, spec.size)) return false;
  if (spec.neighbour_color) {
    const auto n = nearest_same_category(scene, i);
    if (!n || scene.instances[*n].color != *spec.neighbour_color) return false;
  }
  return true;
}

inline std::size_t count_satisfiers(const Scene& scene, const ExpressionSpec& spec) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < scene.instances.size(); ++i) n += satisfies(scene, i, spec) ? 1 : 0;
  return n;
}

inline std::string render_expression(const ExpressionSpec& spec, std::string_view tpl) {
  std::string attrs;
  if (spec.size == SizeWord::kLargest) attrs = std::string(lexicon::kLargestWord) + " ";
  if (spec.size == SizeWord::kSmallest) attrs = std::string(lexicon::kSmallestWord) + " ";
  attrs += lexicon::kColors[spec.color].name;
  std::string out;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] != '{') {
      out += tpl[i];
      continue;
    }
    const auto close = tpl.find('}', i);
    const auto key = tpl.substr(i + 1, close - i - 1);
    if (key == "attrs") out += attrs;
    else if (key == "noun") out += kCategoryNames[spec.category];
    else if (key == "region") out += lexicon::kRegionPhrases[spec.region];
    else throw ConfigError("unknown template slot '{" + std::string(key) + "}'");
    i = close;
  }
  if (spec.neighbour_color) {
    std::string rel(lexicon::kRelationTemplate);
    rel.replace(rel.find("{color}"), 7, lexicon::kColors[*spec.neighbour_color].name);
    out += " " + rel;
  }
  return out;
}

// Tries colour + region (+ neighbour when clustered), then adds a size
// superlative; throws when no candidate singles the target out.
inline GeneratedExpression generate_expression(
    const Scene& scene, std::size_t target, Rng& rng,
    std::span<const std::string_view> templates = lexicon::kTemplates) {
  if (target >= scene.instances.size())
    throw RangeError("target " + std::to_string(target) + " not in scene of " +
                     std::to_string(scene.instances.size()) + " instances");
  if (templates.empty()) throw ConfigError("empty template bank");
  const auto& inst = scene.instances[target];
  ExpressionSpec base;
  base.category = inst.category;
  base.color = inst.color;
  base.region = region_of(inst.box, scene.image.width);
  if (inst.clustered)
    if (auto n = nearest_same_category(scene, target)) base.neighbour_color = scene.instances[*n].color;

  std::vector<ExpressionSpec> candidates{base};
  for (SizeWord w : {SizeWord::kLargest, SizeWord::kSmallest})
    if (is_extreme_size(scene, target, w)) {
      auto s = base;
      s.size = w;
      candidates.push_back(s);
    }
  const std::size_t tpl = uniform_index(rng, templates.size());
  for (const auto& spec : candidates)
    if (count_satisfiers(scene, spec) == 1 && satisfies(scene, target, spec))
      return {render_expression(spec, templates[tpl]), spec, tpl};
  throw GenerationError("no uniquely resolving expression for instance " + std::to_string(target));
}

}  // namespace saarn::dataset
