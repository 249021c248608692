#pragma once

// Synthetic drone-view scenes: coloured glyphs on a textured ground. Each
// category has its own glyph family (aspect ratio, scale, dark interior
// pattern), the instance mask is the rasterized oriented box of the glyph.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "saarn/dataset/geometry.hpp"
#include "saarn/dataset/image.hpp"
#include "saarn/errors.hpp"
#include "saarn/lexicon.hpp"
#include "saarn/lingdecomp.hpp"
#include "saarn/random.hpp"

namespace saarn::dataset {

struct SceneConfig {
  int image_size = 64;
  std::vector<int> categories{0, 1, 2, 3, 4, 5, 6, 7};
  int instances_min = 1;
  int instances_max = 4;
  double size_min = 10.0;  // glyph length in pixels, before the family scale
  double size_max = 18.0;
  double same_class_cluster_prob = 0.25;
  double night_prob = 0.15;
  std::uint64_t seed = 7;
  int max_retries = 200;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("scene config: " + m); };
    if (image_size < 16) fail("image_size must be at least 16");
    if (categories.empty()) fail("categories must not be empty");
    for (int c : categories)
      if (c < 0 || c >= static_cast<int>(kNumCategories)) fail("category id out of range");
    if (instances_min < 1 || instances_max < instances_min) fail("bad instances range");
    if (instances_max > 8) fail("at most 8 instances per scene");
    if (!(size_min >= 4) || !(size_max >= size_min)) fail("bad size range");
    if (size_max * size_max >= 0.1 * image_size * image_size)
      fail("size_max too large for the 0.1 coverage bound at this image size");
    if (!(same_class_cluster_prob >= 0 && same_class_cluster_prob <= 1)) fail("cluster prob not in [0,1]");
    if (!(night_prob >= 0 && night_prob <= 1)) fail("night prob not in [0,1]");
    if (max_retries < 1) fail("max_retries must be positive");
  }
};

inline void to_json(nlohmann::ordered_json& j, const SceneConfig& c) {
  j = nlohmann::ordered_json{{"image_size", c.image_size},
                             {"categories", c.categories},
                             {"instances_min", c.instances_min},
                             {"instances_max", c.instances_max},
                             {"size_min", c.size_min},
                             {"size_max", c.size_max},
                             {"same_class_cluster_prob", c.same_class_cluster_prob},
                             {"night_prob", c.night_prob},
                             {"seed", c.seed},
                             {"max_retries", c.max_retries}};
}

inline void from_json(const nlohmann::ordered_json& j, SceneConfig& c) {
  SceneConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.categories = j.value("categories", d.categories);
  c.instances_min = j.value("instances_min", d.instances_min);
  c.instances_max = j.value("instances_max", d.instances_max);
  c.size_min = j.value("size_min", d.size_min);
  c.size_max = j.value("size_max", d.size_max);
  c.same_class_cluster_prob = j.value("same_class_cluster_prob", d.same_class_cluster_prob);
  c.night_prob = j.value("night_prob", d.night_prob);
  c.seed = j.value("seed", d.seed);
  c.max_retries = j.value("max_retries", d.max_retries);
}

struct GlyphFamily {
  double aspect;  // width / length
  double scale;   // applied to the sampled length
  int pattern;
};

// people small and square, buses long, etc.
inline constexpr std::array<GlyphFamily, kNumCategories> kGlyphFamilies = {{
    {1.00, 0.65, 0},  // people: solid
    {0.55, 0.85, 1},  // car: dark rim
    {0.40, 0.75, 2},  // motor: dark centre line
    {0.45, 0.80, 3},  // bicycle: two dark wheels
    {0.70, 0.80, 4},  // tricycle: dark diagonal half
    {0.45, 1.00, 5},  // truck: dark cab
    {0.35, 1.00, 6},  // bus: cross stripes
    {0.45, 0.95, 7},  // boat: dark cross
}};

// True where the glyph interior is drawn dark; (a, b) in [-1, 1] along the
// box length and width.
inline bool glyph_pattern_dark(int pattern, double a, double b) {
  switch (pattern) {
    case 1: return std::abs(a) > 0.65 || std::abs(b) > 0.55;
    case 2: return std::abs(b) < 0.35;
    case 3: return std::hypot(std::abs(a) - 0.55, b) < 0.45;
    case 4: return a + b > 0.0;
    case 5: return a > 0.45;
    case 6: return static_cast<int>(std::floor((a + 1.0) * 2.5)) % 2 == 1;
    case 7: return std::abs(a) < 0.22 || std::abs(b) < 0.3;
    default: return false;
  }
}

struct SceneInstance {
  OrientedBox box;
  int category = 0;
  int color = 0;  // index into lexicon::kColors
  bool clustered = false;
  Mask mask;
};

struct Scene {
  Image image;
  std::vector<SceneInstance> instances;
  bool night = false;
};

namespace detail {

// Bilinear value noise on a coarse lattice.
inline std::vector<double> value_noise(int size, int cells, Rng& rng) {
  std::vector<double> lattice(static_cast<std::size_t>(cells + 1) * (cells + 1));
  for (auto& v : lattice) v = uniform(rng, -1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double fy = (y + 0.5) * cells / size, fx = (x + 0.5) * cells / size;
      const int iy = std::min(cells - 1, static_cast<int>(fy));
      const int ix = std::min(cells - 1, static_cast<int>(fx));
      const double ty = fy - iy, tx = fx - ix;
      auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * (cells + 1) + xx]; };
      const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
      const double bot = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
      out[static_cast<std::size_t>(y) * size + x] = top * (1 - ty) + bot * ty;
    }
  return out;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

inline void render_background(Image& img, Rng& rng) {
  const int n = img.width;
  const auto coarse = value_noise(n, 4, rng);
  const auto fine = value_noise(n, 16, rng);
  const double base = uniform(rng, 85.0, 125.0);
  const std::array<double, 3> tint{uniform(rng, 0.9, 1.1), uniform(rng, 0.9, 1.1), uniform(rng, 0.85, 1.05)};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const auto i = static_cast<std::size_t>(y) * n + x;
      const double v = base + 22.0 * coarse[i] + 8.0 * fine[i] + 4.0 * normal(rng);
      auto* p = img.pixel(y, x);
      for (int c = 0; c < 3; ++c) p[c] = to_byte(v * tint[c]);
    }
}

inline void render_glyph(Image& img, const SceneInstance& inst) {
  const auto& fam = kGlyphFamilies[inst.category];
  const auto& col = lexicon::kColors[inst.color];
  const std::array<double, 3> rgb{double(col.r), double(col.g), double(col.b)};
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (!inst.mask.at(y, x)) continue;
      const auto [u, v] = inst.box.local(x + 0.5, y + 0.5);
      const double a = std::clamp(u / (inst.box.w / 2), -1.0, 1.0);
      const double b = std::clamp(v / (inst.box.h / 2), -1.0, 1.0);
      const double k = glyph_pattern_dark(fam.pattern, a, b) ? 0.4 : 1.0;
      auto* p = img.pixel(y, x);
      for (int c = 0; c < 3; ++c) p[c] = to_byte(rgb[c] * k);
    }
}

inline bool overlaps(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.bits.size(); ++i)
    if (a.bits[i] && b.bits[i]) return true;
  return false;
}

inline bool inside_image(const OrientedBox& box, int size) {
  for (const auto& p : box.corners())
    if (p[0] < 0.5 || p[1] < 0.5 || p[0] > size - 0.5 || p[1] > size - 0.5) return false;
  return true;
}

}  // namespace detail

// Region cell (row * 3 + col) holding the box centre.
inline int region_of(const OrientedBox& box, int image_size) {
  auto cell = [&](double v) { return std::clamp(static_cast<int>(v * 3.0 / image_size), 0, 2); };
  return cell(box.cy) * 3 + cell(box.cx);
}

// Renders one scene. Pure in (config, rng state, cluster_category). When
// given, cluster_category fixes the category of a cluster if one is drawn.
inline Scene generate_synthetic_scene(const SceneConfig& config, Rng& rng,
                                      std::optional<int> cluster_category = std::nullopt) {
  config.validate();
  const int n_img = config.image_size;
  Scene scene;
  scene.image = Image(n_img, n_img);
  detail::render_background(scene.image, rng);

  int count = uniform_int(rng, config.instances_min, config.instances_max);
  const bool cluster = config.instances_max >= 3 && bernoulli(rng, config.same_class_cluster_prob);

  // Category plan: an optional cluster of >= 3 of one category, then draws
  // from a per-scene deck holding every allowed category twice.
  std::vector<int> plan;
  int cluster_size = 0;
  if (cluster) {
    count = std::max(count, 3);
    cluster_size = uniform_int(rng, 3, count);
    const int cat = cluster_category ? *cluster_category
                                     : config.categories[uniform_index(rng, config.categories.size())];
    plan.assign(static_cast<std::size_t>(cluster_size), cat);
  }
  std::vector<int> deck;
  for (int c : config.categories) deck.insert(deck.end(), {c, c});
  shuffle(deck, rng);
  for (std::size_t i = 0; static_cast<int>(plan.size()) < count && i < deck.size(); ++i) {
    if (std::count(plan.begin(), plan.end(), deck[i]) >= static_cast<long>(lexicon::kColors.size()))
      continue;
    plan.push_back(deck[i]);
  }

  Mask occupied(n_img, n_img);
  double cluster_cx = 0, cluster_cy = 0;
  if (cluster) {
    cluster_cx = uniform(rng, 0.3 * n_img, 0.7 * n_img);
    cluster_cy = uniform(rng, 0.3 * n_img, 0.7 * n_img);
  }
  std::array<std::vector<int>, kNumCategories> used_colors;

  for (std::size_t k = 0; k < plan.size(); ++k) {
    SceneInstance inst;
    inst.category = plan[k];
    inst.clustered = static_cast<int>(k) < cluster_size;
    const auto& fam = kGlyphFamilies[inst.category];
    bool placed = false;
    for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
      OrientedBox box;
      box.w = std::max(4.0, uniform(rng, config.size_min, config.size_max) * fam.scale);
      box.h = std::max(3.0, box.w * fam.aspect);
      box.angle = uniform(rng, -std::numbers::pi / 2, std::numbers::pi / 2);
      if (inst.clustered) {
        const double r = uniform(rng, 0.0, 1.3 * config.size_max);
        const double t = uniform(rng, 0.0, 2 * std::numbers::pi);
        box.cx = cluster_cx + r * std::cos(t);
        box.cy = cluster_cy + r * std::sin(t);
      } else {
        box.cx = uniform(rng, 0.0, n_img);
        box.cy = uniform(rng, 0.0, n_img);
      }
      if (!detail::inside_image(box, n_img)) continue;
      OrientedBox halo = box;
      halo.w += 2;
      halo.h += 2;
      if (detail::overlaps(rasterize_obb(halo, n_img, n_img), occupied)) continue;
      inst.box = box;
      inst.mask = rasterize_obb(box, n_img, n_img);
      if (inst.mask.count() == 0) continue;
      placed = true;
    }
    if (!placed)
      throw GenerationError("could not place instance " + std::to_string(k) + " of " +
                            std::to_string(plan.size()) + " after " +
                            std::to_string(config.max_retries) + " attempts");
    for (std::size_t i = 0; i < occupied.bits.size(); ++i) occupied.bits[i] |= inst.mask.bits[i];

    // Colours are distinct within a category.
    auto& used = used_colors[inst.category];
    std::vector<int> free;
    for (int c = 0; c < static_cast<int>(lexicon::kColors.size()); ++c)
      if (std::find(used.begin(), used.end(), c) == used.end()) free.push_back(c);
    inst.color = free[uniform_index(rng, free.size())];
    used.push_back(inst.color);

    detail::render_glyph(scene.image, inst);
    scene.instances.push_back(std::move(inst));
  }

  scene.night = bernoulli(rng, config.night_prob);
  if (scene.night)
    for (auto& v : scene.image.rgb) v = static_cast<std::uint8_t>(v / 2);
  return scene;
}

// Scene `index` of a corpus rooted at config.seed. Cluster categories cycle
// through the category list so corpus-level counts stay balanced.
inline Scene generate_scene_at(const SceneConfig& config, std::uint64_t index) {
  config.validate();
  Rng rng(derive_seed(derive_seed(config.seed, "scene"), index));
  const auto n = config.categories.size();
  const auto offset = derive_seed(config.seed, "cluster") % n;
  return generate_synthetic_scene(config, rng, config.categories[(index + offset) % n]);
}

}  // namespace saarn::dataset
