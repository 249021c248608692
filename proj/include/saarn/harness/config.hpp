#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "saarn/dataset/scene.hpp"
#include "saarn/errors.hpp"
#include "saarn/model.hpp"

namespace saarn::harness {

struct DataConfig {
  dataset::SceneConfig scene;
  std::size_t num_scenes = 512;
  std::size_t batch_size = 8;
  std::string dataset_dir;  // empty: <output_dir>/data
  double max_ratio = 0.1;
  double min_fraction = 0.9;
};

struct OptimConfig {
  std::size_t epochs = 20;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double power = 0.9;
};

struct RunConfig {
  ModelConfig model;
  DataConfig data;
  OptimConfig optim;
  std::uint64_t seed = 7;
  std::string output_dir = "runs/default";

  std::filesystem::path dataset_path() const {
    return data.dataset_dir.empty() ? std::filesystem::path(output_dir) / "data"
                                    : std::filesystem::path(data.dataset_dir);
  }

  // Scene generation follows the root seed.
  dataset::SceneConfig scene_config() const {
    auto s = data.scene;
    s.seed = seed;
    return s;
  }

  void validate() const {
    model.validate();
    scene_config().validate();
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (data.scene.image_size % 32 != 0) fail("data.scene.image_size must be a multiple of 32");
    if (data.num_scenes == 0) fail("data.num_scenes must be positive");
    if (data.batch_size == 0) fail("data.batch_size must be positive");
    if (!(data.max_ratio >= 0 && data.max_ratio <= 1)) fail("data.max_ratio must lie in [0, 1]");
    if (!(data.min_fraction > 0 && data.min_fraction <= 1)) fail("data.min_fraction must lie in (0, 1]");
    if (optim.epochs == 0) fail("optim.epochs must be positive");
    if (!(optim.lr > 0)) fail("optim.lr must be positive");
    if (!(optim.weight_decay >= 0)) fail("optim.weight_decay must be non-negative");
    if (!(optim.power > 0)) fail("optim.power must be positive");
    if (output_dir.empty()) fail("output_dir must be set");
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json model = c.model;
  nlohmann::ordered_json scene = c.data.scene;
  scene.erase("seed");
  return {{"model", model},
          {"data",
           {{"scene", scene},
            {"num_scenes", c.data.num_scenes},
            {"batch_size", c.data.batch_size},
            {"dataset_dir", c.data.dataset_dir},
            {"max_ratio", c.data.max_ratio},
            {"min_fraction", c.data.min_fraction}}},
          {"optim",
           {{"epochs", c.optim.epochs},
            {"lr", c.optim.lr},
            {"weight_decay", c.optim.weight_decay},
            {"power", c.optim.power}}},
          {"seed", c.seed},
          {"output_dir", c.output_dir}};
}

// Missing keys keep their defaults; type errors and unknown sections are
// configuration errors.
inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
  RunConfig c;
  try {
    for (const auto& [k, _] : j.items())
      if (k != "model" && k != "data" && k != "optim" && k != "seed" && k != "output_dir")
        throw ConfigError("unknown config key '" + k + "'");
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("scene")) c.data.scene = d.at("scene").get<dataset::SceneConfig>();
      c.data.num_scenes = d.value("num_scenes", c.data.num_scenes);
      c.data.batch_size = d.value("batch_size", c.data.batch_size);
      c.data.dataset_dir = d.value("dataset_dir", c.data.dataset_dir);
      c.data.max_ratio = d.value("max_ratio", c.data.max_ratio);
      c.data.min_fraction = d.value("min_fraction", c.data.min_fraction);
    }
    if (j.contains("optim")) {
      const auto& o = j.at("optim");
      c.optim.epochs = o.value("epochs", c.optim.epochs);
      c.optim.lr = o.value("lr", c.optim.lr);
      c.optim.weight_decay = o.value("weight_decay", c.optim.weight_decay);
      c.optim.power = o.value("power", c.optim.power);
    }
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  auto j = nlohmann::ordered_json::parse(is, nullptr, false, true);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config '" + path + "' is not a JSON object");
  return run_config_from_json(j);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

}  // namespace saarn::harness
