#pragma once

// Referring-segmentation corpus on disk:
//
//   <root>/annotations.jsonl   one ReferringSample per line
//   <root>/images/<scene>.ppm
//   <root>/masks/<sample>.pgm   0/255
//   <root>/splits.json          scene -> split
//   <root>/validation.json      coverage report
//
// Paths inside annotations are relative to <root>.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "saarn/dataset/clients.hpp"
#include "saarn/dataset/geometry.hpp"
#include "saarn/dataset/image.hpp"
#include "saarn/dataset/scene.hpp"
#include "saarn/errors.hpp"
#include "saarn/lingdecomp.hpp"
#include "saarn/random.hpp"

namespace saarn::dataset {

enum class Split { kTrain, kVal, kTest };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw InvalidInputError("unknown split '" + std::string(s) + "'");
}

struct ReferringSample {
  std::string sample_id;
  std::string image_path;
  std::string mask_path;
  std::string expression;
  std::string category;
  Split split = Split::kTrain;
  bool operator==(const ReferringSample&) const = default;
};

inline nlohmann::ordered_json to_json(const ReferringSample& s) {
  return {{"sample_id", s.sample_id}, {"image_path", s.image_path}, {"mask_path", s.mask_path},
          {"expression", s.expression}, {"category", s.category}, {"split", to_string(s.split)}};
}

inline ReferringSample sample_from_json(const nlohmann::json& j) {
  ReferringSample s;
  try {
    s.sample_id = j.at("sample_id").get<std::string>();
    s.image_path = j.at("image_path").get<std::string>();
    s.mask_path = j.at("mask_path").get<std::string>();
    s.expression = j.at("expression").get<std::string>();
    s.category = j.at("category").get<std::string>();
    s.split = parse_split(j.at("split").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("annotation: ") + e.what());
  }
  if (!CategoryVocabulary::builtin().id_of(s.category))
    throw FormatError("annotation '" + s.sample_id + "': unknown category '" + s.category + "'");
  return s;
}

// Single-writer append.
class AnnotationWriter {
 public:
  explicit AnnotationWriter(const std::string& path, bool append = false)
      : os_(path, append ? std::ios::app : std::ios::trunc) {
    if (!os_) throw FormatError("cannot open '" + path + "' for writing");
  }
  void write(const ReferringSample& s) {
    os_ << to_json(s).dump() << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

inline void write_annotations(const std::string& path, std::span<const ReferringSample> samples) {
  AnnotationWriter w(path);
  for (const auto& s : samples) w.write(s);
}

inline std::vector<ReferringSample> read_annotations(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open annotations '" + path + "'");
  std::vector<ReferringSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw FormatError(path + ":" + std::to_string(line_no) + ": not valid JSON");
    out.push_back(sample_from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
  bool operator==(const SplitCounts&) const = default;
};

// n_train = floor(0.7 n), n_val = floor(0.1 n), the rest test.
inline SplitCounts split_counts(std::size_t n) {
  SplitCounts c;
  c.train = n * 7 / 10;
  c.val = n / 10;
  c.test = n - c.train - c.val;
  return c;
}

// Split for each id, aligned with the input order. Assignment follows a
// seeded Fisher-Yates shuffle of the positions.
inline std::vector<Split> split_dataset(std::span<const std::string> ids, std::uint64_t seed) {
  if (ids.empty()) throw InvalidInputError("split_dataset: empty id list");
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  shuffle(order, rng);
  const auto c = split_counts(ids.size());
  std::vector<Split> out(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r)
    out[order[r]] = r < c.train ? Split::kTrain : (r < c.train + c.val ? Split::kVal : Split::kTest);
  return out;
}

// ---------------------------------------------------------------------------
// Coverage

struct CoverageRecord {
  std::string sample_id;
  double ratio = 0.0;
};

struct CoverageReport {
  bool passed = false;
  std::size_t n = 0;
  std::size_t n_below = 0;
  double fraction_below = 0.0;
  double max_ratio = 0.1;
  double min_fraction = 0.9;
  std::vector<CoverageRecord> violators;  // ratio >= max_ratio
};

inline CoverageReport validate_coverage(std::span<const CoverageRecord> records, double max_ratio = 0.1,
                                        double min_fraction = 0.9) {
  if (records.empty()) throw InvalidInputError("validate_coverage: empty sample set");
  CoverageReport r;
  r.n = records.size();
  r.max_ratio = max_ratio;
  r.min_fraction = min_fraction;
  for (const auto& rec : records) {
    if (rec.ratio < max_ratio) ++r.n_below;
    else r.violators.push_back(rec);
  }
  r.fraction_below = static_cast<double>(r.n_below) / static_cast<double>(r.n);
  r.passed = r.n_below >= min_fraction * static_cast<double>(r.n) - 1e-9;
  return r;
}

inline nlohmann::ordered_json to_json(const CoverageReport& r) {
  nlohmann::ordered_json v = nlohmann::ordered_json::array();
  for (const auto& rec : r.violators) v.push_back({{"sample_id", rec.sample_id}, {"ratio", rec.ratio}});
  return {{"passed", r.passed},         {"n", r.n},
          {"n_below", r.n_below},       {"fraction_below", r.fraction_below},
          {"max_ratio", r.max_ratio},   {"min_fraction", r.min_fraction},
          {"violators", v}};
}

// ---------------------------------------------------------------------------
// Building

struct CorpusOptions {
  SceneConfig scene;
  std::size_t num_scenes = 512;
  double max_ratio = 0.1;
  double min_fraction = 0.9;
};

struct SkippedSample {
  std::string sample_id;
  std::string reason;
};

struct CorpusSummary {
  std::vector<ReferringSample> samples;
  std::vector<SkippedSample> skipped;
  SplitCounts scene_splits;
  CoverageReport coverage;
};

inline std::string scene_id(std::size_t index) {
  std::ostringstream os;
  os << 's' << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

inline std::uint64_t caption_seed(std::uint64_t root, std::size_t scene, std::size_t instance) {
  return derive_seed(derive_seed(root, "expression"), scene * 64 + instance);
}

// Renders every scene, asks the clients for masks and expressions, writes the
// corpus under `root`. Client failures skip that sample and are logged.
inline CorpusSummary build_corpus(const CorpusOptions& opts, const std::filesystem::path& root,
                                  SegmenterClient& segmenter, CaptionerClient& captioner,
                                  std::ostream& log) {
  namespace fs = std::filesystem;
  opts.scene.validate();
  if (opts.num_scenes == 0) throw ConfigError("num_scenes must be positive");
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");

  std::vector<std::string> scene_ids;
  for (std::size_t i = 0; i < opts.num_scenes; ++i) scene_ids.push_back(scene_id(i));
  const auto scene_split = split_dataset(scene_ids, opts.scene.seed);

  CorpusSummary summary;
  summary.scene_splits = split_counts(opts.num_scenes);
  std::vector<CoverageRecord> coverage;
  const auto& vocab = CategoryVocabulary::builtin();
  AnnotationWriter writer((root / "annotations.jsonl").string());

  for (std::size_t si = 0; si < opts.num_scenes; ++si) {
    const Scene scene = generate_scene_at(opts.scene, si);
    const std::string image_rel = "images/" + scene_ids[si] + ".ppm";
    write_ppm((root / image_rel).string(), scene.image);
    for (std::size_t k = 0; k < scene.instances.size(); ++k) {
      const auto& inst = scene.instances[k];
      ReferringSample s;
      s.sample_id = scene_ids[si] + "_i" + std::to_string(k);
      s.image_path = image_rel;
      s.mask_path = "masks/" + s.sample_id + ".pgm";
      s.category = std::string(kCategoryNames[inst.category]);
      s.split = scene_split[si];
      Mask mask;
      try {
        mask = segmenter.segment(scene.image, inst.box);
        if (mask.height != scene.image.height || mask.width != scene.image.width)
          throw MalformedResponseError("mask size differs from the image");
        if (mask.count() == 0) throw MalformedResponseError("empty mask");
        s.expression = captioner.caption(make_caption_request(scene, k, caption_seed(opts.scene.seed, si, k)));
        if (detect_category(s.expression, vocab).category_id != inst.category)
          throw MalformedResponseError("expression does not name category '" + s.category + "'");
      } catch (const ClientError& e) {
        log << "skip " << s.sample_id << ": " << e.what() << '\n';
        summary.skipped.push_back({s.sample_id, e.what()});
        continue;
      }
      write_mask_pgm((root / s.mask_path).string(), mask);
      writer.write(s);
      coverage.push_back({s.sample_id, coverage_ratio(mask)});
      summary.samples.push_back(std::move(s));
    }
  }
  if (summary.samples.empty()) throw GenerationError("corpus has no samples");
  summary.coverage = validate_coverage(coverage, opts.max_ratio, opts.min_fraction);

  nlohmann::ordered_json splits = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < scene_ids.size(); ++i) splits[scene_ids[i]] = to_string(scene_split[i]);
  std::ofstream((root / "splits.json").string()) << splits.dump(1) << '\n';
  std::ofstream((root / "validation.json").string()) << to_json(summary.coverage).dump(2) << '\n';
  return summary;
}

}  // namespace saarn::dataset
