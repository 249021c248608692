#pragma once

// gen-data, train, eval and ablate. Each command returns a process exit
// code: 0 success, 1 validation or evaluation failure, 2 configuration error.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "saarn/dataset/clients.hpp"
#include "saarn/dataset/corpus.hpp"
#include "saarn/harness/config.hpp"
#include "saarn/harness/trainer.hpp"
#include "saarn/metrics.hpp"

namespace saarn::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

inline dataset::CorpusOptions corpus_options(const RunConfig& cfg) {
  return {cfg.scene_config(), cfg.data.num_scenes, cfg.data.max_ratio, cfg.data.min_fraction};
}

struct GenDataResult {
  dataset::CorpusSummary summary;
  std::filesystem::path root;
};

inline GenDataResult generate_dataset(const RunConfig& cfg, std::ostream& log) {
  dataset::RasterSegmenter seg;
  dataset::TemplateCaptioner cap;
  GenDataResult r;
  r.root = cfg.dataset_path();
  r.summary = dataset::build_corpus(corpus_options(cfg), r.root, seg, cap, log);
  write_json(r.root / "config.json", to_json(cfg));
  return r;
}

inline int cmd_gen_data(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  GenDataResult r;
  try {
    r = generate_dataset(cfg, err);
  } catch (const GenerationError& e) {
    err << "gen-data: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto& s = r.summary;
  out << "wrote " << s.samples.size() << " samples from " << cfg.data.num_scenes << " scenes to "
      << r.root.string() << '\n'
      << "scene splits train/val/test: " << s.scene_splits.train << '/' << s.scene_splits.val << '/'
      << s.scene_splits.test << '\n'
      << "coverage: " << s.coverage.n_below << '/' << s.coverage.n << " below " << s.coverage.max_ratio
      << (s.coverage.passed ? " (pass)" : " (FAIL)") << '\n';
  if (!s.skipped.empty()) out << "skipped " << s.skipped.size() << " samples\n";
  return s.coverage.passed ? kExitOk : kExitFailure;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto root = cfg.dataset_path();
  LoadedSplit train_set, val_set;
  try {
    train_set = load_split(root, dataset::Split::kTrain);
    val_set = load_split(root, dataset::Split::kVal);
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kExitFailure;
  }
  std::filesystem::create_directories(cfg.output_dir);
  write_json(std::filesystem::path(cfg.output_dir) / "config.json", to_json(cfg));
  Model model(cfg.model, cfg.seed);
  out << "training on " << train_set.samples.size() << " samples, " << model.store().scalar_count()
      << " parameters\n";
  TrainResult r;
  try {
    r = train(cfg, model, train_set, val_set, out);
  } catch (const TrainingError& e) {
    err << "train: " << e.what() << '\n';
    return kExitFailure;
  }
  out << "best val mIoU " << r.best_val_miou << " at epoch " << r.best_epoch << '\n'
      << "checkpoints: " << r.best_checkpoint.string() << ", " << r.last_checkpoint.string() << '\n';
  return kExitOk;
}

struct EvalRequest {
  std::string checkpoint;
  dataset::Split split = dataset::Split::kVal;
  std::optional<std::string> dataset_dir;  // default: recorded in the checkpoint
  std::optional<std::string> out_dir;      // default: next to the checkpoint
};

inline metrics::MetricsReport evaluate_checkpoint(const EvalRequest& req, std::string* label = nullptr) {
  auto lm = load_model(req.checkpoint);
  const std::string root = req.dataset_dir ? *req.dataset_dir : lm.metadata.value("dataset_dir", "");
  const auto batch = lm.metadata.value("batch_size", std::size_t{8});
  const auto data = load_split(root, req.split);
  if (label) *label = dataset::to_string(req.split);
  return evaluate(*lm.model, data, batch);
}

inline int cmd_eval(const EvalRequest& req, std::ostream& out, std::ostream& err) {
  metrics::MetricsReport report;
  std::string label;
  try {
    report = evaluate_checkpoint(req, &label);
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return kExitFailure;
  }
  const std::filesystem::path dir =
      req.out_dir ? std::filesystem::path(*req.out_dir) : std::filesystem::path(req.checkpoint).parent_path();
  const auto table = metrics::render_table({{label, report}});
  write_json(dir / ("eval_" + label + ".json"), metrics::to_json(report));
  std::ofstream(dir / ("eval_" + label + ".txt")) << table;
  out << table;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  bool cdle = false;
  bool arfm = false;
  std::array<bool, kNumBranches> branches{};  // l, d, c

  std::string key() const {
    std::string k = std::string("cdle") + (cdle ? "1" : "0") + "_arfm" + (arfm ? "1" : "0");
    if (arfm)
      k += std::string("_l") + (branches[kBranchGlobal] ? "1" : "0") + "c" +
           (branches[kBranchClass] ? "1" : "0") + "d" + (branches[kBranchDescriptive] ? "1" : "0");
    return k;
  }
};

// CDLE x ARFM: (off, off), (off, on), (on, off), (on, on).
inline std::vector<AblationRow> module_grid() {
  const std::array<bool, 3> all{true, true, true}, none{false, false, false};
  return {{false, false, none}, {false, true, all}, {true, false, none}, {true, true, all}};
}

// Linguistic components inside ARFM, CDLE on: none, l, l+d, l+c, l+c+d.
// "none" is ARFM switched off.
inline std::vector<AblationRow> component_grid() {
  return {{true, false, {false, false, false}},
          {true, true, {true, false, false}},
          {true, true, {true, true, false}},
          {true, true, {true, false, true}},
          {true, true, {true, true, true}}};
}

struct AblationOutcome {
  AblationRow row;
  metrics::MetricsReport val, test;
  double first_batch_loss = 0.0;
};

struct AblationResult {
  std::vector<AblationOutcome> modules;     // 4 rows
  std::vector<AblationOutcome> components;  // 5 rows
  std::size_t trained_runs = 0;
  // Rows that differ only by CDLE (identity at start) must begin from the
  // same loss.
  bool first_step_equivalent = false;
};

inline std::string render_ablation(const std::vector<AblationOutcome>& rows, bool component_table) {
  std::ostringstream os;
  auto mark = [](bool b) { return b ? "yes" : "no"; };
  if (component_table)
    os << std::left << std::setw(5) << "l" << std::setw(5) << "c" << std::setw(5) << "d";
  else
    os << std::left << std::setw(6) << "CDLE" << std::setw(6) << "ARFM";
  os << std::right << std::setw(10) << "oIoU val" << std::setw(10) << "oIoU test" << std::setw(10)
     << "mIoU val" << std::setw(10) << "mIoU test" << '\n';
  for (const auto& r : rows) {
    if (component_table)
      os << std::left << std::setw(5) << mark(r.row.arfm && r.row.branches[kBranchGlobal]) << std::setw(5)
         << mark(r.row.arfm && r.row.branches[kBranchClass]) << std::setw(5)
         << mark(r.row.arfm && r.row.branches[kBranchDescriptive]);
    else
      os << std::left << std::setw(6) << mark(r.row.cdle) << std::setw(6) << mark(r.row.arfm);
    os << std::right << std::fixed << std::setprecision(2) << std::setw(10) << 100 * r.val.oiou
       << std::setw(10) << 100 * r.test.oiou << std::setw(10) << 100 * r.val.miou << std::setw(10)
       << 100 * r.test.miou << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json ablation_json(const std::vector<AblationOutcome>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    arr.push_back({{"cdle", r.row.cdle},
                   {"arfm", r.row.arfm},
                   {"l", r.row.arfm && r.row.branches[kBranchGlobal]},
                   {"c", r.row.arfm && r.row.branches[kBranchClass]},
                   {"d", r.row.arfm && r.row.branches[kBranchDescriptive]},
                   {"val", {{"oiou", r.val.oiou}, {"miou", r.val.miou}}},
                   {"test", {{"oiou", r.test.oiou}, {"miou", r.test.miou}}},
                   {"first_batch_loss", r.first_batch_loss}});
  return arr;
}

// Trains every distinct row once with the same seed and data order.
inline AblationResult run_ablation(const RunConfig& cfg, std::ostream& log) {
  const auto root = cfg.dataset_path();
  const auto train_set = load_split(root, dataset::Split::kTrain);
  const auto val_set = load_split(root, dataset::Split::kVal);
  const auto test_set = load_split(root, dataset::Split::kTest);
  std::map<std::string, AblationOutcome> done;
  AblationResult result;
  auto run = [&](const AblationRow& row) {
    const auto key = row.key();
    if (auto it = done.find(key); it != done.end()) return it->second;
    RunConfig rc = cfg;
    rc.model.cdle = row.cdle;
    rc.model.arfm = row.arfm;
    rc.model.branches = row.branches;
    rc.output_dir = (std::filesystem::path(cfg.output_dir) / "ablation" / key).string();
    log << "== " << key << '\n';
    Model model(rc.model, rc.seed);
    std::filesystem::create_directories(rc.output_dir);
    write_json(std::filesystem::path(rc.output_dir) / "config.json", to_json(rc));
    const auto tr = train(rc, model, train_set, val_set, log);
    AblationOutcome o{row, evaluate(model, val_set, rc.data.batch_size),
                      evaluate(model, test_set, rc.data.batch_size), tr.first_batch_loss};
    ++result.trained_runs;
    done.emplace(key, o);
    return o;
  };
  for (const auto& r : module_grid()) result.modules.push_back(run(r));
  for (const auto& r : component_grid()) result.components.push_back(run(r));
  const auto& m = result.modules;
  result.first_step_equivalent = m[0].first_batch_loss == m[2].first_batch_loss &&
                                 m[1].first_batch_loss == m[3].first_batch_loss;
  return result;
}

inline int cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  AblationResult r;
  try {
    r = run_ablation(cfg, out);
  } catch (const DatasetError& e) {
    err << "ablate: " << e.what() << '\n';
    return kExitFailure;
  } catch (const TrainingError& e) {
    err << "ablate: " << e.what() << '\n';
    return kExitFailure;
  }
  const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / "ablation";
  const auto t3 = render_ablation(r.modules, false);
  const auto t4 = render_ablation(r.components, true);
  std::ofstream(dir / "cdle_arfm.txt") << t3;
  std::ofstream(dir / "components.txt") << t4;
  write_json(dir / "ablation.json", {{"cdle_arfm", ablation_json(r.modules)},
                                      {"components", ablation_json(r.components)},
                                      {"trained_runs", r.trained_runs},
                                      {"first_step_equivalent", r.first_step_equivalent}});
  out << "CDLE x ARFM\n" << t3 << "\nlinguistic components (ARFM)\n" << t4;
  if (!r.first_step_equivalent) {
    err << "ablate: rows differing only in CDLE did not start from the same loss\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace saarn::harness
