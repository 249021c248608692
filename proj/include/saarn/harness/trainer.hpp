#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "saarn/dataset/corpus.hpp"
#include "saarn/decoder_loss.hpp"
#include "saarn/harness/config.hpp"
#include "saarn/lingdecomp.hpp"
#include "saarn/metrics.hpp"
#include "saarn/model.hpp"
#include "saarn/nn/checkpoint.hpp"
#include "saarn/nn/optim.hpp"
#include "saarn/random.hpp"

namespace saarn::harness {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Model = SaarnModel<float>;

struct LoadedSample {
  std::string sample_id;
  std::shared_ptr<const std::vector<float>> image;  // H * W * 3, in [-0.5, 0.5]
  ops::ByteMask mask;
  LinguisticTriple triple;
};

struct LoadedSplit {
  dataset::Split split = dataset::Split::kTrain;
  int height = 0;
  int width = 0;
  std::vector<LoadedSample> samples;
};

inline std::filesystem::path annotations_path(const std::filesystem::path& root) {
  return root / "annotations.jsonl";
}

inline LoadedSplit load_split(const std::filesystem::path& root, dataset::Split split) {
  if (!std::filesystem::exists(annotations_path(root)))
    throw DatasetError("no dataset at '" + root.string() + "' (annotations.jsonl missing)");
  LoadedSplit out;
  out.split = split;
  std::map<std::string, std::shared_ptr<const std::vector<float>>> cache;
  const auto& vocab = CategoryVocabulary::builtin();
  for (const auto& s : dataset::read_annotations(annotations_path(root).string())) {
    if (s.split != split) continue;
    auto& img = cache[s.image_path];
    if (!img) {
      const auto raw = dataset::read_ppm((root / s.image_path).string());
      if (out.height == 0) {
        out.height = raw.height;
        out.width = raw.width;
      }
      if (raw.height != out.height || raw.width != out.width)
        throw DatasetError("image '" + s.image_path + "' differs in size from the rest of the split");
      auto v = std::make_shared<std::vector<float>>(raw.rgb.size());
      for (std::size_t i = 0; i < raw.rgb.size(); ++i) (*v)[i] = raw.rgb[i] / 255.0f - 0.5f;
      img = std::move(v);
    }
    const auto m = dataset::read_mask_pgm((root / s.mask_path).string());
    if (m.height != out.height || m.width != out.width)
      throw DatasetError("mask '" + s.mask_path + "' is not congruent with its image");
    out.samples.push_back({s.sample_id, img, m.bits, decompose(s.expression, vocab)});
  }
  if (out.samples.empty())
    throw DatasetError("split '" + dataset::to_string(split) + "' of '" + root.string() + "' is empty");
  return out;
}

struct Batch {
  ModelInput<float> input;
  ops::ByteMask gt;
};

inline Batch make_batch(const Model& model, const LoadedSplit& data, const std::vector<std::size_t>& idx) {
  const std::size_t B = idx.size(), H = data.height, W = data.width;
  std::vector<float> pixels;
  pixels.reserve(B * H * W * 3);
  Batch b;
  std::vector<std::string> l, c, d;
  for (auto i : idx) {
    const auto& s = data.samples[i];
    pixels.insert(pixels.end(), s.image->begin(), s.image->end());
    b.gt.insert(b.gt.end(), s.mask.begin(), s.mask.end());
    l.push_back(s.triple.global_text);
    c.push_back(s.triple.class_text);
    d.push_back(s.triple.descriptive_text);
  }
  const auto max_tokens = model.config().max_tokens;
  b.input.images = Var<float>::constant({B, H, W, 3}, std::move(pixels));
  b.input.global = model.tokenizer().encode_batch(l, max_tokens);
  b.input.klass = model.tokenizer().encode_batch(c, max_tokens);
  b.input.descriptive = model.tokenizer().encode_batch(d, max_tokens);
  return b;
}

inline std::vector<std::vector<std::size_t>> batches_of(std::vector<std::size_t> order, std::size_t batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch)
    out.emplace_back(order.begin() + static_cast<long>(i),
                     order.begin() + static_cast<long>(std::min(order.size(), i + batch)));
  return out;
}

// Sample order of one training epoch; depends only on (seed, epoch, n).
inline std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(derive_seed(seed, "order"), epoch));
  shuffle(order, rng);
  return order;
}

inline metrics::MetricsReport evaluate(const Model& model, const LoadedSplit& data, std::size_t batch) {
  metrics::MetricsAccumulator acc;
  std::vector<std::size_t> all(data.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::size_t P = static_cast<std::size_t>(data.height) * data.width;
  for (const auto& idx : batches_of(all, batch)) {
    const auto b = make_batch(model, data, idx);
    const auto out = model.forward(b.input);
    const auto pred = binarize<float>(out.logits.value());
    for (std::size_t k = 0; k < idx.size(); ++k)
      acc.add(std::span(pred).subspan(k * P, P), std::span(b.gt).subspan(k * P, P));
  }
  return acc.report();
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double lr = 0.0;  // at the last step of the epoch
  double val_miou = 0.0;
  double val_oiou = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  double first_batch_loss = 0.0;
  std::size_t best_epoch = 0;
  double best_val_miou = -1.0;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
};

inline nlohmann::ordered_json checkpoint_metadata(const RunConfig& cfg, std::size_t epoch, double val_miou) {
  return {{"model", nlohmann::ordered_json(cfg.model)},
          {"seed", cfg.seed},
          {"epoch", epoch},
          {"val_miou", val_miou},
          {"dataset_dir", cfg.dataset_path().string()},
          {"batch_size", cfg.data.batch_size}};
}

struct TrainOptions {
  bool write_files = true;
};

// Trains `model` in place. Every output lands under cfg.output_dir.
inline TrainResult train(const RunConfig& cfg, Model& model, const LoadedSplit& train_set,
                         const LoadedSplit& val_set, std::ostream& log, TrainOptions topts = {}) {
  namespace fs = std::filesystem;
  const fs::path out(cfg.output_dir);
  std::ofstream train_log, srg_log;
  if (topts.write_files) {
    fs::create_directories(out / "checkpoints");
    train_log.open(out / "train_log.jsonl", std::ios::trunc);
    srg_log.open(out / "srg_log.jsonl", std::ios::trunc);
  }
  nn::AdamW<float> opt(nn::AdamWOptions{0.9, 0.999, 1e-8, cfg.optim.weight_decay});
  const std::size_t n = train_set.samples.size();
  const std::size_t per_epoch = (n + cfg.data.batch_size - 1) / cfg.data.batch_size;
  const std::size_t total = per_epoch * cfg.optim.epochs;
  TrainResult result;
  result.best_checkpoint = out / "checkpoints" / "best.ckpt";
  result.last_checkpoint = out / "checkpoints" / "last.ckpt";
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t seen = 0;
    double lr = 0.0;
    std::size_t bi = 0;
    for (const auto& idx : batches_of(epoch_order(cfg.seed, epoch, n), cfg.data.batch_size)) {
      const auto b = make_batch(model, train_set, idx);
      const auto fwd = model.forward(b.input);
      auto loss = segmentation_loss(fwd.logits, b.gt);
      const double lv = loss.item();
      if (!std::isfinite(lv))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(bi));
      if (step == 0) result.first_batch_loss = lv;
      model.store().zero_grad();
      backward(loss);
      lr = nn::poly_lr(cfg.optim.lr, step, total, cfg.optim.power);
      opt.step(model.store(), lr);
      loss_sum += lv * static_cast<double>(idx.size());
      seen += idx.size();
      if (topts.write_files && fwd.branch_weights.defined()) {
        const auto w = fwd.branch_weights.value();
        std::array<double, 3> mean{};
        for (std::size_t k = 0; k < idx.size(); ++k)
          for (std::size_t j = 0; j < 3; ++j) mean[j] += w[k * 3 + j] / static_cast<double>(idx.size());
        srg_log << nlohmann::ordered_json{{"epoch", epoch}, {"batch", bi}, {"w_l", mean[0]},
                                          {"w_d", mean[1]}, {"w_c", mean[2]}}
                       .dump()
                << '\n';
      }
      ++step;
      ++bi;
    }
    EpochLog e;
    e.epoch = epoch;
    e.train_loss = loss_sum / static_cast<double>(seen);
    e.lr = lr;
    const auto val = evaluate(model, val_set, cfg.data.batch_size);
    e.val_miou = val.miou;
    e.val_oiou = val.oiou;
    result.epochs.push_back(e);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << "epoch " << epoch << "/" << cfg.optim.epochs << "  loss " << e.train_loss << "  val mIoU "
        << e.val_miou << "  oIoU " << e.val_oiou << "  (" << secs << " s)\n";
    log.flush();
    if (topts.write_files)
      train_log << nlohmann::ordered_json{{"epoch", epoch}, {"train_loss", e.train_loss}, {"lr", e.lr},
                                          {"val_miou", e.val_miou}, {"val_oiou", e.val_oiou}}
                       .dump()
                << '\n';
    if (e.val_miou > result.best_val_miou) {
      result.best_val_miou = e.val_miou;
      result.best_epoch = epoch;
      if (topts.write_files)
        nn::save_checkpoint(result.best_checkpoint.string(), model.store(),
                            checkpoint_metadata(cfg, epoch, e.val_miou).dump());
    }
  }
  if (topts.write_files)
    nn::save_checkpoint(result.last_checkpoint.string(), model.store(),
                        checkpoint_metadata(cfg, cfg.optim.epochs, result.epochs.back().val_miou).dump());
  return result;
}

struct LoadedModel {
  std::unique_ptr<Model> model;
  nlohmann::ordered_json metadata;
};

inline LoadedModel load_model(const std::string& checkpoint) {
  auto meta = nlohmann::ordered_json::parse(nn::read_checkpoint_metadata(checkpoint), nullptr, false);
  if (meta.is_discarded() || !meta.contains("model"))
    throw FormatError("checkpoint '" + checkpoint + "' has unreadable metadata");
  LoadedModel lm;
  lm.model = std::make_unique<Model>(meta.at("model").get<ModelConfig>(), meta.value("seed", std::uint64_t{0}));
  nn::load_checkpoint(checkpoint, lm.model->store());
  lm.metadata = std::move(meta);
  return lm;
}

}  // namespace saarn::harness
