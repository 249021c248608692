#include <arpa/inet.h>
#include <gtest/gtest.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <numbers>
#include <sstream>
#include <thread>

#include "dataset_oracle.hpp"
#include "saarn/dataset/clients.hpp"
#include "saarn/dataset/corpus.hpp"
#include "saarn/dataset/expression.hpp"
#include "saarn/dataset/geometry.hpp"
#include "saarn/dataset/http_clients.hpp"
#include "saarn/dataset/scene.hpp"

namespace saarn::dataset {
namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Tiling

std::vector<TileOffset> offsets_of(int h, int w) {
  std::vector<TileOffset> out;
  for (const auto& t : tile_image(Image(h, w), 1080)) {
    EXPECT_EQ(t.image.height, 1080);
    EXPECT_EQ(t.image.width, 1080);
    out.push_back(t.offset);
  }
  return out;
}

TEST(Tiling, GridAndShiftToFit) {
  EXPECT_EQ(offsets_of(2160, 2160),
            (std::vector<TileOffset>{{0, 0}, {0, 1080}, {1080, 0}, {1080, 1080}}));
  EXPECT_EQ(offsets_of(1080, 1080), (std::vector<TileOffset>{{0, 0}}));
  EXPECT_EQ(offsets_of(1080, 1500), (std::vector<TileOffset>{{0, 0}, {0, 420}}));
  EXPECT_THROW(tile_image(Image(1000, 2000), 1080), InvalidInputError);
}

TEST(Tiling, TilesCoverEveryPixel) {
  Image img(37, 50);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  std::vector<int> hits(37 * 50, 0);
  for (const auto& t : tile_image(img, 16))
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const int gy = t.offset.y + y, gx = t.offset.x + x;
        ++hits[gy * 50 + gx];
        for (int c = 0; c < 3; ++c) EXPECT_EQ(t.image.pixel(y, x)[c], img.pixel(gy, gx)[c]);
      }
  for (int h : hits) EXPECT_GE(h, 1);
}

// ---------------------------------------------------------------------------
// Oriented boxes

TEST(Rasterize, AxisAlignedFourPixels) {
  const auto m = rasterize_obb({1.0, 1.0, 2.0, 2.0, 0.0}, 4, 4);
  EXPECT_EQ(m.count(), 4u);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) EXPECT_EQ(m.at(y, x), 1);
}

// Point in convex polygon by edge cross products.
bool in_polygon(const std::array<std::array<double, 2>, 4>& poly, double x, double y) {
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % 4];
    const double cr = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    if (cr > 1e-9) pos = true;
    if (cr < -1e-9) neg = true;
  }
  return !(pos && neg);
}

TEST(Rasterize, RotatedSquareMatchesPointInPolygon) {
  const double s = std::numbers::sqrt2 * 5;
  for (const OrientedBox& box : {OrientedBox{10.3, 9.7, 11.0, 11.0, std::numbers::pi / 4},
                                 OrientedBox{8.0, 12.0, 13.0, 5.0, -1.1}, OrientedBox{10.0, 10.0, s, s, 0.4}}) {
    const auto m = rasterize_obb(box, 20, 20);
    const auto poly = box.corners();
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) EXPECT_EQ(m.at(y, x) == 1, in_polygon(poly, x + 0.5, y + 0.5)) << y << "," << x;
  }
}

TEST(Rasterize, OutsideAndInvalid) {
  EXPECT_EQ(rasterize_obb({-20, -20, 5, 5, 0.3}, 16, 16).count(), 0u);
  EXPECT_EQ(rasterize_obb({100, 5, 5, 5, 0.0}, 16, 16).count(), 0u);
  EXPECT_THROW(rasterize_obb({5, 5, 0, 5, 0}, 8, 8), InvalidInputError);
  EXPECT_THROW(rasterize_obb({5, 5, 2, 2, std::numbers::pi / 2}, 8, 8), InvalidInputError);
}

TEST(Coverage, Ratios) {
  Mask full(4, 4);
  std::fill(full.bits.begin(), full.bits.end(), 1);
  EXPECT_EQ(coverage_ratio(full), 1.0);
  EXPECT_EQ(coverage_ratio(Mask(4, 4)), 0.0);
  const auto obj = rasterize_obb({540, 540, 108, 108, 0}, 1080, 1080);
  EXPECT_EQ(obj.count(), 108u * 108u);
  EXPECT_DOUBLE_EQ(coverage_ratio(obj), 0.01);
}

std::vector<CoverageRecord> records(const std::vector<double>& r) {
  std::vector<CoverageRecord> out;
  for (std::size_t i = 0; i < r.size(); ++i) out.push_back({"x" + std::to_string(i), r[i]});
  return out;
}

TEST(Coverage, Validation) {
  auto nine = records({0.01, 0.02, 0.03, 0.05, 0.06, 0.07, 0.08, 0.09, 0.099, 0.5});
  const auto a = validate_coverage(nine);
  EXPECT_TRUE(a.passed);
  EXPECT_EQ(a.n_below, 9u);
  EXPECT_TRUE(validate_coverage(records({0.0, 0.01, 0.05})).passed);
  auto eight = records({0.01, 0.02, 0.03, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.3});
  const auto b = validate_coverage(eight);
  EXPECT_FALSE(b.passed);
  ASSERT_EQ(b.violators.size(), 2u);
  EXPECT_EQ(b.violators[0].sample_id, "x8");
  EXPECT_EQ(b.violators[1].sample_id, "x9");
  EXPECT_THROW(validate_coverage({}), InvalidInputError);
}

// ---------------------------------------------------------------------------
// Splits

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("id" + std::to_string(i));
  return v;
}

TEST(Splits, FloorRule) {
  for (auto [n, tr, va, te] : std::vector<std::array<std::size_t, 4>>{
           {10, 7, 1, 2}, {13871, 9709, 1387, 2775}, {512, 358, 51, 103}, {1, 0, 0, 1}, {3, 2, 0, 1}}) {
    const auto v = ids(n);
    const auto s = split_dataset(v, 7);
    ASSERT_EQ(s.size(), n);
    EXPECT_EQ(std::count(s.begin(), s.end(), Split::kTrain), static_cast<long>(tr)) << n;
    EXPECT_EQ(std::count(s.begin(), s.end(), Split::kVal), static_cast<long>(va)) << n;
    EXPECT_EQ(std::count(s.begin(), s.end(), Split::kTest), static_cast<long>(te)) << n;
    EXPECT_EQ(split_counts(n), (SplitCounts{tr, va, te}));
  }
}

TEST(Splits, DeterministicAndSeedSensitive) {
  const auto v = ids(200);
  EXPECT_EQ(split_dataset(v, 3), split_dataset(v, 3));
  EXPECT_NE(split_dataset(v, 3), split_dataset(v, 4));
  EXPECT_THROW(split_dataset(std::vector<std::string>{}, 1), InvalidInputError);
}

// ---------------------------------------------------------------------------
// Scenes

TEST(Scenes, RegenerationIsBitIdentical) {
  SceneConfig cfg;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto a = generate_scene_at(cfg, i), b = generate_scene_at(cfg, i);
    EXPECT_EQ(a.image, b.image);
    ASSERT_EQ(a.instances.size(), b.instances.size());
    for (std::size_t k = 0; k < a.instances.size(); ++k) EXPECT_EQ(a.instances[k].mask, b.instances[k].mask);
  }
  auto other = cfg;
  other.seed = 8;
  EXPECT_NE(generate_scene_at(cfg, 0).image, generate_scene_at(other, 0).image);
}

TEST(Scenes, SingleInstanceConfig) {
  SceneConfig cfg;
  cfg.instances_min = cfg.instances_max = 1;
  for (std::uint64_t i = 0; i < 30; ++i) {
    const auto s = generate_scene_at(cfg, i);
    ASSERT_EQ(s.instances.size(), 1u);
    EXPECT_GT(s.instances[0].mask.count(), 0u);
    EXPECT_FALSE(s.instances[0].clustered);
  }
}

TEST(Scenes, InstancesAreDisjointAndColoursDistinctPerCategory) {
  SceneConfig cfg;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto s = generate_scene_at(cfg, i);
    for (std::size_t a = 0; a < s.instances.size(); ++a)
      for (std::size_t b = a + 1; b < s.instances.size(); ++b) {
        for (std::size_t p = 0; p < s.instances[a].mask.bits.size(); ++p)
          ASSERT_FALSE(s.instances[a].mask.bits[p] && s.instances[b].mask.bits[p]);
        if (s.instances[a].category == s.instances[b].category)
          EXPECT_NE(s.instances[a].color, s.instances[b].color);
      }
  }
}

TEST(Scenes, InfeasibleConfigsFail) {
  SceneConfig cfg;
  cfg.size_max = 40;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SceneConfig{};
  cfg.night_prob = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  // Eight large glyphs with one placement attempt each cannot all fit.
  cfg = SceneConfig{};
  cfg.image_size = 32;
  cfg.size_min = cfg.size_max = 10;
  cfg.instances_min = cfg.instances_max = 8;
  cfg.max_retries = 1;
  bool failed = false;
  for (std::uint64_t i = 0; i < 10 && !failed; ++i) {
    try {
      generate_scene_at(cfg, i);
    } catch (const GenerationError&) {
      failed = true;
    }
  }
  EXPECT_TRUE(failed);
}

TEST(Scenes, CorpusStatistics) {
  SceneConfig cfg;
  std::array<std::size_t, kNumCategories> per_cat{};
  std::vector<CoverageRecord> cov;
  std::size_t clusters = 0;
  for (std::uint64_t i = 0; i < 512; ++i) {
    const auto s = generate_scene_at(cfg, i);
    bool clustered = false;
    for (const auto& inst : s.instances) {
      ++per_cat[inst.category];
      cov.push_back({"", coverage_ratio(inst.mask)});
      clustered = clustered || inst.clustered;
    }
    clusters += clustered;
  }
  const double mean = static_cast<double>(cov.size()) / kNumCategories;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    EXPECT_GE(per_cat[c], 0.8 * mean) << kCategoryNames[c];
    EXPECT_LE(per_cat[c], 1.2 * mean) << kCategoryNames[c];
  }
  EXPECT_TRUE(validate_coverage(cov).passed);
  EXPECT_GT(clusters, 512 * 0.15);
  EXPECT_LT(clusters, 512 * 0.35);
}

// ---------------------------------------------------------------------------
// Expressions

TEST(Expressions, LoneRedCarInTheMiddle) {
  Scene s;
  s.image = Image(64, 64);
  SceneInstance car;
  car.category = 1;
  car.color = 0;
  car.box = {32, 32, 12, 7, 0.2};
  car.mask = rasterize_obb(car.box, 64, 64);
  s.instances.push_back(car);
  Rng rng(1);
  const std::array<std::string_view, 1> bank{lexicon::kTemplates[0]};
  EXPECT_EQ(generate_expression(s, 0, rng, bank).text, "the red car in the middle of the image");
  EXPECT_THROW(generate_expression(s, 1, rng), RangeError);
}

TEST(Expressions, AmbiguousTargetIsRejected) {
  // Two same-colour cars in one cell, equal size: nothing separates them.
  Scene s;
  s.image = Image(64, 64);
  for (double cx : {26.0, 37.0}) {
    SceneInstance car;
    car.category = 1;
    car.color = 2;
    car.box = {cx, 32, 8, 4, 0};
    car.mask = rasterize_obb(car.box, 64, 64);
    s.instances.push_back(car);
  }
  Rng rng(1);
  EXPECT_THROW(generate_expression(s, 0, rng), GenerationError);
}

TEST(Expressions, UniquelyResolveUnderExhaustiveScan) {
  SceneConfig cfg;
  cfg.seed = 123;
  std::size_t n = 0, clustered = 0;
  const auto& vocab = CategoryVocabulary::builtin();
  for (std::uint64_t si = 0; n < 1000; ++si) {
    const auto scene = generate_scene_at(cfg, si);
    for (std::size_t k = 0; k < scene.instances.size() && n < 1000; ++k, ++n) {
      Rng rng(caption_seed(cfg.seed, si, k));
      const auto text = generate_expression(scene, k, rng).text;
      const auto parsed = testing::parse_expression(text);
      EXPECT_EQ(parsed.category_mentions, 1) << text;
      EXPECT_EQ(testing::satisfiers(scene, parsed), (std::vector<std::size_t>{k})) << text;
      EXPECT_EQ(decompose(text, vocab).category_id, scene.instances[k].category) << text;
      clustered += scene.instances[k].clustered;
    }
  }
  EXPECT_GT(clustered, 50u);
}

// ---------------------------------------------------------------------------
// Storage

TEST(Storage, AnnotationAndMaskRoundTrip) {
  const auto dir = testing::fresh_dir("storage");
  std::vector<ReferringSample> samples{
      {"s00000_i0", "images/s00000.ppm", "masks/s00000_i0.pgm", "the red car at the top of the image", "car",
       Split::kTrain},
      {"s00001_i2", "images/s00001.ppm", "masks/s00001_i2.pgm", "a \"quoted\" boat", "boat", Split::kTest}};
  write_annotations((dir / "a.jsonl").string(), samples);
  EXPECT_EQ(read_annotations((dir / "a.jsonl").string()), samples);

  const auto line = testing::file_bytes(dir / "a.jsonl").substr(0, testing::file_bytes(dir / "a.jsonl").find('\n'));
  const auto first = nlohmann::ordered_json::parse(line);
  std::vector<std::string> keys;
  for (const auto& [k, _] : first.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"sample_id", "image_path", "mask_path", "expression", "category", "split"}));

  const auto m = rasterize_obb({7.3, 5.1, 9, 4, 0.7}, 13, 17);
  write_mask_pgm((dir / "m.pgm").string(), m);
  EXPECT_EQ(read_mask_pgm((dir / "m.pgm").string()), m);
  const auto bytes = testing::file_bytes(dir / "m.pgm");
  for (std::size_t i = bytes.size() - 13 * 17; i < bytes.size(); ++i)
    EXPECT_TRUE(bytes[i] == 0 || static_cast<unsigned char>(bytes[i]) == 255);

  Image img(5, 6);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 13);
  write_ppm((dir / "i.ppm").string(), img);
  EXPECT_EQ(read_ppm((dir / "i.ppm").string()), img);

  std::ofstream(dir / "bad.jsonl") << "{\"sample_id\": \"x\"}\n";
  EXPECT_THROW(read_annotations((dir / "bad.jsonl").string()), FormatError);
  fs::remove_all(dir);
}

TEST(Corpus, RegenerationIsByteIdentical) {
  CorpusOptions opts;
  opts.num_scenes = 24;
  const auto a = testing::fresh_dir("corpus_a"), b = testing::fresh_dir("corpus_b");
  RasterSegmenter seg;
  TemplateCaptioner cap;
  std::ostringstream log;
  const auto sa = build_corpus(opts, a, seg, cap, log);
  build_corpus(opts, b, seg, cap, log);
  EXPECT_EQ(testing::tree_bytes(a), testing::tree_bytes(b));
  EXPECT_TRUE(sa.skipped.empty());
  EXPECT_EQ(read_annotations((a / "annotations.jsonl").string()).size(), sa.samples.size());
  // Samples of one scene share its split.
  std::map<std::string, Split> by_scene;
  for (const auto& s : sa.samples) {
    const auto scene = s.sample_id.substr(0, 6);
    if (by_scene.count(scene)) EXPECT_EQ(by_scene[scene], s.split);
    by_scene[scene] = s.split;
  }
  EXPECT_EQ(by_scene.size(), 24u);
  fs::remove_all(a);
  fs::remove_all(b);
}

// ---------------------------------------------------------------------------
// Clients

TEST(Clients, DefaultsDelegate) {
  SceneConfig cfg;
  const auto scene = generate_scene_at(cfg, 3);
  RasterSegmenter seg;
  TemplateCaptioner cap;
  for (std::size_t k = 0; k < scene.instances.size(); ++k) {
    EXPECT_EQ(seg.segment(scene.image, scene.instances[k].box), scene.instances[k].mask);
    const auto req = make_caption_request(scene, k, 77);
    Rng rng(77);
    EXPECT_EQ(cap.caption(req), generate_expression(scene, k, rng).text);
    EXPECT_EQ(req.crop.height % 4, 0);
    EXPECT_EQ(req.marked.height, scene.image.height);
  }
}

// Local HTTP server whose behaviour is switched per request.
class MockServer {
 public:
  enum class Mode { kOk, kSlow, kStatus500, kNotJson, kWrongSize, kEmptyText, kBadValue };

  MockServer() {
    server_.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls_;
      const auto mode = mode_for_call();
      if (!apply_fault(mode, res)) return;
      const auto j = nlohmann::json::parse(req.body);
      const int h = j["image"]["height"], w = j["image"]["width"];
      const auto& b = j["box"];
      const auto m = rasterize_obb({b["cx"], b["cy"], b["w"], b["h"], b["angle"]}, h, w);
      nlohmann::json out{{"height", h}, {"width", mode == Mode::kWrongSize ? w + 1 : w}, {"mask", m.bits}};
      if (mode == Mode::kBadValue) out["mask"][0] = 7;
      res.set_content(out.dump(), "application/json");
    });
    server_.Post("/caption", [this](const httplib::Request&, httplib::Response& res) {
      ++calls_;
      const auto mode = mode_for_call();
      if (!apply_fault(mode, res)) return;
      res.set_content(nlohmann::json{{"text", mode == Mode::kEmptyText ? "" : "the red car"}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  void set_mode(Mode m) { mode_ = m; }
  // Every `period`-th call uses `fault`, the rest succeed.
  void set_periodic(Mode fault, int period) {
    periodic_fault_ = fault;
    period_ = period;
  }
  int port() const { return port_; }
  int calls() const { return calls_; }

  HttpClientOptions options(std::chrono::milliseconds read = std::chrono::milliseconds(300)) const {
    HttpClientOptions o;
    o.port = port_;
    o.read_timeout = read;
    return o;
  }

 private:
  Mode mode_for_call() const {
    if (period_ > 0) return calls_ % period_ == 0 ? periodic_fault_.load() : Mode::kOk;
    return mode_;
  }

  bool apply_fault(Mode mode, httplib::Response& res) const {
    switch (mode) {
      case Mode::kSlow:
        std::this_thread::sleep_for(std::chrono::milliseconds(900));
        res.set_content("{}", "application/json");
        return false;
      case Mode::kStatus500:
        res.status = 500;
        return false;
      case Mode::kNotJson:
        res.set_content("<html>oops</html>", "text/html");
        return false;
      default:
        return true;
    }
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  std::atomic<Mode> mode_{Mode::kOk};
  std::atomic<Mode> periodic_fault_{Mode::kOk};
  std::atomic<int> period_{0};
};

// Port that was free a moment ago, bound but never listened on.
int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

TEST(HttpClients, SuccessMatchesLocalRasterizer) {
  MockServer srv;
  HttpSegmenter seg(srv.options());
  Image img(20, 24);
  const OrientedBox box{10, 9, 8, 5, 0.3};
  EXPECT_EQ(seg.segment(img, box), rasterize_obb(box, 20, 24));
  HttpCaptioner cap(srv.options());
  EXPECT_EQ(cap.caption({}), "the red car");
}

TEST(HttpClients, FaultsMapToDistinctErrors) {
  MockServer srv;
  HttpSegmenter seg(srv.options());
  HttpCaptioner cap(srv.options());
  Image img(8, 8);
  const OrientedBox box{4, 4, 3, 3, 0};

  srv.set_mode(MockServer::Mode::kSlow);
  EXPECT_THROW(seg.segment(img, box), TimeoutError);
  srv.set_mode(MockServer::Mode::kStatus500);
  EXPECT_THROW(seg.segment(img, box), TransportError);
  srv.set_mode(MockServer::Mode::kNotJson);
  EXPECT_THROW(seg.segment(img, box), MalformedResponseError);
  srv.set_mode(MockServer::Mode::kWrongSize);
  EXPECT_THROW(seg.segment(img, box), MalformedResponseError);
  srv.set_mode(MockServer::Mode::kBadValue);
  EXPECT_THROW(seg.segment(img, box), MalformedResponseError);
  srv.set_mode(MockServer::Mode::kEmptyText);
  EXPECT_THROW(cap.caption({}), MalformedResponseError);

  // Nothing listening.
  auto closed = srv.options();
  closed.port = unused_port();
  EXPECT_THROW(HttpSegmenter(closed).segment(img, box), TransportError);

  // The three are distinct classes sharing one base.
  static_assert(!std::is_base_of_v<TimeoutError, TransportError>);
  static_assert(!std::is_base_of_v<TransportError, TimeoutError>);
  static_assert(std::is_base_of_v<ClientError, MalformedResponseError>);
}

TEST(HttpClients, PipelineSkipsAndLogsFailures) {
  MockServer srv;
  srv.set_periodic(MockServer::Mode::kNotJson, 3);
  HttpSegmenter seg(srv.options());
  TemplateCaptioner cap;
  CorpusOptions opts;
  opts.num_scenes = 12;
  const auto dir = testing::fresh_dir("pipeline");
  std::ostringstream log;
  const auto summary = build_corpus(opts, dir, seg, cap, log);
  const int calls = srv.calls();
  EXPECT_EQ(summary.skipped.size(), static_cast<std::size_t>(calls / 3));
  EXPECT_EQ(summary.samples.size() + summary.skipped.size(), static_cast<std::size_t>(calls));
  ASSERT_FALSE(summary.skipped.empty());
  for (const auto& s : summary.skipped) {
    EXPECT_NE(log.str().find("skip " + s.sample_id), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "masks" / (s.sample_id + ".pgm")));
  }
  const auto stored = read_annotations((dir / "annotations.jsonl").string());
  EXPECT_EQ(stored.size(), summary.samples.size());
  fs::remove_all(dir);
}

TEST(HttpClients, CaptionWithoutCategoryIsSkipped) {
  // The mock captioner always says "the red car", so only car instances
  // survive.
  MockServer srv;
  RasterSegmenter seg;
  HttpCaptioner cap(srv.options());
  CorpusOptions opts;
  opts.num_scenes = 10;
  const auto dir = testing::fresh_dir("caption");
  std::ostringstream log;
  const auto summary = build_corpus(opts, dir, seg, cap, log);
  for (const auto& s : summary.samples) EXPECT_EQ(s.category, "car");
  EXPECT_FALSE(summary.skipped.empty());
  fs::remove_all(dir);
}

}  // namespace
}  // namespace saarn::dataset
