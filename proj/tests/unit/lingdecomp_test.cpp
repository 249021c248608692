#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "saarn/dataset/expression.hpp"
#include "saarn/dataset/scene.hpp"
#include "saarn/lingdecomp.hpp"

#ifndef SAARN_SOURCE_DIR
#error "SAARN_SOURCE_DIR must point at the repository root"
#endif

namespace saarn {
namespace {

const CategoryVocabulary& vocab() { return CategoryVocabulary::builtin(); }

std::size_t count_of(const std::string& s, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

TEST(Vocabulary, FileMatchesBuiltin) {
  const auto from_file = CategoryVocabulary::load(std::string(SAARN_SOURCE_DIR) + "/data/category_vocabulary.txt");
  EXPECT_EQ(from_file, vocab());
  ASSERT_EQ(vocab().entries().size(), 8u);
  const std::vector<std::string> names{"people", "car", "motor", "bicycle", "tricycle", "truck", "bus", "boat"};
  for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(vocab().name(static_cast<int>(i)), names[i]);
}

TEST(Vocabulary, RejectsOverlapOrderAndCase) {
  std::string good(kBuiltinVocabulary);
  auto bad_overlap = good;
  bad_overlap.replace(bad_overlap.find("bus = bus"), 9, "bus = car");
  EXPECT_THROW(CategoryVocabulary::parse(bad_overlap), FormatError);
  auto bad_case = good;
  bad_case.replace(bad_case.find("boat, boats"), 4, "Boat");
  EXPECT_THROW(CategoryVocabulary::parse(bad_case), FormatError);
  EXPECT_THROW(CategoryVocabulary::parse("car = car\npeople = people\n"), FormatError);
}

TEST(Detect, PaperSentenceMatchesFirstCar) {
  const std::string e = "The red car in the middle of the image parked in front of the white car";
  const auto m = detect_category(e, vocab());
  ASSERT_TRUE(m.category_id);
  EXPECT_EQ(*m.category_id, 1);
  EXPECT_EQ(m.span->begin, e.find("car"));
  EXPECT_EQ(m.span->length(), 3u);
}

TEST(Detect, NoCategory) {
  const auto m = detect_category("a shiny object near the tree", vocab());
  EXPECT_FALSE(m.category_id);
  EXPECT_FALSE(m.span);
}

TEST(Detect, WordBoundariesAndCase) {
  // "carpet" and "scar" must not match; "BUS" does.
  const auto m = detect_category("a carpet by the scar of the BUS", vocab());
  ASSERT_TRUE(m.category_id);
  EXPECT_EQ(vocab().name(*m.category_id), "bus");
  EXPECT_EQ(detect_category("the motorcycles", vocab()).span->length(), std::string("motorcycles").size());
}

// Exhaustive scan: every surface form at every position, earliest start
// wins, then vocabulary order, then the longer form.
std::optional<std::pair<int, Span>> brute_detect(const std::string& e) {
  const auto lower = text::to_lower(e);
  std::optional<std::pair<int, Span>> best;
  for (std::size_t pos = 0; pos < lower.size(); ++pos)
    for (const auto& entry : vocab().entries())
      for (const auto& f : entry.surface_forms) {
        if (lower.compare(pos, f.size(), f) != 0) continue;
        const bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
        const auto end = pos + f.size();
        const bool right = end == lower.size() || !std::isalnum(static_cast<unsigned char>(lower[end]));
        if (!left || !right) continue;
        const std::pair<int, Span> cand{entry.id, Span{pos, end}};
        if (!best || pos < best->second.begin ||
            (pos == best->second.begin && entry.id < best->first) ||
            (pos == best->second.begin && entry.id == best->first && end > best->second.end))
          best = cand;
      }
  return best;
}

TEST(Detect, AgreesWithExhaustiveScan) {
  const std::vector<std::string> cases{
      "the bus behind two cars",   "two men next to a van",         "Trucks and bikes",
      "a person riding a bicycle", "motorbike motor motorcycles",   "no category here",
      "ship? boat!",               "the lorry, the bus and the car", "pedestrians near a suv"};
  for (const auto& c : cases) {
    const auto got = detect_category(c, vocab());
    const auto want = brute_detect(c);
    ASSERT_EQ(got.category_id.has_value(), want.has_value()) << c;
    if (want) {
      EXPECT_EQ(*got.category_id, want->first) << c;
      EXPECT_EQ(*got.span, want->second) << c;
    }
  }
}

TEST(Mask, Splices) {
  const std::string e = "The red car in the middle of the image parked in front of the white car";
  const auto span = *detect_category(e, vocab()).span;
  EXPECT_EQ(mask_category(e, span), "The red [masked] in the middle of the image parked in front of the white car");
  EXPECT_EQ(mask_category("boat", Span{0, 4}), "[masked]");
  const std::string p = "two people near the bus";
  EXPECT_EQ(mask_category(p, Span{4, 10}), p.substr(0, 4) + "[masked]" + p.substr(10));
  EXPECT_THROW(mask_category("car", Span{1, 9}), RangeError);
  EXPECT_THROW(mask_category("car", Span{2, 1}), RangeError);
}

TEST(Decompose, PaperSentence) {
  const std::string e = "The red car in the middle of the image parked in front of the white car";
  const auto t = decompose(e, vocab());
  EXPECT_EQ(t.global_text, e);
  EXPECT_EQ(t.class_text, "car");
  EXPECT_EQ(t.descriptive_text,
            "The red [masked] in the middle of the image parked in front of the white car");
  EXPECT_EQ(count_of(t.descriptive_text, "car"), 1u);
}

TEST(Decompose, BareCategoryWordAndUnknown) {
  const auto t = decompose("boat", vocab());
  EXPECT_EQ(t.global_text, "boat");
  EXPECT_EQ(t.class_text, "boat");
  EXPECT_EQ(t.descriptive_text, "[masked]");
  const auto u = decompose("the shiny thing", vocab());
  EXPECT_FALSE(u.category_id);
  EXPECT_EQ(u.class_text, "[unknown]");
  EXPECT_EQ(u.descriptive_text, u.global_text);
}

TEST(Decompose, SynonymMapsToCanonicalClass) {
  const auto t = decompose("the white sedan", vocab());
  EXPECT_EQ(t.class_text, "car");
  EXPECT_EQ(t.descriptive_text, "the white [masked]");
}

TEST(Decompose, RoundTripIdempotenceAndSingleMaskOnGeneratedCorpus) {
  dataset::SceneConfig cfg;
  cfg.seed = 31;
  std::size_t n = 0;
  for (std::uint64_t si = 0; n < 1000; ++si) {
    const auto scene = dataset::generate_scene_at(cfg, si);
    for (std::size_t k = 0; k < scene.instances.size() && n < 1000; ++k, ++n) {
      Rng rng(si * 100 + k);
      const auto e = dataset::generate_expression(scene, k, rng).text;
      const auto t = decompose(e, vocab());
      ASSERT_TRUE(t.category_id) << e;
      EXPECT_EQ(*t.category_id, scene.instances[k].category) << e;
      EXPECT_EQ(count_of(t.descriptive_text, kMaskToken), 1u) << e;
      auto rebuilt = t.descriptive_text;
      rebuilt.replace(rebuilt.find(kMaskToken), kMaskToken.size(), t.class_text);
      EXPECT_EQ(rebuilt, t.global_text) << e;
      EXPECT_EQ(decompose(t.global_text, vocab()), t);
    }
  }
  EXPECT_EQ(n, 1000u);
}

}  // namespace
}  // namespace saarn
