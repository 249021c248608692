#pragma once

// Splits a referring expression into its global text (the expression itself),
// its class-level text (the canonical category name) and its descriptive text
// (the expression with the category word replaced by a mask token).

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "saarn/errors.hpp"

namespace saarn {

inline constexpr std::string_view kMaskToken = "[masked]";
inline constexpr std::string_view kUnknownCategoryToken = "[unknown]";

inline constexpr std::array<std::string_view, 8> kCategoryNames = {
    "people", "car", "motor", "bicycle", "tricycle", "truck", "bus", "boat"};

inline constexpr std::size_t kNumCategories = kCategoryNames.size();

// Contents of data/category_vocabulary.txt; a unit test keeps the two equal.
inline constexpr std::string_view kBuiltinVocabulary = R"(# canonical name = comma-separated surface forms (lowercase, pairwise disjoint)
people = people, person, persons, pedestrian, pedestrians, man, men, woman, women
car = car, cars, sedan, sedans, suv, suvs
motor = motor, motors, motorcycle, motorcycles, motorbike, motorbikes, scooter, scooters
bicycle = bicycle, bicycles, bike, bikes
tricycle = tricycle, tricycles, trike, trikes
truck = truck, trucks, lorry, lorries, van, vans
bus = bus, buses, coach, coaches
boat = boat, boats, ship, ships, vessel, vessels
)";

namespace text {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace text

struct CategoryEntry {
  int id = 0;
  std::string name;
  std::vector<std::string> surface_forms;

  bool operator==(const CategoryEntry&) const = default;
};

class CategoryVocabulary {
 public:
  // Parses "name = form, form, ..." lines; '#' starts a comment.
  static CategoryVocabulary parse(std::string_view contents) {
    CategoryVocabulary vocab;
    std::istringstream in{std::string(contents)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = text::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw FormatError("vocabulary line " + std::to_string(line_no) + ": missing '='");
      CategoryEntry entry;
      entry.id = static_cast<int>(vocab.entries_.size());
      entry.name = text::trim(std::string_view(line).substr(0, eq));
      std::istringstream forms(line.substr(eq + 1));
      std::string form;
      while (std::getline(forms, form, ',')) {
        form = text::trim(form);
        if (!form.empty()) entry.surface_forms.push_back(form);
      }
      vocab.entries_.push_back(std::move(entry));
    }
    vocab.validate();
    return vocab;
  }

  static CategoryVocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open vocabulary file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  static const CategoryVocabulary& builtin() {
    static const CategoryVocabulary vocab = parse(kBuiltinVocabulary);
    return vocab;
  }

  const std::vector<CategoryEntry>& entries() const { return entries_; }
  const std::string& name(int id) const { return entries_.at(static_cast<std::size_t>(id)).name; }

  std::optional<int> id_of(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.id;
    return std::nullopt;
  }

  bool operator==(const CategoryVocabulary&) const = default;

 private:
  void validate() const {
    if (entries_.size() != kNumCategories)
      throw FormatError("vocabulary must list exactly " + std::to_string(kNumCategories) +
                        " categories");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.name != kCategoryNames[i])
        throw FormatError("vocabulary entry " + std::to_string(i) + " is '" + e.name +
                          "', expected '" + std::string(kCategoryNames[i]) + "'");
      if (e.surface_forms.empty()) throw FormatError("category '" + e.name + "' has no surface forms");
      for (const auto& f : e.surface_forms) {
        if (f != text::to_lower(f)) throw FormatError("surface form '" + f + "' is not lowercase");
        if (!seen.insert(f).second) throw FormatError("surface form '" + f + "' appears twice");
      }
    }
  }

  std::vector<CategoryEntry> entries_;
};

// Half-open character range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

struct CategoryMatch {
  std::optional<int> category_id;
  std::optional<Span> span;
};

// Earliest surface-form occurrence on word boundaries, case-insensitive.
// Same start position: vocabulary order decides, then the longer form.
inline CategoryMatch detect_category(std::string_view expression, const CategoryVocabulary& vocab) {
  const std::string lower = text::to_lower(expression);
  for (std::size_t pos = 0; pos < lower.size(); ++pos) {
    if (pos > 0 && text::is_word_char(lower[pos - 1])) continue;
    for (const auto& entry : vocab.entries()) {
      std::size_t best = 0;
      for (const auto& form : entry.surface_forms) {
        if (form.size() <= best || lower.compare(pos, form.size(), form) != 0) continue;
        const std::size_t end = pos + form.size();
        if (end < lower.size() && text::is_word_char(lower[end])) continue;
        best = form.size();
      }
      if (best > 0) return {entry.id, Span{pos, pos + best}};
    }
  }
  return {};
}

inline std::string mask_category(std::string_view expression, Span span,
                                 std::string_view mask_token = kMaskToken) {
  if (span.begin > span.end || span.end > expression.size())
    throw RangeError("mask span [" + std::to_string(span.begin) + ", " + std::to_string(span.end) +
                     ") outside expression of length " + std::to_string(expression.size()));
  std::string out;
  out.reserve(expression.size() - span.length() + mask_token.size());
  out.append(expression.substr(0, span.begin));
  out.append(mask_token);
  out.append(expression.substr(span.end));
  return out;
}

struct LinguisticTriple {
  std::string global_text;       // l
  std::string class_text;        // c
  std::string descriptive_text;  // d
  std::optional<int> category_id;

  bool operator==(const LinguisticTriple&) const = default;
};

inline LinguisticTriple decompose(std::string_view expression, const CategoryVocabulary& vocab) {
  LinguisticTriple t;
  t.global_text = std::string(expression);
  const auto match = detect_category(expression, vocab);
  if (!match.category_id) {
    t.class_text = std::string(kUnknownCategoryToken);
    t.descriptive_text = t.global_text;
    return t;
  }
  t.category_id = match.category_id;
  t.class_text = vocab.name(*match.category_id);
  t.descriptive_text = mask_category(expression, *match.span);
  return t;
}

}  // namespace saarn
