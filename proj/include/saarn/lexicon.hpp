#pragma once

// Closed word lists shared by the expression generator and the tokenizer.

#include <array>
#include <cstdint>
#include <string_view>

namespace saarn::lexicon {

struct NamedColor {
  std::string_view name;
  std::uint8_t r, g, b;
};

inline constexpr std::array<NamedColor, 8> kColors = {{
    {"red", 220, 40, 40},
    {"green", 40, 180, 60},
    {"blue", 50, 80, 230},
    {"yellow", 235, 215, 40},
    {"white", 245, 245, 245},
    {"orange", 245, 140, 30},
    {"purple", 150, 60, 205},
    {"cyan", 40, 205, 215},
}};

// Image regions on a 3 x 3 grid, row-major: index = row * 3 + col.
inline constexpr std::array<std::string_view, 9> kRegionPhrases = {
    "in the top left corner of the image",
    "at the top of the image",
    "in the top right corner of the image",
    "on the left side of the image",
    "in the middle of the image",
    "on the right side of the image",
    "in the bottom left corner of the image",
    "at the bottom of the image",
    "in the bottom right corner of the image",
};

inline constexpr std::string_view kLargestWord = "biggest";
inline constexpr std::string_view kSmallestWord = "smallest";

// {attrs} expands to "[size ]color", {noun} to the category name and
// {region} to one of kRegionPhrases.
inline constexpr std::array<std::string_view, 4> kTemplates = {
    "the {attrs} {noun} {region}",
    "{attrs} {noun} {region}",
    "the {attrs} {noun} located {region}",
    "a {attrs} {noun} {region}",
};

// Appended when the target sits in a same-category cluster; {color} names the
// nearest same-category neighbour.
inline constexpr std::string_view kRelationTemplate = "next to the {color} one";

}  // namespace saarn::lexicon
