#include "webrpg/vocabulary.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "webrpg/errors.hpp"

namespace webrpg {

namespace {

constexpr int kPixelLo = 0;
constexpr int kPixelHi = 1920;
constexpr int kColorLo = 1921;
constexpr int kColorHi = 1966;
constexpr int kFontStyleLo = 1967;
constexpr int kFontStyleHi = 1969;
constexpr int kFontWeightLo = 1970;
constexpr int kFontWeightHi = 1978;
constexpr int kLineHeightNormal = 1979;
constexpr int kTextAlignLo = 1980;
constexpr int kTextAlignHi = 1985;
constexpr int kTextDecorationLo = 1986;
constexpr int kTextDecorationHi = 1987;
constexpr int kTextTransformLo = 1988;
constexpr int kTextTransformHi = 1991;

const std::vector<std::string> kFontStyleKeywords = {"normal", "italic", "oblique"};
const std::vector<std::string> kFontWeightKeywords = {
    "100", "200", "300", "400", "500", "600", "700", "800", "900"};
const std::vector<std::string> kTextAlignKeywords = {
    "start", "center", "end", "left", "right", "justify"};
const std::vector<std::string> kTextDecorationKeywords = {"none", "underline"};
const std::vector<std::string> kTextTransformKeywords = {
    "none", "uppercase", "lowercase", "capitalize"};
const std::vector<std::string> kNoKeywords = {};

// Built-in palette: index 0 is the fully transparent default background, the
// rest are widely used opaque web colors.
std::vector<Rgba> builtin_palette() {
  return {
      {0, 0, 0, 0.0},       {0, 0, 0, 1.0},       {255, 255, 255, 1.0},
      {128, 128, 128, 1.0}, {192, 192, 192, 1.0}, {211, 211, 211, 1.0},
      {169, 169, 169, 1.0}, {105, 105, 105, 1.0}, {245, 245, 245, 1.0},
      {220, 220, 220, 1.0}, {255, 0, 0, 1.0},     {139, 0, 0, 1.0},
      {178, 34, 34, 1.0},   {220, 20, 60, 1.0},   {255, 99, 71, 1.0},
      {255, 69, 0, 1.0},    {255, 165, 0, 1.0},   {255, 140, 0, 1.0},
      {255, 215, 0, 1.0},   {255, 255, 0, 1.0},   {240, 230, 140, 1.0},
      {154, 205, 50, 1.0},  {153, 204, 0, 1.0},   {0, 128, 0, 1.0},
      {0, 100, 0, 1.0},     {34, 139, 34, 1.0},   {50, 205, 50, 1.0},
      {144, 238, 144, 1.0}, {46, 139, 87, 1.0},   {0, 128, 128, 1.0},
      {0, 255, 255, 1.0},   {64, 224, 208, 1.0},  {70, 130, 180, 1.0},
      {135, 206, 235, 1.0}, {30, 144, 255, 1.0},  {0, 0, 255, 1.0},
      {0, 0, 139, 1.0},     {25, 25, 112, 1.0},   {65, 105, 225, 1.0},
      {75, 0, 130, 1.0},    {128, 0, 128, 1.0},   {238, 130, 238, 1.0},
      {255, 0, 255, 1.0},   {255, 192, 203, 1.0}, {255, 105, 180, 1.0},
      {165, 42, 42, 1.0},
  };
}

std::vector<RpTokenId> range_tokens(int lo, int hi) {
  std::vector<RpTokenId> out;
  out.reserve(static_cast<size_t>(hi - lo + 1));
  for (int t = lo; t <= hi; ++t) out.push_back(t);
  return out;
}

}  // namespace

const std::array<RpName, kParamCount>& all_params() {
  static const std::array<RpName, kParamCount> params = {
      RpName::kLeft,          RpName::kTop,           RpName::kWidth,
      RpName::kHeight,        RpName::kFontStyle,     RpName::kFontWeight,
      RpName::kFontSize,      RpName::kLineHeight,    RpName::kTextAlign,
      RpName::kTextDecoration, RpName::kTextTransform, RpName::kColor,
      RpName::kBackgroundColor,
  };
  return params;
}

const char* param_name(RpName p) {
  switch (p) {
    case RpName::kLeft: return "left";
    case RpName::kTop: return "top";
    case RpName::kWidth: return "width";
    case RpName::kHeight: return "height";
    case RpName::kFontStyle: return "font-style";
    case RpName::kFontWeight: return "font-weight";
    case RpName::kFontSize: return "font-size";
    case RpName::kLineHeight: return "line-height";
    case RpName::kTextAlign: return "text-align";
    case RpName::kTextDecoration: return "text-decoration";
    case RpName::kTextTransform: return "text-transform";
    case RpName::kColor: return "color";
    case RpName::kBackgroundColor: return "background-color";
  }
  return "";
}

std::optional<RpName> param_from_name(const std::string& name) {
  static const std::unordered_map<std::string, RpName> map = [] {
    std::unordered_map<std::string, RpName> m;
    for (RpName p : all_params()) m.emplace(param_name(p), p);
    return m;
  }();
  auto it = map.find(name);
  if (it == map.end()) return std::nullopt;
  return it->second;
}

RpCategory param_category(RpName p) {
  switch (p) {
    case RpName::kLeft:
    case RpName::kTop:
    case RpName::kWidth:
    case RpName::kHeight:
      return RpCategory::kLayout;
    case RpName::kColor:
    case RpName::kBackgroundColor:
      return RpCategory::kColor;
    default:
      return RpCategory::kText;
  }
}

std::string format_rgba(const Rgba& c) {
  char alpha[32];
  if (c.a == static_cast<int>(c.a)) {
    std::snprintf(alpha, sizeof(alpha), "%d", static_cast<int>(c.a));
  } else {
    std::snprintf(alpha, sizeof(alpha), "%g", c.a);
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "rgba(%d, %d, %d, %s)", c.r, c.g, c.b, alpha);
  return buf;
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab(builtin_palette());
  return vocab;
}

Vocabulary::Vocabulary(std::vector<Rgba> palette) : palette_(std::move(palette)) {
  if (palette_.size() != kColorCount) {
    throw BadConfigError("vocabulary palette must have exactly 46 entries");
  }
  categories_ = {
      {"integer-pixel", kPixelLo, kPixelHi},
      {"color", kColorLo, kColorHi},
      {"font-style", kFontStyleLo, kFontStyleHi},
      {"font-weight", kFontWeightLo, kFontWeightHi},
      {"line-height", kLineHeightNormal, kLineHeightNormal},
      {"text-align", kTextAlignLo, kTextAlignHi},
      {"text-decoration", kTextDecorationLo, kTextDecorationHi},
      {"text-transform", kTextTransformLo, kTextTransformHi},
      {"pad", kPadToken, kPadToken},
  };

  for (RpName p : all_params()) {
    const auto idx = static_cast<size_t>(p);
    switch (p) {
      case RpName::kLeft:
      case RpName::kTop:
      case RpName::kWidth:
      case RpName::kHeight:
        legal_[idx] = range_tokens(kPixelLo, kPixelHi);
        break;
      case RpName::kFontSize:
        legal_[idx] = range_tokens(0, 32);
        break;
      case RpName::kLineHeight:
        legal_[idx] = range_tokens(0, 50);
        legal_[idx].push_back(kLineHeightNormal);
        break;
      case RpName::kFontStyle:
        legal_[idx] = range_tokens(kFontStyleLo, kFontStyleHi);
        break;
      case RpName::kFontWeight:
        legal_[idx] = range_tokens(kFontWeightLo, kFontWeightHi);
        break;
      case RpName::kTextAlign:
        legal_[idx] = range_tokens(kTextAlignLo, kTextAlignHi);
        break;
      case RpName::kTextDecoration:
        legal_[idx] = range_tokens(kTextDecorationLo, kTextDecorationHi);
        break;
      case RpName::kTextTransform:
        legal_[idx] = range_tokens(kTextTransformLo, kTextTransformHi);
        break;
      case RpName::kColor:
      case RpName::kBackgroundColor:
        legal_[idx] = range_tokens(kColorLo, kColorHi);
        break;
    }
  }
}

std::optional<int> Vocabulary::palette_index(const Rgba& c) const {
  for (size_t i = 0; i < palette_.size(); ++i) {
    if (palette_[i] == c) return static_cast<int>(i);
  }
  return std::nullopt;
}

bool Vocabulary::token_in_range(RpName p, RpTokenId token) const {
  const auto& legal = legal_[static_cast<size_t>(p)];
  // Legal token lists are contiguous ranges except line-height, which has the
  // keyword token appended.
  if (p == RpName::kLineHeight) {
    return (token >= 0 && token <= 50) || token == kLineHeightNormal;
  }
  return !legal.empty() && token >= legal.front() && token <= legal.back();
}

const std::vector<RpTokenId>& Vocabulary::legal_tokens(RpName p) const {
  return legal_[static_cast<size_t>(p)];
}

int Vocabulary::max_pixels(RpName p) const {
  switch (p) {
    case RpName::kLeft:
    case RpName::kTop:
    case RpName::kWidth:
    case RpName::kHeight:
      return kPixelHi;
    case RpName::kFontSize:
      return 32;
    case RpName::kLineHeight:
      return 50;
    default:
      return -1;
  }
}

const std::vector<std::string>& Vocabulary::keywords(RpName p) const {
  switch (p) {
    case RpName::kFontStyle: return kFontStyleKeywords;
    case RpName::kFontWeight: return kFontWeightKeywords;
    case RpName::kTextAlign: return kTextAlignKeywords;
    case RpName::kTextDecoration: return kTextDecorationKeywords;
    case RpName::kTextTransform: return kTextTransformKeywords;
    default: return kNoKeywords;
  }
}

int Vocabulary::keyword_base(RpName p) const {
  switch (p) {
    case RpName::kFontStyle: return kFontStyleLo;
    case RpName::kFontWeight: return kFontWeightLo;
    case RpName::kTextAlign: return kTextAlignLo;
    case RpName::kTextDecoration: return kTextDecorationLo;
    case RpName::kTextTransform: return kTextTransformLo;
    default: return -1;
  }
}

}  // namespace webrpg
