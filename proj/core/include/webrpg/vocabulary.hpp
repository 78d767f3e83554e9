#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace webrpg {

// The 13 rendering parameters in fixed declaration order. This order is the
// token layout of RpVector, the property order of emitted CSS, and the key
// order of serialized JSON.
enum class RpName : int {
  kLeft = 0,
  kTop,
  kWidth,
  kHeight,
  kFontStyle,
  kFontWeight,
  kFontSize,
  kLineHeight,
  kTextAlign,
  kTextDecoration,
  kTextTransform,
  kColor,
  kBackgroundColor,
};

inline constexpr int kParamCount = 13;
inline constexpr int kVocabSize = 1993;
inline constexpr int kPadToken = 1992;
inline constexpr int kColorCount = 46;

enum class RpCategory { kLayout, kText, kColor };

const std::array<RpName, kParamCount>& all_params();
const char* param_name(RpName p);
std::optional<RpName> param_from_name(const std::string& name);
RpCategory param_category(RpName p);

using RpTokenId = int;  // valid ids lie in [0, 1992]

struct Rgba {
  int r = 0;
  int g = 0;
  int b = 0;
  double a = 1.0;
  bool operator==(const Rgba& o) const {
    return r == o.r && g == o.g && b == o.b && a == o.a;
  }
};

std::string format_rgba(const Rgba& c);

enum class ValueKind { kPixelInt, kColorId, kKeyword, kPad };

// A semantic rendering-parameter value, before tokenization.
struct RpValue {
  ValueKind kind = ValueKind::kPad;
  int pixels = 0;        // kPixelInt
  int color_id = 0;      // kColorId, index into the 46-entry palette
  std::string keyword;   // kKeyword, lowercase

  static RpValue px(int v) { return {ValueKind::kPixelInt, v, 0, {}}; }
  static RpValue color(int id) { return {ValueKind::kColorId, 0, id, {}}; }
  static RpValue kw(std::string k) { return {ValueKind::kKeyword, 0, 0, std::move(k)}; }
  static RpValue pad() { return {ValueKind::kPad, 0, 0, {}}; }

  bool operator==(const RpValue& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case ValueKind::kPixelInt: return pixels == o.pixels;
      case ValueKind::kColorId: return color_id == o.color_id;
      case ValueKind::kKeyword: return keyword == o.keyword;
      case ValueKind::kPad: return true;
    }
    return false;
  }
};

// The 13 token ids of one element, indexed by RpName declaration order.
struct RpVector {
  std::array<RpTokenId, kParamCount> tokens{};

  RpVector() { tokens.fill(kPadToken); }

  RpTokenId& operator[](RpName p) { return tokens[static_cast<size_t>(p)]; }
  RpTokenId operator[](RpName p) const { return tokens[static_cast<size_t>(p)]; }
  bool operator==(const RpVector& o) const { return tokens == o.tokens; }
};

// Where PAD (token 1992) is accepted by validation. Style covers the 7 text
// and 2 color parameters; layout parameters must always carry pixel values
// under the default policy.
enum class PadPolicy { kForbidden, kStyleOnly, kAnywhere };

// Token tables: per-parameter index ranges, the color palette, and keyword
// orderings. The standard() instance carries the built-in 46-color palette;
// custom palettes can be supplied for experimentation.
class Vocabulary {
 public:
  static const Vocabulary& standard();
  explicit Vocabulary(std::vector<Rgba> palette);

  const std::vector<Rgba>& palette() const { return palette_; }
  std::optional<int> palette_index(const Rgba& c) const;

  // True when `token` is legal for `p` (PAD excluded; check separately).
  bool token_in_range(RpName p, RpTokenId token) const;

  // All legal tokens for `p` in ascending order, PAD excluded.
  const std::vector<RpTokenId>& legal_tokens(RpName p) const;

  // Upper pixel bound for numeric parameters (left 1920, font-size 32, ...).
  int max_pixels(RpName p) const;

  struct CategoryRange {
    std::string name;
    int lo = 0;
    int hi = 0;
  };
  // The nine disjoint vocabulary categories whose sizes sum to 1993.
  const std::vector<CategoryRange>& category_ranges() const { return categories_; }

  const std::vector<std::string>& keywords(RpName p) const;
  int keyword_base(RpName p) const;

 private:
  std::vector<Rgba> palette_;
  std::vector<CategoryRange> categories_;
  std::array<std::vector<RpTokenId>, kParamCount> legal_;
};

}  // namespace webrpg
