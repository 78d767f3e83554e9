#include "doctest.h"

#include <set>

#include "webrpg/errors.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/rp_codec.hpp"
#include "webrpg/vocabulary.hpp"

using namespace webrpg;

namespace {

// Draws a vector that is valid under kStyleOnly: layout always concrete,
// style slots PAD with probability ~1/4.
RpVector random_vector(Rng& rng) {
  const auto& vocab = Vocabulary::standard();
  RpVector v;
  for (RpName p : all_params()) {
    const auto& legal = vocab.legal_tokens(p);
    if (param_category(p) != RpCategory::kLayout && rng.uniform() < 0.25) {
      v[p] = kPadToken;
    } else {
      v[p] = legal[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(legal.size()) - 1))];
    }
  }
  return v;
}

}  // namespace

TEST_CASE("category ranges partition the vocabulary") {
  const auto& ranges = Vocabulary::standard().category_ranges();
  REQUIRE(ranges.size() == 9);
  int total = 0;
  std::set<int> seen;
  for (const auto& r : ranges) {
    CHECK(r.lo <= r.hi);
    for (int t = r.lo; t <= r.hi; ++t) {
      CHECK(seen.insert(t).second);  // disjoint
      ++total;
    }
  }
  // The nine categories (PAD included) cover the vocabulary exactly.
  CHECK(total == kVocabSize);
  CHECK(seen.count(kPadToken) == 1);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == kPadToken);
}

TEST_CASE("category sizes match the published layout") {
  const auto& ranges = Vocabulary::standard().category_ranges();
  auto size_of = [&](const std::string& name) -> int {
    for (const auto& r : ranges)
      if (r.name == name) return r.hi - r.lo + 1;
    return -1;
  };
  CHECK(size_of("integer-pixel") == 1921);
  CHECK(size_of("color") == 46);
  CHECK(size_of("font-style") == 3);
  CHECK(size_of("font-weight") == 9);
  CHECK(size_of("line-height") == 1);
  CHECK(size_of("text-align") == 6);
  CHECK(size_of("text-decoration") == 2);
  CHECK(size_of("text-transform") == 4);
  CHECK(size_of("pad") == 1);
}

TEST_CASE("known token assignments") {
  CHECK(encode_value(RpName::kLeft, RpValue::px(1052)) == 1052);
  CHECK(encode_value(RpName::kTop, RpValue::px(0)) == 0);
  CHECK(encode_value(RpName::kWidth, RpValue::px(1920)) == 1920);
  CHECK(encode_value(RpName::kFontWeight, RpValue::kw("400")) == 1973);
  CHECK(encode_value(RpName::kFontWeight, RpValue::kw("100")) == 1970);
  CHECK(encode_value(RpName::kFontWeight, RpValue::kw("900")) == 1978);
  CHECK(encode_value(RpName::kFontStyle, RpValue::kw("normal")) == 1967);
  CHECK(encode_value(RpName::kFontStyle, RpValue::kw("oblique")) == 1969);
  CHECK(encode_value(RpName::kLineHeight, RpValue::kw("normal")) == 1979);
  CHECK(encode_value(RpName::kLineHeight, RpValue::px(50)) == 50);
  CHECK(encode_value(RpName::kTextAlign, RpValue::kw("start")) == 1980);
  CHECK(encode_value(RpName::kTextAlign, RpValue::kw("justify")) == 1985);
  CHECK(encode_value(RpName::kTextDecoration, RpValue::kw("none")) == 1986);
  CHECK(encode_value(RpName::kTextDecoration, RpValue::kw("underline")) == 1987);
  CHECK(encode_value(RpName::kTextTransform, RpValue::kw("none")) == 1988);
  CHECK(encode_value(RpName::kTextTransform, RpValue::kw("capitalize")) == 1991);
  CHECK(encode_value(RpName::kColor, RpValue::color(0)) == 1921);
  CHECK(encode_value(RpName::kBackgroundColor, RpValue::color(45)) == 1966);
  CHECK(encode_value(RpName::kColor, RpValue::pad()) == kPadToken);

  CHECK(decode_value(RpName::kFontWeight, 1970) == RpValue::kw("100"));
  CHECK(decode_value(RpName::kLineHeight, 1979) == RpValue::kw("normal"));
  CHECK(decode_value(RpName::kLineHeight, 37) == RpValue::px(37));
  CHECK(decode_value(RpName::kTextDecoration, 1986) == RpValue::kw("none"));
  CHECK(decode_value(RpName::kBackgroundColor, 1921) == RpValue::color(0));
}

TEST_CASE("every legal token survives decode/encode for every parameter") {
  const auto& vocab = Vocabulary::standard();
  for (RpName p : all_params()) {
    const auto& legal = vocab.legal_tokens(p);
    CHECK(!legal.empty());
    for (RpTokenId t : legal) {
      const RpValue v = decode_value(p, t);
      CHECK(encode_value(p, v) == t);
      // Canonical string form is also lossless.
      CHECK(parse_value(p, format_value(p, t)) == t);
    }
    // PAD round-trips everywhere too.
    CHECK(encode_value(p, decode_value(p, kPadToken)) == kPadToken);
  }
}

TEST_CASE("per-parameter legal ranges have the expected sizes") {
  const auto& vocab = Vocabulary::standard();
  CHECK(vocab.legal_tokens(RpName::kLeft).size() == 1921);
  CHECK(vocab.legal_tokens(RpName::kFontSize).size() == 33);
  CHECK(vocab.legal_tokens(RpName::kLineHeight).size() == 52);  // 0..50 plus normal
  CHECK(vocab.legal_tokens(RpName::kFontStyle).size() == 3);
  CHECK(vocab.legal_tokens(RpName::kFontWeight).size() == 9);
  CHECK(vocab.legal_tokens(RpName::kTextAlign).size() == 6);
  CHECK(vocab.legal_tokens(RpName::kTextDecoration).size() == 2);
  CHECK(vocab.legal_tokens(RpName::kTextTransform).size() == 4);
  CHECK(vocab.legal_tokens(RpName::kColor).size() == 46);
  CHECK(vocab.legal_tokens(RpName::kBackgroundColor).size() == 46);
}

TEST_CASE("encode rejects out-of-range and mismatched values") {
  CHECK_THROWS_AS(encode_value(RpName::kLeft, RpValue::px(1921)), OutOfRangeError);
  CHECK_THROWS_AS(encode_value(RpName::kLeft, RpValue::px(-1)), OutOfRangeError);
  CHECK_THROWS_AS(encode_value(RpName::kFontSize, RpValue::px(33)), OutOfRangeError);
  CHECK_THROWS_AS(encode_value(RpName::kLineHeight, RpValue::px(51)), OutOfRangeError);
  CHECK_THROWS_AS(encode_value(RpName::kColor, RpValue::color(46)), OutOfRangeError);
  CHECK_THROWS_AS(encode_value(RpName::kFontWeight, RpValue::kw("450")), OutOfRangeError);
  CHECK_THROWS_AS(encode_value(RpName::kTextAlign, RpValue::kw("middle")), OutOfRangeError);
  CHECK_THROWS_AS(encode_value(RpName::kLeft, RpValue::color(3)), WrongKindError);
  CHECK_THROWS_AS(encode_value(RpName::kColor, RpValue::px(10)), WrongKindError);
  CHECK_THROWS_AS(encode_value(RpName::kLeft, RpValue::kw("left")), WrongKindError);
}

TEST_CASE("decode rejects tokens outside the parameter's range") {
  CHECK_THROWS_AS(decode_value(RpName::kLeft, 1950), IllegalTokenError);
  CHECK_THROWS_AS(decode_value(RpName::kFontStyle, 5), IllegalTokenError);
  CHECK_THROWS_AS(decode_value(RpName::kFontSize, 33), IllegalTokenError);
  CHECK_THROWS_AS(decode_value(RpName::kColor, 1967), IllegalTokenError);
  CHECK_THROWS_AS(decode_value(RpName::kTextAlign, 1986), IllegalTokenError);
  CHECK_THROWS_AS(decode_value(RpName::kLeft, -1), IllegalTokenError);
  CHECK_THROWS_AS(decode_value(RpName::kLeft, kVocabSize), IllegalTokenError);
}

TEST_CASE("validate_vector applies the pad policy") {
  RpVector all_pad;  // default-constructed
  CHECK(validate_vector(all_pad, PadPolicy::kForbidden).size() == 13);
  CHECK(validate_vector(all_pad, PadPolicy::kStyleOnly).size() == 4);
  CHECK(validate_vector(all_pad, PadPolicy::kAnywhere).empty());

  RpVector v;
  v[RpName::kLeft] = 10;
  v[RpName::kTop] = 20;
  v[RpName::kWidth] = 30;
  v[RpName::kHeight] = 40;
  CHECK(validate_vector(v, PadPolicy::kStyleOnly).empty());

  v[RpName::kFontSize] = 500;  // pixel token but outside font-size's cap
  auto viols = validate_vector(v, PadPolicy::kStyleOnly);
  REQUIRE(viols.size() == 1);
  CHECK(viols[0].param == RpName::kFontSize);
  CHECK(viols[0].token == 500);

  v[RpName::kFontSize] = 12;
  v[RpName::kColor] = 5000;  // outside the vocabulary entirely
  viols = validate_vector(v, PadPolicy::kStyleOnly);
  REQUIRE(viols.size() == 1);
  CHECK(viols[0].reason == "token outside vocabulary");
}

TEST_CASE("format_rgba matches browser-computed formatting") {
  CHECK(format_rgba({153, 204, 0, 1.0}) == "rgba(153, 204, 0, 1)");
  CHECK(format_rgba({0, 0, 0, 0.0}) == "rgba(0, 0, 0, 0)");
  CHECK(format_rgba({255, 255, 255, 1.0}) == "rgba(255, 255, 255, 1)");
  CHECK(format_rgba({0, 0, 0, 0.5}) == "rgba(0, 0, 0, 0.5)");
}

TEST_CASE("palette holds 46 colors with the transparent default first") {
  const auto& pal = Vocabulary::standard().palette();
  REQUIRE(pal.size() == 46);
  CHECK(pal[0] == Rgba{0, 0, 0, 0.0});
  CHECK(Vocabulary::standard().palette_index({153, 204, 0, 1.0}).has_value());
  CHECK(!Vocabulary::standard().palette_index({1, 2, 3, 1.0}).has_value());
}

TEST_CASE("emit_css produces ordered rules and parse_css_rules inverts them") {
  PageRps page;
  RpVector v;
  v[RpName::kLeft] = 100;
  v[RpName::kTop] = 200;
  v[RpName::kWidth] = 300;
  v[RpName::kHeight] = 50;
  v[RpName::kFontStyle] = 1967;
  v[RpName::kFontWeight] = 1973;
  v[RpName::kFontSize] = 16;
  v[RpName::kLineHeight] = 1979;
  v[RpName::kTextAlign] = 1981;
  v[RpName::kTextDecoration] = 1986;
  v[RpName::kTextTransform] = 1988;
  v[RpName::kColor] = 1922;
  v[RpName::kBackgroundColor] = 1921;
  page[1] = v;

  const std::string css = emit_css(page);
  const std::string expected =
      ".ele1 {\n"
      "  position: absolute;\n"
      "  left: 100px;\n"
      "  top: 200px;\n"
      "  width: 300px;\n"
      "  height: 50px;\n"
      "  font-style: normal;\n"
      "  font-weight: 400;\n"
      "  font-size: 16px;\n"
      "  line-height: normal;\n"
      "  text-align: center;\n"
      "  text-decoration: none;\n"
      "  text-transform: none;\n"
      "  color: rgba(0, 0, 0, 1);\n"
      "  background-color: rgba(0, 0, 0, 0);\n"
      "}\n";
  CHECK(css == expected);
  CHECK(parse_css_rules(css) == page);
}

TEST_CASE("emit_css omits PAD slots and parsing restores them") {
  PageRps page;
  RpVector v;
  v[RpName::kLeft] = 5;
  v[RpName::kTop] = 6;
  v[RpName::kWidth] = 7;
  v[RpName::kHeight] = 8;
  // all nine style slots left as PAD
  page[3] = v;

  const std::string css = emit_css(page);
  CHECK(css.find("font-style") == std::string::npos);
  CHECK(css.find("color") == std::string::npos);
  CHECK(parse_css_rules(css) == page);
}

TEST_CASE("emit_css refuses invalid vectors") {
  PageRps page;
  page[1] = RpVector{};  // all-PAD: layout slots violate kStyleOnly
  CHECK_THROWS_AS(emit_css(page), InvalidVectorError);
  CHECK_THROWS_AS(emit_css(page, PadPolicy::kForbidden), InvalidVectorError);
  CHECK_NOTHROW(emit_css(page, PadPolicy::kAnywhere));
}

TEST_CASE("css round trip holds for randomized pages") {
  Rng rng(20240817);
  for (int trial = 0; trial < 50; ++trial) {
    PageRps page;
    const int n = rng.uniform_int(1, 40);
    for (int i = 1; i <= n; ++i) page[i] = random_vector(rng);
    CHECK(parse_css_rules(emit_css(page)) == page);
  }
}

TEST_CASE("json output is byte-stable and ordered by element id") {
  PageRps page;
  for (int id : {12, 1, 3}) {
    RpVector v;
    v[RpName::kLeft] = id;
    v[RpName::kTop] = 0;
    v[RpName::kWidth] = 10;
    v[RpName::kHeight] = 10;
    page[id] = v;
  }
  const std::string a = to_json(page);
  const std::string b = to_json(from_json(a));
  CHECK(a == b);
  // std::map iteration gives ascending ids.
  CHECK(a.find("\"ele1\"") < a.find("\"ele3\""));
  CHECK(a.find("\"ele3\"") < a.find("\"ele12\""));
}

TEST_CASE("json fixture matches the expected byte layout") {
  PageRps page;
  RpVector v;
  v[RpName::kLeft] = 1052;
  v[RpName::kTop] = 0;
  v[RpName::kWidth] = 400;
  v[RpName::kHeight] = 120;
  v[RpName::kFontWeight] = 1973;
  v[RpName::kColor] = 1922;
  page[2] = v;

  const std::string expected =
      "{\n"
      "  \"ele2\": {\n"
      "    \"left\": \"1052px\",\n"
      "    \"top\": \"0px\",\n"
      "    \"width\": \"400px\",\n"
      "    \"height\": \"120px\",\n"
      "    \"font-weight\": \"400\",\n"
      "    \"color\": \"rgba(0, 0, 0, 1)\"\n"
      "  }\n"
      "}";
  CHECK(to_json(page) == expected);
  CHECK(from_json(expected) == page);
}

TEST_CASE("json round trip holds for randomized pages") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    PageRps page;
    const int n = rng.uniform_int(1, 40);
    for (int i = 1; i <= n; ++i) page[i] = random_vector(rng);
    CHECK(from_json(to_json(page)) == page);
  }
}

TEST_CASE("from_json rejects malformed input with precise errors") {
  CHECK_THROWS_AS(from_json("not json"), ParseError);
  CHECK_THROWS_AS(from_json("[1, 2]"), ParseError);
  CHECK_THROWS_AS(from_json("{\"div1\": {}}"), ParseError);
  CHECK_THROWS_AS(from_json("{\"eleX\": {}}"), ParseError);
  CHECK_THROWS_AS(from_json("{\"ele1\": {\"margin\": \"3px\"}}"), UnknownParameterError);
  CHECK_THROWS_AS(from_json("{\"ele1\": {\"left\": 3}}"), UnparseableValueError);
  CHECK_THROWS_AS(from_json("{\"ele1\": {\"left\": \"wide\"}}"), UnparseableValueError);
  CHECK_THROWS_AS(from_json("{\"ele1\": {\"left\": \"90000px\"}}"), UnparseableValueError);
  CHECK_THROWS_AS(from_json("{\"ele1\": {\"color\": \"rgba(1, 2, 3, 1)\"}}"),
                  UnparseableValueError);
}

TEST_CASE("parse_value accepts the formats a browser computes") {
  CHECK(parse_value(RpName::kLeft, "307px") == 307);
  CHECK(parse_value(RpName::kFontWeight, "700") == 1976);
  CHECK(parse_value(RpName::kLineHeight, "normal") == 1979);
  CHECK(parse_value(RpName::kLineHeight, "24px") == 24);
  CHECK(parse_value(RpName::kColor, "rgba(255, 255, 255, 1)") == 1923);
  CHECK(parse_value(RpName::kBackgroundColor, "rgba(0, 0, 0, 0)") == 1921);
  CHECK(parse_value(RpName::kTextAlign, "justify") == 1985);
  CHECK_THROWS_AS(parse_value(RpName::kLeft, "30em"), UnparseableValueError);
  CHECK_THROWS_AS(parse_value(RpName::kLeft, ""), UnparseableValueError);
  CHECK_THROWS_AS(parse_value(RpName::kColor, "rgba(1, 2)"), UnparseableValueError);
}
