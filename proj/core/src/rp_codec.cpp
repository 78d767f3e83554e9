#include "webrpg/rp_codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

#include "webrpg/errors.hpp"

namespace webrpg {

namespace {

bool is_pixel_param(RpName p) {
  switch (p) {
    case RpName::kLeft:
    case RpName::kTop:
    case RpName::kWidth:
    case RpName::kHeight:
    case RpName::kFontSize:
    case RpName::kLineHeight:
      return true;
    default:
      return false;
  }
}

bool is_color_param(RpName p) {
  return p == RpName::kColor || p == RpName::kBackgroundColor;
}

bool pad_allowed(RpName p, PadPolicy policy) {
  switch (policy) {
    case PadPolicy::kForbidden: return false;
    case PadPolicy::kAnywhere: return true;
    case PadPolicy::kStyleOnly: return param_category(p) != RpCategory::kLayout;
  }
  return false;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& s, const char* what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UnparseableValueError(std::string("not an integer ") + what + ": '" + s + "'");
  }
  return v;
}

Rgba parse_rgba(const std::string& text) {
  // Accepts "rgba(r, g, b, a)" with optional spaces.
  const std::string t = trim(text);
  if (t.rfind("rgba(", 0) != 0 || t.back() != ')') {
    throw UnparseableValueError("not an rgba() color: '" + text + "'");
  }
  std::string inner = t.substr(5, t.size() - 6);
  std::vector<std::string> parts;
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  if (parts.size() != 4) {
    throw UnparseableValueError("rgba() needs four components: '" + text + "'");
  }
  Rgba c;
  c.r = parse_int(parts[0], "red");
  c.g = parse_int(parts[1], "green");
  c.b = parse_int(parts[2], "blue");
  try {
    size_t pos = 0;
    c.a = std::stod(parts[3], &pos);
    if (pos != parts[3].size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw UnparseableValueError("bad alpha in '" + text + "'");
  }
  return c;
}

}  // namespace

RpTokenId encode_value(RpName param, const RpValue& value, const Vocabulary& vocab) {
  switch (value.kind) {
    case ValueKind::kPad:
      return kPadToken;
    case ValueKind::kPixelInt: {
      if (!is_pixel_param(param)) {
        throw WrongKindError(std::string("pixel value for ") + param_name(param));
      }
      const int cap = vocab.max_pixels(param);
      if (value.pixels < 0 || value.pixels > cap) {
        throw OutOfRangeError(std::string(param_name(param)) + ": " +
                              std::to_string(value.pixels) + "px outside [0, " +
                              std::to_string(cap) + "]");
      }
      return value.pixels;
    }
    case ValueKind::kColorId: {
      if (!is_color_param(param)) {
        throw WrongKindError(std::string("color value for ") + param_name(param));
      }
      if (value.color_id < 0 || value.color_id >= kColorCount) {
        throw OutOfRangeError("color id " + std::to_string(value.color_id) +
                              " outside [0, 45]");
      }
      return 1921 + value.color_id;
    }
    case ValueKind::kKeyword: {
      if (param == RpName::kLineHeight) {
        if (value.keyword == "normal") return 1979;
        throw OutOfRangeError("line-height keyword '" + value.keyword + "'");
      }
      const auto& kws = vocab.keywords(param);
      if (kws.empty()) {
        throw WrongKindError(std::string("keyword value for ") + param_name(param));
      }
      auto it = std::find(kws.begin(), kws.end(), value.keyword);
      if (it == kws.end()) {
        throw OutOfRangeError(std::string(param_name(param)) + " keyword '" +
                              value.keyword + "'");
      }
      return vocab.keyword_base(param) + static_cast<int>(it - kws.begin());
    }
  }
  throw WrongKindError("unhandled value kind");
}

RpValue decode_value(RpName param, RpTokenId token, const Vocabulary& vocab) {
  if (token == kPadToken) return RpValue::pad();
  if (!vocab.token_in_range(param, token)) {
    throw IllegalTokenError("token " + std::to_string(token) + " illegal for " +
                            param_name(param));
  }
  if (is_color_param(param)) return RpValue::color(token - 1921);
  if (param == RpName::kLineHeight && token == 1979) return RpValue::kw("normal");
  if (is_pixel_param(param)) return RpValue::px(token);
  const auto& kws = vocab.keywords(param);
  return RpValue::kw(kws[static_cast<size_t>(token - vocab.keyword_base(param))]);
}

std::vector<Violation> validate_vector(const RpVector& v, PadPolicy policy,
                                       const Vocabulary& vocab) {
  std::vector<Violation> out;
  for (RpName p : all_params()) {
    const RpTokenId t = v[p];
    if (t == kPadToken) {
      if (!pad_allowed(p, policy)) {
        out.push_back({p, t, std::string("PAD not allowed for ") + param_name(p)});
      }
      continue;
    }
    if (t < 0 || t >= kVocabSize) {
      out.push_back({p, t, "token outside vocabulary"});
      continue;
    }
    if (!vocab.token_in_range(p, t)) {
      out.push_back({p, t, std::string("token outside range of ") + param_name(p)});
    }
  }
  return out;
}

std::string format_value(RpName param, RpTokenId token, const Vocabulary& vocab) {
  const RpValue v = decode_value(param, token, vocab);
  switch (v.kind) {
    case ValueKind::kPixelInt:
      return std::to_string(v.pixels) + "px";
    case ValueKind::kColorId:
      return format_rgba(vocab.palette()[static_cast<size_t>(v.color_id)]);
    case ValueKind::kKeyword:
      return v.keyword;
    case ValueKind::kPad:
      return "pad";
  }
  return {};
}

RpTokenId parse_value(RpName param, const std::string& raw, const Vocabulary& vocab) {
  const std::string text = trim(raw);
  if (text == "pad") return kPadToken;
  if (text.rfind("rgba(", 0) == 0) {
    const Rgba c = parse_rgba(text);
    auto idx = vocab.palette_index(c);
    if (!idx) throw UnparseableValueError("color not in palette: '" + text + "'");
    return encode_value(param, RpValue::color(*idx), vocab);
  }
  if (text.size() > 2 && text.compare(text.size() - 2, 2, "px") == 0) {
    const int px = parse_int(text.substr(0, text.size() - 2), "pixel value");
    return encode_value(param, RpValue::px(px), vocab);
  }
  if (param == RpName::kFontWeight) {
    // browser-computed font-weight is numeric text ("400")
    return encode_value(param, RpValue::kw(text), vocab);
  }
  if (!text.empty() && (std::isalpha(static_cast<unsigned char>(text[0])) != 0)) {
    return encode_value(param, RpValue::kw(text), vocab);
  }
  throw UnparseableValueError(std::string("cannot parse '") + raw + "' for " +
                              param_name(param));
}

std::string emit_css(const PageRps& page, PadPolicy policy, const Vocabulary& vocab) {
  std::string out;
  for (const auto& [id, vec] : page) {
    const auto violations = validate_vector(vec, policy, vocab);
    if (!violations.empty()) {
      throw InvalidVectorError("element ele" + std::to_string(id) + ": " +
                               violations.front().reason);
    }
    out += ".ele" + std::to_string(id) + " {\n";
    out += "  position: absolute;\n";
    for (RpName p : all_params()) {
      if (vec[p] == kPadToken) continue;
      out += "  ";
      out += param_name(p);
      out += ": ";
      out += format_value(p, vec[p], vocab);
      out += ";\n";
    }
    out += "}\n";
  }
  return out;
}

PageRps parse_css_rules(const std::string& css, const Vocabulary& vocab) {
  PageRps page;
  size_t pos = 0;
  while (true) {
    size_t dot = css.find(".ele", pos);
    if (dot == std::string::npos) break;
    size_t brace = css.find('{', dot);
    if (brace == std::string::npos) {
      throw ParseError("css: selector without block");
    }
    const std::string selector = trim(css.substr(dot + 4, brace - dot - 4));
    int id = 0;
    try {
      id = parse_int(selector, "element id");
    } catch (const UnparseableValueError&) {
      throw ParseError("css: bad selector '.ele" + selector + "'");
    }
    size_t close = css.find('}', brace);
    if (close == std::string::npos) throw ParseError("css: unterminated block");
    const std::string body = css.substr(brace + 1, close - brace - 1);

    RpVector vec;
    std::stringstream ss(body);
    std::string decl;
    while (std::getline(ss, decl, ';')) {
      const std::string d = trim(decl);
      if (d.empty()) continue;
      size_t colon = d.find(':');
      if (colon == std::string::npos) throw ParseError("css: malformed declaration '" + d + "'");
      const std::string prop = trim(d.substr(0, colon));
      const std::string value = trim(d.substr(colon + 1));
      if (prop == "position") continue;
      auto p = param_from_name(prop);
      if (!p) throw UnknownParameterError("css: unknown property '" + prop + "'");
      vec[*p] = parse_value(*p, value, vocab);
    }
    page[id] = vec;
    pos = close + 1;
  }
  return page;
}

std::string to_json(const PageRps& page, const Vocabulary& vocab) {
  nlohmann::ordered_json root = nlohmann::ordered_json::object();
  for (const auto& [id, vec] : page) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (RpName p : all_params()) {
      if (vec[p] == kPadToken) continue;
      obj[param_name(p)] = format_value(p, vec[p], vocab);
    }
    root["ele" + std::to_string(id)] = std::move(obj);
  }
  return root.dump(2);
}

PageRps from_json(const std::string& text, const Vocabulary& vocab) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("rp-json: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("rp-json: top level must be an object");

  PageRps page;
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string& key = it.key();
    if (key.rfind("ele", 0) != 0) {
      throw ParseError("rp-json: key '" + key + "' does not match ele{N}");
    }
    int id = 0;
    try {
      id = parse_int(key.substr(3), "element id");
    } catch (const UnparseableValueError&) {
      throw ParseError("rp-json: key '" + key + "' does not match ele{N}");
    }
    if (!it.value().is_object()) {
      throw ParseError("rp-json: value of '" + key + "' must be an object");
    }
    RpVector vec;
    for (auto& [prop, val] : it.value().items()) {
      auto p = param_from_name(prop);
      if (!p) throw UnknownParameterError("rp-json: " + key + ": unknown parameter '" + prop + "'");
      if (!val.is_string()) {
        throw UnparseableValueError("rp-json: " + key + "." + prop + ": expected string");
      }
      try {
        vec[*p] = parse_value(*p, val.get<std::string>(), vocab);
      } catch (const Error& e) {
        throw UnparseableValueError("rp-json: " + key + "." + prop + ": " + e.what());
      }
    }
    page[id] = vec;
  }
  return page;
}

}  // namespace webrpg
