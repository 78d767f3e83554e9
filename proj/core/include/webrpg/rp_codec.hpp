#pragma once

#include <map>
#include <string>
#include <vector>

#include "webrpg/vocabulary.hpp"

namespace webrpg {

// Rendering parameters of a page, keyed by pre-order element id ("ele{N}").
using PageRps = std::map<int, RpVector>;

RpTokenId encode_value(RpName param, const RpValue& value,
                       const Vocabulary& vocab = Vocabulary::standard());

RpValue decode_value(RpName param, RpTokenId token,
                     const Vocabulary& vocab = Vocabulary::standard());

struct Violation {
  RpName param;
  RpTokenId token;
  std::string reason;
};

std::vector<Violation> validate_vector(const RpVector& v,
                                       PadPolicy policy = PadPolicy::kStyleOnly,
                                       const Vocabulary& vocab = Vocabulary::standard());

// CSS text with one `.ele{N}` rule per element, properties in declaration
// order, `position: absolute` so left/top apply. PAD slots are omitted.
std::string emit_css(const PageRps& page,
                     PadPolicy policy = PadPolicy::kStyleOnly,
                     const Vocabulary& vocab = Vocabulary::standard());

// Re-parses CSS emitted by emit_css. Properties absent from a rule map to
// PAD. Not a general CSS parser.
PageRps parse_css_rules(const std::string& css,
                        const Vocabulary& vocab = Vocabulary::standard());

// RP-JSON: top-level object keyed "ele{N}", values map parameter names to
// browser-computed formatting ("Npx", "rgba(r, g, b, a)", lowercase
// keywords). PAD slots are omitted on write and restored on read.
std::string to_json(const PageRps& page,
                    const Vocabulary& vocab = Vocabulary::standard());

PageRps from_json(const std::string& text,
                  const Vocabulary& vocab = Vocabulary::standard());

// The canonical string form of one token ("307px", "underline", ...).
std::string format_value(RpName param, RpTokenId token,
                         const Vocabulary& vocab = Vocabulary::standard());

// Inverse of format_value; throws UnparseableValueError / OutOfRangeError.
RpTokenId parse_value(RpName param, const std::string& text,
                      const Vocabulary& vocab = Vocabulary::standard());

}  // namespace webrpg
