#pragma once

#include <optional>
#include <string>
#include <vector>

#include "webrpg/dom.hpp"
#include "webrpg/rp_codec.hpp"

namespace webrpg {

// One DOM element as the models see it: pre-order id (1-based), tag, its
// location path, normalized direct text and its length, tree depth (root 0)
// and parent id. `text` feeds the semantic encoder.
struct Element {
  int id = 0;
  std::string tag;
  std::string xpath;
  int char_count = 0;
  int depth = 0;
  std::optional<int> parent_id;
  std::string text;
};

// A training/generation sample: S elements in pre-order, the serialized HTML
// they came from (class attributes carry ele{N} markers), and optionally the
// rendering parameters keyed by element id.
struct Page {
  std::vector<Element> elements;
  std::string source_html;
  std::optional<PageRps> rps;

  int size() const { return static_cast<int>(elements.size()); }
};

// Assigns pre-order ids 1..S, replacing any existing ele{N} class markers
// with the fresh ones, and returns the element records.
std::vector<Element> preorder_elements(DomNode& root);

// preorder_elements + serialization. When `source_rps` is given, each
// element's previous ele{N} marker (as found in the class attribute before
// re-numbering) selects its vector: page.rps[new_id] = source_rps[old_id].
// Elements without a marker or without an entry are left out of page.rps.
Page build_page(DomNode& root, const PageRps* source_rps = nullptr);

// Maximal disjoint subtrees with element count in [min_el, max_el], each
// rebuilt as a standalone Page (fresh 1..S ids; rps remapped from
// `source_rps` via the tree's ele{N} markers when given).
std::vector<Page> extract_subpages(const DomNode& root, int min_el = 32,
                                   int max_el = 128,
                                   const PageRps* source_rps = nullptr);

// Re-parses the page, removes disallowed tags (children promoted) and hidden
// subtrees, re-numbers, and remaps rps onto the surviving elements.
Page clean_subpage(const Page& page,
                   const std::vector<std::string>& allowed = default_allowed_tags());

// Translates all boxes so min left = 0 and min top = 0; widths and heights
// unchanged. Throws MissingLayoutError unless every element has a concrete
// (non-PAD) left/top/width/height.
Page normalize_layout(const Page& page);

// {"elements":[{"id","tag","xpath","char_count","depth","parent_id","text"}...],
//  "rps": RP-JSON object or null}. source_html is persisted separately.
std::string page_to_json(const Page& page);
Page page_from_json(const std::string& text);

}  // namespace webrpg
