#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace webrpg {

// One element of a parsed HTML tree. Text is kept in text_chunks; `order`
// records how chunks and child elements interleave in the source so the tree
// serializes back in document order.
struct DomNode {
  struct Slot {
    bool is_text = false;
    int index = 0;  // into text_chunks or children
  };

  std::string tag;
  std::vector<std::pair<std::string, std::string>> attrs;  // source order
  std::vector<std::string> text_chunks;
  std::vector<DomNode> children;
  std::vector<Slot> order;

  std::optional<std::string> attr(const std::string& name) const;
  void set_attr(const std::string& name, const std::string& value);
  void add_text(std::string text);
  DomNode& add_child(DomNode child);

  // Total element count of this subtree, the node itself included.
  int subtree_size() const;
};

// Forgiving HTML parser: comments, doctypes, processing instructions,
// <script> and <style> are dropped; unclosed tags are closed implicitly;
// stray close tags are ignored; multiple top-level elements are wrapped in a
// synthetic <html> root. Throws HtmlParseError when the input is empty,
// contains NUL bytes, or holds no elements at all.
DomNode parse_html(const std::string& text);

// Canonical serialization (lowercase tags, double-quoted attributes, void
// elements unclosed). parse_html(serialize_html(t)) reproduces t.
std::string serialize_html(const DomNode& root);

// Ingest-time visibility approximation: removes <head>, <script>, <style>
// and any element carrying the `hidden` attribute, with their subtrees.
void drop_invisible(DomNode& root);

// Characters in the node's direct text chunks after whitespace
// normalization (runs collapse to one space, ends trimmed), counted in
// Unicode code points. Descendant text is not included.
int char_count(const DomNode& node);

// The normalized direct text itself (what char_count counts).
std::string direct_text(const DomNode& node);

// Location path of `node` inside `root`, of the form /tag[i]/tag[j]/... with
// 1-based ordinals among same-tag siblings. Throws XPathError when `node` is
// not part of `root`'s subtree.
std::string compute_xpath(const DomNode& root, const DomNode& node);

// Inverse of compute_xpath; throws XPathError when the path does not resolve.
const DomNode* resolve_xpath(const DomNode& root, const std::string& xpath);

struct XPathStep {
  std::string tag;
  int ordinal = 1;  // 1-based position among same-tag siblings
};

// Splits "/html[1]/body[1]/div[2]" into steps; XPathError on malformed input.
std::vector<XPathStep> parse_xpath(const std::string& xpath);

// Maximal (closest-to-root) disjoint subtrees whose element count lies in
// [min_el, max_el], in pre-order.
std::vector<const DomNode*> subpage_roots(const DomNode& root, int min_el = 32,
                                          int max_el = 128);

// Tags kept by clean_tree when no custom list is given (46 common tags).
const std::vector<std::string>& default_allowed_tags();

// Removes elements whose tag is not allowed, promoting their content into
// the parent in place; drops `hidden` subtrees. The root itself is always
// kept (there is nowhere to promote its children to).
void clean_tree(DomNode& root,
                const std::vector<std::string>& allowed = default_allowed_tags());

}  // namespace webrpg
