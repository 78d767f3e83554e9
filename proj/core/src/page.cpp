#include "webrpg/page.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "webrpg/errors.hpp"

namespace webrpg {

namespace {

// First class token of the form ele{N}, if any — the element's id from a
// previous numbering pass.
std::optional<int> marked_id(const DomNode& node) {
  const auto cls = node.attr("class");
  if (!cls) return std::nullopt;
  std::stringstream ss(*cls);
  std::string token;
  while (ss >> token) {
    if (token.size() > 3 && token.compare(0, 3, "ele") == 0 &&
        std::all_of(token.begin() + 3, token.end(),
                    [](unsigned char c) { return std::isdigit(c) != 0; })) {
      return std::stoi(token.substr(3));
    }
  }
  return std::nullopt;
}

// Rewrites the class attribute: previous ele{N} markers out, ele{id} in.
void set_marker(DomNode& node, int id) {
  std::string rebuilt;
  if (const auto cls = node.attr("class")) {
    std::stringstream ss(*cls);
    std::string token;
    while (ss >> token) {
      const bool is_marker =
          token.size() > 3 && token.compare(0, 3, "ele") == 0 &&
          std::all_of(token.begin() + 3, token.end(),
                      [](unsigned char c) { return std::isdigit(c) != 0; });
      if (is_marker) continue;
      if (!rebuilt.empty()) rebuilt.push_back(' ');
      rebuilt += token;
    }
  }
  if (!rebuilt.empty()) rebuilt.push_back(' ');
  rebuilt += "ele" + std::to_string(id);
  node.set_attr("class", rebuilt);
}

struct Walker {
  std::vector<Element>* elements;
  const PageRps* source_rps;
  PageRps* out_rps;
  int counter = 0;

  void walk(DomNode& node, const std::string& path_prefix, int ordinal, int depth,
            std::optional<int> parent_id) {
    const std::optional<int> old_id = marked_id(node);
    const int id = ++counter;
    set_marker(node, id);

    const std::string xpath =
        path_prefix + "/" + node.tag + "[" + std::to_string(ordinal) + "]";

    Element el;
    el.id = id;
    el.tag = node.tag;
    el.xpath = xpath;
    el.char_count = char_count(node);
    el.depth = depth;
    el.parent_id = parent_id;
    el.text = direct_text(node);
    elements->push_back(std::move(el));

    // A tree numbered for the first time has no markers; the caller's rps
    // then refer to the very ids being assigned here.
    if (source_rps != nullptr) {
      const auto it = source_rps->find(old_id.value_or(id));
      if (it != source_rps->end()) (*out_rps)[id] = it->second;
    }

    std::map<std::string, int> tag_seen;
    for (DomNode& child : node.children) {
      walk(child, xpath, ++tag_seen[child.tag], depth + 1, id);
    }
  }
};

nlohmann::ordered_json rps_to_ordered_json(const PageRps& rps) {
  // Route through the canonical string form so the embedded object is
  // byte-identical to a standalone RP-JSON file.
  return nlohmann::ordered_json::parse(to_json(rps));
}

}  // namespace

std::vector<Element> preorder_elements(DomNode& root) {
  std::vector<Element> elements;
  Walker w{&elements, nullptr, nullptr};
  w.walk(root, "", 1, 0, std::nullopt);
  return elements;
}

Page build_page(DomNode& root, const PageRps* source_rps) {
  Page page;
  PageRps remapped;
  Walker w{&page.elements, source_rps, &remapped};
  w.walk(root, "", 1, 0, std::nullopt);
  page.source_html = serialize_html(root);
  if (source_rps != nullptr) page.rps = std::move(remapped);
  return page;
}

std::vector<Page> extract_subpages(const DomNode& root, int min_el, int max_el,
                                   const PageRps* source_rps) {
  std::vector<Page> pages;
  for (const DomNode* sub : subpage_roots(root, min_el, max_el)) {
    DomNode copy = *sub;
    pages.push_back(build_page(copy, source_rps));
  }
  return pages;
}

Page clean_subpage(const Page& page, const std::vector<std::string>& allowed) {
  DomNode tree = parse_html(page.source_html);
  clean_tree(tree, allowed);
  return build_page(tree, page.rps ? &*page.rps : nullptr);
}

Page normalize_layout(const Page& page) {
  if (!page.rps.has_value()) {
    throw MissingLayoutError("page carries no rendering parameters");
  }
  Page out = page;
  PageRps& rps = *out.rps;

  int min_left = -1;
  int min_top = -1;
  for (const Element& el : out.elements) {
    const auto it = rps.find(el.id);
    if (it == rps.end()) {
      throw MissingLayoutError("element ele" + std::to_string(el.id) +
                               " has no rendering parameters");
    }
    const RpVector& v = it->second;
    for (RpName p : {RpName::kLeft, RpName::kTop, RpName::kWidth, RpName::kHeight}) {
      if (v[p] == kPadToken) {
        throw MissingLayoutError("element ele" + std::to_string(el.id) +
                                 " lacks a concrete " + param_name(p));
      }
    }
    if (min_left < 0 || v[RpName::kLeft] < min_left) min_left = v[RpName::kLeft];
    if (min_top < 0 || v[RpName::kTop] < min_top) min_top = v[RpName::kTop];
  }
  if (min_left < 0) return out;  // no elements

  for (auto& [id, v] : rps) {
    v[RpName::kLeft] -= min_left;
    v[RpName::kTop] -= min_top;
  }
  return out;
}

std::string page_to_json(const Page& page) {
  nlohmann::ordered_json root;
  nlohmann::ordered_json elements = nlohmann::ordered_json::array();
  for (const Element& el : page.elements) {
    nlohmann::ordered_json e;
    e["id"] = el.id;
    e["tag"] = el.tag;
    e["xpath"] = el.xpath;
    e["char_count"] = el.char_count;
    e["depth"] = el.depth;
    if (el.parent_id.has_value()) {
      e["parent_id"] = *el.parent_id;
    } else {
      e["parent_id"] = nullptr;
    }
    e["text"] = el.text;
    elements.push_back(std::move(e));
  }
  root["elements"] = std::move(elements);
  if (page.rps.has_value()) {
    root["rps"] = rps_to_ordered_json(*page.rps);
  } else {
    root["rps"] = nullptr;
  }
  return root.dump(2);
}

Page page_from_json(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("page-json: ") + e.what());
  }
  if (!root.is_object() || !root.contains("elements") ||
      !root["elements"].is_array()) {
    throw ParseError("page-json: missing \"elements\" array");
  }
  Page page;
  int expected_id = 0;
  for (const auto& e : root["elements"]) {
    Element el;
    try {
      el.id = e.at("id").get<int>();
      el.tag = e.at("tag").get<std::string>();
      el.xpath = e.at("xpath").get<std::string>();
      el.char_count = e.at("char_count").get<int>();
      el.depth = e.at("depth").get<int>();
      if (!e.at("parent_id").is_null()) el.parent_id = e.at("parent_id").get<int>();
      if (e.contains("text")) el.text = e.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("page-json: bad element record: ") + ex.what());
    }
    if (el.id != ++expected_id) {
      throw ParseError("page-json: element ids must be consecutive from 1");
    }
    page.elements.push_back(std::move(el));
  }
  if (root.contains("rps") && !root["rps"].is_null()) {
    page.rps = from_json(root["rps"].dump());
  }
  return page;
}

}  // namespace webrpg
