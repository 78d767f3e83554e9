#include "webrpg/dom.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "webrpg/errors.hpp"

namespace webrpg {

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_void_tag(const std::string& tag) {
  static const std::set<std::string> kVoid = {
      "area", "base", "br",    "col",  "embed",  "hr",  "img",
      "input", "link", "meta", "param", "source", "track", "wbr"};
  return kVoid.count(tag) > 0;
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp <= 0x7F) {
    out.push_back(static_cast<char>(cp));
  } else if (cp <= 0x7FF) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp <= 0xFFFF) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp <= 0x10FFFF) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes the handful of named entities real pages lean on plus numeric
// references; unknown entities pass through verbatim.
std::string decode_entities(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    if (in[i] != '&') {
      out.push_back(in[i++]);
      continue;
    }
    size_t semi = in.find(';', i + 1);
    if (semi == std::string::npos || semi - i > 10) {
      out.push_back(in[i++]);
      continue;
    }
    const std::string name = in.substr(i + 1, semi - i - 1);
    if (name == "amp") out.push_back('&');
    else if (name == "lt") out.push_back('<');
    else if (name == "gt") out.push_back('>');
    else if (name == "quot") out.push_back('"');
    else if (name == "apos") out.push_back('\'');
    else if (name == "nbsp") append_utf8(out, 0xA0);
    else if (name.size() > 1 && name[0] == '#') {
      unsigned long cp = 0;
      try {
        cp = (name[1] == 'x' || name[1] == 'X')
                 ? std::stoul(name.substr(2), nullptr, 16)
                 : std::stoul(name.substr(1), nullptr, 10);
      } catch (const std::exception&) {
        out.append(in, i, semi - i + 1);
        i = semi + 1;
        continue;
      }
      append_utf8(out, cp);
    } else {
      out.append(in, i, semi - i + 1);
      i = semi + 1;
      continue;
    }
    i = semi + 1;
  }
  return out;
}

std::string escape_text(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out.push_back(c);
  }
  return out;
}

std::string escape_attr(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '"') out += "&quot;";
    else out.push_back(c);
  }
  return out;
}

bool all_whitespace(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return is_ascii_space(c); });
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  DomNode run() {
    DomNode doc;  // virtual document node, tag empty
    stack_.push_back(&doc);
    while (i_ < s_.size()) step();
    // EOF closes whatever is still open.
    stack_.clear();

    // Count element roots; pure-whitespace top-level text was dropped while
    // parsing, so doc.text_chunks holds real stray text only.
    if (doc.children.empty()) throw HtmlParseError("input holds no elements");
    if (doc.children.size() == 1 && doc.text_chunks.empty()) {
      return std::move(doc.children.front());
    }
    doc.tag = "html";  // synthetic wrapper for fragments with several roots
    return doc;
  }

 private:
  void step() {
    const size_t lt = s_.find('<', i_);
    if (lt == std::string::npos) {
      emit_text(s_.substr(i_));
      i_ = s_.size();
      return;
    }
    if (lt > i_) emit_text(s_.substr(i_, lt - i_));
    i_ = lt;

    if (starts_with("<!--")) {
      const size_t end = s_.find("-->", i_ + 4);
      i_ = (end == std::string::npos) ? s_.size() : end + 3;
      return;
    }
    if (starts_with("<!") || starts_with("<?")) {
      const size_t end = s_.find('>', i_);
      i_ = (end == std::string::npos) ? s_.size() : end + 1;
      return;
    }
    if (starts_with("</")) {
      close_tag();
      return;
    }
    if (i_ + 1 < s_.size() &&
        std::isalpha(static_cast<unsigned char>(s_[i_ + 1])) != 0) {
      open_tag();
      return;
    }
    // A lone '<' that introduces no markup is literal text.
    emit_text("<");
    ++i_;
  }

  bool starts_with(const char* prefix) const {
    return s_.compare(i_, std::char_traits<char>::length(prefix), prefix) == 0;
  }

  void emit_text(const std::string& raw) {
    if (raw.empty() || all_whitespace(raw)) return;
    stack_.back()->add_text(decode_entities(raw));
  }

  std::string read_name() {
    std::string name;
    while (i_ < s_.size()) {
      const char c = s_[i_];
      if (std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' ||
          c == ':') {
        name.push_back(c);
        ++i_;
      } else {
        break;
      }
    }
    return to_lower(name);
  }

  void skip_space() {
    while (i_ < s_.size() && is_ascii_space(s_[i_])) ++i_;
  }

  void open_tag() {
    ++i_;  // '<'
    const std::string tag = read_name();
    DomNode node;
    node.tag = tag;

    bool self_closed = false;
    while (i_ < s_.size()) {
      skip_space();
      if (i_ >= s_.size()) break;
      if (s_[i_] == '>') {
        ++i_;
        break;
      }
      if (s_[i_] == '/' && i_ + 1 < s_.size() && s_[i_ + 1] == '>') {
        self_closed = true;
        i_ += 2;
        break;
      }
      // attribute
      std::string name = read_name();
      if (name.empty()) {
        ++i_;  // unparseable character inside the tag; skip it
        continue;
      }
      std::string value;
      skip_space();
      if (i_ < s_.size() && s_[i_] == '=') {
        ++i_;
        skip_space();
        if (i_ < s_.size() && (s_[i_] == '"' || s_[i_] == '\'')) {
          const char quote = s_[i_++];
          const size_t end = s_.find(quote, i_);
          value = s_.substr(i_, (end == std::string::npos ? s_.size() : end) - i_);
          i_ = (end == std::string::npos) ? s_.size() : end + 1;
        } else {
          while (i_ < s_.size() && !is_ascii_space(s_[i_]) && s_[i_] != '>' &&
                 s_[i_] != '/') {
            value.push_back(s_[i_++]);
          }
        }
        value = decode_entities(value);
      }
      node.attrs.emplace_back(name, value);
    }

    if (tag == "script" || tag == "style") {
      skip_raw_content(tag);
      return;  // dropped entirely
    }
    DomNode& placed = stack_.back()->add_child(std::move(node));
    if (!self_closed && !is_void_tag(tag)) stack_.push_back(&placed);
  }

  // Scans past raw-text content to the matching close tag, case-insensitive.
  void skip_raw_content(const std::string& tag) {
    const std::string needle = "</" + tag;
    size_t pos = i_;
    while (pos < s_.size()) {
      const size_t cand = s_.find('<', pos);
      if (cand == std::string::npos) {
        i_ = s_.size();
        return;
      }
      if (to_lower(s_.substr(cand, needle.size())) == needle) {
        const size_t end = s_.find('>', cand);
        i_ = (end == std::string::npos) ? s_.size() : end + 1;
        return;
      }
      pos = cand + 1;
    }
    i_ = s_.size();
  }

  void close_tag() {
    i_ += 2;  // '</'
    const std::string tag = read_name();
    const size_t end = s_.find('>', i_);
    i_ = (end == std::string::npos) ? s_.size() : end + 1;
    // Pop to the matching open element; a close with no match is stray and
    // ignored. Index 0 is the virtual document node and never pops.
    for (size_t depth = stack_.size(); depth > 1; --depth) {
      if (stack_[depth - 1]->tag == tag) {
        stack_.resize(depth - 1);
        return;
      }
    }
  }

  const std::string& s_;
  size_t i_ = 0;
  std::vector<DomNode*> stack_;
};

void serialize_node(const DomNode& node, std::string& out) {
  const bool synthetic = node.tag.empty();
  if (!synthetic) {
    out.push_back('<');
    out += node.tag;
    for (const auto& [name, value] : node.attrs) {
      out.push_back(' ');
      out += name;
      if (!value.empty()) {
        out += "=\"";
        out += escape_attr(value);
        out.push_back('"');
      }
    }
    out.push_back('>');
    if (is_void_tag(node.tag) && node.children.empty() && node.text_chunks.empty()) {
      return;
    }
  }
  for (const auto& slot : node.order) {
    if (slot.is_text) {
      out += escape_text(node.text_chunks[static_cast<size_t>(slot.index)]);
    } else {
      serialize_node(node.children[static_cast<size_t>(slot.index)], out);
    }
  }
  if (!synthetic) {
    out += "</";
    out += node.tag;
    out.push_back('>');
  }
}

bool is_hidden(const DomNode& node) { return node.attr("hidden").has_value(); }

bool is_invisible_tag(const std::string& tag) {
  return tag == "head" || tag == "script" || tag == "style";
}

// Rebuilds a node, recursively dropping invisible subtrees.
DomNode strip_invisible(const DomNode& node) {
  DomNode out;
  out.tag = node.tag;
  out.attrs = node.attrs;
  for (const auto& slot : node.order) {
    if (slot.is_text) {
      out.add_text(node.text_chunks[static_cast<size_t>(slot.index)]);
    } else {
      const DomNode& child = node.children[static_cast<size_t>(slot.index)];
      if (is_invisible_tag(child.tag) || is_hidden(child)) continue;
      out.add_child(strip_invisible(child));
    }
  }
  return out;
}

DomNode clean_node(const DomNode& node, const std::set<std::string>& allowed);

// Appends `child`'s cleaned content: the child itself when allowed, its
// promoted content otherwise, nothing when hidden.
void clean_into(DomNode& parent, const DomNode& child,
                const std::set<std::string>& allowed) {
  if (is_hidden(child)) return;
  DomNode cleaned = clean_node(child, allowed);
  if (allowed.count(child.tag) > 0) {
    parent.add_child(std::move(cleaned));
    return;
  }
  // Promote: splice the cleaned node's content into the parent in order.
  for (const auto& slot : cleaned.order) {
    if (slot.is_text) {
      parent.add_text(std::move(cleaned.text_chunks[static_cast<size_t>(slot.index)]));
    } else {
      parent.add_child(std::move(cleaned.children[static_cast<size_t>(slot.index)]));
    }
  }
}

DomNode clean_node(const DomNode& node, const std::set<std::string>& allowed) {
  DomNode out;
  out.tag = node.tag;
  out.attrs = node.attrs;
  for (const auto& slot : node.order) {
    if (slot.is_text) {
      out.add_text(node.text_chunks[static_cast<size_t>(slot.index)]);
    } else {
      clean_into(out, node.children[static_cast<size_t>(slot.index)], allowed);
    }
  }
  return out;
}

bool find_path(const DomNode& current, const DomNode& target,
               std::vector<const DomNode*>& path) {
  path.push_back(&current);
  if (&current == &target) return true;
  for (const DomNode& child : current.children) {
    if (find_path(child, target, path)) return true;
  }
  path.pop_back();
  return false;
}

void collect_subpage_roots(const DomNode& node, int min_el, int max_el,
                           std::vector<const DomNode*>& out) {
  const int size = node.subtree_size();
  if (size < min_el) return;  // descendants are smaller still
  if (size <= max_el) {
    out.push_back(&node);
    return;
  }
  for (const DomNode& child : node.children) {
    collect_subpage_roots(child, min_el, max_el, out);
  }
}

}  // namespace

std::vector<XPathStep> parse_xpath(const std::string& xpath) {
  if (xpath.empty() || xpath[0] != '/') {
    throw XPathError("xpath must start with '/': '" + xpath + "'");
  }
  std::vector<XPathStep> steps;
  size_t i = 1;
  while (i < xpath.size()) {
    size_t next = xpath.find('/', i);
    if (next == std::string::npos) next = xpath.size();
    const std::string seg = xpath.substr(i, next - i);
    const size_t lb = seg.find('[');
    if (lb == std::string::npos || seg.back() != ']' || lb == 0) {
      throw XPathError("malformed xpath step '" + seg + "'");
    }
    XPathStep step;
    step.tag = seg.substr(0, lb);
    try {
      step.ordinal = std::stoi(seg.substr(lb + 1, seg.size() - lb - 2));
    } catch (const std::exception&) {
      throw XPathError("malformed xpath ordinal in '" + seg + "'");
    }
    if (step.ordinal < 1) throw XPathError("xpath ordinals are 1-based: '" + seg + "'");
    steps.push_back(std::move(step));
    i = next + 1;
  }
  if (steps.empty()) throw XPathError("empty xpath");
  return steps;
}

std::optional<std::string> DomNode::attr(const std::string& name) const {
  for (const auto& [k, v] : attrs) {
    if (k == name) return v;
  }
  return std::nullopt;
}

void DomNode::set_attr(const std::string& name, const std::string& value) {
  for (auto& [k, v] : attrs) {
    if (k == name) {
      v = value;
      return;
    }
  }
  attrs.emplace_back(name, value);
}

void DomNode::add_text(std::string text) {
  order.push_back({true, static_cast<int>(text_chunks.size())});
  text_chunks.push_back(std::move(text));
}

DomNode& DomNode::add_child(DomNode child) {
  order.push_back({false, static_cast<int>(children.size())});
  children.push_back(std::move(child));
  return children.back();
}

int DomNode::subtree_size() const {
  int n = 1;
  for (const DomNode& c : children) n += c.subtree_size();
  return n;
}

DomNode parse_html(const std::string& text) {
  if (text.find('\0') != std::string::npos) {
    throw HtmlParseError("input is not text (NUL byte found)");
  }
  if (all_whitespace(text)) throw HtmlParseError("input is empty");
  return Parser(text).run();
}

std::string serialize_html(const DomNode& root) {
  std::string out;
  serialize_node(root, out);
  return out;
}

void drop_invisible(DomNode& root) { root = strip_invisible(root); }

std::string direct_text(const DomNode& node) {
  std::string joined;
  for (const std::string& chunk : node.text_chunks) {
    if (!joined.empty()) joined.push_back(' ');
    joined += chunk;
  }
  // Collapse ASCII whitespace runs and trim the ends.
  std::string out;
  out.reserve(joined.size());
  bool pending_space = false;
  for (char c : joined) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

int char_count(const DomNode& node) {
  const std::string text = direct_text(node);
  int count = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++count;  // count UTF-8 lead bytes
  }
  return count;
}

std::string compute_xpath(const DomNode& root, const DomNode& node) {
  std::vector<const DomNode*> path;
  if (!find_path(root, node, path)) {
    throw XPathError("node is not part of the given tree");
  }
  std::string xpath;
  for (size_t d = 0; d < path.size(); ++d) {
    int ordinal = 1;
    if (d > 0) {
      for (const DomNode& sibling : path[d - 1]->children) {
        if (&sibling == path[d]) break;
        if (sibling.tag == path[d]->tag) ++ordinal;
      }
    }
    xpath += "/" + path[d]->tag + "[" + std::to_string(ordinal) + "]";
  }
  return xpath;
}

const DomNode* resolve_xpath(const DomNode& root, const std::string& xpath) {
  const auto steps = parse_xpath(xpath);
  if (steps[0].tag != root.tag || steps[0].ordinal != 1) {
    throw XPathError("xpath root step does not match: '" + xpath + "'");
  }
  const DomNode* current = &root;
  for (size_t d = 1; d < steps.size(); ++d) {
    const auto& step = steps[d];
    const DomNode* next = nullptr;
    int seen = 0;
    for (const DomNode& child : current->children) {
      if (child.tag != step.tag) continue;
      if (++seen == step.ordinal) {
        next = &child;
        break;
      }
    }
    if (next == nullptr) {
      throw XPathError("xpath does not resolve: '" + xpath + "'");
    }
    current = next;
  }
  return current;
}

std::vector<const DomNode*> subpage_roots(const DomNode& root, int min_el,
                                          int max_el) {
  if (min_el < 1 || max_el < min_el) {
    throw BadConfigError("subpage bounds must satisfy 1 <= min <= max");
  }
  std::vector<const DomNode*> out;
  collect_subpage_roots(root, min_el, max_el, out);
  return out;
}

const std::vector<std::string>& default_allowed_tags() {
  static const std::vector<std::string> kTags = {
      "html", "body", "div",  "span", "p",    "a",       "ul",     "ol",
      "li",   "dl",   "dt",   "dd",   "table", "thead",  "tbody",  "tr",
      "td",   "th",   "h1",   "h2",   "h3",   "h4",      "h5",     "h6",
      "img",  "button", "input", "textarea", "select", "option", "label",
      "form", "header", "footer", "nav", "main", "section", "article",
      "aside", "strong", "em",  "b",   "i",    "small",   "br",     "hr",
  };
  return kTags;
}

void clean_tree(DomNode& root, const std::vector<std::string>& allowed) {
  const std::set<std::string> allow(allowed.begin(), allowed.end());
  // The root is kept regardless of its tag; only its descendants are subject
  // to removal/promotion.
  root = clean_node(root, allow);
}

}  // namespace webrpg
