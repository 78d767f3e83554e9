#include "webrpg/vc_metric.hpp"

#include <map>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "webrpg/errors.hpp"

namespace webrpg {

namespace {

const RpVector& rps_of(const Page& page, int id, bool layout) {
  if (!page.rps.has_value()) {
    const std::string msg = "page carries no rendering parameters";
    if (layout) throw MissingLayoutError(msg);
    throw MissingStyleError(msg);
  }
  const auto it = page.rps->find(id);
  if (it == page.rps->end()) {
    const std::string msg =
        "element ele" + std::to_string(id) + " has no rendering parameters";
    if (layout) throw MissingLayoutError(msg);
    throw MissingStyleError(msg);
  }
  return it->second;
}

int require_token(const RpVector& v, RpName p, int id, bool layout) {
  const RpTokenId t = v[p];
  if (t == kPadToken) {
    const std::string msg = "element ele" + std::to_string(id) +
                            " lacks a concrete " + param_name(p);
    if (layout) throw MissingLayoutError(msg);
    throw MissingStyleError(msg);
  }
  return t;
}

struct Box {
  int left, top, width, height;
};

Box box_of(const Page& page, int id) {
  const RpVector& v = rps_of(page, id, true);
  return {require_token(v, RpName::kLeft, id, true),
          require_token(v, RpName::kTop, id, true),
          require_token(v, RpName::kWidth, id, true),
          require_token(v, RpName::kHeight, id, true)};
}

std::map<int, std::vector<int>> children_of(const Page& page) {
  std::map<int, std::vector<int>> children;
  for (const Element& el : page.elements) {
    if (el.parent_id.has_value()) children[*el.parent_id].push_back(el.id);
  }
  return children;
}

}  // namespace

double vc_color(const Page& page) {
  if (page.elements.empty()) return 0.0;
  std::set<RpTokenId> colors;
  std::set<RpTokenId> backgrounds;
  for (const Element& el : page.elements) {
    const RpVector& v = rps_of(page, el.id, false);
    colors.insert(require_token(v, RpName::kColor, el.id, false));
    backgrounds.insert(require_token(v, RpName::kBackgroundColor, el.id, false));
  }
  const int numerator =
      static_cast<int>(colors.size()) + static_cast<int>(backgrounds.size()) - 2;
  return static_cast<double>(numerator) /
         (2.0 * static_cast<double>(page.elements.size()));
}

double vc_size(const Page& page) {
  const auto children = children_of(page);
  if (children.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [parent, kids] : children) {
    std::set<std::pair<int, int>> sizes;
    for (int id : kids) {
      const Box b = box_of(page, id);
      sizes.insert({b.width, b.height});
    }
    sum += static_cast<double>(sizes.size() - 1) / static_cast<double>(kids.size());
  }
  return sum / static_cast<double>(children.size());
}

double vc_alignment(const Page& page) {
  std::set<int> parents;
  for (const Element& el : page.elements) {
    if (el.parent_id.has_value()) parents.insert(*el.parent_id);
  }
  std::vector<Box> leaves;
  for (const Element& el : page.elements) {
    if (parents.count(el.id) == 0) leaves.push_back(box_of(page, el.id));
  }
  const int n = static_cast<int>(leaves.size());
  if (n < 2) return 0.0;

  long long aligned = 0;  // unordered aligned pairs
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Box& a = leaves[static_cast<size_t>(i)];
      const Box& b = leaves[static_cast<size_t>(j)];
      const bool alg = a.left == b.left || a.top == b.top ||
                       a.left + a.width == b.left + b.width ||
                       a.top + a.height == b.top + b.height;
      if (alg) ++aligned;
    }
  }
  // The formula runs over ordered pairs; ALG is symmetric, hence the 2.
  return 1.0 - static_cast<double>(2 * aligned) /
                   (static_cast<double>(n) * static_cast<double>(n - 1));
}

VcReport vc_total(const Page& page) {
  VcReport report;
  report.vc_color = vc_color(page);
  report.vc_size = vc_size(page);
  report.vc_alg = vc_alignment(page);
  report.vc_total = report.vc_color + report.vc_size + report.vc_alg;
  return report;
}

bool passes_filter(const VcReport& report, double threshold) {
  return report.vc_total >= threshold;
}

std::string vc_report_to_json(const VcReport& report) {
  nlohmann::ordered_json j;
  j["vc_color"] = report.vc_color;
  j["vc_size"] = report.vc_size;
  j["vc_alg"] = report.vc_alg;
  j["vc_total"] = report.vc_total;
  return j.dump(2);
}

}  // namespace webrpg
