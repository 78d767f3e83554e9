#pragma once

#include <string>

#include "webrpg/page.hpp"

namespace webrpg {

// Visual-complexity scores used to filter low-information pages out of the
// training corpus. vc_total = vc_color + vc_size + vc_alg.
struct VcReport {
  double vc_color = 0.0;
  double vc_size = 0.0;
  double vc_alg = 0.0;
  double vc_total = 0.0;
};

// Color richness: (C_c + C_bg - 2) / (2N) where C_c and C_bg count distinct
// color / background-color tokens over the N elements. Throws
// MissingStyleError when any element lacks a concrete color token.
double vc_color(const Page& page);

// Size diversity: mean over parent elements of (DS_i - 1) / NC_i, where
// NC_i is the child count and DS_i the number of distinct (width, height)
// pairs among the children. 0 when the page has no parent elements.
double vc_size(const Page& page);

// Misalignment: 1 - (1 / (N_leaf (N_leaf - 1))) * sum over ordered leaf
// pairs of ALG_ij, where ALG_ij = 1 iff the pair shares the left, top,
// right, or bottom edge exactly. 0 when fewer than two leaves.
double vc_alignment(const Page& page);

VcReport vc_total(const Page& page);

// Pages at or above the threshold are kept.
bool passes_filter(const VcReport& report, double threshold = 0.1);

// {"vc_color":..., "vc_size":..., "vc_alg":..., "vc_total":...}
std::string vc_report_to_json(const VcReport& report);

}  // namespace webrpg
