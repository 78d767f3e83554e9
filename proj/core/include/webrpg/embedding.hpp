#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "webrpg/nn/ops.hpp"
#include "webrpg/nn/tensor.hpp"
#include "webrpg/page.hpp"
#include "webrpg/rng.hpp"

namespace webrpg {

// Pluggable source of the per-element semantic vector. Implementations must
// be deterministic for fixed inputs.
class SemanticEncoder {
 public:
  virtual ~SemanticEncoder() = default;
  virtual int dim() const = 0;
  virtual std::vector<nn::real> encode(const std::string& page_id,
                                       const Element& element) const = 0;
};

// Default encoder: a deterministic hashed bag of tokens (the element's tag
// plus its lowercased text words), mean-pooled. Elements without tokens map
// to the zero vector.
class HashedBagEncoder : public SemanticEncoder {
 public:
  explicit HashedBagEncoder(int dim = 128);
  int dim() const override { return dim_; }
  std::vector<nn::real> encode(const std::string& page_id,
                               const Element& element) const override;

 private:
  int dim_;
};

// Looks up vectors exported offline (e.g. from a large language-model
// encoder). Misses are an error: mixing precomputed and fallback vectors
// would silently skew every downstream model.
class PrecomputedEncoder : public SemanticEncoder {
 public:
  explicit PrecomputedEncoder(int dim);

  // JSON-lines, one {"page_id": ..., "element_id": ..., "vector": [...]} per
  // line. ParseError on malformed lines or wrong vector width.
  static PrecomputedEncoder load_jsonl(const std::string& path, int dim = 128);

  void put(const std::string& page_id, int element_id,
           std::vector<nn::real> vector);
  int dim() const override { return dim_; }
  std::vector<nn::real> encode(const std::string& page_id,
                               const Element& element) const override;
  size_t size() const { return table_.size(); }

 private:
  int dim_;
  std::map<std::pair<std::string, int>, std::vector<nn::real>> table_;
};

struct EmbedderConfig {
  int d = 128;      // output width (model hidden size)
  int d_sem = 128;  // semantic encoder width
  int max_depth = 50;      // xpath levels beyond this are truncated
  int max_subscript = 256; // ordinals at or above this share a sentinel row
  std::vector<std::string> tag_vocab;  // empty -> default_allowed_tags()
};

// Produces one embedding row per element by summing three learned linear
// projections: semantic content, xpath hierarchy, and character count.
class HtmlEmbedder {
 public:
  HtmlEmbedder(EmbedderConfig config, Rng& rng);

  // [S, d], rows aligned with page.elements (pre-order ids).
  nn::TensorPtr embed(const Page& page, const SemanticEncoder& encoder,
                      const std::string& page_id = "") const;

  // Single-source lookups before projection, exposed for inspection.
  nn::TensorPtr xpath_embed(const std::vector<std::string>& xpaths) const;
  nn::TensorPtr charcount_embed(const std::vector<int>& counts) const;

  // Bucket rule: exact 0-31, then one bucket per doubling up to 512+.
  static int char_bucket(int k);

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const EmbedderConfig& config() const { return config_; }
  int tag_id(const std::string& tag) const;  // unknown tags -> UNK id

 private:
  EmbedderConfig config_;
  nn::ParamSet params_;
  nn::TensorPtr tag_table_;   // [max_depth * (|vocab|+1), d]
  nn::TensorPtr sub_table_;   // [max_depth * (max_subscript+1), d]
  nn::TensorPtr cc_table_;    // [37, d]
  nn::TensorPtr p_sem_;       // [d_sem, d]
  nn::TensorPtr p_hier_;      // [d, d]
  nn::TensorPtr p_charc_;     // [d, d]
  std::map<std::string, int> tag_ids_;
};

}  // namespace webrpg
