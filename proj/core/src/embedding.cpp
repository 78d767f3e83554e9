#include "webrpg/embedding.hpp"

#include <cctype>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>

#include "webrpg/dom.hpp"
#include "webrpg/errors.hpp"

namespace webrpg {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> content_tokens(const Element& element) {
  std::vector<std::string> tokens;
  if (!element.tag.empty()) {
    tokens.push_back(element.tag);
  }
  std::string word;
  for (const char c : element.text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!word.empty()) {
        tokens.push_back(word);
        word.clear();
      }
    } else {
      word.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!word.empty()) {
    tokens.push_back(word);
  }
  return tokens;
}

constexpr int kCharBuckets = 37;

}  // namespace

HashedBagEncoder::HashedBagEncoder(int dim) : dim_(dim) {
  if (dim <= 0) {
    throw BadConfigError("HashedBagEncoder: dimension must be positive");
  }
}

std::vector<nn::real> HashedBagEncoder::encode(const std::string&,
                                               const Element& element) const {
  std::vector<nn::real> out(static_cast<size_t>(dim_), 0.0);
  const auto tokens = content_tokens(element);
  if (tokens.empty()) {
    return out;
  }
  for (const auto& token : tokens) {
    const uint64_t h = fnv1a(token);
    const auto bucket = static_cast<size_t>(h % static_cast<uint64_t>(dim_));
    const nn::real sign = ((h >> 32) & 1u) ? 1.0 : -1.0;
    out[bucket] += sign;
  }
  for (nn::real& v : out) {
    v /= static_cast<nn::real>(tokens.size());
  }
  return out;
}

PrecomputedEncoder::PrecomputedEncoder(int dim) : dim_(dim) {
  if (dim <= 0) {
    throw BadConfigError("PrecomputedEncoder: dimension must be positive");
  }
}

PrecomputedEncoder PrecomputedEncoder::load_jsonl(const std::string& path,
                                                  int dim) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open embedding file: " + path);
  }
  PrecomputedEncoder enc(dim);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("page_id") || !j.contains("element_id") ||
        !j.contains("vector")) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected {page_id, element_id, vector}");
    }
    if (!j["page_id"].is_string() || !j["element_id"].is_number_integer() ||
        !j["vector"].is_array()) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": wrong field types");
    }
    std::vector<nn::real> vec;
    vec.reserve(j["vector"].size());
    for (const auto& v : j["vector"]) {
      if (!v.is_number()) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": vector entries must be numbers");
      }
      vec.push_back(v.get<nn::real>());
    }
    if (static_cast<int>(vec.size()) != dim) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": vector has " +
                       std::to_string(vec.size()) + " entries, expected " +
                       std::to_string(dim));
    }
    enc.put(j["page_id"].get<std::string>(), j["element_id"].get<int>(),
            std::move(vec));
  }
  return enc;
}

void PrecomputedEncoder::put(const std::string& page_id, int element_id,
                             std::vector<nn::real> vector) {
  if (static_cast<int>(vector.size()) != dim_) {
    throw BadConfigError("PrecomputedEncoder: vector width mismatch");
  }
  table_[{page_id, element_id}] = std::move(vector);
}

std::vector<nn::real> PrecomputedEncoder::encode(
    const std::string& page_id, const Element& element) const {
  const auto it = table_.find({page_id, element.id});
  if (it == table_.end()) {
    throw EncoderFailureError("no precomputed embedding for page '" + page_id +
                              "' element " + std::to_string(element.id));
  }
  return it->second;
}

HtmlEmbedder::HtmlEmbedder(EmbedderConfig config, Rng& rng)
    : config_(std::move(config)) {
  if (config_.d <= 0 || config_.d_sem <= 0 || config_.max_depth <= 0 ||
      config_.max_subscript <= 0) {
    throw BadConfigError("HtmlEmbedder: dimensions must be positive");
  }
  if (config_.tag_vocab.empty()) {
    config_.tag_vocab = default_allowed_tags();
  }
  for (const auto& tag : config_.tag_vocab) {
    if (!tag_ids_.emplace(tag, static_cast<int>(tag_ids_.size())).second) {
      throw BadConfigError("HtmlEmbedder: duplicate tag '" + tag + "'");
    }
  }
  const int n_tags = static_cast<int>(tag_ids_.size()) + 1;  // + UNK
  const int n_subs = config_.max_subscript + 1;              // + sentinel

  tag_table_ = params_.add(
      "embed.tag_table", nn::Tensor::create({config_.max_depth * n_tags,
                                             config_.d}));
  sub_table_ = params_.add(
      "embed.sub_table", nn::Tensor::create({config_.max_depth * n_subs,
                                             config_.d}));
  cc_table_ = params_.add("embed.charcount_table",
                          nn::Tensor::create({kCharBuckets, config_.d}));
  p_sem_ = params_.add("embed.proj_sem",
                       nn::Tensor::create({config_.d_sem, config_.d}));
  p_hier_ = params_.add("embed.proj_hier",
                        nn::Tensor::create({config_.d, config_.d}));
  p_charc_ = params_.add("embed.proj_charcount",
                         nn::Tensor::create({config_.d, config_.d}));

  nn::fill_normal(*tag_table_, rng, 0.0, 0.02);
  nn::fill_normal(*sub_table_, rng, 0.0, 0.02);
  nn::fill_normal(*cc_table_, rng, 0.0, 0.02);
  nn::fill_kaiming(*p_sem_, rng, config_.d_sem);
  nn::fill_kaiming(*p_hier_, rng, config_.d);
  nn::fill_kaiming(*p_charc_, rng, config_.d);
}

int HtmlEmbedder::tag_id(const std::string& tag) const {
  const auto it = tag_ids_.find(tag);
  return it == tag_ids_.end() ? static_cast<int>(tag_ids_.size()) : it->second;
}

int HtmlEmbedder::char_bucket(int k) {
  if (k < 0) {
    throw OutOfRangeError("char_bucket: negative count");
  }
  if (k < 32) {
    return k;
  }
  if (k < 64) {
    return 32;
  }
  if (k < 128) {
    return 33;
  }
  if (k < 256) {
    return 34;
  }
  if (k < 512) {
    return 35;
  }
  return 36;
}

nn::TensorPtr HtmlEmbedder::xpath_embed(
    const std::vector<std::string>& xpaths) const {
  const int n_tags = static_cast<int>(tag_ids_.size()) + 1;
  const int n_subs = config_.max_subscript + 1;
  std::vector<std::vector<int>> tag_ids;
  std::vector<std::vector<int>> sub_ids;
  tag_ids.reserve(xpaths.size());
  sub_ids.reserve(xpaths.size());
  for (const auto& xpath : xpaths) {
    const auto steps = parse_xpath(xpath);
    std::vector<int> trow;
    std::vector<int> srow;
    const int depth =
        std::min(static_cast<int>(steps.size()), config_.max_depth);
    for (int level = 0; level < depth; ++level) {
      const auto& step = steps[static_cast<size_t>(level)];
      trow.push_back(level * n_tags + tag_id(step.tag));
      const int sub = step.ordinal >= config_.max_subscript
                          ? config_.max_subscript
                          : step.ordinal;
      srow.push_back(level * n_subs + sub);
    }
    tag_ids.push_back(std::move(trow));
    sub_ids.push_back(std::move(srow));
  }
  return nn::add(nn::lookup_sum(tag_table_, tag_ids),
                 nn::lookup_sum(sub_table_, sub_ids));
}

nn::TensorPtr HtmlEmbedder::charcount_embed(
    const std::vector<int>& counts) const {
  std::vector<int> buckets;
  buckets.reserve(counts.size());
  for (const int k : counts) {
    buckets.push_back(char_bucket(k));
  }
  return nn::embedding_lookup(cc_table_, buckets);
}

nn::TensorPtr HtmlEmbedder::embed(const Page& page,
                                  const SemanticEncoder& encoder,
                                  const std::string& page_id) const {
  if (page.elements.empty()) {
    throw ShapeMismatchError("embed: page has no elements");
  }
  const int s = static_cast<int>(page.elements.size());
  if (encoder.dim() != config_.d_sem) {
    throw BadConfigError("embed: encoder width " +
                         std::to_string(encoder.dim()) +
                         " does not match configured d_sem " +
                         std::to_string(config_.d_sem));
  }

  std::vector<nn::real> sem_values;
  sem_values.reserve(static_cast<size_t>(s) * encoder.dim());
  std::vector<std::string> xpaths;
  std::vector<int> counts;
  xpaths.reserve(page.elements.size());
  counts.reserve(page.elements.size());
  for (const auto& el : page.elements) {
    const auto v = encoder.encode(page_id, el);
    if (static_cast<int>(v.size()) != encoder.dim()) {
      throw EncoderFailureError("encoder returned " +
                                std::to_string(v.size()) +
                                " values, declared " +
                                std::to_string(encoder.dim()));
    }
    sem_values.insert(sem_values.end(), v.begin(), v.end());
    xpaths.push_back(el.xpath);
    counts.push_back(el.char_count);
  }
  auto sem = nn::Tensor::from_values({s, config_.d_sem}, std::move(sem_values));
  auto h = nn::add(nn::matmul(sem, p_sem_),
                   nn::matmul(xpath_embed(xpaths), p_hier_));
  return nn::add(h, nn::matmul(charcount_embed(counts), p_charc_));
}

}  // namespace webrpg
