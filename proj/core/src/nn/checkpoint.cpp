#include "webrpg/nn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "webrpg/errors.hpp"
#include "webrpg/io.hpp"

namespace webrpg::nn {

namespace {

constexpr char kMagic[8] = {'W', 'R', 'P', 'G', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_i64(std::ostream& os, int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
  uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw CheckpointError("truncated checkpoint: " + path);
  }
  return v;
}

int64_t get_i64(std::istream& is, const std::string& path) {
  int64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw CheckpointError("truncated checkpoint: " + path);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<TensorPtr>& tensors,
                     const std::string& config_json) {
  std::set<std::string> seen;
  for (const auto& t : tensors) {
    if (!t) {
      throw CheckpointError("cannot save a null tensor");
    }
    if (t->name.empty()) {
      throw CheckpointError("cannot save an unnamed tensor");
    }
    if (!seen.insert(t->name).second) {
      throw CheckpointError("duplicate tensor name '" + t->name + "'");
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw CheckpointError("cannot open for writing: " + path);
  }
  os.write(kMagic, sizeof kMagic);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(os, static_cast<uint32_t>(t->name.size()));
    os.write(t->name.data(), static_cast<std::streamsize>(t->name.size()));
    put_u32(os, static_cast<uint32_t>(t->shape.size()));
    for (const int d : t->shape) {
      put_i64(os, d);
    }
    static_assert(sizeof(real) == 8, "checkpoint stores 8-byte reals");
    os.write(reinterpret_cast<const char*>(t->value.data()),
             static_cast<std::streamsize>(t->value.size() * sizeof(real)));
  }
  if (!os) {
    throw CheckpointError("write failed: " + path);
  }
  os.close();
  write_text_file(path + ".json", config_json.empty() ? "{}" : config_json);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw CheckpointError("cannot open: " + path);
  }
  char magic[8] = {};
  if (!is.read(magic, sizeof magic) ||
      std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file: " + path);
  }
  const uint32_t version = get_u32(is, path);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version) + ": " + path);
  }
  Checkpoint ckpt;
  const uint32_t count = get_u32(is, path);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(is, path);
    if (name_len > 4096) {
      throw CheckpointError("corrupt tensor name: " + path);
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) {
      throw CheckpointError("truncated checkpoint: " + path);
    }
    const uint32_t ndims = get_u32(is, path);
    if (ndims == 0 || ndims > 8) {
      throw CheckpointError("corrupt tensor shape: " + path);
    }
    std::vector<int> shape;
    long long numel = 1;
    for (uint32_t d = 0; d < ndims; ++d) {
      const int64_t dim = get_i64(is, path);
      if (dim <= 0 || dim > (1LL << 31)) {
        throw CheckpointError("corrupt tensor shape: " + path);
      }
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
      if (numel > (1LL << 31)) {
        throw CheckpointError("corrupt tensor shape: " + path);
      }
    }
    std::vector<real> values(static_cast<size_t>(numel));
    if (!is.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(real)))) {
      throw CheckpointError("truncated checkpoint: " + path);
    }
    auto t = Tensor::from_values(std::move(shape), std::move(values));
    t->name = name;
    if (!ckpt.tensors.emplace(name, std::move(t)).second) {
      throw CheckpointError("duplicate tensor name '" + name + "': " + path);
    }
  }
  const std::string sidecar = path + ".json";
  if (std::filesystem::exists(sidecar)) {
    ckpt.config_json = read_text_file(sidecar);
  }
  return ckpt;
}

void restore_params(const Checkpoint& ckpt,
                    const std::vector<TensorPtr>& params) {
  for (const auto& p : params) {
    const auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) {
      throw CheckpointError("checkpoint is missing tensor '" + p->name + "'");
    }
    if (it->second->shape != p->shape) {
      throw CheckpointError("checkpoint shape mismatch for '" + p->name + "'");
    }
    p->value = it->second->value;
  }
}

}  // namespace webrpg::nn
