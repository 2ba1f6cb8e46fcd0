#include "phyrm/params.hpp"

#include "phyrm/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace phyrm {

using nlohmann::json;

uint64_t fnv1a64_str(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

ParamBlock& ModelParams::ensure(const std::string& name, const std::vector<int>& shape,
                                int fan_in) {
  auto it = blocks_.find(name);
  int64_t count = 1;
  for (int d : shape) count *= d;
  if (it != blocks_.end()) {
    if (it->second.shape != shape)
      throw std::invalid_argument("parameter shape mismatch: " + name);
    return it->second;
  }
  ParamBlock blk;
  blk.shape = shape;
  blk.value.resize(count);
  blk.grad.assign(count, 0.0);
  const double bound = fan_in > 0 ? std::sqrt(1.0 / fan_in) : 0.0;
  Rng rng(derive_seed(init_seed_, {seedtag::kParamInit, fnv1a64_str(name)}));
  for (double& v : blk.value) v = rng.uniform(-bound, bound);
  return blocks_.emplace(name, std::move(blk)).first->second;
}

ParamBlock& ModelParams::get(const std::string& name) {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

const ParamBlock& ModelParams::get(const std::string& name) const {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

void ModelParams::zero_grads() {
  for (auto& [name, blk] : blocks_) std::fill(blk.grad.begin(), blk.grad.end(), 0.0);
}

int64_t ModelParams::total_size() const {
  int64_t s = 0;
  for (const auto& [name, blk] : blocks_) s += blk.size();
  return s;
}

namespace {

void write_block_file(const ParamBlock& blk, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write("PHRB", 4);
  const uint32_t count = static_cast<uint32_t>(blk.value.size());
  unsigned char hdr[4] = {static_cast<unsigned char>(count & 0xff),
                          static_cast<unsigned char>((count >> 8) & 0xff),
                          static_cast<unsigned char>((count >> 16) & 0xff),
                          static_cast<unsigned char>((count >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(hdr), 4);
  for (double d : blk.value) {
    const float f = static_cast<float>(d);
    uint32_t u;
    std::memcpy(&u, &f, 4);
    unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                          static_cast<unsigned char>((u >> 8) & 0xff),
                          static_cast<unsigned char>((u >> 16) & 0xff),
                          static_cast<unsigned char>((u >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void read_block_file(ParamBlock& blk, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PHRB", 4) != 0)
    throw std::runtime_error("bad block magic: " + path.string());
  unsigned char hdr[4];
  is.read(reinterpret_cast<char*>(hdr), 4);
  const uint32_t count = static_cast<uint32_t>(hdr[0]) | (static_cast<uint32_t>(hdr[1]) << 8) |
                         (static_cast<uint32_t>(hdr[2]) << 16) | (static_cast<uint32_t>(hdr[3]) << 24);
  if (count != blk.value.size()) throw std::runtime_error("block size mismatch: " + path.string());
  for (double& d : blk.value) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("truncated block file: " + path.string());
    const uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                       (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    d = f;
  }
}

}  // namespace

void ModelParams::save_checkpoint(const std::filesystem::path& dir, int64_t step,
                                  const json& extra) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = 1;
  manifest["step"] = step;
  manifest["init_seed"] = init_seed_;
  if (!extra.is_null() && !extra.empty()) manifest["extra"] = extra;
  manifest["blocks"] = json::array();

  int idx = 0;
  for (const auto& [name, blk] : blocks_) {
    char fname[32];
    std::snprintf(fname, sizeof fname, "block_%04d.f32b", idx++);
    write_block_file(blk, dir / fname);
    manifest["blocks"].push_back(json{{"name", name}, {"shape", blk.shape}, {"file", fname}});
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("cannot open for writing: " + (dir / "manifest.json").string());
  os << manifest.dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed: " + (dir / "manifest.json").string());
}

ModelParams ModelParams::load_checkpoint(const std::filesystem::path& dir, int64_t* step_out,
                                         json* extra_out) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("cannot open: " + (dir / "manifest.json").string());
  json manifest = json::parse(is);

  ModelParams params(manifest.value("init_seed", uint64_t{0}));
  if (step_out) *step_out = manifest.at("step").get<int64_t>();
  if (extra_out) *extra_out = manifest.value("extra", json{});

  for (const auto& entry : manifest.at("blocks")) {
    ParamBlock blk;
    blk.shape = entry.at("shape").get<std::vector<int>>();
    int64_t count = 1;
    for (int d : blk.shape) count *= d;
    blk.value.resize(count);
    blk.grad.assign(count, 0.0);
    read_block_file(blk, dir / entry.at("file").get<std::string>());
    params.blocks_.emplace(entry.at("name").get<std::string>(), std::move(blk));
  }
  return params;
}

}  // namespace phyrm
