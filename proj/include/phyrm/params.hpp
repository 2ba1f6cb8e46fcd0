// Named parameter blocks with paired gradient accumulators, plus the
// checkpoint format: a JSON manifest and one flat little-endian f32 array
// file per block.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace phyrm {

struct ParamBlock {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  int64_t size() const { return static_cast<int64_t>(value.size()); }
};

class ModelParams {
 public:
  explicit ModelParams(uint64_t init_seed = 0) : init_seed_(init_seed) {}

  // Creates the block on first use, initialized uniform +-sqrt(1/fan_in)
  // from a stream derived from (init_seed, name) so results do not depend
  // on creation order. Re-requests validate the shape.
  ParamBlock& ensure(const std::string& name, const std::vector<int>& shape, int fan_in);

  bool has(const std::string& name) const { return blocks_.count(name) != 0; }
  ParamBlock& get(const std::string& name);
  const ParamBlock& get(const std::string& name) const;

  std::map<std::string, ParamBlock>& blocks() { return blocks_; }
  const std::map<std::string, ParamBlock>& blocks() const { return blocks_; }

  void zero_grads();
  int64_t total_size() const;
  uint64_t init_seed() const { return init_seed_; }

  // dir/manifest.json + dir/block_XXXX.f32b (magic "PHRB", u32 count,
  // count little-endian f32 values).
  void save_checkpoint(const std::filesystem::path& dir, int64_t step,
                       const nlohmann::json& extra = {}) const;
  static ModelParams load_checkpoint(const std::filesystem::path& dir, int64_t* step_out = nullptr,
                                     nlohmann::json* extra_out = nullptr);

 private:
  uint64_t init_seed_;
  std::map<std::string, ParamBlock> blocks_;
};

uint64_t fnv1a64_str(const std::string& s);

}  // namespace phyrm
