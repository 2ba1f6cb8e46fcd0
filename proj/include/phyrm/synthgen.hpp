// Synthetic scene and dataset generation with deterministic seeding: the
// whole dataset is a pure function of its configuration.
#pragma once

#include "phyrm/grid.hpp"
#include "phyrm/pathloss.hpp"

#include <cstdint>

namespace phyrm {

struct GenConfig {
  int map_size = 64;
  int n_maps = 40;
  int buildings_min = 6;
  int buildings_max = 18;
  int n_tx_per_map = 2;
  bool drm = false;
  uint64_t seed = 1;
  DbRange db_range{};
  PathlossConfig pathloss{};

  // generator shape parameters
  int building_px_min = 3;
  int building_px_max = 12;
  int vehicles_min = 2;
  int vehicles_max = 6;
  int vehicle_px_min = 1;
  int vehicle_px_max = 4;
  double spacing = 1.0;
  double tx_power_db = 23.0;
  double exponent_lo = 1.8;
  double exponent_hi = 3.5;

  void validate() const;
};

struct DatasetRecord {
  Scene scene;
  Grid2D truth;        // normalized ground truth
  std::string split;   // "train" or "test"

  bool operator==(const DatasetRecord& o) const = default;
};

// Fully determined by (cfg.seed, map_index): axis-aligned rectangular
// buildings (rejection-sampled without overlap), transmitters on free
// pixels, optional vehicle rectangles for dynamic maps.
Scene generate_scene(const GenConfig& cfg, int map_index);

Grid2D render_ground_truth(const Scene& scene, const DbRange& range,
                           const PathlossConfig& cfg = {});

// round(rate * H * W) distinct non-building pixels, uniform, seeded.
BinaryMask sample_observation_mask(const Scene& scene, double rate, uint64_t seed);

// Scenes + truths + 5:2 train/test split, parallel across map indices.
std::vector<DatasetRecord> generate_dataset(const GenConfig& cfg);

struct ManifestSummary {
  int n_records = 0;
  int n_train = 0;
  int n_test = 0;
};

// Layout: dir/manifest.json plus per-record
// scene_XXXX/{buildings.pgm, vehicles.pgm?, tx.json, truth.f32g}.
// The manifest stores a content hash per file; read_dataset verifies them.
ManifestSummary write_dataset(const std::vector<DatasetRecord>& records,
                              const std::filesystem::path& dir,
                              const GenConfig* config_echo = nullptr);

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& dir);

uint64_t fnv1a64_file(const std::filesystem::path& path);

}  // namespace phyrm
