// Core spatial types: scalar grids, binary masks, transmitters, scenes,
// and the global dB <-> [0,1] mapping shared by generation and learning.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phyrm {

// H x W scalar field, row-major, uniform spacing h (meters per pixel).
// Kept at 64-bit precision in memory; 32-bit on disk.
class Grid2D {
 public:
  Grid2D(int height, int width, double spacing = 1.0, double fill = 0.0);

  int height() const { return h_; }
  int width() const { return w_; }
  double spacing() const { return spacing_; }

  double& at(int i, int j) { return v_[static_cast<size_t>(i) * w_ + j]; }
  double at(int i, int j) const { return v_[static_cast<size_t>(i) * w_ + j]; }

  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }
  size_t size() const { return v_.size(); }

  // Throws if any value is non-finite.
  void check_finite(const std::string& what) const;

  bool operator==(const Grid2D& o) const = default;

 private:
  int h_, w_;
  double spacing_;
  std::vector<double> v_;
};

class BinaryMask {
 public:
  BinaryMask(int height, int width, bool fill = false);

  int height() const { return h_; }
  int width() const { return w_; }

  void set(int i, int j, bool b) { bits_[static_cast<size_t>(i) * w_ + j] = b ? 1 : 0; }
  bool get(int i, int j) const { return bits_[static_cast<size_t>(i) * w_ + j] != 0; }

  int count() const;
  bool disjoint_with(const BinaryMask& o) const;
  bool intersects(const BinaryMask& o) const { return !disjoint_with(o); }

  const std::vector<uint8_t>& bits() const { return bits_; }

  bool operator==(const BinaryMask& o) const = default;

 private:
  int h_, w_;
  std::vector<uint8_t> bits_;
};

// One transmitter: sub-pixel position in pixel coordinates (x across,
// y down), reference power in dB and path-loss exponent.
struct Transmitter {
  double x = 0.0;
  double y = 0.0;
  double ref_power_db = 23.0;
  double exponent = 2.0;

  bool operator==(const Transmitter& o) const = default;
};

struct Scene {
  BinaryMask buildings;
  std::optional<BinaryMask> vehicles;  // present only for dynamic maps
  std::vector<Transmitter> transmitters;
  double spacing = 1.0;

  int height() const { return buildings.height(); }
  int width() const { return buildings.width(); }

  // Enforces: vehicles disjoint from buildings, at least one transmitter,
  // transmitter centers inside the grid and outside building pixels.
  void validate() const;

  bool operator==(const Scene& o) const = default;
};

// Global affine dB mapping; floor -> 0, ceiling -> 1, clamped outside.
struct DbRange {
  double floor_db = -100.0;
  double ceiling_db = 23.0;

  void validate() const;
  bool operator==(const DbRange& o) const = default;
};

double normalize_db(double power_db, const DbRange& range);
double denormalize(double unit_value, const DbRange& range);

// Rounds a sub-pixel transmitter position to its grid pixel (j = column, i = row).
std::pair<int, int> transmitter_pixel(const Transmitter& tx, int height, int width);

// --- binary file formats -------------------------------------------------
// Grid: 16-byte header (magic "PHRM", u32 H, u32 W, f32 h, little-endian)
// followed by H*W little-endian f32 values, row-major. Extension ".f32g".
// Mask: binary PGM (P5, maxval 255), 0 = false, 255 = true.

void write_grid_f32(const Grid2D& g, const std::filesystem::path& path);
Grid2D read_grid_f32(const std::filesystem::path& path);

void write_mask_pgm(const BinaryMask& m, const std::filesystem::path& path);
BinaryMask read_mask_pgm(const std::filesystem::path& path);

// Quantizes every value through f32 so in-memory grids match their on-disk
// representation bit-for-bit.
void quantize_f32(Grid2D& g);

}  // namespace phyrm
