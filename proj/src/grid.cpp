#include "phyrm/grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace phyrm {

namespace {

void store_u32_le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t load_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint32_t f32_bits(float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

float bits_f32(uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

Grid2D::Grid2D(int height, int width, double spacing, double fill)
    : h_(height), w_(width), spacing_(spacing),
      v_(static_cast<size_t>(height) * width, fill) {
  if (h_ < 3 || w_ < 3) throw std::invalid_argument("grid too small for stencil");
  if (!(spacing_ > 0.0)) throw std::invalid_argument("grid spacing must be positive");
}

void Grid2D::check_finite(const std::string& what) const {
  for (double x : v_)
    if (!std::isfinite(x)) throw std::runtime_error(what + ": non-finite grid value");
}

BinaryMask::BinaryMask(int height, int width, bool fill)
    : h_(height), w_(width),
      bits_(static_cast<size_t>(height) * width, fill ? 1 : 0) {
  if (h_ < 1 || w_ < 1) throw std::invalid_argument("mask dimensions must be positive");
}

int BinaryMask::count() const {
  int n = 0;
  for (uint8_t b : bits_) n += b;
  return n;
}

bool BinaryMask::disjoint_with(const BinaryMask& o) const {
  if (h_ != o.h_ || w_ != o.w_) throw std::invalid_argument("mask dimension mismatch");
  for (size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && o.bits_[i]) return false;
  return true;
}

void Scene::validate() const {
  if (transmitters.empty()) throw std::invalid_argument("scene has no transmitters");
  if (!(spacing > 0.0)) throw std::invalid_argument("scene spacing must be positive");
  if (vehicles) {
    if (vehicles->height() != buildings.height() || vehicles->width() != buildings.width())
      throw std::invalid_argument("vehicle mask dimension mismatch");
    if (!vehicles->disjoint_with(buildings))
      throw std::invalid_argument("vehicle mask overlaps buildings");
  }
  for (const auto& tx : transmitters) {
    if (!(tx.x >= 0.0 && tx.x < width() && tx.y >= 0.0 && tx.y < height()))
      throw std::invalid_argument("transmitter outside grid");
    if (!(tx.exponent > 0.0)) throw std::invalid_argument("transmitter exponent must be positive");
    auto [i, j] = transmitter_pixel(tx, height(), width());
    if (buildings.get(i, j)) throw std::invalid_argument("transmitter inside building");
  }
}

void DbRange::validate() const {
  if (!(floor_db < ceiling_db)) throw std::invalid_argument("dB range floor must lie below ceiling");
}

double normalize_db(double power_db, const DbRange& range) {
  range.validate();
  if (!std::isfinite(power_db)) throw std::invalid_argument("non-finite dB value");
  const double v = (power_db - range.floor_db) / (range.ceiling_db - range.floor_db);
  return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

double denormalize(double unit_value, const DbRange& range) {
  range.validate();
  return range.floor_db + unit_value * (range.ceiling_db - range.floor_db);
}

std::pair<int, int> transmitter_pixel(const Transmitter& tx, int height, int width) {
  int j = static_cast<int>(std::lround(tx.x));
  int i = static_cast<int>(std::lround(tx.y));
  if (j < 0) j = 0;
  if (i < 0) i = 0;
  if (j >= width) j = width - 1;
  if (i >= height) i = height - 1;
  return {i, j};
}

void write_grid_f32(const Grid2D& g, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write("PHRM", 4);
  store_u32_le(os, static_cast<uint32_t>(g.height()));
  store_u32_le(os, static_cast<uint32_t>(g.width()));
  store_u32_le(os, f32_bits(static_cast<float>(g.spacing())));
  for (double v : g.values()) store_u32_le(os, f32_bits(static_cast<float>(v)));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Grid2D read_grid_f32(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "PHRM", 4) != 0)
    throw std::runtime_error("bad grid magic: " + path.string());
  const uint32_t h = load_u32_le(is);
  const uint32_t w = load_u32_le(is);
  const float spacing = bits_f32(load_u32_le(is));
  if (!is || h < 3 || w < 3 || h > (1u << 20) || w > (1u << 20))
    throw std::runtime_error("bad grid header: " + path.string());
  Grid2D g(static_cast<int>(h), static_cast<int>(w), spacing);
  for (double& v : g.values()) {
    v = bits_f32(load_u32_le(is));
    if (!is) throw std::runtime_error("truncated grid file: " + path.string());
  }
  g.check_finite(path.string());
  return g;
}

void write_mask_pgm(const BinaryMask& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "P5\n" << m.width() << " " << m.height() << "\n255\n";
  for (uint8_t b : m.bits()) os.put(b ? static_cast<char>(255) : static_cast<char>(0));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

BinaryMask read_mask_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (!is || magic != "P5" || maxval != 255 || w < 1 || h < 1)
    throw std::runtime_error("bad pgm header: " + path.string());
  is.get();  // single whitespace after maxval
  BinaryMask m(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const int c = is.get();
      if (c == EOF) throw std::runtime_error("truncated pgm file: " + path.string());
      m.set(i, j, c != 0);
    }
  return m;
}

void quantize_f32(Grid2D& g) {
  for (double& v : g.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace phyrm
