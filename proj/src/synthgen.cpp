#include "phyrm/synthgen.hpp"

#include "phyrm/rng.hpp"
#include "phyrm/threads.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace phyrm {

using nlohmann::json;

void GenConfig::validate() const {
  if (map_size < 16) throw std::invalid_argument("map_size must be at least 16");
  if (n_maps < 1) throw std::invalid_argument("n_maps must be positive");
  if (buildings_min > buildings_max || buildings_min < 0)
    throw std::invalid_argument("bad buildings range");
  if (n_tx_per_map < 1) throw std::invalid_argument("n_tx_per_map must be positive");
  db_range.validate();
}

namespace {

struct Rect {
  int i0, j0, hh, ww;
};

bool mask_free(const BinaryMask& m, const Rect& r) {
  for (int i = r.i0; i < r.i0 + r.hh; ++i)
    for (int j = r.j0; j < r.j0 + r.ww; ++j)
      if (m.get(i, j)) return false;
  return true;
}

void mask_fill(BinaryMask& m, const Rect& r) {
  for (int i = r.i0; i < r.i0 + r.hh; ++i)
    for (int j = r.j0; j < r.j0 + r.ww; ++j) m.set(i, j, true);
}

constexpr int kMaxPlaceAttempts = 1000;

Rect place_rect(Rng& rng, int map, int px_min, int px_max,
                const std::vector<const BinaryMask*>& avoid) {
  for (int attempt = 0; attempt < kMaxPlaceAttempts; ++attempt) {
    Rect r;
    r.hh = static_cast<int>(rng.uniform_int(px_min, px_max));
    r.ww = static_cast<int>(rng.uniform_int(px_min, px_max));
    r.i0 = static_cast<int>(rng.uniform_int(0, map - r.hh));
    r.j0 = static_cast<int>(rng.uniform_int(0, map - r.ww));
    bool ok = true;
    for (const auto* m : avoid)
      if (!mask_free(*m, r)) { ok = false; break; }
    if (ok) return r;
  }
  throw std::runtime_error("scene too dense");
}

}  // namespace

Scene generate_scene(const GenConfig& cfg, int map_index) {
  cfg.validate();
  if (map_index < 0 || map_index >= cfg.n_maps)
    throw std::invalid_argument("map_index out of range");
  Rng rng(derive_seed(cfg.seed, {seedtag::kScene, static_cast<uint64_t>(map_index)}));
  const int n = cfg.map_size;

  Scene scene{BinaryMask(n, n), std::nullopt, {}, cfg.spacing};

  const int n_buildings =
      cfg.buildings_max == 0 ? 0
                             : static_cast<int>(rng.uniform_int(cfg.buildings_min, cfg.buildings_max));
  for (int b = 0; b < n_buildings; ++b) {
    const Rect r = place_rect(rng, n, cfg.building_px_min, cfg.building_px_max,
                              {&scene.buildings});
    mask_fill(scene.buildings, r);
  }

  BinaryMask tx_pixels(n, n);
  for (int t = 0; t < cfg.n_tx_per_map; ++t) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlaceAttempts && !placed; ++attempt) {
      const int i = static_cast<int>(rng.uniform_int(0, n - 1));
      const int j = static_cast<int>(rng.uniform_int(0, n - 1));
      if (scene.buildings.get(i, j) || tx_pixels.get(i, j)) continue;
      tx_pixels.set(i, j, true);
      Transmitter tx;
      tx.x = j;
      tx.y = i;
      tx.ref_power_db = cfg.tx_power_db;
      tx.exponent = rng.uniform(cfg.exponent_lo, cfg.exponent_hi);
      scene.transmitters.push_back(tx);
      placed = true;
    }
    if (!placed) throw std::runtime_error("scene too dense");
  }

  if (cfg.drm) {
    BinaryMask vehicles(n, n);
    const int n_veh = static_cast<int>(rng.uniform_int(cfg.vehicles_min, cfg.vehicles_max));
    for (int v = 0; v < n_veh; ++v) {
      const Rect r = place_rect(rng, n, cfg.vehicle_px_min, cfg.vehicle_px_max,
                                {&scene.buildings, &vehicles, &tx_pixels});
      mask_fill(vehicles, r);
    }
    scene.vehicles = std::move(vehicles);
  }

  scene.validate();
  return scene;
}

Grid2D render_ground_truth(const Scene& scene, const DbRange& range,
                           const PathlossConfig& cfg) {
  return render_pathloss_map(scene, range, cfg);
}

BinaryMask sample_observation_mask(const Scene& scene, double rate, uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("rate must be in (0, 1]");
  const int h = scene.height(), w = scene.width();
  const int want = static_cast<int>(std::llround(rate * h * w));

  std::vector<int> free_px;
  free_px.reserve(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (!scene.buildings.get(i, j)) free_px.push_back(i * w + j);
  if (want > static_cast<int>(free_px.size()))
    throw std::runtime_error("rate unsatisfiable");

  Rng rng(derive_seed(seed, {seedtag::kObsMask}));
  BinaryMask m(h, w);
  for (int s = 0; s < want; ++s) {  // partial Fisher-Yates
    const int r = static_cast<int>(rng.uniform_int(s, static_cast<int64_t>(free_px.size()) - 1));
    std::swap(free_px[s], free_px[r]);
    m.set(free_px[s] / w, free_px[s] % w, true);
  }
  return m;
}

std::vector<DatasetRecord> generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  const int n_train = static_cast<int>(cfg.n_maps * 5 / 7);
  std::vector<DatasetRecord> records;
  records.reserve(cfg.n_maps);
  for (int i = 0; i < cfg.n_maps; ++i)
    records.push_back(DatasetRecord{Scene{BinaryMask(1, 1), std::nullopt, {}, 1.0},
                                    Grid2D(3, 3), i < n_train ? "train" : "test"});
  parallel_for(cfg.n_maps, [&](int i) {
    Scene scene = generate_scene(cfg, i);
    Grid2D truth = render_ground_truth(scene, cfg.db_range, cfg.pathloss);
    records[i].scene = std::move(scene);
    records[i].truth = std::move(truth);
  });
  return records;
}

uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!is) break;
  }
  return h;
}

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json config_to_json(const GenConfig& c) {
  return json{{"map_size", c.map_size},
              {"n_maps", c.n_maps},
              {"buildings_min", c.buildings_min},
              {"buildings_max", c.buildings_max},
              {"n_tx_per_map", c.n_tx_per_map},
              {"drm", c.drm},
              {"seed", c.seed},
              {"db_floor", c.db_range.floor_db},
              {"db_ceiling", c.db_range.ceiling_db},
              {"attn_per_pixel", c.pathloss.attn_per_pixel},
              {"zero_inside_obstacles", c.pathloss.zero_inside_obstacles},
              {"spacing", c.spacing}};
}

void write_tx_json(const Scene& scene, const std::filesystem::path& path) {
  json txs = json::array();
  for (const auto& t : scene.transmitters)
    txs.push_back(json{{"x", t.x}, {"y", t.y},
                       {"ref_power_db", t.ref_power_db}, {"exponent", t.exponent}});
  json j{{"spacing", scene.spacing}, {"transmitters", txs}};
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << j.dump(2) << "\n";
}

void read_tx_json(Scene& scene, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  json j = json::parse(is);
  scene.spacing = j.at("spacing").get<double>();
  scene.transmitters.clear();
  for (const auto& t : j.at("transmitters")) {
    Transmitter tx;
    tx.x = t.at("x").get<double>();
    tx.y = t.at("y").get<double>();
    tx.ref_power_db = t.at("ref_power_db").get<double>();
    tx.exponent = t.at("exponent").get<double>();
    scene.transmitters.push_back(tx);
  }
}

}  // namespace

ManifestSummary write_dataset(const std::vector<DatasetRecord>& records,
                              const std::filesystem::path& dir,
                              const GenConfig* config_echo) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  json manifest;
  manifest["format"] = 1;
  if (config_echo) manifest["config"] = config_to_json(*config_echo);
  manifest["records"] = json::array();

  ManifestSummary summary;
  for (size_t idx = 0; idx < records.size(); ++idx) {
    const auto& rec = records[idx];
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu", idx);
    const fs::path rdir = dir / name;
    fs::create_directories(rdir);

    write_mask_pgm(rec.scene.buildings, rdir / "buildings.pgm");
    write_tx_json(rec.scene, rdir / "tx.json");
    write_grid_f32(rec.truth, rdir / "truth.f32g");

    json files;
    files["buildings.pgm"] = hex64(fnv1a64_file(rdir / "buildings.pgm"));
    files["tx.json"] = hex64(fnv1a64_file(rdir / "tx.json"));
    files["truth.f32g"] = hex64(fnv1a64_file(rdir / "truth.f32g"));
    if (rec.scene.vehicles) {
      write_mask_pgm(*rec.scene.vehicles, rdir / "vehicles.pgm");
      files["vehicles.pgm"] = hex64(fnv1a64_file(rdir / "vehicles.pgm"));
    }
    manifest["records"].push_back(json{{"dir", name}, {"split", rec.split}, {"files", files}});

    ++summary.n_records;
    if (rec.split == "train") ++summary.n_train;
    else ++summary.n_test;
  }

  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("cannot open for writing: " + (dir / "manifest.json").string());
  os << manifest.dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed: " + (dir / "manifest.json").string());
  return summary;
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path mpath = dir / "manifest.json";
  std::ifstream is(mpath);
  if (!is) throw std::runtime_error("cannot open: " + mpath.string());
  json manifest = json::parse(is);

  std::vector<DatasetRecord> records;
  for (const auto& entry : manifest.at("records")) {
    const std::string name = entry.at("dir").get<std::string>();
    const fs::path rdir = dir / name;
    if (!fs::exists(rdir)) throw std::runtime_error("missing record directory: " + name);

    for (const auto& [fname, hash] : entry.at("files").items()) {
      const fs::path fpath = rdir / fname;
      if (!fs::exists(fpath)) throw std::runtime_error("missing file: " + name + "/" + fname);
      if (hex64(fnv1a64_file(fpath)) != hash.get<std::string>())
        throw std::runtime_error("hash mismatch (" + name + "/" + fname + ")");
    }

    DatasetRecord rec{Scene{read_mask_pgm(rdir / "buildings.pgm"), std::nullopt, {}, 1.0},
                      read_grid_f32(rdir / "truth.f32g"),
                      entry.at("split").get<std::string>()};
    read_tx_json(rec.scene, rdir / "tx.json");
    if (fs::exists(rdir / "vehicles.pgm"))
      rec.scene.vehicles = read_mask_pgm(rdir / "vehicles.pgm");
    rec.scene.validate();
    if (rec.truth.height() != rec.scene.height() || rec.truth.width() != rec.scene.width())
      throw std::runtime_error("truth dimensions mismatch in " + name);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace phyrm
