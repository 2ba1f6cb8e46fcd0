#include "phyrm/pathloss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace phyrm {

double path_loss_db(double px, double py, std::span<const Transmitter> txs, double h) {
  double total = 0.0;
  for (const auto& tx : txs) {
    const double dx = tx.x - px;
    const double dy = tx.y - py;
    const double dist = std::sqrt(dx * dx + dy * dy) * h;
    if (dist <= 0.0) throw std::domain_error("singular distance");
    total += tx.ref_power_db - 10.0 * tx.exponent * std::log10(dist);
  }
  return total;
}

int occluded_count(const Scene& scene, int i0, int j0, int i1, int j1) {
  auto obstacle = [&](int i, int j) {
    return scene.buildings.get(i, j) || (scene.vehicles && scene.vehicles->get(i, j));
  };
  // Bresenham over (j, i) = (x, y).
  int x = j0, y = i0;
  const int dx = std::abs(j1 - j0), dy = -std::abs(i1 - i0);
  const int sx = j0 < j1 ? 1 : -1, sy = i0 < i1 ? 1 : -1;
  int err = dx + dy;
  int count = 0;
  while (true) {
    if (obstacle(y, x)) ++count;
    if (x == j1 && y == i1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x += sx; }
    if (e2 <= dx) { err += dx; y += sy; }
  }
  return count;
}

Grid2D render_pathloss_map(const Scene& scene, const DbRange& range,
                           const PathlossConfig& cfg) {
  scene.validate();
  range.validate();
  const int h = scene.height(), w = scene.width();
  Grid2D out(h, w, scene.spacing, 0.0);

  std::vector<std::pair<int, int>> tx_px;
  tx_px.reserve(scene.transmitters.size());
  for (const auto& tx : scene.transmitters) tx_px.push_back(transmitter_pixel(tx, h, w));

  auto obstacle = [&](int i, int j) {
    return scene.buildings.get(i, j) || (scene.vehicles && scene.vehicles->get(i, j));
  };

  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      bool is_tx = false;
      for (const auto& p : tx_px)
        if (p.first == i && p.second == j) { is_tx = true; break; }
      if (is_tx) {
        out.at(i, j) = 1.0;
        continue;
      }
      if (cfg.zero_inside_obstacles && obstacle(i, j)) {
        out.at(i, j) = 0.0;
        continue;
      }
      // nearest transmitter by true (sub-pixel) distance
      size_t nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < scene.transmitters.size(); ++k) {
        const double dx = scene.transmitters[k].x - j;
        const double dy = scene.transmitters[k].y - i;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best) { best = d2; nearest = k; }
      }
      const double base = path_loss_db(j, i, scene.transmitters, scene.spacing);
      const int occ = occluded_count(scene, tx_px[nearest].first, tx_px[nearest].second, i, j);
      out.at(i, j) = normalize_db(base - cfg.attn_per_pixel * occ, range);
    }
  quantize_f32(out);
  return out;
}

void FitObservations::validate(size_t n_tx) const {
  if (n_tx == 0) throw std::invalid_argument("no transmitters to fit");
  if (points.size() < 2 * n_tx)
    throw std::invalid_argument("too few observations to identify parameters");
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.power_db))
      throw std::invalid_argument("non-finite observation");
}

void FitConfig::validate() const {
  if (reg_strength < 0.0) throw std::invalid_argument("regularization must be non-negative");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
}

namespace {

// Cholesky solve of (A + mu I) x = b for symmetric positive definite A.
// Returns false if a pivot drops below the rank tolerance.
bool spd_solve(std::vector<double> a, std::vector<double> b, int n, double mu,
               std::vector<double>& x) {
  double max_diag = 0.0;
  for (int i = 0; i < n; ++i) {
    a[static_cast<size_t>(i) * n + i] += mu;
    max_diag = std::max(max_diag, std::abs(a[static_cast<size_t>(i) * n + i]));
  }
  const double tiny = std::max(max_diag, 1.0) * 1e-13;
  auto A = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      if (i == j) {
        if (s <= tiny) return false;
        A(i, i) = std::sqrt(s);
      } else {
        A(i, j) = s / A(j, j);
      }
    }
  }
  // forward + backward substitution
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= A(i, k) * b[k];
    b[i] = s / A(i, i);
  }
  x.assign(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= A(k, i) * x[k];
    x[i] = s / A(i, i);
  }
  return true;
}

// Parameters packed as [alpha_0..alpha_{n-1}, theta_0..theta_{n-1}].
struct FitWork {
  std::vector<double> log_dist;  // 10*log10(dist_jk), row-major K x n
  int k_obs = 0;
  int n_tx = 0;

  double model(std::span<const double> p, int j) const {
    double s = 0.0;
    for (int k = 0; k < n_tx; ++k)
      s += p[k] - p[n_tx + k] * log_dist[static_cast<size_t>(j) * n_tx + k];
    return s;
  }
};

double objective(const FitWork& wk, const FitObservations& obs, std::span<const double> p,
                 const FitConfig& cfg) {
  double f = 0.0;
  for (int j = 0; j < wk.k_obs; ++j) {
    const double r = obs.points[j].power_db - wk.model(p, j);
    f += r * r;
  }
  for (int k = 0; k < wk.n_tx; ++k) {
    const double d = p[wk.n_tx + k] - cfg.exponent_prior;
    f += cfg.reg_strength * d * d;
  }
  return f;
}

// grad = 2 J^T r with residuals r_j = x_j - P_j and the regularizer rows.
void gradient(const FitWork& wk, const FitObservations& obs, std::span<const double> p,
              const FitConfig& cfg, std::vector<double>& g) {
  const int n = wk.n_tx;
  g.assign(2 * n, 0.0);
  for (int j = 0; j < wk.k_obs; ++j) {
    const double r = obs.points[j].power_db - wk.model(p, j);
    for (int k = 0; k < n; ++k) {
      g[k] += -2.0 * r;
      g[n + k] += 2.0 * r * wk.log_dist[static_cast<size_t>(j) * n + k];
    }
  }
  for (int k = 0; k < n; ++k)
    g[n + k] += 2.0 * cfg.reg_strength * (p[n + k] - cfg.exponent_prior);
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double fit_objective(const FitObservations& obs, std::span<const Transmitter> txs,
                     const FitConfig& cfg, double h) {
  double f = 0.0;
  for (const auto& o : obs.points) {
    const double r = o.power_db - path_loss_db(o.x, o.y, txs, h);
    f += r * r;
  }
  for (const auto& tx : txs) {
    const double d = tx.exponent - cfg.exponent_prior;
    f += cfg.reg_strength * d * d;
  }
  return f;
}

std::vector<Transmitter> fit_pathloss(const FitObservations& obs,
                                      std::vector<Transmitter> txs_init,
                                      const FitConfig& cfg, double h) {
  cfg.validate();
  obs.validate(txs_init.size());
  const int n = static_cast<int>(txs_init.size());
  const int kn = static_cast<int>(obs.points.size());

  FitWork wk;
  wk.k_obs = kn;
  wk.n_tx = n;
  wk.log_dist.resize(static_cast<size_t>(kn) * n);
  for (int j = 0; j < kn; ++j)
    for (int k = 0; k < n; ++k) {
      const double dx = txs_init[k].x - obs.points[j].x;
      const double dy = txs_init[k].y - obs.points[j].y;
      const double dist = std::sqrt(dx * dx + dy * dy) * h;
      if (dist <= 0.0) throw std::domain_error("singular distance");
      wk.log_dist[static_cast<size_t>(j) * n + k] = 10.0 * std::log10(dist);
    }

  std::vector<double> p(2 * n);
  for (int k = 0; k < n; ++k) {
    p[k] = txs_init[k].ref_power_db;
    p[n + k] = txs_init[k].exponent;
  }
  if (!std::isfinite(objective(wk, obs, p, cfg)))
    throw std::invalid_argument("objective not finite at initial parameters");

  // Normal matrix J^T J is constant: the model is linear in the parameters.
  std::vector<double> jtj(static_cast<size_t>(2 * n) * 2 * n, 0.0);
  auto N = [&](int i, int j) -> double& { return jtj[static_cast<size_t>(i) * 2 * n + j]; };
  for (int j = 0; j < kn; ++j)
    for (int a = 0; a < n; ++a) {
      const double ja = -1.0;
      const double jt = wk.log_dist[static_cast<size_t>(j) * n + a];
      for (int b = 0; b < n; ++b) {
        const double jb = -1.0;
        const double jtb = wk.log_dist[static_cast<size_t>(j) * n + b];
        N(a, b) += ja * jb;
        N(a, n + b) += ja * jtb;
        N(n + a, b) += jt * jb;
        N(n + a, n + b) += jt * jtb;
      }
    }
  for (int k = 0; k < n; ++k) N(n + k, n + k) += cfg.reg_strength;

  // With several transmitters only the sum of the reference powers is
  // identifiable (the model adds them), so rank is probed on the reduced
  // parameterization [sum alpha, theta_1..theta_n].
  {
    const int m = 1 + n;
    std::vector<double> red(static_cast<size_t>(m) * m, 0.0);
    auto R = [&](int i, int j) -> double& { return red[static_cast<size_t>(i) * m + j]; };
    for (int j = 0; j < kn; ++j) {
      R(0, 0) += 1.0;
      for (int a = 0; a < n; ++a) {
        const double jt = wk.log_dist[static_cast<size_t>(j) * n + a];
        R(0, 1 + a) += -jt;
        R(1 + a, 0) += -jt;
        for (int b = 0; b < n; ++b)
          R(1 + a, 1 + b) += jt * wk.log_dist[static_cast<size_t>(j) * n + b];
      }
    }
    for (int k = 0; k < n; ++k) R(1 + k, 1 + k) += cfg.reg_strength;
    std::vector<double> probe;
    if (!spd_solve(red, std::vector<double>(m, 0.0), m, 0.0, probe))
      throw std::runtime_error("rank-deficient fit");
  }

  std::vector<double> g;
  gradient(wk, obs, p, cfg, g);
  double fcur = objective(wk, obs, p, cfg);
  double mu = 0.0;

  for (int iter = 0; iter < cfg.max_iters && norm2(g) > cfg.tol; ++iter) {
    std::vector<double> rhs(2 * n);
    for (int i = 0; i < 2 * n; ++i) rhs[i] = -0.5 * g[i];  // -J^T r
    std::vector<double> delta;
    bool accepted = false;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
      if (spd_solve(jtj, rhs, 2 * n, mu, delta)) {
        std::vector<double> cand(p);
        for (int i = 0; i < 2 * n; ++i) cand[i] += delta[i];
        const double fc = objective(wk, obs, cand, cfg);
        if (std::isfinite(fc) && fc <= fcur) {
          p = std::move(cand);
          fcur = fc;
          accepted = true;
          mu = mu > 0.0 ? mu * 0.25 : 0.0;
          break;
        }
      }
      mu = mu > 0.0 ? mu * 10.0 : 1e-8;
    }
    if (!accepted) break;  // no descent direction left at this precision
    gradient(wk, obs, p, cfg, g);
  }

  for (int k = 0; k < n; ++k) {
    txs_init[k].ref_power_db = p[k];
    txs_init[k].exponent = p[n + k];
  }
  return txs_init;
}

void write_observations_csv(const FitObservations& obs, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "x_px,y_px,power_db\n";
  os.precision(17);
  for (const auto& p : obs.points) os << p.x << "," << p.y << "," << p.power_db << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

FitObservations read_observations_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "x_px,y_px,power_db")
    throw std::runtime_error("bad observations header: " + path.string());
  FitObservations obs;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    FitObservation o;
    char c1 = 0, c2 = 0;
    if (!(ss >> o.x >> c1 >> o.y >> c2 >> o.power_db) || c1 != ',' || c2 != ',')
      throw std::runtime_error("bad observations row: " + line);
    obs.points.push_back(o);
  }
  return obs;
}

}  // namespace phyrm
