#include "phyrm/gradcheck.hpp"

#include "phyrm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace phyrm {

GradCheckReport grad_check(const std::function<double()>& f, ModelParams& params,
                           double step, double tol, uint64_t sample_seed, int max_coords) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  GradCheckReport report;
  report.pass = true;

  for (auto& [name, blk] : params.blocks()) {
    const int64_t n = blk.size();
    std::vector<int64_t> coords;
    if (n <= max_coords) {
      coords.resize(n);
      std::iota(coords.begin(), coords.end(), 0);
    } else {
      Rng rng(derive_seed(sample_seed, {fnv1a64_str(name)}));
      std::vector<int64_t> all(n);
      std::iota(all.begin(), all.end(), 0);
      for (int i = 0; i < max_coords; ++i) {
        const int64_t r = rng.uniform_int(i, n - 1);
        std::swap(all[i], all[r]);
      }
      coords.assign(all.begin(), all.begin() + max_coords);
    }

    for (int64_t idx : coords) {
      const double keep = blk.value[idx];
      blk.value[idx] = keep + step;
      const double fp = f();
      blk.value[idx] = keep - step;
      const double fm = f();
      blk.value[idx] = keep;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("non-finite objective during gradient check");
      const double numeric = (fp - fm) / (2.0 * step);
      const double analytic = blk.grad[idx];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = static_cast<int>(idx);
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace phyrm
