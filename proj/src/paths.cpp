#include "fracheat/paths.hpp"

#include <cmath>

#include "fracheat/errors.hpp"

namespace fracheat {

TimeGrid::TimeGrid(double t_end, std::size_t n_steps) : t_end_(t_end), n_steps_(n_steps) {
  if (n_steps == 0) throw ConfigError("time grid needs n_steps >= 1");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("time grid needs t_end > 0");
}

double TimeGrid::node(std::size_t j) const {
  if (j == n_steps_) return t_end_;
  return t_end_ * static_cast<double>(j) / static_cast<double>(n_steps_);
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> r(n_nodes());
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = node(j);
  return r;
}

TimeGrid grid_with_max_step(double t_end, double max_dt) {
  if (!(max_dt > 0.0)) throw ConfigError("mesh width must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(t_end / max_dt - 1e-9));
  return TimeGrid(t_end, n < 1 ? 1 : n);
}

PathBatch::PathBatch(TimeGrid grid, std::size_t k, std::size_t d, RngConfig rng,
                     std::uint64_t stream_id, std::vector<double> values)
    : grid_(grid), k_(k), d_(d), rng_(rng), stream_id_(stream_id), values_(std::move(values)) {
  if (values_.size() != k_ * d_ * grid_.n_nodes())
    throw DataError("path batch storage does not match k*d*(n+1)");
}

PathView PathBatch::path(std::size_t i) const {
  const std::size_t m = d_ * grid_.n_nodes();
  return {std::span<const double>(values_).subspan(i * m, m), d_, grid_.n_nodes()};
}

void fill_brownian(Stream& s, double dt, std::span<double> out) {
  const double sd = std::sqrt(dt);
  out[0] = 0.0;
  for (std::size_t j = 1; j < out.size(); ++j) out[j] = out[j - 1] + sd * s.normal();
}

PathBatch sample_paths(const TimeGrid& grid, std::size_t k, std::size_t d, RngConfig rng,
                       std::uint64_t stream_id) {
  if (k < 1 || d < 1) throw ConfigError("sample_paths needs k >= 1 and d >= 1");
  const std::size_t m = grid.n_nodes();
  std::vector<double> v(k * d * m);
  Stream s(rng.seed, stream_id);
  for (std::size_t i = 0; i < k * d; ++i)
    fill_brownian(s, grid.dt(), std::span<double>(v).subspan(i * m, m));
  return PathBatch(grid, k, d, rng, stream_id, std::move(v));
}

PathBatch brownian_bridge_refine(const PathBatch& batch, std::size_t factor) {
  if (factor < 2) throw ConfigError("bridge refinement factor must be >= 2");
  const TimeGrid& g = batch.grid();
  const TimeGrid fine(g.t_end(), g.n_steps() * factor);
  const std::size_t mc = g.n_nodes();
  const std::size_t mf = fine.n_nodes();
  const std::uint64_t child = derive_stream(batch.stream_id(), 0xB71D6Eull + factor);
  Stream s(batch.rng().seed, child);
  const double gap = g.dt();
  const double h = gap / static_cast<double>(factor);

  std::vector<double> v(batch.k() * batch.d() * mf);
  for (std::size_t p = 0; p < batch.k() * batch.d(); ++p) {
    const double* src = batch.values().data() + p * mc;
    double* dst = v.data() + p * mf;
    for (std::size_t j = 0; j + 1 < mc; ++j) {
      const double b = src[j + 1];
      double x = src[j];
      dst[j * factor] = x;
      for (std::size_t q = 1; q < factor; ++q) {
        // remaining time to the right endpoint before and after this step
        const double rem0 = gap - static_cast<double>(q - 1) * h;
        const double rem1 = gap - static_cast<double>(q) * h;
        const double mean = x + (b - x) * h / rem0;
        const double var = h * rem1 / rem0;
        x = mean + std::sqrt(var) * s.normal();
        dst[j * factor + q] = x;
      }
    }
    dst[mf - 1] = src[mc - 1];
  }
  return PathBatch(fine, batch.k(), batch.d(), batch.rng(), child, std::move(v));
}

}  // namespace fracheat
