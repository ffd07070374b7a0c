#include "fracheat/qmc.hpp"

#include <boost/random/sobol.hpp>
#include <cmath>

#include "fracheat/errors.hpp"
#include "fracheat/rng.hpp"
#include "fracheat/stats.hpp"

namespace fracheat {

double QmcResult::mean(std::size_t j) const {
  KahanSum s;
  for (std::size_t r = 0; r < n_replicates; ++r) s.add(replicate(r, j));
  return s.value() / static_cast<double>(n_replicates);
}

double QmcResult::std_error(std::size_t j) const {
  std::vector<double> v(n_replicates);
  for (std::size_t r = 0; r < n_replicates; ++r) v[r] = replicate(r, j);
  return summarize(v).std_error;
}

std::pair<double, double> QmcResult::combine(std::span<const double> c) const {
  if (c.size() != n_outputs) throw DataError("QMC combine: coefficient length mismatch");
  std::vector<double> v(n_replicates, 0.0);
  for (std::size_t r = 0; r < n_replicates; ++r)
    for (std::size_t j = 0; j < n_outputs; ++j) v[r] += c[j] * replicate(r, j);
  auto s = summarize(v);
  return {s.mean, s.std_error};
}

QmcResult qmc_integrate(std::size_t dim, std::size_t n_outputs, const QmcConfig& cfg,
                        const QmcIntegrand& f) {
  if (dim == 0 || n_outputs == 0) throw ConfigError("QMC needs dim >= 1 and outputs >= 1");
  if (cfg.n_replicates < 2) throw ConfigError("QMC needs at least 2 replicates for an error bar");
  if (cfg.n_points < 1) throw ConfigError("QMC needs at least 1 point");

  std::vector<std::uint64_t> pts(cfg.n_points * dim);
  boost::random::sobol gen(dim);
  for (auto& p : pts) p = gen();

  QmcResult res;
  res.n_outputs = n_outputs;
  res.n_replicates = cfg.n_replicates;
  res.replicate_means.assign(cfg.n_replicates * n_outputs, 0.0);

  std::vector<double> vals(cfg.n_points * n_outputs);
  std::vector<char> ok(cfg.n_points);
  for (std::size_t r = 0; r < cfg.n_replicates; ++r) {
    Stream s(cfg.seed, derive_stream(cfg.stream, r));
    std::vector<std::uint64_t> shift(dim);
    for (auto& x : shift) x = (static_cast<std::uint64_t>(s.next_u32()) << 32) | s.next_u32();

    const std::size_t chunk = 256;
    const std::size_t n_chunks = (cfg.n_points + chunk - 1) / chunk;
    parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
      std::vector<double> u(dim);
      for (std::size_t i = c * chunk; i < std::min(cfg.n_points, (c + 1) * chunk); ++i) {
        for (std::size_t j = 0; j < dim; ++j)
          u[j] = (static_cast<double>((pts[i * dim + j] ^ shift[j]) >> 11) + 0.5) * 0x1.0p-53;
        std::span<double> out(vals.data() + i * n_outputs, n_outputs);
        ok[i] = f(u, out) ? 1 : 0;
        if (!ok[i])
          for (double& v : out) v = 0.0;
      }
    });
    for (std::size_t j = 0; j < n_outputs; ++j) {
      KahanSum acc;
      for (std::size_t i = 0; i < cfg.n_points; ++i) acc.add(vals[i * n_outputs + j]);
      res.replicate_means[r * n_outputs + j] = acc.value() / static_cast<double>(cfg.n_points);
    }
    for (char o : ok) res.n_failures += o ? 0 : 1;
  }
  return res;
}

}  // namespace fracheat
