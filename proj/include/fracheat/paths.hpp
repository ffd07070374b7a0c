#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fracheat/rng.hpp"

namespace fracheat {

class TimeGrid {
 public:
  TimeGrid(double t_end, std::size_t n_steps);

  double t_end() const { return t_end_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return n_steps_ + 1; }
  double dt() const { return t_end_ / static_cast<double>(n_steps_); }
  double node(std::size_t j) const;
  std::vector<double> nodes() const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double t_end_;
  std::size_t n_steps_;
};

// Smallest uniform grid on [0,t_end] with step <= max_dt.
TimeGrid grid_with_max_step(double t_end, double max_dt);

// One d-dimensional path: coordinate c occupies values[c*n_nodes, (c+1)*n_nodes).
struct PathView {
  std::span<const double> values;
  std::size_t d;
  std::size_t n_nodes;

  std::span<const double> coord(std::size_t c) const {
    return values.subspan(c * n_nodes, n_nodes);
  }
};

class PathBatch {
 public:
  PathBatch(TimeGrid grid, std::size_t k, std::size_t d, RngConfig rng,
            std::uint64_t stream_id, std::vector<double> values);

  const TimeGrid& grid() const { return grid_; }
  std::size_t k() const { return k_; }
  std::size_t d() const { return d_; }
  const RngConfig& rng() const { return rng_; }
  std::uint64_t stream_id() const { return stream_id_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t i, std::size_t c, std::size_t j) const {
    return values_[(i * d_ + c) * grid_.n_nodes() + j];
  }
  PathView path(std::size_t i) const;

 private:
  TimeGrid grid_;
  std::size_t k_;
  std::size_t d_;
  RngConfig rng_;
  std::uint64_t stream_id_;
  std::vector<double> values_;
};

PathBatch sample_paths(const TimeGrid& grid, std::size_t k, std::size_t d,
                       RngConfig rng, std::uint64_t stream_id);

// Conditional Brownian-bridge fill-in; coarse nodes are kept bit-exactly.
PathBatch brownian_bridge_refine(const PathBatch& batch, std::size_t factor);

// Positions of one path written into out (size n_nodes), used by estimators
// that draw paths inside their own per-sample stream.
void fill_brownian(Stream& s, double dt, std::span<double> out);

}  // namespace fracheat
