#include <cmath>
#include <vector>

#include "doctest.h"
#include "fracheat/errors.hpp"
#include "fracheat/paths.hpp"
#include "test_support.hpp"

using namespace fracheat;
using testsupport::ks_two_sample_p;
using testsupport::mean;
using testsupport::var;

TEST_CASE("philox known answers") {
  auto a = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(a[0] == 0x6627e8d5u);
  CHECK(a[1] == 0xe169c58du);
  CHECK(a[2] == 0xbc57ac4cu);
  CHECK(a[3] == 0x9b00dbd8u);
  auto b = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu});
  CHECK(b[0] == 0x408f276du);
  CHECK(b[1] == 0x41c83b0eu);
  CHECK(b[2] == 0xa20bc7c6u);
  CHECK(b[3] == 0x6d5451fdu);
  auto c = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      {0xa4093822u, 0x299f31d0u});
  CHECK(c[0] == 0xd16cfe09u);
  CHECK(c[1] == 0x94fdccebu);
  CHECK(c[2] == 0x5001e420u);
  CHECK(c[3] == 0x24126ea1u);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(TimeGrid(1.0, 0), ConfigError);
  CHECK_THROWS_AS(TimeGrid(0.0, 4), ConfigError);
  TimeGrid g(2.0, 8);
  CHECK(g.node(0) == 0.0);
  CHECK(g.node(8) == 2.0);
  for (std::size_t j = 0; j < 8; ++j) CHECK(g.node(j) < g.node(j + 1));
  CHECK_THROWS_AS(sample_paths(g, 0, 1, {1}, 0), ConfigError);
}

TEST_CASE("single increment has unit variance") {
  TimeGrid g(1.0, 1);
  std::vector<double> x(100000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = sample_paths(g, 1, 1, {42}, i).at(0, 0, 1);
  CHECK(std::abs(var(x) - 1.0) < 0.02);
  CHECK(std::abs(mean(x)) < 4.0 * std::sqrt(1.0 / x.size()));
}

TEST_CASE("determinism and start at origin") {
  TimeGrid g(1.5, 37);
  auto a = sample_paths(g, 3, 2, {7}, 11);
  auto b = sample_paths(g, 3, 2, {7}, 11);
  CHECK(a.values() == b.values());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) CHECK(a.at(i, c, 0) == 0.0);
  auto other = sample_paths(g, 3, 2, {7}, 12);
  CHECK(other.values() != a.values());
}

TEST_CASE("independent paths are uncorrelated") {
  TimeGrid g(1.0, 4);
  const std::size_t n = 100000;
  std::vector<double> prod(n), prod_streams(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto b = sample_paths(g, 2, 1, {2024}, i);
    prod[i] = b.at(0, 0, 2) * b.at(1, 0, 4);
    auto c = sample_paths(g, 1, 1, {2024}, n + 2 * i);
    auto e = sample_paths(g, 1, 1, {2024}, n + 2 * i + 1);
    prod_streams[i] = c.at(0, 0, 4) * e.at(0, 0, 4);
  }
  const double se = std::sqrt(var(prod) / n);
  CHECK(std::abs(mean(prod)) < 3.0 * se);
  const double se2 = std::sqrt(var(prod_streams) / n);
  CHECK(std::abs(mean(prod_streams)) < 4.0 * se2);
}

TEST_CASE("increment suite") {
  TimeGrid g(2.0, 8);
  const std::size_t n = 100000;
  const double dt = g.dt();
  std::vector<double> i1(n), i2(n), sq(n), lag(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto b = sample_paths(g, 1, 1, {99}, s);
    i1[s] = b.at(0, 0, 3) - b.at(0, 0, 2);
    i2[s] = b.at(0, 0, 4) - b.at(0, 0, 3);
    sq[s] = i1[s] * i1[s];
    lag[s] = i1[s] * i2[s];
  }
  CHECK(std::abs(mean(i1)) < 4.0 * std::sqrt(var(i1) / n));
  CHECK(std::abs(mean(sq) - dt) < 4.0 * std::sqrt(var(sq) / n));
  CHECK(std::abs(mean(lag)) < 4.0 * std::sqrt(var(lag) / n));
}

TEST_CASE("scaling law") {
  const std::size_t n = 20000;
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = sample_paths(TimeGrid(4.0, 8), 1, 1, {5}, i).at(0, 0, 4) / 2.0;
    b[i] = sample_paths(TimeGrid(1.0, 8), 1, 1, {5}, n + i).at(0, 0, 4);
  }
  CHECK(ks_two_sample_p(a, b) > 0.01);
}

TEST_CASE("bridge refinement") {
  TimeGrid g(1.0, 1);
  CHECK_THROWS_AS(brownian_bridge_refine(sample_paths(g, 1, 1, {1}, 0), 1), ConfigError);

  const std::size_t n = 100000;
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto b = sample_paths(g, 1, 1, {3}, i);
    auto f = brownian_bridge_refine(b, 2);
    dev[i] = f.at(0, 0, 1) - 0.5 * (b.at(0, 0, 0) + b.at(0, 0, 1));
  }
  CHECK(std::abs(mean(dev)) < 4.0 * std::sqrt(0.25 / n));
  CHECK(std::abs(var(dev) - 0.25) < 4.0 * 0.25 * std::sqrt(2.0 / n));

  auto b = sample_paths(TimeGrid(2.0, 5), 2, 3, {8}, 1);
  auto f = brownian_bridge_refine(b, 3);
  CHECK(f.grid().n_steps() == 15);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t j = 0; j <= 5; ++j) CHECK(f.at(i, c, 3 * j) == b.at(i, c, j));
}

TEST_CASE("double refinement matches fourfold refinement and direct sampling") {
  const std::size_t n = 10000;
  std::vector<double> twice(n), four(n), direct(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto b = sample_paths(TimeGrid(1.0, 1), 1, 1, {17}, i);
    twice[i] = brownian_bridge_refine(brownian_bridge_refine(b, 2), 2).at(0, 0, 1);
    auto c = sample_paths(TimeGrid(1.0, 1), 1, 1, {17}, n + i);
    four[i] = brownian_bridge_refine(c, 4).at(0, 0, 1);
    direct[i] = sample_paths(TimeGrid(1.0, 4), 1, 1, {17}, 2 * n + i).at(0, 0, 1);
  }
  CHECK(ks_two_sample_p(twice, four) > 0.01);
  CHECK(ks_two_sample_p(twice, direct) > 0.01);
}
