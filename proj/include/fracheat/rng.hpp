#pragma once

#include <array>
#include <cstdint>

namespace fracheat {

// Philox4x32-10 block: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

// Child stream id, a pure function of (parent, index).
std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t index);

struct RngConfig {
  std::uint64_t seed = 0;
};

// Sequential reader over the counter space of one (seed, stream) pair.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0);

  std::uint32_t next_u32();
  double uniform();        // in (0,1), 53-bit
  double normal();         // Box-Muller
  std::uint64_t below(std::uint64_t n);  // uniform integer in [0,n)

  std::uint64_t counter() const { return counter_; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_id_;
  std::uint64_t counter_;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fracheat
