#pragma once

#include <array>
#include <cstdint>

namespace qmfg {

/// Philox4x32-10 counter-based block cipher (Salmon et al. constants).
/// Streams are addressed by (seed, replication, agent); draws inside a
/// stream are addressed by a block counter, so any draw is reachable
/// without generating its predecessors and parallel workers cannot
/// perturb each other's sequences.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Standard-normal stream for one (seed, replication, agent) triple.
/// Draw 0 is reserved for the initial-state sample; subsequent draws feed
/// the time-stepping loop. Two normals are produced per Philox block via
/// Box-Muller, consumed in order.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t replication, std::uint32_t agent)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replication_(replication),
        agent_(agent) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    auto pair = normal_pair(block_++);
    spare_ = pair[1];
    have_spare_ = true;
    return pair[0];
  }

  /// Both normals of one addressed block (stateless access, used by tests).
  std::array<double, 2> normal_pair(std::uint32_t block) const;

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t replication_;
  std::uint32_t agent_;
  std::uint32_t block_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Identifier recorded in run manifests so the generator choice is pinned.
inline const char* rng_id() { return "philox4x32-10/box-muller"; }

}  // namespace qmfg
