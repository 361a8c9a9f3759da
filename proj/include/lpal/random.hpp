#pragma once

#include <cstdint>
#include <random>

namespace lpal {

using Rng = std::mt19937_64;

// Independent stream seed for a (base seed, purpose, index) triple so that
// adding a consumer of randomness never perturbs the others.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Rng make_rng(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(base, stream, index));
}

// Stream tags.
enum Stream : std::uint64_t {
  kStreamInitLabels = 1,
  kStreamModelInit = 2,
  kStreamTraining = 3,
  kStreamKmeans = 4,
  kStreamAcquire = 5,
  kStreamSplit = 6,
  kStreamScatter = 7,
  kStreamGenerate = 8,
};

}  // namespace lpal
