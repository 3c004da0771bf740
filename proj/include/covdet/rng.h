#ifndef COVDET_RNG_H_
#define COVDET_RNG_H_

#include <cstdint>
#include <random>
#include <vector>

#include "covdet/common.h"

namespace covdet {

// Named substreams derived from a trial seed. Each consumer draws from its own
// stream so that, e.g., changing the antenna count does not perturb the
// sequences or device positions of an instance.
enum class Stream : std::uint64_t {
  kPositions = 1,
  kSequences = 2,
  kActivity = 3,
  kChannels = 4,
  kNoise = 5,
  kSolver = 6,
  kTrial = 7,
  kPredicted = 8,
};

// Seedable 64-bit generator with deterministic splitting.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  // Independent child generator; the result depends only on (seed, key).
  Rng Split(std::uint64_t key) const;
  Rng Split(Stream stream) const { return Split(static_cast<std::uint64_t>(stream)); }

  std::uint64_t NextU64() { return engine_(); }
  double Uniform();                        // [0, 1)
  double Uniform(double lo, double hi);    // [lo, hi)
  double Normal();                         // N(0, 1)
  Complex ComplexNormal();                 // CN(0, 1): E|z|^2 = 1
  int UniformInt(int lo, int hi);          // inclusive bounds
  std::vector<int> Permutation(int n);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t SplitMix64(std::uint64_t x);

}  // namespace covdet

#endif  // COVDET_RNG_H_
