#include "covdet/rng.h"

#include <cmath>
#include <numeric>

namespace covdet {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(SplitMix64(seed)) {}

Rng Rng::Split(std::uint64_t key) const {
  return Rng(SplitMix64(seed_ ^ SplitMix64(key + 0x5851f42d4c957f2dULL)));
}

double Rng::Uniform() { return uniform_(engine_); }

double Rng::Uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

double Rng::Normal() { return normal_(engine_); }

Complex Rng::ComplexNormal() {
  static const double kScale = std::sqrt(0.5);
  const double re = normal_(engine_);
  const double im = normal_(engine_);
  return {kScale * re, kScale * im};
}

int Rng::UniformInt(int lo, int hi) {
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(engine_);
}

std::vector<int> Rng::Permutation(int n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), engine_);
  return perm;
}

}  // namespace covdet
