#include "oim/rng.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "oim/vecmath.hpp"

namespace oim {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be >= 1");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

int Rng::poisson(double mean) {
  if (mean < 0.0) throw std::invalid_argument("poisson: mean must be >= 0");
  if (mean == 0.0) return 0;
  const double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform();
  } while (p > limit);
  return k - 1;
}

std::vector<double> Rng::unit_vector(std::size_t dim) {
  Vec v(dim);
  for (;;) {
    for (double& x : v) x = normal();
    if (l2_norm(v) >= kZeroNormEps) break;
  }
  normalize(v);
  return v;
}

void Rng::save(std::ostream& os) const { os << engine_; }

void Rng::load(std::istream& is) {
  is >> engine_;
  if (!is) throw std::runtime_error("Rng::load: malformed engine state");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer over master xor a stream-tagged odd constant
  std::uint64_t z = master ^ (stream * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace oim
