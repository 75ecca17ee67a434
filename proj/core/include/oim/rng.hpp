#ifndef OIM_RNG_HPP_
#define OIM_RNG_HPP_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace oim {

// Seeded random stream. The engine is std::mt19937_64 (bit-exact across
// platforms) and every distribution is implemented here rather than taken
// from <random>, so a stream consumes the same engine outputs everywhere
// and its state round-trips through save()/load() exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (cosine branch only, no cached state).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Unbiased uniform index in [0, n). n must be >= 1.
  std::size_t uniform_index(std::size_t n);

  // Knuth's product-of-uniforms sampler; fine for the small means used here.
  int poisson(double mean);

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  // Unit vector uniform on the sphere (normalized Gaussian draw).
  std::vector<double> unit_vector(std::size_t dim);

  void save(std::ostream& os) const;
  void load(std::istream& is);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

// Deterministic sub-seed derivation (splitmix64 of master xor stream tag).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace oim

#endif  // OIM_RNG_HPP_
