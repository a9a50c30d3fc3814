#include "ngraph/autodiff/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace ngraph::ad {

std::uint64_t Rng::mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix(seed_ ^ mix(counter_));
}

double Rng::uniform() {
  // 53 random mantissa bits
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal(double mean, double stddev) {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>(next_u64() % n);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  shuffle(p);
  return p;
}

Rng Rng::derive(std::uint64_t stream) const {
  Rng r;
  r.seed_ = mix(seed_ ^ mix(stream + 0x632BE59BD9B4E019ULL));
  return r;
}

}  // namespace ngraph::ad
