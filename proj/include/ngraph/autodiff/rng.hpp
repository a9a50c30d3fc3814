#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ngraph::ad {

/// Counter-based deterministic generator.
///
/// Every draw is a pure function of (seed, counter), so streams derived with
/// `derive()` are reproducible regardless of thread scheduling.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : seed_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::vector<std::size_t> permutation(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  const T& choice(const std::vector<T>& v) {
    return v[index(v.size())];
  }

  /// Independent stream keyed by `stream`; does not advance this generator.
  Rng derive(std::uint64_t stream) const;

  static std::uint64_t mix(std::uint64_t x);

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace ngraph::ad
