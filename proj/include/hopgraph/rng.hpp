#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace hopgraph {

// Random source used by every stage. The standard distributions are
// implementation-defined, so all draws go through the helpers below, which
// only depend on the exactly-specified mt19937_64 output sequence. That keeps
// seeded runs byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);

  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);

  // Uniform double in [0, 1).
  double uniform01();

  bool bernoulli(double p) { return uniform01() < p; }

  // Index drawn proportionally to non-negative weights (at least one > 0).
  std::size_t weighted_index(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

// Stable 64-bit seed derivation from a parent seed and a label
// (e.g. sample id + stage name). FNV-1a over the label, mixed with the parent.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

}  // namespace hopgraph
