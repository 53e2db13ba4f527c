#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace promptablate {

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the standard; index draws use rejection sampling instead of
// std::uniform_int_distribution so results do not depend on the standard
// library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent substream seed from a master seed and a list of
// labels (instance id, corruption kind, ...). Order of labels matters.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::string_view> labels);

}  // namespace promptablate
