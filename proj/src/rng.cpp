#include "promptablate/rng.hpp"

#include <limits>

#include "promptablate/error.hpp"
#include "promptablate/text.hpp"

namespace promptablate {

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ValidationError("uniform_index over an empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Largest multiple of bound that fits; draws above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw ValidationError("cannot draw more items than available");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + uniform_index(n - i)]);
  }
  pool.resize(k);
  return pool;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::string_view> labels) {
  std::uint64_t h = splitmix64(master);
  for (std::string_view label : labels) {
    // Length prefix keeps ("ab","c") and ("a","bc") apart.
    h = text::fnv1a64(std::to_string(label.size()) + ":", h);
    h = text::fnv1a64(label, h);
    h = splitmix64(h);
  }
  return h;
}

}  // namespace promptablate
