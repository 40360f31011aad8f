#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "reshuffle/random.hpp"

namespace reshuffle {

// Bijection on {1, ..., n}, stored as its image sequence. at(p) is the value
// placed at position p, positions run 1..n to match sigma(i+1) indexing of
// the update rule. Construction validates bijectivity.
class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<int> image) : image_(std::move(image)) {
    if (!is_bijection(image_)) {
      throw std::invalid_argument("Permutation: image is not a bijection on {1..n}");
    }
  }

  static Permutation identity(int n) {
    require_size(n);
    std::vector<int> image(static_cast<std::size_t>(n));
    std::iota(image.begin(), image.end(), 1);
    return Permutation(std::move(image));
  }

  int size() const { return static_cast<int>(image_.size()); }

  int at(int position) const {
    if (position < 1 || position > size()) {
      throw std::out_of_range("Permutation::at: position outside [1, n]");
    }
    return image_[static_cast<std::size_t>(position - 1)];
  }

  int operator()(int position) const { return at(position); }

  // Position p with at(p) == value.
  int position_of(int value) const {
    for (int p = 1; p <= size(); ++p) {
      if (image_[static_cast<std::size_t>(p - 1)] == value) return p;
    }
    throw std::out_of_range("Permutation::position_of: value outside image");
  }

  const std::vector<int>& image() const { return image_; }

  bool operator==(const Permutation& other) const = default;

  static bool is_bijection(const std::vector<int>& image) {
    const int n = static_cast<int>(image.size());
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (int v : image) {
      if (v < 1 || v > n || seen[static_cast<std::size_t>(v - 1)]) return false;
      seen[static_cast<std::size_t>(v - 1)] = true;
    }
    return true;
  }

  static void require_size(int n) {
    if (n < 1) throw std::invalid_argument("Permutation: n must be >= 1");
  }

 private:
  std::vector<int> image_;
};

// Uniform draw from S_n via Fisher-Yates on the identity image.
inline Permutation uniform_permutation(int n, RandomStream& stream) {
  Permutation::require_size(n);
  std::vector<int> image(static_cast<std::size_t>(n));
  std::iota(image.begin(), image.end(), 1);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(stream.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(image[static_cast<std::size_t>(i)], image[j]);
  }
  return Permutation(std::move(image));
}

// Uniform component index in {1, ..., n}; the with-replacement sampler.
inline int with_replacement_index(int n, RandomStream& stream) {
  Permutation::require_size(n);
  return static_cast<int>(stream.next_below(static_cast<std::uint64_t>(n))) + 1;
}

// Exchange operator E_{a,b}: the images at positions a and b swap places.
inline Permutation exchange(const Permutation& tau, int a, int b) {
  if (a < 1 || a > tau.size() || b < 1 || b > tau.size()) {
    throw std::out_of_range("exchange: positions outside [1, n]");
  }
  std::vector<int> image = tau.image();
  std::swap(image[static_cast<std::size_t>(a - 1)], image[static_cast<std::size_t>(b - 1)]);
  return Permutation(std::move(image));
}

// Swap operator Lambda_{r,i}: forces value r into position i+1 with a single
// exchange (identity when it is already there). Pushing the uniform law on
// S_n through this map yields the uniform law conditioned on sigma(i+1) = r.
inline Permutation lambda_op(const Permutation& tau, int r, int i) {
  if (i < 0 || i > tau.size() - 1) {
    throw std::out_of_range("lambda_op: i outside [0, n-1]");
  }
  if (r < 1 || r > tau.size()) {
    throw std::out_of_range("lambda_op: r outside [1, n]");
  }
  const int target = i + 1;
  if (tau.at(target) == r) return tau;
  return exchange(tau, target, tau.position_of(r));
}

// Number of positions j <= i where the two permutations disagree.
inline int mismatch_count(const Permutation& sigma, const Permutation& sigma_prime, int i) {
  if (sigma.size() != sigma_prime.size()) {
    throw std::invalid_argument("mismatch_count: size mismatch");
  }
  if (i < 0 || i > sigma.size()) {
    throw std::out_of_range("mismatch_count: i outside [0, n]");
  }
  int count = 0;
  for (int j = 1; j <= i; ++j) {
    if (sigma.at(j) != sigma_prime.at(j)) ++count;
  }
  return count;
}

// Visits all n! permutations in lexicographic image order. Test helper for
// exact enumeration oracles; keep n small.
template <typename Fn>
void for_each_permutation(int n, Fn&& fn) {
  Permutation::require_size(n);
  std::vector<int> image(static_cast<std::size_t>(n));
  std::iota(image.begin(), image.end(), 1);
  do {
    fn(Permutation(image));
  } while (std::next_permutation(image.begin(), image.end()));
}

}  // namespace reshuffle
