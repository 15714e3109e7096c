#pragma once

// Shared aliases, error types, deterministic RNG derivation and a
// static-partition parallel loop used by the heavier modules.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ogrid {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using RowVecX = Eigen::RowVectorXd;

inline constexpr double kPi = 3.14159265358979323846;

// Base for everything this library throws; subclasses give callers a
// stable way to map failures to process exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FileNotFoundError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct EmptyMeshError : Error {
  using Error::Error;
};
struct InvalidConfigError : Error {
  using Error::Error;
};
struct BudgetTooSmallError : Error {
  using Error::Error;
};
struct NonUnitNormalError : Error {
  using Error::Error;
};
struct KeyNotInTreeError : Error {
  using Error::Error;
};
struct NotLocatedError : Error {
  using Error::Error;
};
struct EmptyBatchError : Error {
  using Error::Error;
};
struct EmptySurfaceError : Error {
  using Error::Error;
};
struct ShapeMismatchError : Error {
  using Error::Error;
};
struct BothEmptyError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

// splitmix64 finalizer. Used to derive independent sub-streams from one
// user-facing seed so that adding a consumer never shifts another's stream.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(a ^ (0x9e3779b97f4a7c15ull + mix_seed(b)));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix_seed(seed));
}

// Splits [0, n) into `threads` contiguous blocks and runs fn(block, begin, end)
// on each. Partitioning depends only on (n, threads); callers that want
// reproducible results accumulate per block and merge in block order.
template <typename Fn>
void parallel_blocks(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  if (threads < 1) threads = 1;
  const std::size_t nblocks = std::min<std::size_t>(threads, n);
  if (nblocks == 1) {
    fn(0, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nblocks);
  const std::size_t chunk = (n + nblocks - 1) / nblocks;
  for (std::size_t b = 0; b < nblocks; ++b) {
    const std::size_t lo = b * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([&fn, b, lo, hi] { fn(static_cast<int>(b), lo, hi); });
  }
  for (auto& t : pool) t.join();
}

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace ogrid
