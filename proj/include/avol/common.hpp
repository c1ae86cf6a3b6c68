#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace avol {

using Vec3 = Eigen::Vector3d;

// Error taxonomy mapped to CLI exit codes (config = 2, data = 3, numeric = 4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Lattice keys

// Integer node key: minimum-corner lattice coordinates at depth d.
struct NodeKey {
  std::uint32_t x = 0, y = 0, z = 0;
  int d = 0;

  friend bool operator==(const NodeKey&, const NodeKey&) = default;
};

// Interleave the low 21 bits of each coordinate (x lowest).
inline std::uint64_t morton3(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  auto dilate = [](std::uint64_t v) {
    v &= 0x1fffff;
    v = (v | v << 32) & 0x1f00000000ffffULL;
    v = (v | v << 16) & 0x1f0000ff0000ffULL;
    v = (v | v << 8) & 0x100f00f00f00f00fULL;
    v = (v | v << 4) & 0x10c30c30c30c30c3ULL;
    v = (v | v << 2) & 0x1249249249249249ULL;
    return v;
  };
  return dilate(x) | dilate(y) << 1 | dilate(z) << 2;
}

inline std::uint64_t morton3(const NodeKey& k) { return morton3(k.x, k.y, k.z); }

// Packed key, monotone in (depth, morton); unique per (x, y, z, d).
inline std::uint64_t pack_key(const NodeKey& k) {
  return (std::uint64_t(std::uint32_t(k.d)) << 57) | morton3(k);
}

inline bool key_less(const NodeKey& a, const NodeKey& b) {
  return pack_key(a) < pack_key(b);
}

// Cell size of a depth-d node.
inline double cell_size(int d) { return std::pow(2.0, -d); }

// Center and size of the cell identified by a key; root covers [-0.5, 0.5]^3.
inline void node_geometry(const NodeKey& k, Vec3& center, double& size) {
  size = cell_size(k.d);
  center = Vec3(-0.5 + size * (k.x + 0.5), -0.5 + size * (k.y + 0.5),
                -0.5 + size * (k.z + 0.5));
}

inline Vec3 node_center(const NodeKey& k) {
  Vec3 c;
  double s;
  node_geometry(k, c, s);
  return c;
}

// ---------------------------------------------------------------------------
// Point clouds

// Oriented point cloud in [-0.5, 0.5]^3. Normals are optional; when present
// they are unit length (normalized on construction/load).
struct PointSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;

  bool has_normals() const { return !normals.empty(); }
  size_t size() const { return positions.size(); }
};

// ---------------------------------------------------------------------------
// Deterministic random numbers
//
// Distribution transforms are implemented from raw engine output so that
// sequences are bit-stable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    return n ? next_u64() % n : 0;
  }

  double normal() {
    // Box-Muller, one value per call (the pair's second half is discarded
    // to keep the stream independent of call parity).
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  Vec3 uniform_in_box(double lo = -0.5, double hi = 0.5) {
    double x = uniform(lo, hi);
    double y = uniform(lo, hi);
    double z = uniform(lo, hi);
    return Vec3(x, y, z);
  }

  Vec3 unit_vector() {
    for (;;) {
      Vec3 v(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      double n2 = v.squaredNorm();
      if (n2 > 1e-12 && n2 <= 1.0) return v / std::sqrt(n2);
    }
  }

 private:
  std::uint64_t state_;
};

// Derive an independent stream from a base seed and a stream tag.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Worker cap (ADAPTIVE_VOLUMES_THREADS); 1 disables all internal threading.
int worker_count();

// Run fn(begin, end) over [0, n) in deterministic contiguous chunks, possibly
// on multiple threads. Results must be written to disjoint, preallocated
// slots so the output is independent of the thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace avol
