#include "avol/octree.hpp"

#include "avol/io.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace avol;
using namespace avol::testing;

TEST_CASE("node geometry") {
  Vec3 o;
  double r;
  node_geometry(NodeKey{0, 0, 0, 0}, o, r);
  CHECK(r == 1.0);
  CHECK(o == Vec3(0, 0, 0));

  node_geometry(NodeKey{0, 0, 0, 1}, o, r);
  CHECK(r == 0.5);
  CHECK(o == Vec3(-0.25, -0.25, -0.25));

  node_geometry(NodeKey{3, 2, 1, 2}, o, r);
  CHECK(r == 0.25);
  CHECK(o.x() == doctest::Approx(0.375));
  CHECK(o.y() == doctest::Approx(0.125));
  CHECK(o.z() == doctest::Approx(-0.125));
}

namespace {

int leaf_count(const Octree& t) { return int(t.leaves().size()); }

void check_matches_reference(const Octree& t, const PointSet& ps) {
  std::vector<RefNode> ref = ref_build_octree(ps, t.max_depth());
  REQUIRE(int(ref.size()) == t.node_count());
  // Both sides sorted by (depth, Morton).
  for (size_t i = 0; i < ref.size(); ++i) {
    const OctreeNode& n = t.node(int(i));
    CHECK(pack_key(n.key) == pack_key(ref[i].key));
    CHECK(n.is_leaf() == ref[i].leaf);
    CHECK(n.non_empty == ref[i].non_empty);
  }
}

}  // namespace

TEST_CASE("single point at max_depth 4 gives 519 leaves") {
  PointSet ps;
  ps.positions.emplace_back(0.1, 0.1, 0.1);
  Octree t = build_octree(ps, 4);
  CHECK(leaf_count(t) == 519);
  // 511 depth-3 leaves plus 8 depth-4 leaves.
  int d3 = 0, d4 = 0;
  for (std::int32_t i : t.leaves()) {
    if (t.node(i).key.d == 3) ++d3;
    if (t.node(i).key.d == 4) ++d4;
  }
  CHECK(d3 == 511);
  CHECK(d4 == 8);
}

TEST_CASE("max_depth 3 gives the full 512-leaf grid") {
  Rng rng(7);
  PointSet ps = random_point_set(rng, 100);
  Octree t = build_octree(ps, 3);
  CHECK(leaf_count(t) == 512);
  for (std::int32_t i : t.leaves()) CHECK(t.node(i).key.d == 3);
}

TEST_CASE("sphere cloud matches recursive reference builder") {
  Rng rng(11);
  PointSet ps;
  for (int i = 0; i < 3000; ++i) {
    ps.positions.push_back(rng.unit_vector() * 0.4);
    ps.normals.push_back(rng.unit_vector());
  }
  Octree t = build_octree(ps, 6);
  check_matches_reference(t, ps);
}

TEST_CASE("builder equivalence on random point sets") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    int count = 10 + int(rng.uniform_index(1200));
    int depth = 4 + int(rng.uniform_index(3));
    PointSet ps = random_point_set(rng, count);
    Octree t = build_octree(ps, depth);
    check_matches_reference(t, ps);
  }
}

TEST_CASE("empty point set is an error") {
  PointSet ps;
  CHECK_THROWS_WITH_AS(build_octree(ps, 4), "no input points", DataError);
}

TEST_CASE("max_depth below 3 is rejected") {
  PointSet ps;
  ps.positions.emplace_back(0, 0, 0);
  CHECK_THROWS_AS(build_octree(ps, 2), ConfigError);
}

TEST_CASE("points outside the box are clamped and counted") {
  PointSet ps;
  ps.positions.emplace_back(0.7, 0.0, 0.0);
  ps.positions.emplace_back(0.0, -1.2, 0.0);
  ps.positions.emplace_back(0.1, 0.1, 0.1);
  Octree t = build_octree(ps, 4);
  CHECK(t.clamped_points() == 2);
  // The clamped point lives in the boundary cell.
  CHECK(t.find(NodeKey{15, 8, 8, 4}) >= 0);
}

TEST_CASE("leaf cells tile the unit cube") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    PointSet ps = random_point_set(rng, 200);
    Octree t = build_octree(ps, 5);
    double vol = 0.0;
    for (std::int32_t i : t.leaves()) vol += std::pow(cell_size(t.node(i).key.d), 3.0);
    CHECK(std::abs(vol - 1.0) < 1e-12);
  }
}

TEST_CASE("construction is deterministic") {
  Rng rng(33);
  PointSet ps = random_point_set(rng, 500);
  Octree a = build_octree(ps, 5);
  Octree b = build_octree(ps, 5);
  std::ostringstream da, db;
  write_octree_dump(a, da);
  write_octree_dump(b, db);
  CHECK(da.str() == db.str());
}

TEST_CASE("non-empty nodes have non-empty ancestors") {
  Rng rng(13);
  PointSet ps = random_point_set(rng, 300);
  Octree t = build_octree(ps, 5);
  for (const OctreeNode& n : t.nodes()) {
    if (n.non_empty && n.parent >= 0) CHECK(t.node(n.parent).non_empty);
  }
}

TEST_CASE("input features: single point at cell center") {
  PointSet ps;
  // Center of finest cell (0,0,0) at depth 4.
  Vec3 center;
  double size;
  node_geometry(NodeKey{0, 0, 0, 4}, center, size);
  ps.positions.push_back(center);
  ps.normals.emplace_back(0, 0, 1);
  Octree t = build_octree(ps, 4);
  InputFeatures f = input_features(t, ps);
  CHECK(f.degenerate.empty());

  std::vector<std::int32_t> leaves = t.leaves();
  int row = -1;
  for (size_t r = 0; r < leaves.size(); ++r) {
    if (t.node(leaves[r]).key == NodeKey{0, 0, 0, 4}) row = int(r);
  }
  REQUIRE(row >= 0);
  CHECK(f.values(row, 0) == 0.0);
  CHECK(f.values(row, 1) == 0.0);
  CHECK(f.values(row, 2) == 1.0);
  CHECK(f.values(row, 3) == doctest::Approx(0.0));
}

TEST_CASE("input features: cancelling normals are flagged") {
  Vec3 center;
  double size;
  node_geometry(NodeKey{0, 0, 0, 4}, center, size);
  PointSet ps;
  ps.positions.push_back(center + Vec3(0.001, 0, 0));
  ps.positions.push_back(center - Vec3(0.001, 0, 0));
  ps.normals.emplace_back(0, 0, 1);
  ps.normals.emplace_back(0, 0, -1);
  Octree t = build_octree(ps, 4);
  InputFeatures f = input_features(t, ps);
  REQUIRE(f.degenerate.size() == 1);
  int row = f.degenerate[0];
  for (int c = 0; c < 4; ++c) CHECK(f.values(row, c) == 0.0);
}

TEST_CASE("input features match per-cell brute force") {
  Rng rng(77);
  PointSet ps = random_point_set(rng, 800);
  Octree t = build_octree(ps, 4);
  InputFeatures f = input_features(t, ps);

  std::vector<std::int32_t> leaves = t.leaves();
  for (size_t r = 0; r < leaves.size(); ++r) {
    const OctreeNode& n = t.node(leaves[r]);
    if (n.key.d != 4) {
      for (int c = 0; c < 4; ++c) CHECK(f.values(int(r), c) == 0.0);
      continue;
    }
    // Recompute by scanning all points into this cell.
    Vec3 center;
    double size;
    node_geometry(n.key, center, size);
    Vec3 nsum = Vec3::Zero(), psum = Vec3::Zero();
    int count = 0;
    for (size_t i = 0; i < ps.positions.size(); ++i) {
      Vec3 rel = ps.positions[i] - (center - Vec3::Constant(size / 2));
      if (rel.minCoeff() < 0 || rel.maxCoeff() >= size) continue;
      nsum += ps.normals[i];
      psum += ps.positions[i];
      ++count;
    }
    if (count == 0 || nsum.norm() < 1e-8) continue;
    Vec3 nrm = nsum.normalized();
    double offset = ((psum / count) - center).dot(nrm) / size;
    CHECK(f.values(int(r), 0) == doctest::Approx(nrm.x()).epsilon(1e-9));
    CHECK(f.values(int(r), 1) == doctest::Approx(nrm.y()).epsilon(1e-9));
    CHECK(f.values(int(r), 2) == doctest::Approx(nrm.z()).epsilon(1e-9));
    CHECK(f.values(int(r), 3) == doctest::Approx(offset).epsilon(1e-9));
  }
}

TEST_CASE("input features require normals") {
  PointSet ps;
  ps.positions.emplace_back(0, 0, 0);
  Octree t = build_octree(ps, 4);
  CHECK_THROWS_AS(input_features(t, ps), DataError);
}

TEST_CASE("sdf sample targets") {
  ShapeSpec sphere = make_sphere(Vec3::Zero(), 0.25);
  CHECK(sphere.sdf->eval(Vec3::Zero()) == doctest::Approx(-0.25));
  CHECK(std::abs(sphere.sdf->eval(Vec3(0.25, 0, 0))) < 1e-12);

  PointSet ps;
  Rng rng(3);
  ps = sample_surface(sphere, 500, rng);
  Octree t = build_octree(ps, 4);
  SdfSamples samples = sample_sdf_targets(t, *sphere.sdf, 2, 99);
  CHECK(samples.positions.size() == 2 * t.leaves().size());
  for (size_t i = 0; i < samples.positions.size(); ++i) {
    CHECK(samples.values[i] ==
          doctest::Approx(sphere.sdf->eval(samples.positions[i])).epsilon(1e-12));
    // A sphere SDF has unit gradient away from the center.
    if ((samples.positions[i]).norm() > 0.02) {
      CHECK(std::abs(samples.gradients[i].norm() - 1.0) < 5e-3);
    }
  }
}

TEST_CASE("octree dump format") {
  PointSet ps;
  ps.positions.emplace_back(0.1, 0.2, 0.3);
  Octree t = build_octree(ps, 3);
  std::ostringstream out;
  write_octree_dump(t, out);
  std::istringstream in(out.str());
  std::string first;
  std::getline(in, first);
  CHECK(first == "0 0 0 0 0 1");
  int lines = 1;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == t.node_count());
}
