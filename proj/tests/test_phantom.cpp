#include <doctest.h>

#include <cmath>
#include <set>

#include "tractrl/error.hpp"
#include "tractrl/evaluator.hpp"
#include "tractrl/io.hpp"
#include "tractrl/phantom.hpp"

using namespace tractrl;

namespace {
const PhantomVolume& straight_tube() {
  static const PhantomVolume v = generate_phantom(phantom_preset("straight-tube"), 42);
  return v;
}
const PhantomVolume& crossing() {
  static const PhantomVolume v = generate_phantom(phantom_preset("two-arcs-one-crossing"), 42);
  return v;
}
}  // namespace

TEST_CASE("straight tube: in-tube voxels carry a single +z unit peak at amplitude 1") {
  const PhantomVolume& v = straight_tube();
  int checked = 0;
  for (int k = 8; k <= 24; ++k) {
    const PeakSet ps = v.peaks_at(7, 7, k);
    REQUIRE(ps.count() == 1);
    CHECK(std::abs(std::abs(ps.dirs[0].z) - 1.0) < 1e-9);
    CHECK(ps.amps[0] == doctest::Approx(1.0));
    CHECK(std::abs(ps.dirs[0].norm() - 1.0) < 1e-6);
    checked++;
  }
  CHECK(checked > 0);
}

TEST_CASE("straight tube: wm mask is 1 inside, [0,1] everywhere, 0 far away") {
  const PhantomVolume& v = straight_tube();
  CHECK(v.wm_mask.at(7, 7, 16) == 1.0);
  CHECK(v.wm_mask.at(0, 0, 0) == 0.0);
  for (double m : v.wm_mask.data) {
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("crossing phantom: intersection voxels carry both tube peaks") {
  const PhantomVolume& v = crossing();
  // The two arcs intersect near (16.6, 7.5, 15).
  int two_peak_voxels = 0;
  for (int k = 12; k <= 18; ++k)
    for (int i = 13; i <= 20; ++i) {
      const PeakSet ps = v.peaks_at(i, 7, k);
      if (ps.count() == 2) {
        two_peak_voxels++;
        CHECK(std::abs(ps.dirs[0].norm() - 1.0) < 1e-6);
        CHECK(std::abs(ps.dirs[1].norm() - 1.0) < 1e-6);
        // Distinct fiber populations, not duplicates.
        CHECK(std::abs(ps.dirs[0].dot(ps.dirs[1])) < 0.95);
      }
    }
  CHECK(two_peak_voxels >= 4);
}

TEST_CASE("peak tangency: arc bundle peaks match analytic tangents within 5 degrees") {
  const PhantomSpec spec = phantom_preset("two-arcs-one-crossing");
  const PhantomVolume& v = crossing();
  const auto& arch = spec.bundles[0];
  for (double t : {0.2, 0.35, 0.5, 0.65, 0.8}) {
    const Vec3 c = bezier_point(arch.control_points, t);
    const Vec3 tangent = bezier_tangent(arch.control_points, t);
    const PeakSet ps = v.peaks_near(c);
    REQUIRE(!ps.empty());
    double best = 180.0;
    for (const Vec3& m : ps.dirs)
      best = std::min(best, std::min(segment_angle(m, tangent),
                                     segment_angle(m * -1.0, tangent)));
    CHECK(best < 5.0);
  }
}

TEST_CASE("phantom generation is deterministic at byte level") {
  const PhantomSpec spec = phantom_preset("two-arcs-one-crossing");
  const PhantomVolume a = generate_phantom(spec, 42);
  const PhantomVolume b = generate_phantom(spec, 42);
  const std::string pa = "/tmp/tractrl_det_a.phv";
  const std::string pb = "/tmp/tractrl_det_b.phv";
  save_phantom(a, pa);
  save_phantom(b, pb);
  CHECK(read_file(pa) == read_file(pb));
}

TEST_CASE("spec validation errors") {
  PhantomSpec spec = phantom_preset("straight-tube");
  SUBCASE("tube outside the grid") {
    spec.bundles[0].control_points.back().z = 40.0;  // beyond dim 32
    CHECK_THROWS_AS(generate_phantom(spec, 1), InvalidInput);
  }
  SUBCASE("duplicate labels across endpoints") {
    BundleSpec b2 = spec.bundles[0];
    b2.name = "dup";
    b2.control_points = {{7.5, 7.5, 6.0}, {7.5, 7.5, 25.0}};
    b2.label_a = 2;  // clashes with the first bundle's label_b
    b2.label_b = 3;
    spec.bundles.push_back(b2);
    CHECK_THROWS_AS(generate_phantom(spec, 1), InvalidInput);
  }
  SUBCASE("dims too small") {
    spec.dims = {8, 16, 32};
    CHECK_THROWS_AS(generate_phantom(spec, 1), InvalidInput);
  }
  SUBCASE("radius too small") {
    spec.bundles[0].radius = 0.5;
    CHECK_THROWS_AS(generate_phantom(spec, 1), InvalidInput);
  }
  SUBCASE("no bundles") {
    spec.bundles.clear();
    CHECK_THROWS_AS(generate_phantom(spec, 1), InvalidInput);
  }
}

TEST_CASE("interface seeds: exact per-voxel counts and determinism") {
  const PhantomVolume& v = straight_tube();
  const auto voxels = interface_voxels(v);
  REQUIRE(voxels.size() > 10);
  const auto seeds = interface_seeds(v, 20, 7);
  CHECK(seeds.size() == voxels.size() * 20);
  const auto again = interface_seeds(v, 20, 7);
  REQUIRE(again.size() == seeds.size());
  for (size_t i = 0; i < seeds.size(); ++i) CHECK((seeds[i] - again[i]).norm() == 0.0);
  // Jitter stays within the voxel.
  for (size_t i = 0; i < seeds.size(); ++i) {
    const Vec3 c = voxels[i / 20];
    CHECK(std::abs(seeds[i].x - c.x) <= 0.5);
    CHECK(std::abs(seeds[i].y - c.y) <= 0.5);
    CHECK(std::abs(seeds[i].z - c.z) <= 0.5);
  }
}

TEST_CASE("interface seeds: jitter disabled lands on voxel centers") {
  const PhantomVolume& v = straight_tube();
  const auto voxels = interface_voxels(v);
  const auto seeds = interface_seeds(v, 1, 7, false);
  REQUIRE(seeds.size() == voxels.size());
  for (size_t i = 0; i < seeds.size(); ++i) CHECK((seeds[i] - voxels[i]).norm() == 0.0);
}

TEST_CASE("interface seeds: both tube ends are represented") {
  const PhantomVolume& v = straight_tube();
  const auto voxels = interface_voxels(v);
  int low = 0, high = 0;
  for (const Vec3& c : voxels) (c.z < 16 ? low : high)++;
  CHECK(low > 0);
  CHECK(high > 0);
}

TEST_CASE("ROI reachability: greedy strongest-peak walk connects the tube ends") {
  const PhantomVolume& v = straight_tube();
  const auto voxels = interface_voxels(v);
  for (size_t i = 0; i < voxels.size(); i += 7) {
    Vec3 p = voxels[i];
    // Inward orientation: the +z end walks down, the -z end walks up.
    Vec3 dir = p.z < 16 ? Vec3(0, 0, 1) : Vec3(0, 0, -1);
    const uint16_t target = p.z < 16 ? 2 : 1;
    bool reached = false;
    for (int step = 0; step < 200; ++step) {
      const PeakSet ps = v.peaks_near(p);
      if (ps.empty()) break;
      Vec3 m = ps.dirs[0];
      if (m.dot(dir) < 0) m = m * -1.0;
      dir = m;
      p = p + dir * 0.5;
      const auto vox = nearest_voxel(v.dims, p);
      if (!vox) break;
      if (v.roi_at((*vox)[0], (*vox)[1], (*vox)[2]) == target) {
        reached = true;
        break;
      }
    }
    CHECK(reached);
  }
}

TEST_CASE("synthesize_labeled_set: exact counts and both classes") {
  const PhantomVolume& v = crossing();
  const auto set = synthesize_labeled_set(v, 37, 41, 5);
  REQUIRE(set.streamlines.size() == 78);
  REQUIRE(set.targets.size() == 78);
  int pos = 0;
  for (double t : set.targets) {
    CHECK((t == 0.0 || t == 1.0));
    if (t == 1.0) pos++;
  }
  CHECK(pos == 37);
  for (const auto& s : set.streamlines) CHECK(s.size() >= 2);
}

TEST_CASE("synthesize_labeled_set: positives segment as valid connections") {
  const PhantomVolume& v = crossing();
  const auto set = synthesize_labeled_set(v, 24, 4, 11);
  Tractogram t;
  for (size_t i = 0; i < set.streamlines.size(); ++i)
    if (set.targets[i] == 1.0) t.streamlines.push_back(set.streamlines[i]);
  const auto seg = segment(t, v);
  int vc = 0;
  for (const auto& r : seg) vc += r.cls == ConnClass::VC ? 1 : 0;
  CHECK(vc == int(t.size()));
}

TEST_CASE("synthesize_labeled_set: doubling-back negatives kink past 60 degrees") {
  const PhantomVolume& v = straight_tube();
  const auto set = synthesize_labeled_set(v, 4, 40, 13);
  // Negative modes cycle premature/wrong-pair/loop/exit; mode 2 is the loop.
  int checked = 0;
  for (size_t i = 0; i < set.streamlines.size(); ++i) {
    if (set.targets[i] != 0.0) continue;
    const size_t neg_index = i - 4;  // positives first
    if (neg_index % 4 != 2) continue;
    const auto& s = set.streamlines[i];
    double max_angle = 0.0;
    for (size_t k = 2; k < s.size(); ++k) {
      const Vec3 u = s[k - 1] - s[k - 2];
      const Vec3 w = s[k] - s[k - 1];
      if (u.norm() == 0 || w.norm() == 0) continue;
      max_angle = std::max(max_angle, segment_angle(u, w));
    }
    CHECK(max_angle > 60.0);
    checked++;
  }
  CHECK(checked == 10);
}

TEST_CASE("synthesize_labeled_set: determinism") {
  const PhantomVolume& v = straight_tube();
  const auto a = synthesize_labeled_set(v, 8, 8, 3);
  const auto b = synthesize_labeled_set(v, 8, 8, 3);
  REQUIRE(a.streamlines.size() == b.streamlines.size());
  for (size_t i = 0; i < a.streamlines.size(); ++i) {
    REQUIRE(a.streamlines[i].size() == b.streamlines[i].size());
    for (size_t j = 0; j < a.streamlines[i].size(); ++j)
      CHECK((a.streamlines[i][j] - b.streamlines[i][j]).norm() == 0.0);
  }
}

TEST_CASE("bundle masks stay inside the WM support") {
  const PhantomVolume& v = crossing();
  for (const auto& b : v.bundles)
    for (int64_t i = 0; i < v.dims.voxels(); ++i)
      if (b.mask[size_t(i)]) CHECK(v.wm_mask.data[size_t(i)] > 0.0);
}

TEST_CASE("valid pairs reference the configured labels") {
  const PhantomVolume& v = crossing();
  CHECK(v.pair_valid(1, 2));
  CHECK(v.pair_valid(2, 1));
  CHECK(v.pair_valid(3, 4));
  CHECK(!v.pair_valid(1, 3));
  CHECK(!v.pair_valid(1, 1));
  CHECK(v.bundle_for_pair(3, 4) == 1);
}

TEST_CASE("presets are all generable and carry interface voxels") {
  for (const auto& name : phantom_preset_names()) {
    const PhantomVolume v = generate_phantom(phantom_preset(name), 1);
    CHECK(!interface_voxels(v).empty());
  }
  CHECK_THROWS_AS(phantom_preset("nope"), InvalidInput);
}
