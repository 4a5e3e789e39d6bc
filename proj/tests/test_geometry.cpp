#include <doctest.h>

#include <cmath>

#include "tractrl/error.hpp"
#include "tractrl/geometry.hpp"
#include "tractrl/rng.hpp"

using namespace tractrl;

namespace {

// Independent resampling oracle: walk the polyline in tiny fixed substeps
// and emit a point every total/(n-1) of accumulated length.
Streamline brute_force_resample(const Streamline& s, int n, int substeps_per_segment) {
  std::vector<Vec3> dense;
  for (size_t i = 0; i + 1 < s.size(); ++i)
    for (int k = 0; k < substeps_per_segment; ++k)
      dense.push_back(s[i] + (s[i + 1] - s[i]) * (double(k) / substeps_per_segment));
  dense.push_back(s.back());

  double total = 0.0;
  for (size_t i = 1; i < dense.size(); ++i) total += (dense[i] - dense[i - 1]).norm();

  Streamline out;
  out.push_back(s.front());
  double acc = 0.0;
  size_t j = 1;
  for (int i = 1; i < n - 1; ++i) {
    const double target = total * double(i) / double(n - 1);
    while (j < dense.size() && acc + (dense[j] - dense[j - 1]).norm() < target) {
      acc += (dense[j] - dense[j - 1]).norm();
      j++;
    }
    const double seg = (dense[j] - dense[j - 1]).norm();
    const double t = seg > 0 ? (target - acc) / seg : 0.0;
    out.push_back(dense[j - 1] + (dense[j] - dense[j - 1]) * t);
  }
  out.push_back(s.back());
  return out;
}

// Second independent trilinear implementation (plain 8-corner weighted sum).
double trilinear_oracle(const ScalarField3D& f, const Vec3& p) {
  const int i0 = int(std::floor(p.x)), j0 = int(std::floor(p.y)), k0 = int(std::floor(p.z));
  double acc = 0.0;
  for (int dk = 0; dk <= 1; ++dk)
    for (int dj = 0; dj <= 1; ++dj)
      for (int di = 0; di <= 1; ++di) {
        const double wx = di ? (p.x - i0) : (1.0 - (p.x - i0));
        const double wy = dj ? (p.y - j0) : (1.0 - (p.y - j0));
        const double wz = dk ? (p.z - k0) : (1.0 - (p.z - k0));
        acc += wx * wy * wz * f.at(i0 + di, j0 + dj, k0 + dk);
      }
  return acc;
}

}  // namespace

TEST_CASE("resample: uniform subdivision of a straight segment") {
  const Streamline s = {{0, 0, 0}, {0, 0, 10}};
  const Streamline r = resample(s, 5);
  REQUIRE(r.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(r[size_t(i)].x == 0.0);
    CHECK(r[size_t(i)].y == 0.0);
    CHECK(r[size_t(i)].z == doctest::Approx(2.5 * i).epsilon(1e-12));
  }
  CHECK(r.front() == s.front());
  CHECK(r.back() == s.back());
}

TEST_CASE("resample: identity on an already uniform streamline") {
  Streamline s;
  for (int i = 0; i <= 8; ++i) s.push_back({double(i), 0, 0});
  const Streamline r = resample(s, int(s.size()));
  for (size_t i = 0; i < s.size(); ++i) {
    CHECK(std::abs(r[i].x - s[i].x) < 1e-9);
    CHECK(std::abs(r[i].y - s[i].y) < 1e-9);
    CHECK(std::abs(r[i].z - s[i].z) < 1e-9);
  }
}

TEST_CASE("resample: L-shaped polyline splits at the corner") {
  const Streamline s = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}};
  const Streamline r = resample(s, 3);
  REQUIRE(r.size() == 3);
  CHECK(std::abs(r[1].x - 1.0) < 1e-9);
  CHECK(std::abs(r[1].y - 0.0) < 1e-9);
  // Brute-force arc-length walk agrees.
  const Streamline oracle = brute_force_resample(s, 3, 1000000);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(r[i].x - oracle[i].x) < 1e-6);
    CHECK(std::abs(r[i].y - oracle[i].y) < 1e-6);
  }
}

TEST_CASE("resample: brute-force agreement on random polylines") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Streamline s;
    Vec3 p(0, 0, 0);
    s.push_back(p);
    for (int i = 0; i < 12; ++i) {
      p += Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 1));
      s.push_back(p);
    }
    const int n = 17;
    const Streamline fast = resample(s, n);
    const Streamline slow = brute_force_resample(s, n, 20000);
    for (int i = 0; i < n; ++i)
      CHECK((fast[size_t(i)] - slow[size_t(i)]).norm() < 1e-5);
  }
}

TEST_CASE("resample: outputs are equidistant in arc length along the input") {
  Rng rng(11);
  Streamline s;
  Vec3 p(0, 0, 0);
  s.push_back(p);
  for (int i = 0; i < 9; ++i) {
    p += Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    s.push_back(p);
  }
  const int n = 33;
  const Streamline r = resample(s, n);
  // Arc position of each output point on the input polyline.
  std::vector<double> cum(s.size(), 0.0);
  for (size_t i = 1; i < s.size(); ++i) cum[i] = cum[i - 1] + (s[i] - s[i - 1]).norm();
  auto arc_of = [&](const Vec3& q) {
    double best = 1e30, arc = 0.0;
    for (size_t i = 0; i + 1 < s.size(); ++i) {
      const Vec3 d = s[i + 1] - s[i];
      const double len2 = d.norm2();
      const double t = len2 > 0 ? std::clamp((q - s[i]).dot(d) / len2, 0.0, 1.0) : 0.0;
      const Vec3 proj = s[i] + d * t;
      const double dist = (q - proj).norm();
      if (dist < best) {
        best = dist;
        arc = cum[i] + d.norm() * t;
      }
    }
    return arc;
  };
  const double want = cum.back() / (n - 1);
  for (size_t i = 1; i < r.size(); ++i)
    CHECK(std::abs((arc_of(r[i]) - arc_of(r[i - 1])) - want) < 1e-9);
}

TEST_CASE("resample: idempotent on arc-length-uniform inputs") {
  // Exact-fixpoint cases: the first pass already yields a polyline whose own
  // chord gaps are uniform (straight pieces and homogeneous curves).
  SUBCASE("straight segment") {
    const Streamline s = {{0, 0, 0}, {3, 4, 12}};
    const Streamline once = resample(s, 21);
    const Streamline twice = resample(once, 21);
    for (size_t i = 0; i < once.size(); ++i) CHECK((once[i] - twice[i]).norm() < 1e-9);
  }
  SUBCASE("uniform polyline identity") {
    Streamline s;
    for (int i = 0; i < 17; ++i) s.push_back({double(2 * i), 0, 0});
    const Streamline once = resample(s, 17);
    const Streamline twice = resample(once, 17);
    for (size_t i = 0; i < once.size(); ++i) CHECK((once[i] - twice[i]).norm() < 1e-9);
  }
  SUBCASE("helix (constant curvature, commensurate sampling)") {
    // 315 = 5 * 63 congruent segments: the first pass lands on every fifth
    // vertex, whose chords are congruent by screw symmetry.
    Streamline s;
    for (int i = 0; i <= 315; ++i) {
      const double t = 4.0 * M_PI * double(i) / 315;
      s.push_back({2.0 * std::cos(t), 2.0 * std::sin(t), 0.5 * t});
    }
    const Streamline once = resample(s, 64);
    const Streamline twice = resample(once, 64);
    for (size_t i = 0; i < once.size(); ++i) CHECK((once[i] - twice[i]).norm() < 1e-9);
  }
}

TEST_CASE("resample: second pass drifts only by corner cutting on bent inputs") {
  // On a polyline with a sharp corner the resampled chain cuts the corner,
  // so a second pass shifts interior points slightly; the drift stays small
  // relative to the gap and a third pass reproduces the second.
  const Streamline s = {{0, 0, 0}, {5, 0, 0}, {5, 5, 0}};
  const Streamline once = resample(s, 11);
  const Streamline twice = resample(once, 11);
  const double gap = arc_length(once) / 10.0;
  for (size_t i = 0; i < once.size(); ++i)
    CHECK((once[i] - twice[i]).norm() < 0.05 * gap);
}

TEST_CASE("resample: preserves helix arc length within 0.5%") {
  // Helix radius 2, rise c per radian; closed form: turns * 2pi * sqrt(r^2+c^2).
  const double r = 2.0, c = 0.5, turns = 3.0;
  Streamline s;
  const int n_in = 400;
  for (int i = 0; i <= n_in; ++i) {
    const double t = turns * 2.0 * M_PI * double(i) / n_in;
    s.push_back({r * std::cos(t), r * std::sin(t), c * t});
  }
  const double closed_form = turns * 2.0 * M_PI * std::sqrt(r * r + c * c);
  const Streamline rs = resample(s, 64);
  CHECK(std::abs(arc_length(rs) - closed_form) / closed_form < 0.005);
}

TEST_CASE("resample: error cases") {
  CHECK_THROWS_AS(resample({{0, 0, 0}}, 5), InvalidInput);
  CHECK_THROWS_AS(resample({{1, 1, 1}, {1, 1, 1}}, 5), DegenerateInput);
  CHECK_THROWS_AS(resample({{0, 0, 0}, {1, 0, 0}}, 1), InvalidInput);
}

TEST_CASE("trilinear: exact on affine fields") {
  Rng rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), cc = rng.uniform(-2, 2),
                 d = rng.uniform(-2, 2);
    ScalarField3D f({5, 6, 7});
    for (int k = 0; k < 7; ++k)
      for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 5; ++i) f.at(i, j, k) = a + b * i + cc * j + d * k;
    for (int probe = 0; probe < 50; ++probe) {
      const Vec3 p(rng.uniform(0, 4), rng.uniform(0, 5), rng.uniform(0, 6));
      const double got = trilinear(f, p).value();
      CHECK(std::abs(got - (a + b * p.x + cc * p.y + d * p.z)) <= 1e-12);
    }
  }
}

TEST_CASE("trilinear: f(i,j,k)=i sampled off-center") {
  ScalarField3D f({4, 4, 4});
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) f.at(i, j, k) = double(i);
  CHECK(trilinear(f, {0.3, 0.5, 0.5}).value() == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("trilinear: voxel centers return stored values") {
  Rng rng(9);
  ScalarField3D f({4, 4, 4});
  for (auto& v : f.data) v = rng.uniform(-5, 5);
  CHECK(trilinear(f, {2, 1, 3}).value() == f.at(2, 1, 3));
  CHECK(trilinear(f, {0, 0, 0}).value() == f.at(0, 0, 0));
}

TEST_CASE("trilinear: matches independent 8-corner oracle on random fields") {
  Rng rng(13);
  ScalarField3D f({4, 4, 4});
  for (auto& v : f.data) v = rng.uniform(-1, 1);
  for (int probe = 0; probe < 100; ++probe) {
    const Vec3 p(rng.uniform(0.01, 2.99), rng.uniform(0.01, 2.99), rng.uniform(0.01, 2.99));
    CHECK(std::abs(trilinear(f, p).value() - trilinear_oracle(f, p)) < 1e-12);
  }
}

TEST_CASE("trilinear: out of bounds signals instead of extrapolating") {
  ScalarField3D f({4, 4, 4}, 1.0);
  CHECK(!trilinear(f, {-0.1, 1, 1}).has_value());
  CHECK(!trilinear(f, {1, 3.01, 1}).has_value());
  CHECK(trilinear(f, {3.0, 3.0, 3.0}).has_value());
  // Vector variant agrees with the scalar one per component.
  VectorField3D vf({4, 4, 4}, 2);
  Rng rng(17);
  for (auto& v : vf.data) v = rng.uniform(-1, 1);
  const Vec3 p(1.3, 2.1, 0.7);
  const auto vec = trilinear(vf, p).value();
  for (int c = 0; c < 2; ++c) {
    ScalarField3D comp({4, 4, 4});
    for (int64_t i = 0; i < 64; ++i) comp.data[size_t(i)] = vf.data[size_t(i * 2 + c)];
    CHECK(std::abs(vec[size_t(c)] - trilinear(comp, p).value()) < 1e-12);
  }
}

TEST_CASE("segment_angle: known angles") {
  CHECK(segment_angle({1, 0, 0}, {0, 1, 0}) == doctest::Approx(90.0).epsilon(1e-12));
  CHECK(segment_angle({1, 0, 0}, {2, 0, 0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(segment_angle({1, 0, 0}, {1, 1, 0}) - 45.0) < 1e-9);
  CHECK(segment_angle({1, 2, 3}, {-1, -2, -3}) == doctest::Approx(180.0).epsilon(1e-9));
}

TEST_CASE("segment_angle: symmetry and errors") {
  Rng rng(23);
  for (int i = 0; i < 20; ++i) {
    const Vec3 u(rng.normal(), rng.normal(), rng.normal());
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    if (u.norm() == 0 || v.norm() == 0) continue;
    CHECK(segment_angle(u, v) == doctest::Approx(segment_angle(v, u)).epsilon(1e-12));
    CHECK(segment_angle(u, v) >= 0.0);
    CHECK(segment_angle(u, v) <= 180.0);
  }
  CHECK_THROWS_AS(segment_angle({0, 0, 0}, {1, 0, 0}), InvalidInput);
}

TEST_CASE("to_directions: consecutive differences") {
  const DirectionSequence d = to_directions({{0, 0, 0}, {0, 0, 1}, {0, 0, 2}});
  REQUIRE(d.size() == 2);
  CHECK(d[0] == Vec3(0, 0, 1));
  CHECK(d[1] == Vec3(0, 0, 1));
  CHECK_THROWS_AS(to_directions({{0, 0, 0}}), InvalidInput);
}

TEST_CASE("to_directions: 128-point resampled streamline gives 127 directions") {
  Streamline s;
  for (int i = 0; i < 7; ++i) s.push_back({double(i), std::sin(i * 0.5), 0});
  CHECK(to_directions(resample(s, 128)).size() == 127);
}

TEST_CASE("to_directions: reversal negates and reverses") {
  Rng rng(31);
  Streamline s;
  for (int i = 0; i < 9; ++i) s.push_back({rng.uniform(0, 5), rng.uniform(0, 5), double(i)});
  Streamline rev(s.rbegin(), s.rend());
  const auto d = to_directions(s);
  const auto dr = to_directions(rev);
  REQUIRE(d.size() == dr.size());
  for (size_t i = 0; i < d.size(); ++i) {
    const Vec3 want = d[d.size() - 1 - i] * -1.0;
    CHECK((dr[i] - want).norm() < 1e-12);
  }
}
