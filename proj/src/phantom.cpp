#include "tractrl/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tractrl/error.hpp"

namespace tractrl {

PeakSet PhantomVolume::peaks_at(int i, int j, int k) const {
  PeakSet out;
  const double* p = peaks.at(i, j, k);
  for (int m = 0; m < max_peaks; ++m) {
    const double amp = p[4 * m + 3];
    if (amp <= 0.0) break;  // packed, sorted descending
    out.dirs.emplace_back(p[4 * m + 0], p[4 * m + 1], p[4 * m + 2]);
    out.amps.push_back(amp);
  }
  return out;
}

PeakSet PhantomVolume::peaks_near(const Vec3& p) const {
  const auto vox = nearest_voxel(dims, p);
  if (!vox) return {};
  return peaks_at((*vox)[0], (*vox)[1], (*vox)[2]);
}

bool PhantomVolume::pair_valid(uint16_t a, uint16_t b) const {
  return bundle_for_pair(a, b) >= 0;
}

int PhantomVolume::bundle_for_pair(uint16_t a, uint16_t b) const {
  for (size_t i = 0; i < bundles.size(); ++i) {
    const auto& bd = bundles[i];
    if ((bd.label_a == a && bd.label_b == b) || (bd.label_a == b && bd.label_b == a))
      return int(i);
  }
  return -1;
}

Vec3 bezier_point(const std::vector<Vec3>& ctrl, double t) {
  std::vector<Vec3> pts = ctrl;
  for (size_t level = pts.size(); level > 1; --level)
    for (size_t i = 0; i + 1 < level; ++i) pts[i] = pts[i] + (pts[i + 1] - pts[i]) * t;
  return pts[0];
}

Vec3 bezier_tangent(const std::vector<Vec3>& ctrl, double t) {
  if (ctrl.size() < 2) throw InvalidInput("bezier_tangent: need >= 2 control points");
  // Derivative of a degree-n Bezier is a degree-(n-1) Bezier of the forward
  // differences.
  std::vector<Vec3> diff(ctrl.size() - 1);
  for (size_t i = 0; i + 1 < ctrl.size(); ++i)
    diff[i] = (ctrl[i + 1] - ctrl[i]) * double(ctrl.size() - 1);
  return bezier_point(diff, t).normalized();
}

namespace {

struct CenterlineSample {
  Vec3 pos;
  Vec3 tangent;  // unit
  double arc;    // cumulative arc length
};

std::vector<CenterlineSample> sample_centerline(const BundleSpec& b, int n = 256) {
  std::vector<CenterlineSample> out(static_cast<size_t>(n));
  double arc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = double(i) / double(n - 1);
    out[size_t(i)].pos = bezier_point(b.control_points, t);
    out[size_t(i)].tangent = bezier_tangent(b.control_points, t);
    if (i > 0) arc += (out[size_t(i)].pos - out[size_t(i - 1)].pos).norm();
    out[size_t(i)].arc = arc;
  }
  return out;
}

// Distance from p to the sampled centerline, plus the tangent and arc
// parameter at the closest sample.
struct Closest {
  double dist;
  Vec3 tangent;
  double arc;
};

Closest closest_on(const std::vector<CenterlineSample>& line, const Vec3& p) {
  Closest best{1e30, {}, 0.0};
  for (const auto& s : line) {
    const double d2 = (p - s.pos).norm2();
    if (d2 < best.dist) {
      best.dist = d2;
      best.tangent = s.tangent;
      best.arc = s.arc;
    }
  }
  best.dist = std::sqrt(best.dist);
  return best;
}

void validate_spec(const PhantomSpec& spec) {
  if (spec.bundles.empty()) throw InvalidInput("phantom spec: needs >= 1 bundle");
  if (spec.dims.x < 16 || spec.dims.y < 16 || spec.dims.z < 16)
    throw InvalidInput("phantom spec: dims must each be >= 16");
  if (spec.max_peaks < 1 || spec.max_peaks > 255)
    throw InvalidInput("phantom spec: max_peaks out of range");
  std::set<uint16_t> labels;
  for (const auto& b : spec.bundles) {
    if (b.control_points.size() < 2)
      throw InvalidInput("phantom spec: bundle \"" + b.name + "\" needs >= 2 control points");
    if (b.radius < 1.0)
      throw InvalidInput("phantom spec: bundle \"" + b.name + "\" tube radius must be >= 1");
    if (b.label_a == 0 || b.label_b == 0 || b.label_a == b.label_b)
      throw InvalidInput("phantom spec: bundle \"" + b.name +
                         "\" needs two distinct nonzero ROI labels");
    for (uint16_t l : {b.label_a, b.label_b})
      if (!labels.insert(l).second)
        throw InvalidInput("phantom spec: duplicate ROI label " + std::to_string(l) +
                           " across distinct endpoints");
    // Tube plus its endpoint ROI shells must stay inside the grid.
    const double margin = b.radius + 1.0;
    const auto line = sample_centerline(b, 64);
    for (const auto& s : line) {
      if (s.pos.x < margin || s.pos.y < margin || s.pos.z < margin ||
          s.pos.x > spec.dims.x - 1 - margin || s.pos.y > spec.dims.y - 1 - margin ||
          s.pos.z > spec.dims.z - 1 - margin)
        throw InvalidInput("phantom spec: bundle \"" + b.name +
                           "\" tube extends outside the grid");
    }
  }
}

}  // namespace

PhantomVolume generate_phantom(const PhantomSpec& spec, uint64_t rng_seed) {
  validate_spec(spec);
  (void)rng_seed;  // generation is analytic; the seed is reserved for future noise

  PhantomVolume v;
  v.dims = spec.dims;
  v.voxel_size = spec.voxel_size;
  v.max_peaks = spec.max_peaks;
  v.wm_mask = ScalarField3D(spec.dims, 0.0);
  v.peaks = VectorField3D(spec.dims, 4 * spec.max_peaks);
  v.roi_labels.assign(size_t(spec.dims.voxels()), 0);
  v.bundles.resize(spec.bundles.size());

  std::vector<std::vector<CenterlineSample>> lines;
  lines.reserve(spec.bundles.size());
  for (const auto& b : spec.bundles) lines.push_back(sample_centerline(b));

  for (size_t bi = 0; bi < spec.bundles.size(); ++bi) {
    v.bundles[bi].label_a = spec.bundles[bi].label_a;
    v.bundles[bi].label_b = spec.bundles[bi].label_b;
    v.bundles[bi].mask.assign(size_t(spec.dims.voxels()), 0);
  }

  struct PeakAcc {
    Vec3 dir;
    double amp;
  };
  std::vector<PeakAcc> acc;

  for (int k = 0; k < spec.dims.z; ++k) {
    for (int j = 0; j < spec.dims.y; ++j) {
      for (int i = 0; i < spec.dims.x; ++i) {
        const Vec3 c(i, j, k);
        const int64_t idx = v.voxel_index(i, j, k);
        acc.clear();
        double wm = 0.0;
        for (size_t bi = 0; bi < spec.bundles.size(); ++bi) {
          const double r = spec.bundles[bi].radius;
          const Closest cl = closest_on(lines[bi], c);
          if (cl.dist <= r) {
            acc.push_back({cl.tangent, 1.0});
            wm = 1.0;
            v.bundles[bi].mask[size_t(idx)] = 1;
          } else if (cl.dist <= r + 1.0) {
            wm = std::max(wm, r + 1.0 - cl.dist);
          }
        }
        v.wm_mask.data[size_t(idx)] = wm;
        const int n_keep = std::min<int>(int(acc.size()), spec.max_peaks);
        double* slot = v.peaks.at(i, j, k);
        for (int m = 0; m < n_keep; ++m) {
          slot[4 * m + 0] = acc[size_t(m)].dir.x;
          slot[4 * m + 1] = acc[size_t(m)].dir.y;
          slot[4 * m + 2] = acc[size_t(m)].dir.z;
          slot[4 * m + 3] = acc[size_t(m)].amp;
        }
      }
    }
  }

  // Endpoint ROI shells: spheres of radius r+1 around each centerline end,
  // labelling only voxels outside every tube interior so the tube cap stays
  // white matter and the shell plays the grey-matter role.
  for (size_t bi = 0; bi < spec.bundles.size(); ++bi) {
    const auto& b = spec.bundles[bi];
    const double roi_r = b.radius + 1.0;
    const Vec3 ends[2] = {bezier_point(b.control_points, 0.0),
                          bezier_point(b.control_points, 1.0)};
    const uint16_t lab[2] = {b.label_a, b.label_b};
    for (int e = 0; e < 2; ++e) {
      const Vec3 center = ends[e];
      const int i0 = std::max(0, int(std::floor(center.x - roi_r)));
      const int i1 = std::min(spec.dims.x - 1, int(std::ceil(center.x + roi_r)));
      const int j0 = std::max(0, int(std::floor(center.y - roi_r)));
      const int j1 = std::min(spec.dims.y - 1, int(std::ceil(center.y + roi_r)));
      const int k0 = std::max(0, int(std::floor(center.z - roi_r)));
      const int k1 = std::min(spec.dims.z - 1, int(std::ceil(center.z + roi_r)));
      for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j)
          for (int i = i0; i <= i1; ++i) {
            const Vec3 c(i, j, k);
            if ((c - center).norm() > roi_r) continue;
            bool in_tube = false;
            for (size_t ob = 0; ob < spec.bundles.size() && !in_tube; ++ob)
              if (closest_on(lines[ob], c).dist <= spec.bundles[ob].radius) in_tube = true;
            if (in_tube) continue;
            v.roi_labels[size_t(v.voxel_index(i, j, k))] = lab[e];
          }
    }
  }
  return v;
}

std::vector<Vec3> interface_voxels(const PhantomVolume& v) {
  std::vector<Vec3> out;
  const int di[6] = {1, -1, 0, 0, 0, 0};
  const int dj[6] = {0, 0, 1, -1, 0, 0};
  const int dk[6] = {0, 0, 0, 0, 1, -1};
  for (int k = 0; k < v.dims.z; ++k)
    for (int j = 0; j < v.dims.y; ++j)
      for (int i = 0; i < v.dims.x; ++i) {
        // Tube-interior voxels only: seeds must sit where peaks exist.
        if (v.peaks.at(i, j, k)[3] <= 0.0) continue;
        for (int d = 0; d < 6; ++d) {
          const int ni = i + di[d], nj = j + dj[d], nk = k + dk[d];
          if (!v.wm_mask.contains(ni, nj, nk)) continue;
          if (v.roi_at(ni, nj, nk) != 0) {
            out.emplace_back(i, j, k);
            break;
          }
        }
      }
  return out;
}

std::vector<Vec3> interface_seeds(const PhantomVolume& v, int per_voxel, uint64_t rng_seed,
                                  bool jitter) {
  if (per_voxel < 1) throw InvalidInput("interface_seeds: per_voxel must be >= 1");
  const auto voxels = interface_voxels(v);
  if (voxels.empty())
    throw InvalidInput("interface_seeds: phantom has no WM/GM interface voxels");
  Rng rng(rng_seed);
  std::vector<Vec3> seeds;
  seeds.reserve(voxels.size() * size_t(per_voxel));
  for (const Vec3& c : voxels)
    for (int s = 0; s < per_voxel; ++s) {
      Vec3 p = c;
      if (jitter) {
        p.x += rng.uniform(-0.5, 0.5);
        p.y += rng.uniform(-0.5, 0.5);
        p.z += rng.uniform(-0.5, 0.5);
      }
      seeds.push_back(p);
    }
  return seeds;
}

// --------------------------------------------------------------------------
// Labeled set synthesis

namespace {

double wm_at(const PhantomVolume& v, const Vec3& p) {
  return trilinear(v.wm_mask, p).value_or(0.0);
}

// Peak-following walker shared by every synthesis mode. Walks with step
// `step` until WM exit or `max_steps`, optionally jittering each direction.
struct Walker {
  const PhantomVolume& v;
  Rng& rng;
  double step = 0.5;
  double jitter_sigma = 0.0;

  // Picks the peak best aligned with `dir` (absolute cosine), sign-corrected.
  // Returns nullopt in peak-free voxels.
  std::optional<Vec3> aligned_peak(const Vec3& pos, const Vec3& dir) const {
    const PeakSet ps = v.peaks_near(pos);
    if (ps.empty()) return std::nullopt;
    double best = -1.0;
    Vec3 pick;
    for (size_t m = 0; m < ps.count(); ++m) {
      const double c = ps.dirs[m].dot(dir);
      if (std::abs(c) > best) {
        best = std::abs(c);
        pick = c >= 0.0 ? ps.dirs[m] : ps.dirs[m] * -1.0;
      }
    }
    return pick;
  }

  Vec3 perturb(const Vec3& dir) {
    if (jitter_sigma <= 0.0) return dir;
    Vec3 d(dir.x + rng.normal() * jitter_sigma, dir.y + rng.normal() * jitter_sigma,
           dir.z + rng.normal() * jitter_sigma);
    const double n = d.norm();
    return n > 0.0 ? d / n : dir;
  }

  // Extends `s` by up to max_steps points following peaks from `dir`.
  // Keeps the WM-exit point, like the tracking loop does.
  void follow(Streamline& s, Vec3 dir, int max_steps) {
    Vec3 pos = s.back();
    for (int t = 0; t < max_steps; ++t) {
      const auto peak = aligned_peak(pos, dir);
      if (!peak) break;
      dir = perturb(*peak);
      pos = pos + dir * step;
      s.push_back(pos);
      if (wm_at(v, pos) < 0.1) break;
    }
  }
};

// Rotates `dir` by `angle_deg` within the plane spanned by dir and a random
// perpendicular axis.
Vec3 rotate_by(const Vec3& dir, double angle_deg, Rng& rng) {
  Vec3 axis;
  do {
    axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    axis = axis - dir * axis.dot(dir);
  } while (axis.norm() < 1e-6);
  axis = axis / axis.norm();
  const double a = angle_deg * M_PI / 180.0;
  return dir * std::cos(a) + axis * std::sin(a);
}

struct EndInfo {
  Vec3 cap_center;   // centerline endpoint
  Vec3 inward;       // unit tangent pointing into the tube
};

EndInfo end_info(const BundleSpec& b, int end) {
  EndInfo e;
  if (end == 0) {
    e.cap_center = bezier_point(b.control_points, 0.0);
    e.inward = bezier_tangent(b.control_points, 0.0);
  } else {
    e.cap_center = bezier_point(b.control_points, 1.0);
    e.inward = bezier_tangent(b.control_points, 1.0) * -1.0;
  }
  return e;
}

}  // namespace

LabeledStreamlineSet synthesize_labeled_set(const PhantomVolume& v, int n_pos, int n_neg,
                                            uint64_t rng_seed) {
  if (n_pos < 1 || n_neg < 1)
    throw InvalidInput("synthesize_labeled_set: needs n_pos, n_neg >= 1");
  if (v.bundles.empty()) throw InvalidInput("synthesize_labeled_set: phantom has no bundles");

  // Rebuild bundle endpoint geometry from the masks: approximate each cap by
  // the in-mask voxel closest to each ROI shell.
  // The spec-side BundleSpec is not stored in the volume, so recover endpoint
  // positions from ROI label centroids instead.
  struct BundleGeom {
    Vec3 end_a, end_b;      // cap centers (ROI centroid projected to mask)
    Vec3 inward_a, inward_b;  // inward tangents at the caps
    double arc_length = 0.0;
  };
  std::vector<BundleGeom> geom(v.bundles.size());
  {
    // ROI centroids per label.
    std::vector<Vec3> centroid(65536, Vec3());
    std::vector<int> count(65536, 0);
    for (int k = 0; k < v.dims.z; ++k)
      for (int j = 0; j < v.dims.y; ++j)
        for (int i = 0; i < v.dims.x; ++i) {
          const uint16_t l = v.roi_at(i, j, k);
          if (l) {
            centroid[l] += Vec3(i, j, k);
            count[l]++;
          }
        }
    for (int l = 0; l < 65536; ++l)
      if (count[l]) centroid[size_t(l)] = centroid[size_t(l)] / double(count[l]);

    for (size_t bi = 0; bi < v.bundles.size(); ++bi) {
      const auto& b = v.bundles[bi];
      // Cap center: in-bundle voxel closest to the ROI centroid.
      auto cap_near = [&](uint16_t label) {
        const Vec3 target = centroid[label];
        Vec3 best;
        double best_d = 1e30;
        for (int k = 0; k < v.dims.z; ++k)
          for (int j = 0; j < v.dims.y; ++j)
            for (int i = 0; i < v.dims.x; ++i) {
              if (!b.mask[size_t(v.voxel_index(i, j, k))]) continue;
              const double d = (Vec3(i, j, k) - target).norm2();
              if (d < best_d) {
                best_d = d;
                best = Vec3(i, j, k);
              }
            }
        return best;
      };
      geom[bi].end_a = cap_near(b.label_a);
      geom[bi].end_b = cap_near(b.label_b);
      // Inward tangent: strongest peak at the cap, oriented toward the other
      // end.
      auto inward = [&](const Vec3& cap, const Vec3& other) {
        const PeakSet ps = v.peaks_near(cap);
        Vec3 axis = (other - cap);
        if (axis.norm() < 1e-9) axis = Vec3(0, 0, 1);
        axis = axis / axis.norm();
        if (ps.empty()) return axis;
        const Vec3 m = ps.dirs[0];
        return m.dot(axis) >= 0.0 ? m : m * -1.0;
      };
      geom[bi].inward_a = inward(geom[bi].end_a, geom[bi].end_b);
      geom[bi].inward_b = inward(geom[bi].end_b, geom[bi].end_a);
      // Rough arc length: voxel count along the mask divided by tube cross
      // section is unreliable; use cap distance as a lower bound.
      geom[bi].arc_length = (geom[bi].end_a - geom[bi].end_b).norm();
    }
  }

  Rng rng(rng_seed);
  LabeledStreamlineSet out;
  out.streamlines.reserve(size_t(n_pos + n_neg));
  out.targets.reserve(size_t(n_pos + n_neg));

  const double step = 0.5;
  const int max_steps = 400;

  auto start_of = [&](size_t bi, int end, Walker& w) -> std::pair<Vec3, Vec3> {
    const auto& g = geom[bi];
    const Vec3 cap = end == 0 ? g.end_a : g.end_b;
    const Vec3 inward = end == 0 ? g.inward_a : g.inward_b;
    // Jitter the start within the cap cross-section.
    Vec3 p = cap;
    for (int attempt = 0; attempt < 16; ++attempt) {
      Vec3 cand(cap.x + w.rng.uniform(-1.0, 1.0), cap.y + w.rng.uniform(-1.0, 1.0),
                cap.z + w.rng.uniform(-1.0, 1.0));
      if (wm_at(v, cand) >= 0.5) {
        p = cand;
        break;
      }
    }
    return {p, inward};
  };

  // Positive walk, retried until the endpoints actually reach both ROI
  // shells (construction can fail at cap corners).
  auto make_positive = [&](size_t bi, int end) -> Streamline {
    for (int attempt = 0; attempt < 32; ++attempt) {
      Walker w{v, rng, step, 0.06};
      auto [p0, dir] = start_of(bi, end, w);
      Streamline s{p0};
      w.follow(s, dir, max_steps);
      if (s.size() < 4) continue;
      // Must exit WM near the opposite ROI.
      const auto& g = geom[bi];
      const Vec3 goal = end == 0 ? g.end_b : g.end_a;
      if ((s.back() - goal).norm() <= 4.0) return s;
    }
    // Deterministic fallback: straight line between caps.
    const auto& g = geom[bi];
    const Vec3 a = end == 0 ? g.end_a : g.end_b;
    const Vec3 b = end == 0 ? g.end_b : g.end_a;
    const int n = std::max(2, int((b - a).norm() / step));
    Streamline s;
    for (int i = 0; i <= n; ++i) s.push_back(a + (b - a) * (double(i) / n));
    return s;
  };

  for (int i = 0; i < n_pos; ++i) {
    const size_t bi = size_t(i) % v.bundles.size();
    const int end = int(rng.uniform_index(2));
    out.streamlines.push_back(make_positive(bi, end));
    out.targets.push_back(1.0);
  }

  // Negative modes cycle: 0 premature stop, 1 wrong pair, 2 sharp
  // doubling-back, 3 WM exit.
  for (int i = 0; i < n_neg; ++i) {
    const int mode = i % 4;
    const size_t bi = size_t(rng.uniform_index(v.bundles.size()));
    const int end = int(rng.uniform_index(2));
    Walker w{v, rng, step, 0.06};
    auto [p0, dir] = start_of(bi, end, w);
    Streamline s{p0};
    const int full = std::max(8, int(geom[bi].arc_length / step));

    switch (mode) {
      case 0: {  // stops mid-WM well short of the far ROI
        const int steps = std::max(2, int(full * rng.uniform(0.15, 0.40)));
        w.follow(s, dir, steps);
        break;
      }
      case 1: {  // crosses onto another bundle (or kinks away) and keeps going
        const int steps = std::max(2, int(full * rng.uniform(0.3, 0.6)));
        w.follow(s, dir, steps);
        if (s.size() >= 2) {
          Vec3 cur = (s.back() - s[s.size() - 2]).normalized();
          // Prefer an actual crossing peak when one exists here.
          const PeakSet ps = v.peaks_near(s.back());
          Vec3 target;
          bool found = false;
          for (size_t m = 0; m < ps.count(); ++m) {
            if (std::abs(ps.dirs[m].dot(cur)) < 0.7) {
              target = ps.dirs[m].dot(cur) >= 0 ? ps.dirs[m] : ps.dirs[m] * -1.0;
              found = true;
              break;
            }
          }
          if (!found) target = rotate_by(cur, rng.uniform(45.0, 80.0), rng);
          // Turn over a few steps, then resume peak following.
          for (int t = 0; t < 4; ++t) {
            cur = (cur + target * 0.6).normalized();
            s.push_back(s.back() + cur * step);
            if (wm_at(v, s.back()) < 0.1) break;
          }
          w.follow(s, cur, max_steps);
        }
        break;
      }
      case 2: {  // sharp reversal: at least one consecutive angle > 60 deg
        const int steps = std::max(3, int(full * rng.uniform(0.3, 0.7)));
        w.follow(s, dir, steps);
        if (s.size() >= 2) {
          Vec3 cur = (s.back() - s[s.size() - 2]).normalized();
          const Vec3 back = rotate_by(cur, rng.uniform(110.0, 170.0), rng);
          s.push_back(s.back() + back * step);
          w.follow(s, back, steps);
        }
        break;
      }
      case 3: {  // veers off the tube and leaves the mask
        const int steps = std::max(2, int(full * rng.uniform(0.3, 0.7)));
        w.follow(s, dir, steps);
        Vec3 cur = s.size() >= 2 ? (s.back() - s[s.size() - 2]).normalized() : dir;
        Vec3 off = rotate_by(cur, rng.uniform(50.0, 90.0), rng);
        for (int t = 0; t < max_steps; ++t) {
          cur = (cur * 0.5 + off * 0.5).normalized();
          s.push_back(s.back() + cur * step);
          if (wm_at(v, s.back()) < 0.1) break;
        }
        // A couple of extra points clearly outside.
        for (int t = 0; t < 2; ++t) s.push_back(s.back() + cur * step);
        break;
      }
    }
    if (s.size() < 2) s.push_back(s.back() + dir * step);
    out.streamlines.push_back(std::move(s));
    out.targets.push_back(0.0);
  }
  return out;
}

// --------------------------------------------------------------------------
// Presets

PhantomSpec phantom_preset(const std::string& name) {
  PhantomSpec spec;
  spec.max_peaks = 3;
  if (name == "straight-tube") {
    spec.dims = {16, 16, 32};
    BundleSpec b;
    b.name = "tube-z";
    b.radius = 2.5;
    b.control_points = {{7.5, 7.5, 5.0}, {7.5, 7.5, 26.0}};
    b.label_a = 1;
    b.label_b = 2;
    spec.bundles = {b};
    return spec;
  }
  if (name == "two-arcs-one-crossing") {
    // Two gently bowed diagonals meeting once near (16.6, 7.5, 15) at about
    // 79 degrees; endpoint ROIs sit at four well-separated corners.
    spec.dims = {32, 16, 32};
    BundleSpec a;
    a.name = "arc-up";
    a.radius = 2.0;
    a.control_points = {{5.0, 7.5, 6.0}, {16.0, 7.5, 14.0}, {27.0, 7.5, 24.0}};
    a.label_a = 1;
    a.label_b = 2;
    BundleSpec b;
    b.name = "arc-down";
    b.radius = 2.0;
    b.control_points = {{5.0, 7.5, 24.0}, {16.0, 7.5, 16.0}, {27.0, 7.5, 6.0}};
    b.label_a = 3;
    b.label_b = 4;
    spec.bundles = {a, b};
    return spec;
  }
  if (name == "four-bundles") {
    spec.dims = {40, 24, 40};
    BundleSpec a;
    a.name = "arc-a";
    a.radius = 2.0;
    a.control_points = {{6.0, 8.0, 6.0}, {20.0, 8.0, 46.0}, {34.0, 8.0, 6.0}};
    a.label_a = 1;
    a.label_b = 2;
    BundleSpec b;
    b.name = "arc-b";
    b.radius = 2.0;
    b.control_points = {{6.0, 8.0, 32.0}, {20.0, 8.0, -8.0}, {34.0, 8.0, 32.0}};
    b.label_a = 3;
    b.label_b = 4;
    BundleSpec c;
    c.name = "tube-z";
    c.radius = 2.0;
    c.control_points = {{8.0, 16.0, 5.0}, {8.0, 16.0, 34.0}};
    c.label_a = 5;
    c.label_b = 6;
    BundleSpec d;
    d.name = "s-curve";
    d.radius = 2.0;
    d.control_points = {
        {32.0, 16.0, 5.0}, {20.0, 16.0, 14.0}, {32.0, 16.0, 26.0}, {24.0, 16.0, 34.0}};
    d.label_a = 7;
    d.label_b = 8;
    spec.bundles = {a, b, c, d};
    return spec;
  }
  throw InvalidInput("unknown phantom preset \"" + name + "\"; known: straight-tube, " +
                     "two-arcs-one-crossing, four-bundles");
}

std::vector<std::string> phantom_preset_names() {
  return {"straight-tube", "two-arcs-one-crossing", "four-bundles"};
}

}  // namespace tractrl
