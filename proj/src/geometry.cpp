#include "tractrl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tractrl/error.hpp"

namespace tractrl {

double Vec3::norm() const { return std::sqrt(norm2()); }

Vec3 Vec3::normalized() const {
  const double n = norm();
  if (n == 0.0) throw InvalidInput("cannot normalize zero-norm vector");
  return *this / n;
}

bool Vec3::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

double arc_length(const Streamline& s) {
  double total = 0.0;
  for (size_t i = 1; i < s.size(); ++i) total += (s[i] - s[i - 1]).norm();
  return total;
}

Streamline resample(const Streamline& s, int n) {
  if (s.size() < 2)
    throw InvalidInput("resample: streamline needs >= 2 points, got " +
                       std::to_string(s.size()));
  if (n < 2) throw InvalidInput("resample: n must be >= 2, got " + std::to_string(n));

  // Cumulative arc length per input vertex.
  std::vector<double> cum(s.size(), 0.0);
  for (size_t i = 1; i < s.size(); ++i)
    cum[i] = cum[i - 1] + (s[i] - s[i - 1]).norm();
  const double total = cum.back();
  if (total == 0.0) throw DegenerateInput("resample: zero total arc length");

  Streamline out(static_cast<size_t>(n));
  out.front() = s.front();
  out.back() = s.back();

  size_t seg = 0;
  for (int i = 1; i < n - 1; ++i) {
    const double target = total * double(i) / double(n - 1);
    while (seg + 2 < s.size() && cum[seg + 1] < target) ++seg;
    const double seg_len = cum[seg + 1] - cum[seg];
    // Zero-length input segments are skipped by the advance above unless they
    // trail at the very end; fall back to the segment start.
    const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
    out[size_t(i)] = s[seg] + (s[seg + 1] - s[seg]) * t;
  }
  return out;
}

DirectionSequence to_directions(const Streamline& s) {
  if (s.size() < 2)
    throw InvalidInput("to_directions: streamline needs >= 2 points, got " +
                       std::to_string(s.size()));
  DirectionSequence d(s.size() - 1);
  for (size_t i = 0; i + 1 < s.size(); ++i) d[i] = s[i + 1] - s[i];
  return d;
}

double segment_angle(const Vec3& u, const Vec3& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw InvalidInput("segment_angle: zero-norm segment");
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

namespace {

struct TrilinearCell {
  int i0, j0, k0, i1, j1, k1;
  double fx, fy, fz;
};

std::optional<TrilinearCell> cell_of(const GridDims& dims, const Vec3& p) {
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= dims.x - 1 &&
        p.y <= dims.y - 1 && p.z <= dims.z - 1))
    return std::nullopt;
  TrilinearCell c;
  c.i0 = std::min(int(std::floor(p.x)), dims.x - 2 < 0 ? 0 : dims.x - 2);
  c.j0 = std::min(int(std::floor(p.y)), dims.y - 2 < 0 ? 0 : dims.y - 2);
  c.k0 = std::min(int(std::floor(p.z)), dims.z - 2 < 0 ? 0 : dims.z - 2);
  if (dims.x == 1) c.i0 = 0;
  if (dims.y == 1) c.j0 = 0;
  if (dims.z == 1) c.k0 = 0;
  c.i1 = std::min(c.i0 + 1, dims.x - 1);
  c.j1 = std::min(c.j0 + 1, dims.y - 1);
  c.k1 = std::min(c.k0 + 1, dims.z - 1);
  c.fx = p.x - c.i0;
  c.fy = p.y - c.j0;
  c.fz = p.z - c.k0;
  return c;
}

}  // namespace

std::optional<double> trilinear(const ScalarField3D& f, const Vec3& p) {
  const auto c = cell_of(f.dims, p);
  if (!c) return std::nullopt;
  const double v000 = f.at(c->i0, c->j0, c->k0), v100 = f.at(c->i1, c->j0, c->k0);
  const double v010 = f.at(c->i0, c->j1, c->k0), v110 = f.at(c->i1, c->j1, c->k0);
  const double v001 = f.at(c->i0, c->j0, c->k1), v101 = f.at(c->i1, c->j0, c->k1);
  const double v011 = f.at(c->i0, c->j1, c->k1), v111 = f.at(c->i1, c->j1, c->k1);
  const double x0 = 1.0 - c->fx, y0 = 1.0 - c->fy, z0 = 1.0 - c->fz;
  return v000 * x0 * y0 * z0 + v100 * c->fx * y0 * z0 + v010 * x0 * c->fy * z0 +
         v110 * c->fx * c->fy * z0 + v001 * x0 * y0 * c->fz + v101 * c->fx * y0 * c->fz +
         v011 * x0 * c->fy * c->fz + v111 * c->fx * c->fy * c->fz;
}

std::optional<std::vector<double>> trilinear(const VectorField3D& f, const Vec3& p) {
  const auto c = cell_of(f.dims, p);
  if (!c) return std::nullopt;
  std::vector<double> out(size_t(f.width), 0.0);
  const double x0 = 1.0 - c->fx, y0 = 1.0 - c->fy, z0 = 1.0 - c->fz;
  const std::pair<const double*, double> corners[8] = {
      {f.at(c->i0, c->j0, c->k0), x0 * y0 * z0},
      {f.at(c->i1, c->j0, c->k0), c->fx * y0 * z0},
      {f.at(c->i0, c->j1, c->k0), x0 * c->fy * z0},
      {f.at(c->i1, c->j1, c->k0), c->fx * c->fy * z0},
      {f.at(c->i0, c->j0, c->k1), x0 * y0 * c->fz},
      {f.at(c->i1, c->j0, c->k1), c->fx * y0 * c->fz},
      {f.at(c->i0, c->j1, c->k1), x0 * c->fy * c->fz},
      {f.at(c->i1, c->j1, c->k1), c->fx * c->fy * c->fz},
  };
  for (const auto& [ptr, w] : corners)
    for (int v = 0; v < f.width; ++v) out[size_t(v)] += w * ptr[v];
  return out;
}

std::optional<std::array<int, 3>> nearest_voxel(const GridDims& dims, const Vec3& p) {
  const int i = int(std::lround(p.x));
  const int j = int(std::lround(p.y));
  const int k = int(std::lround(p.z));
  if (i < 0 || j < 0 || k < 0 || i >= dims.x || j >= dims.y || k >= dims.z)
    return std::nullopt;
  return std::array<int, 3>{i, j, k};
}

}  // namespace tractrl
