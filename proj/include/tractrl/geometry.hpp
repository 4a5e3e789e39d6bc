#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace tractrl {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const;
  double norm2() const { return dot(*this); }
  Vec3 normalized() const;  // throws InvalidInput on zero norm
  bool finite() const;
};

// Ordered polyline in continuous voxel coordinates. Voxel (i,j,k) is centered
// at integer (i,j,k) everywhere in this library.
using Streamline = std::vector<Vec3>;

// Consecutive displacement vectors of a streamline; size() == points - 1.
using DirectionSequence = std::vector<Vec3>;

struct GridDims {
  int x = 0, y = 0, z = 0;
  int64_t voxels() const { return int64_t(x) * y * z; }
  bool operator==(const GridDims& o) const { return x == o.x && y == o.y && z == o.z; }
};

// Dense 3D scalar grid, x fastest: index = x + dims.x * (y + dims.y * z).
struct ScalarField3D {
  GridDims dims;
  std::vector<double> data;

  ScalarField3D() = default;
  ScalarField3D(GridDims d, double fill = 0.0) : dims(d), data(size_t(d.voxels()), fill) {}

  int64_t index(int i, int j, int k) const {
    return i + int64_t(dims.x) * (j + int64_t(dims.y) * k);
  }
  double& at(int i, int j, int k) { return data[size_t(index(i, j, k))]; }
  double at(int i, int j, int k) const { return data[size_t(index(i, j, k))]; }
  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims.x && j < dims.y && k < dims.z;
  }
};

// Dense 3D grid of fixed-width vectors, stored per-voxel contiguously.
struct VectorField3D {
  GridDims dims;
  int width = 0;
  std::vector<double> data;

  VectorField3D() = default;
  VectorField3D(GridDims d, int w) : dims(d), width(w), data(size_t(d.voxels()) * w, 0.0) {}

  int64_t base(int i, int j, int k) const {
    return (i + int64_t(dims.x) * (j + int64_t(dims.y) * k)) * width;
  }
  double* at(int i, int j, int k) { return data.data() + base(i, j, k); }
  const double* at(int i, int j, int k) const { return data.data() + base(i, j, k); }
};

// Resamples to exactly n points equidistant in arc length; endpoints are
// preserved bit-exactly. Throws InvalidInput (< 2 points, n < 2) or
// DegenerateInput (zero arc length).
Streamline resample(const Streamline& s, int n);

double arc_length(const Streamline& s);

DirectionSequence to_directions(const Streamline& s);

// Angle between two segments in degrees, in [0, 180]. Throws on zero norm.
double segment_angle(const Vec3& u, const Vec3& v);

// Trilinear interpolation under the voxel-center convention. Returns nullopt
// when p lies outside [0, dim-1] on any axis; callers treat out-of-grid WM
// samples as 0.
std::optional<double> trilinear(const ScalarField3D& f, const Vec3& p);
std::optional<std::vector<double>> trilinear(const VectorField3D& f, const Vec3& p);

// Nearest-voxel index (rounds each coordinate); nullopt when outside the grid.
std::optional<std::array<int, 3>> nearest_voxel(const GridDims& dims, const Vec3& p);

}  // namespace tractrl
