#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tractrl/geometry.hpp"
#include "tractrl/rng.hpp"

namespace tractrl {

// Up to K unit peak directions with amplitudes, the per-voxel stand-in for a
// fiber orientation distribution. Stored packed as [dx,dy,dz,amp] * K,
// zero-padded, amplitudes sorted descending.
struct PeakSet {
  std::vector<Vec3> dirs;
  std::vector<double> amps;
  size_t count() const { return dirs.size(); }
  bool empty() const { return dirs.empty(); }
};

// One fiber bundle: a Bezier centerline swept by a tube. Endpoint ROI labels
// identify the pair of regions the bundle connects.
struct BundleSpec {
  std::string name;
  std::vector<Vec3> control_points;  // degree = size-1; 2 = straight segment
  double radius = 2.0;
  uint16_t label_a = 0;
  uint16_t label_b = 0;
};

struct PhantomSpec {
  GridDims dims;
  double voxel_size = 1.0;
  int max_peaks = 3;  // K
  std::vector<BundleSpec> bundles;
};

struct PhantomVolume {
  GridDims dims;
  double voxel_size = 1.0;
  int max_peaks = 3;
  ScalarField3D wm_mask;           // [0,1], 1 inside tubes
  VectorField3D peaks;             // width 4*K
  std::vector<uint16_t> roi_labels;  // 0 = none
  struct Bundle {
    uint16_t label_a = 0;
    uint16_t label_b = 0;
    std::vector<uint8_t> mask;  // 0/1 per voxel
  };
  std::vector<Bundle> bundles;

  int64_t voxel_index(int i, int j, int k) const { return wm_mask.index(i, j, k); }
  uint16_t roi_at(int i, int j, int k) const { return roi_labels[size_t(voxel_index(i, j, k))]; }
  PeakSet peaks_at(int i, int j, int k) const;
  // Peak set at the voxel nearest to a continuous position; empty outside.
  PeakSet peaks_near(const Vec3& p) const;
  bool pair_valid(uint16_t a, uint16_t b) const;
  int bundle_for_pair(uint16_t a, uint16_t b) const;  // -1 if invalid
};

// Labeled training streamlines; targets are 0 (implausible) or 1 (plausible).
struct LabeledStreamlineSet {
  std::vector<Streamline> streamlines;
  std::vector<double> targets;
};

// Evaluates a Bezier curve and its (normalized) tangent at t in [0,1].
Vec3 bezier_point(const std::vector<Vec3>& ctrl, double t);
Vec3 bezier_tangent(const std::vector<Vec3>& ctrl, double t);

// Deterministic for fixed (spec, seed). Throws InvalidInput on spec errors:
// tube or ROI extending outside the grid, duplicate endpoint labels,
// dims < 16, radius < 1, no bundles.
PhantomVolume generate_phantom(const PhantomSpec& spec, uint64_t rng_seed);

// Seed positions at the WM/GM interface: per interface voxel, `per_voxel`
// uniformly jittered positions (voxel centers when jitter=false).
std::vector<Vec3> interface_seeds(const PhantomVolume& v, int per_voxel, uint64_t rng_seed,
                                  bool jitter = true);

// List of interface voxel centers, in scan order.
std::vector<Vec3> interface_voxels(const PhantomVolume& v);

// Synthesizes an exactly n_pos/n_neg labeled set. Positives follow bundle
// peaks end to end; negatives cycle through four corruption modes: premature
// stop, wrong-pair connection, sharp doubling-back, and WM exit.
LabeledStreamlineSet synthesize_labeled_set(const PhantomVolume& v, int n_pos, int n_neg,
                                            uint64_t rng_seed);

// Named demo phantoms used by the CLI and tests.
PhantomSpec phantom_preset(const std::string& name);
std::vector<std::string> phantom_preset_names();

}  // namespace tractrl
