#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tractrl/phantom.hpp"
#include "tractrl/tractogram.hpp"

namespace tractrl {

enum class ConnClass : uint8_t { VC, IC, NC };

struct SegmentResult {
  ConnClass cls = ConnClass::NC;
  int bundle = -1;               // recovered bundle index for VC
  uint16_t label_a = 0, label_b = 0;  // endpoint labels (0 = unlabeled)
};

struct EvalOptions {
  double vc_path_threshold = 0.9;  // fraction of points inside the dilated mask
  int dilation = 1;                // voxels, applied to bundle masks and labels
};

// Per-streamline connection class: VC when both endpoints land on a valid
// ROI pair and >= 90% of the path stays inside that bundle's dilated mask;
// IC when both endpoints are labeled but the pair or path fails; NC
// otherwise.
std::vector<SegmentResult> segment(const Tractogram& t, const PhantomVolume& v,
                                   const EvalOptions& opt = {});

struct BundleScore {
  int bundle = -1;
  double ol_pct = 0, or_pct = 0, f1_pct = 0;
};

struct TractometerReport {
  bool empty = false;
  int n_streamlines = 0;
  int n_vc = 0, n_ic = 0, n_nc = 0;
  double vc_pct = 0, ic_pct = 0, nc_pct = 0;
  int vb = 0;  // bundles with at least one VC streamline
  int ib = 0;  // distinct invalid endpoint pairs
  std::vector<BundleScore> bundles;  // recovered bundles, ascending index
  double mean_ol = 0, mean_or = 0, mean_f1 = 0;
};

// Connection percentages plus per-recovered-bundle overlap (OL), overreach
// (OR) and voxel Dice (F1), rasterizing VC streamlines by the voxels their
// points fall in.
TractometerReport report(const Tractogram& t, const PhantomVolume& v,
                         const EvalOptions& opt = {});

std::string report_text(const TractometerReport& r);
std::string report_json(const TractometerReport& r);

}  // namespace tractrl
