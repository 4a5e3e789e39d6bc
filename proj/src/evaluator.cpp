#include "tractrl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tractrl/error.hpp"

#include <nlohmann/json.hpp>

namespace tractrl {

namespace {

// Endpoint label: the nearest voxel's label, else the closest labeled voxel
// within a 1-voxel (Chebyshev) dilation, smallest label on ties.
uint16_t endpoint_label(const PhantomVolume& v, const Vec3& p, int dilation) {
  const auto vox = nearest_voxel(v.dims, p);
  if (!vox) return 0;
  const auto [ci, cj, ck] = *vox;
  if (v.roi_at(ci, cj, ck) != 0) return v.roi_at(ci, cj, ck);
  uint16_t best_label = 0;
  double best_d = 1e30;
  for (int dk = -dilation; dk <= dilation; ++dk)
    for (int dj = -dilation; dj <= dilation; ++dj)
      for (int di = -dilation; di <= dilation; ++di) {
        const int i = ci + di, j = cj + dj, k = ck + dk;
        if (!v.wm_mask.contains(i, j, k)) continue;
        const uint16_t l = v.roi_at(i, j, k);
        if (l == 0) continue;
        const double d = (Vec3(i, j, k) - p).norm2();
        if (d < best_d || (d == best_d && l < best_label)) {
          best_d = d;
          best_label = l;
        }
      }
  return best_label;
}

// 26-neighborhood dilation of a 0/1 mask.
std::vector<uint8_t> dilate(const std::vector<uint8_t>& mask, const GridDims& dims,
                            int rounds) {
  std::vector<uint8_t> cur = mask;
  for (int r = 0; r < rounds; ++r) {
    std::vector<uint8_t> next = cur;
    for (int k = 0; k < dims.z; ++k)
      for (int j = 0; j < dims.y; ++j)
        for (int i = 0; i < dims.x; ++i) {
          const int64_t idx = i + int64_t(dims.x) * (j + int64_t(dims.y) * k);
          if (cur[size_t(idx)]) continue;
          bool near = false;
          for (int dk = -1; dk <= 1 && !near; ++dk)
            for (int dj = -1; dj <= 1 && !near; ++dj)
              for (int di = -1; di <= 1 && !near; ++di) {
                const int ni = i + di, nj = j + dj, nk = k + dk;
                if (ni < 0 || nj < 0 || nk < 0 || ni >= dims.x || nj >= dims.y ||
                    nk >= dims.z)
                  continue;
                near = cur[size_t(ni + int64_t(dims.x) * (nj + int64_t(dims.y) * nk))] != 0;
              }
          if (near) next[size_t(idx)] = 1;
        }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

std::vector<SegmentResult> segment(const Tractogram& t, const PhantomVolume& v,
                                   const EvalOptions& opt) {
  std::vector<SegmentResult> out(t.size());
  if (t.size() == 0) return out;

  std::vector<std::vector<uint8_t>> dilated(v.bundles.size());
  for (size_t b = 0; b < v.bundles.size(); ++b)
    dilated[b] = dilate(v.bundles[b].mask, v.dims, opt.dilation);

  for (size_t si = 0; si < t.size(); ++si) {
    const Streamline& s = t.streamlines[si];
    SegmentResult& r = out[si];
    if (s.size() < 2) {
      r.cls = ConnClass::NC;
      continue;
    }
    r.label_a = endpoint_label(v, s.front(), opt.dilation);
    r.label_b = endpoint_label(v, s.back(), opt.dilation);
    if (r.label_a == 0 || r.label_b == 0) {
      r.cls = ConnClass::NC;
      continue;
    }
    const int bundle = v.bundle_for_pair(r.label_a, r.label_b);
    if (bundle < 0) {
      r.cls = ConnClass::IC;
      continue;
    }
    // Path containment inside the bundle's dilated mask.
    int inside = 0;
    for (const Vec3& p : s) {
      const auto vox = nearest_voxel(v.dims, p);
      if (!vox) continue;
      if (dilated[size_t(bundle)][size_t(v.voxel_index((*vox)[0], (*vox)[1], (*vox)[2]))])
        inside++;
    }
    const double fraction = double(inside) / double(s.size());
    if (fraction >= opt.vc_path_threshold) {
      r.cls = ConnClass::VC;
      r.bundle = bundle;
    } else {
      r.cls = ConnClass::IC;
    }
  }
  return out;
}

TractometerReport report(const Tractogram& t, const PhantomVolume& v, const EvalOptions& opt) {
  TractometerReport rep;
  rep.n_streamlines = int(t.size());
  if (t.size() == 0) {
    rep.empty = true;
    return rep;
  }
  const auto seg = segment(t, v, opt);

  std::set<std::pair<uint16_t, uint16_t>> invalid_pairs;
  std::vector<std::set<int64_t>> traversed(v.bundles.size());
  std::vector<int> vc_per_bundle(v.bundles.size(), 0);

  for (size_t i = 0; i < seg.size(); ++i) {
    switch (seg[i].cls) {
      case ConnClass::VC: {
        rep.n_vc++;
        vc_per_bundle[size_t(seg[i].bundle)]++;
        for (const Vec3& p : t.streamlines[i]) {
          const auto vox = nearest_voxel(v.dims, p);
          if (vox)
            traversed[size_t(seg[i].bundle)].insert(
                v.voxel_index((*vox)[0], (*vox)[1], (*vox)[2]));
        }
        break;
      }
      case ConnClass::IC: {
        rep.n_ic++;
        const uint16_t a = std::min(seg[i].label_a, seg[i].label_b);
        const uint16_t b = std::max(seg[i].label_a, seg[i].label_b);
        invalid_pairs.insert({a, b});
        break;
      }
      case ConnClass::NC:
        rep.n_nc++;
        break;
    }
  }

  const double n = double(t.size());
  rep.vc_pct = 100.0 * double(rep.n_vc) / n;
  rep.ic_pct = 100.0 * double(rep.n_ic) / n;
  rep.nc_pct = 100.0 * double(rep.n_nc) / n;
  rep.ib = int(invalid_pairs.size());

  for (size_t b = 0; b < v.bundles.size(); ++b) {
    if (vc_per_bundle[b] == 0) continue;
    rep.vb++;
    int64_t mask_size = 0;
    int64_t overlap = 0;
    for (int64_t i = 0; i < v.dims.voxels(); ++i)
      if (v.bundles[b].mask[size_t(i)]) mask_size++;
    for (int64_t idx : traversed[b])
      if (v.bundles[b].mask[size_t(idx)]) overlap++;
    const int64_t outside = int64_t(traversed[b].size()) - overlap;
    BundleScore bs;
    bs.bundle = int(b);
    bs.ol_pct = mask_size > 0 ? 100.0 * double(overlap) / double(mask_size) : 0.0;
    bs.or_pct = mask_size > 0 ? 100.0 * double(outside) / double(mask_size) : 0.0;
    // Voxel Dice between traversed and ground truth; algebraically
    // 2*OL / (OL + OR + 1) in fractional units.
    const double denom = double(traversed[b].size()) + double(mask_size);
    bs.f1_pct = denom > 0.0 ? 100.0 * 2.0 * double(overlap) / denom : 0.0;
    rep.bundles.push_back(bs);
  }
  if (!rep.bundles.empty()) {
    for (const auto& b : rep.bundles) {
      rep.mean_ol += b.ol_pct;
      rep.mean_or += b.or_pct;
      rep.mean_f1 += b.f1_pct;
    }
    rep.mean_ol /= double(rep.bundles.size());
    rep.mean_or /= double(rep.bundles.size());
    rep.mean_f1 /= double(rep.bundles.size());
  }
  return rep;
}

std::string report_text(const TractometerReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "streamlines: " << r.n_streamlines << "\n";
  os << "empty: " << (r.empty ? "true" : "false") << "\n";
  os << "vc_pct: " << r.vc_pct << "\n";
  os << "ic_pct: " << r.ic_pct << "\n";
  os << "nc_pct: " << r.nc_pct << "\n";
  os << "vc_count: " << r.n_vc << "\n";
  os << "ic_count: " << r.n_ic << "\n";
  os << "nc_count: " << r.n_nc << "\n";
  os << "vb: " << r.vb << "\n";
  os << "ib: " << r.ib << "\n";
  os << "mean_ol_pct: " << r.mean_ol << "\n";
  os << "mean_or_pct: " << r.mean_or << "\n";
  os << "mean_f1_pct: " << r.mean_f1 << "\n";
  for (const auto& b : r.bundles)
    os << "bundle_" << b.bundle << ": ol " << b.ol_pct << " or " << b.or_pct << " f1 "
       << b.f1_pct << "\n";
  return os.str();
}

std::string report_json(const TractometerReport& r) {
  nlohmann::json j;
  j["streamlines"] = r.n_streamlines;
  j["empty"] = r.empty;
  j["vc_pct"] = r.vc_pct;
  j["ic_pct"] = r.ic_pct;
  j["nc_pct"] = r.nc_pct;
  j["vc_count"] = r.n_vc;
  j["ic_count"] = r.n_ic;
  j["nc_count"] = r.n_nc;
  j["vb"] = r.vb;
  j["ib"] = r.ib;
  j["mean_ol_pct"] = r.mean_ol;
  j["mean_or_pct"] = r.mean_or;
  j["mean_f1_pct"] = r.mean_f1;
  j["bundles"] = nlohmann::json::array();
  for (const auto& b : r.bundles)
    j["bundles"].push_back(
        {{"bundle", b.bundle}, {"ol_pct", b.ol_pct}, {"or_pct", b.or_pct}, {"f1_pct", b.f1_pct}});
  return j.dump(2) + "\n";
}

}  // namespace tractrl
