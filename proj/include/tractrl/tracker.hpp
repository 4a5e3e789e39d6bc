#pragma once

#include <cstdint>

#include "tractrl/env.hpp"
#include "tractrl/sac.hpp"
#include "tractrl/tractogram.hpp"

namespace tractrl {

// Policy rollout from interface seeds under the full stopping rules.
// Deterministic (mean) actions unless sample_actions; seed jitter and any
// action sampling derive from rng_seed. Output order follows seed order.
Tractogram track_policy(const SacAgent& agent, const OracleModel* oracle,
                        const PhantomVolume& v, const EnvConfig& env_cfg,
                        int per_voxel_seeds, uint64_t rng_seed, bool sample_actions = false);

// Deterministic strongest-peak following with the WM and angle criteria
// only: at each step the peak maximizing |<peak, u_prev>| is taken,
// sign-aligned to forward progress. The first step takes the strongest peak
// oriented toward higher WM occupancy.
Tractogram track_baseline(const PhantomVolume& v, const EnvConfig& env_cfg,
                          int per_voxel_seeds, uint64_t rng_seed);

}  // namespace tractrl
