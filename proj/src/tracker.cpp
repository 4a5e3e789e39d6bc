#include "tractrl/tracker.hpp"

#include <cmath>

#include "tractrl/error.hpp"

namespace tractrl {

Tractogram track_policy(const SacAgent& agent, const OracleModel* oracle,
                        const PhantomVolume& v, const EnvConfig& env_cfg,
                        int per_voxel_seeds, uint64_t rng_seed, bool sample_actions) {
  TrackingEnv env(v, env_cfg, oracle);
  if (agent.state_dim != env.state_width())
    throw InvalidInput("track: agent expects state width " + std::to_string(agent.state_dim) +
                       " but environment provides " + std::to_string(env.state_width()));

  const auto seeds = interface_seeds(v, per_voxel_seeds, stream_seed(rng_seed, "track-seeds"));
  env.reset(seeds);
  Rng action_rng(stream_seed(rng_seed, "track-actions"));
  while (!env.all_done()) {
    const auto states = env.active_states();
    const auto actions = agent.actor.act(states, !sample_actions, action_rng);
    env.step(actions);
  }
  return env.harvest();
}

Tractogram track_baseline(const PhantomVolume& v, const EnvConfig& env_cfg,
                          int per_voxel_seeds, uint64_t rng_seed) {
  EnvConfig cfg = env_cfg;
  cfg.oracle_stop = false;  // classical criteria only
  cfg.alpha = 0.0;
  TrackingEnv env(v, cfg, nullptr);

  const auto seeds = interface_seeds(v, per_voxel_seeds, stream_seed(rng_seed, "track-seeds"));
  env.reset(seeds);

  std::vector<Vec3> prev(seeds.size());
  std::vector<bool> has_prev(seeds.size(), false);

  while (!env.all_done()) {
    const auto active = env.active_indices();
    std::vector<Vec3> actions(active.size());
    for (size_t i = 0; i < active.size(); ++i) {
      const size_t ep = size_t(active[i]);
      const Vec3 pos = env.episode_points(ep).back();
      const PeakSet peaks = v.peaks_near(pos);
      Vec3 dir;  // zero action terminates the episode
      if (!peaks.empty()) {
        if (!has_prev[ep]) {
          // First step: strongest peak, oriented toward deeper WM.
          dir = peaks.dirs[0];
          const double fwd = trilinear(v.wm_mask, pos + dir * cfg.step_size).value_or(0.0);
          const double bwd = trilinear(v.wm_mask, pos - dir * cfg.step_size).value_or(0.0);
          if (bwd > fwd) dir = dir * -1.0;
        } else {
          double best = -1.0;
          for (const Vec3& m : peaks.dirs) {
            const double c = m.dot(prev[ep]);
            if (std::abs(c) > best) {
              best = std::abs(c);
              dir = c >= 0.0 ? m : m * -1.0;
            }
          }
        }
      }
      actions[i] = dir;
      if (dir.norm2() > 0.0) {
        prev[ep] = dir.normalized();
        has_prev[ep] = true;
      }
    }
    env.step(actions);
  }
  return env.harvest();
}

}  // namespace tractrl
