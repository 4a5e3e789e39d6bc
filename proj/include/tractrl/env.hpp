#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tractrl/geometry.hpp"
#include "tractrl/oracle.hpp"
#include "tractrl/phantom.hpp"
#include "tractrl/tractogram.hpp"

namespace tractrl {

struct EnvConfig {
  double step_size = 0.5;        // voxels per step
  double alpha = 10.0;           // terminal plausibility bonus weight
  int t_min = 20;                // steps before the oracle criterion may fire
  double max_angle = 30.0;       // degrees between consecutive segments
  double wm_threshold = 0.1;     // interpolated WM value below which to stop
  int max_steps = 200;
  double oracle_threshold = 0.5;
  bool oracle_stop = true;       // disable for ablations
  int oracle_stride = 1;         // evaluate the oracle criterion every k steps
  int min_length = 10;           // steps; shorter harvested streamlines are flagged
  int prev_dirs = 100;           // direction history length in the state

  void validate() const;
};

struct Transition {
  std::vector<double> state;
  Vec3 action;  // raw policy output; the environment normalizes internally
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  DoneReason reason = DoneReason::None;
};

// Local alignment term of the per-step reward: |max_m <m, a>| * <a, a_prev>,
// with peaks read from the voxel nearest to p. a and a_prev are unit; a
// zero a_prev (episode start) contributes a factor of 1. Empty peak sets
// yield 0.
double local_reward(const PhantomVolume& v, const Vec3& p, const Vec3& a_unit,
                    const Vec3& a_prev_unit);

// Full per-step reward: the local term plus alpha when this is the terminal
// step and the streamline's oracle score clears the threshold.
double reward(const PhantomVolume& v, const Vec3& p, const Vec3& a_unit,
              const Vec3& a_prev_unit, double alpha, double oracle_score_at_end,
              bool is_terminal, double oracle_threshold);

// Batched tracking episodes over one phantom. Episodes run independently;
// oracle scoring is batched across the active set each step.
class TrackingEnv {
 public:
  TrackingEnv(const PhantomVolume& v, EnvConfig cfg, const OracleModel* oracle);

  int state_width() const;

  // Starts one episode per seed. Throws on an empty batch or out-of-grid
  // seeds.
  void reset(const std::vector<Vec3>& seeds);

  size_t episode_count() const { return episodes_.size(); }
  std::vector<int> active_indices() const;
  bool all_done() const;

  // State vectors for the active episodes, in episode order.
  std::vector<std::vector<double>> active_states() const;

  // Steps every active episode; actions align with active_indices(). Returns
  // one transition per stepped episode. Throws if sizes mismatch or nothing
  // is active.
  std::vector<Transition> step(const std::vector<Vec3>& actions);

  // Finished streamlines with stop reasons and final oracle scores.
  Tractogram harvest() const;

  const Streamline& episode_points(size_t i) const { return episodes_[i].points; }

  const EnvConfig& config() const { return cfg_; }

 private:
  struct Episode {
    Streamline points;
    std::vector<Vec3> dirs;  // unit step directions, oldest first
    bool done = false;
    DoneReason reason = DoneReason::None;
    double final_score = -1.0;  // oracle score at termination, if evaluated
  };

  const PhantomVolume& v_;
  EnvConfig cfg_;
  const OracleModel* oracle_;

  std::vector<Episode> episodes_;

  std::vector<double> state_of(const Episode& e) const;
  void fodf_descriptor(const Vec3& p, double* out) const;  // width 4K
};

}  // namespace tractrl
