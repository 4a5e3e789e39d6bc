#include "tractrl/env.hpp"

#include <algorithm>
#include <cmath>

#include "tractrl/error.hpp"

namespace tractrl {

void EnvConfig::validate() const {
  if (step_size <= 0.0) throw InvalidInput("env config: step_size must be > 0");
  if (!(oracle_threshold > 0.0 && oracle_threshold < 1.0))
    throw InvalidInput("env config: oracle_threshold must lie in (0,1)");
  if (t_min >= max_steps) throw InvalidInput("env config: t_min must be < max_steps");
  if (oracle_stride < 1) throw InvalidInput("env config: oracle_stride must be >= 1");
  if (max_angle < 0.0 || max_angle > 180.0)
    throw InvalidInput("env config: max_angle must lie in [0,180]");
  if (prev_dirs < 1) throw InvalidInput("env config: prev_dirs must be >= 1");
}

double local_reward(const PhantomVolume& v, const Vec3& p, const Vec3& a_unit,
                    const Vec3& a_prev_unit) {
  const PeakSet peaks = v.peaks_near(p);
  if (peaks.empty()) return 0.0;
  double best = 0.0;
  for (const Vec3& m : peaks.dirs) best = std::max(best, std::abs(m.dot(a_unit)));
  const double prev_factor =
      (a_prev_unit.norm2() == 0.0) ? 1.0 : a_unit.dot(a_prev_unit);
  return best * prev_factor;
}

double reward(const PhantomVolume& v, const Vec3& p, const Vec3& a_unit,
              const Vec3& a_prev_unit, double alpha, double oracle_score_at_end,
              bool is_terminal, double oracle_threshold) {
  double r = local_reward(v, p, a_unit, a_prev_unit);
  if (is_terminal && oracle_score_at_end >= oracle_threshold) r += alpha;
  return r;
}

TrackingEnv::TrackingEnv(const PhantomVolume& v, EnvConfig cfg, const OracleModel* oracle)
    : v_(v), cfg_(cfg), oracle_(oracle) {
  cfg_.validate();
  if (cfg_.oracle_stop && oracle_ == nullptr)
    throw InvalidInput("env: oracle stopping enabled but no oracle provided");
}

int TrackingEnv::state_width() const {
  return 7 * 4 * v_.max_peaks + 3 * cfg_.prev_dirs;
}

void TrackingEnv::reset(const std::vector<Vec3>& seeds) {
  if (seeds.empty()) throw InvalidInput("env reset: empty seed batch");
  episodes_.clear();
  episodes_.resize(seeds.size());
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (!nearest_voxel(v_.dims, seeds[i]))
      throw InvalidInput("env reset: seed outside the grid");
    episodes_[i].points = {seeds[i]};
  }
}

std::vector<int> TrackingEnv::active_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < episodes_.size(); ++i)
    if (!episodes_[i].done) out.push_back(int(i));
  return out;
}

bool TrackingEnv::all_done() const {
  for (const auto& e : episodes_)
    if (!e.done) return false;
  return true;
}

void TrackingEnv::fodf_descriptor(const Vec3& p, double* out) const {
  const int w = 4 * v_.max_peaks;
  std::fill(out, out + w, 0.0);
  const auto vox = nearest_voxel(v_.dims, p);
  if (!vox) return;
  const double* src = v_.peaks.at((*vox)[0], (*vox)[1], (*vox)[2]);
  std::copy(src, src + w, out);
}

std::vector<double> TrackingEnv::state_of(const Episode& e) const {
  const int w = 4 * v_.max_peaks;
  std::vector<double> s(size_t(state_width()), 0.0);
  const Vec3& p = e.points.back();
  fodf_descriptor(p, s.data());
  const Vec3 offsets[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int n = 0; n < 6; ++n)
    fodf_descriptor(p + offsets[n], s.data() + w * (n + 1));
  // Direction history: oldest first, most recent last, zeros past the
  // current step count.
  double* hist = s.data() + 7 * w;
  const size_t n_dirs = e.dirs.size();
  const size_t from = n_dirs > size_t(cfg_.prev_dirs) ? n_dirs - size_t(cfg_.prev_dirs) : 0;
  for (size_t i = from; i < n_dirs; ++i) {
    const size_t slot = i - from;
    hist[slot * 3 + 0] = e.dirs[i].x;
    hist[slot * 3 + 1] = e.dirs[i].y;
    hist[slot * 3 + 2] = e.dirs[i].z;
  }
  return s;
}

std::vector<std::vector<double>> TrackingEnv::active_states() const {
  std::vector<std::vector<double>> out;
  for (const auto& e : episodes_)
    if (!e.done) out.push_back(state_of(e));
  return out;
}

std::vector<Transition> TrackingEnv::step(const std::vector<Vec3>& actions) {
  const std::vector<int> active = active_indices();
  if (active.empty()) throw InvalidInput("env step: no active episodes");
  if (actions.size() != active.size())
    throw InvalidInput("env step: " + std::to_string(actions.size()) + " actions for " +
                       std::to_string(active.size()) + " active episodes");

  std::vector<Transition> out(active.size());

  // Phase 1: geometry. Apply Eq-style propagation and the cheap criteria;
  // collect oracle work.
  struct Pending {
    size_t slot;         // index into `out` / `active`
    bool check_stop;     // partial-score stopping candidate
    bool terminal_geom;  // already terminated by WM/angle/max-steps
  };
  std::vector<Pending> oracle_work;
  std::vector<size_t> score_slots;  // slots needing a full-streamline score

  for (size_t a = 0; a < active.size(); ++a) {
    Episode& e = episodes_[size_t(active[a])];
    Transition& tr = out[a];
    tr.state = state_of(e);
    tr.action = actions[a];

    const Vec3 raw = actions[a];
    if (!raw.finite()) throw NumericalError("env step: non-finite action");
    const double n = raw.norm();
    const Vec3 prev_unit = e.dirs.empty() ? Vec3() : e.dirs.back();

    if (n == 0.0) {
      // No direction to follow; treat as a degenerate turn.
      e.done = true;
      e.reason = DoneReason::Angle;
      tr.done = true;
      tr.reason = e.reason;
      tr.reward = 0.0;
      tr.next_state = tr.state;
      if (oracle_ != nullptr && e.points.size() >= 2) score_slots.push_back(a);
      continue;
    }

    const Vec3 unit = raw / n;
    const Vec3 p_t = e.points.back();
    const Vec3 p_next = p_t + unit * cfg_.step_size;
    e.points.push_back(p_next);
    e.dirs.push_back(unit);
    const int t = int(e.dirs.size());  // steps taken including this one

    // Stopping criteria, fixed order: WM -> angle -> oracle -> max steps.
    DoneReason reason = DoneReason::None;
    const double wm = trilinear(v_.wm_mask, p_next).value_or(0.0);
    if (wm < cfg_.wm_threshold) {
      reason = DoneReason::WmExit;
    } else if (t >= 2 && segment_angle(e.dirs[e.dirs.size() - 2], unit) > cfg_.max_angle) {
      reason = DoneReason::Angle;
    }

    const bool oracle_due = cfg_.oracle_stop && oracle_ != nullptr && reason == DoneReason::None &&
                            t > cfg_.t_min && (t - cfg_.t_min - 1) % cfg_.oracle_stride == 0;

    if (reason == DoneReason::None && !oracle_due && t >= cfg_.max_steps)
      reason = DoneReason::MaxSteps;

    if (reason != DoneReason::None) {
      e.done = true;
      e.reason = reason;
      tr.done = true;
      tr.reason = reason;
      if (oracle_ != nullptr) score_slots.push_back(a);
    } else if (oracle_due) {
      oracle_work.push_back({a, true, false});
    }
    // Local reward is known already; the terminal bonus may be added below.
    tr.reward = local_reward(v_, p_t, unit, prev_unit);
  }

  // Phase 2: batched oracle scoring for stop checks and terminal bonuses.
  std::vector<Streamline> to_score;
  std::vector<size_t> slot_of;
  for (const auto& w : oracle_work) {
    to_score.push_back(episodes_[size_t(active[w.slot])].points);
    slot_of.push_back(w.slot);
  }
  for (size_t slot : score_slots) {
    to_score.push_back(episodes_[size_t(active[slot])].points);
    slot_of.push_back(slot);
  }
  std::vector<double> scores;
  if (!to_score.empty()) scores = oracle_->score_batch(to_score);

  // Stop checks first (they may add terminal bonuses of their own).
  for (size_t i = 0; i < oracle_work.size(); ++i) {
    const size_t slot = oracle_work[i].slot;
    Episode& e = episodes_[size_t(active[slot])];
    Transition& tr = out[slot];
    const double score = scores[i];
    e.final_score = score;
    const int t = int(e.dirs.size());
    if (score < cfg_.oracle_threshold) {
      e.done = true;
      e.reason = DoneReason::OracleStop;
      tr.done = true;
      tr.reason = e.reason;
    } else if (t >= cfg_.max_steps) {
      e.done = true;
      e.reason = DoneReason::MaxSteps;
      tr.done = true;
      tr.reason = e.reason;
      tr.reward += cfg_.alpha;  // score already cleared the threshold
    }
  }
  for (size_t i = 0; i < score_slots.size(); ++i) {
    const size_t slot = score_slots[i];
    Episode& e = episodes_[size_t(active[slot])];
    Transition& tr = out[slot];
    const double score = scores[oracle_work.size() + i];
    e.final_score = score;
    if (score >= cfg_.oracle_threshold) tr.reward += cfg_.alpha;
  }

  // Phase 3: next states.
  for (size_t a = 0; a < active.size(); ++a) {
    if (out[a].next_state.empty())
      out[a].next_state = state_of(episodes_[size_t(active[a])]);
    if (!std::isfinite(out[a].reward)) throw NumericalError("env step: non-finite reward");
  }
  return out;
}

Tractogram TrackingEnv::harvest() const {
  Tractogram t;
  for (const auto& e : episodes_) {
    if (!e.done) continue;
    t.streamlines.push_back(e.points);
    t.reasons.push_back(e.reason);
    t.scores.push_back(e.final_score);
    t.short_flag.push_back(int(e.dirs.size()) < cfg_.min_length ? 1 : 0);
  }
  return t;
}

}  // namespace tractrl
