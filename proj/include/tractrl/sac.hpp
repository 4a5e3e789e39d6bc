#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tractrl/env.hpp"
#include "tractrl/tensor.hpp"

namespace tractrl {

struct SacConfig {
  double lr = 0.0005;
  double gamma = 0.95;
  double tau = 0.005;  // polyak averaging factor
  int batch_size = 256;
  int buffer_capacity = 100000;
  double target_entropy = -3.0;  // -action dim
  bool auto_entropy = true;
  double init_entropy_coef = 0.1;
  int epochs = 150;
  int seeds_per_epoch = 16;
  int updates_per_epoch = 10;
  int warmup_transitions = 512;
  int hidden_dim = 1024;
  int checkpoint_every = 50;
  uint64_t rng_seed = 1;
  bool fast_math = true;

  void validate() const;
};

// 3 hidden layers of hidden_dim with ReLU, then one or more linear heads.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& prefix, int in_dim, int hidden_dim,
      const std::vector<int>& head_dims, Rng& rng);

  // x: [B, in_dim]. Returns one output tensor per head, each [B, head_dim].
  std::vector<Tensor> forward(Graph& g, const Tensor& x) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  int in_dim() const { return in_dim_; }

  // target <- tau * source + (1 - tau) * target
  static void polyak(const Mlp& source, Mlp& target, double tau);
  void copy_from(const Mlp& source);

 private:
  std::string prefix_;
  int in_dim_ = 0, hidden_dim_ = 0;
  std::vector<int> head_dims_;
  ParamStore params_;
};

// Gaussian policy: heads emit the mean and log-std of a 3D Gaussian; log-std
// is clamped to [-20, 2]. Actions are used unsquashed (the environment
// renormalizes them to the step size).
class Actor {
 public:
  Actor() = default;
  Actor(int state_dim, int hidden_dim, Rng& rng);

  // (mean, clamped log_std), each [B, 3].
  std::pair<Tensor, Tensor> forward(Graph& g, const Tensor& states) const;

  // Batched rollout helper (no graph). Deterministic mode returns means.
  std::vector<Vec3> act(const std::vector<std::vector<double>>& states, bool deterministic,
                        Rng& rng, std::vector<double>* log_probs = nullptr) const;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
};

struct SacAgent {
  SacConfig cfg;
  int state_dim = 0;
  Actor actor;
  Mlp q1, q2, q1_target, q2_target;
  Tensor log_alpha;  // entropy coefficient, learned when auto_entropy
  Adam opt_actor{5e-4}, opt_q{5e-4}, opt_alpha{5e-4};

  SacAgent() = default;
  SacAgent(int state_dim, const SacConfig& cfg);

  double entropy_coef() const;
  void save(const std::string& path) const;
  static SacAgent load(const std::string& path);
};

class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, int state_dim);

  void push(const Transition& t);
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  int64_t total_pushed() const { return total_; }

  // Uniform sample of filled slots.
  std::vector<int> sample_indices(int batch, Rng& rng) const;
  void fill_states(const std::vector<int>& idx, Tensor& out) const;       // [B,S]
  void fill_next_states(const std::vector<int>& idx, Tensor& out) const;  // [B,S]
  void fill_actions(const std::vector<int>& idx, Tensor& out) const;      // [B,3]
  double reward_at(int i) const { return rewards_[size_t(i)]; }
  bool done_at(int i) const { return dones_[size_t(i)] != 0; }

 private:
  int capacity_, state_dim_;
  int size_ = 0, cursor_ = 0;
  int64_t total_ = 0;
  // f32 storage keeps the default capacity within memory budget.
  std::vector<float> states_, next_states_, actions_;
  std::vector<double> rewards_;
  std::vector<uint8_t> dones_;
};

struct UpdateReport {
  double critic1_loss = 0, critic2_loss = 0, actor_loss = 0, alpha_loss = 0;
  double entropy_coef = 0;
  bool updated = false;  // false when the buffer is not yet warm
};

// One gradient update on critics, actor and entropy coefficient, plus the
// polyak target refresh. No-op (updated=false) while the buffer is below
// batch_size.
UpdateReport sac_update(SacAgent& agent, const ReplayBuffer& buffer, Rng& rng);

struct EpochStats {
  double mean_return = 0;
  double mean_length = 0;
  std::map<std::string, int> done_reasons;
  UpdateReport last_update;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
};

// Full training loop: per epoch, roll out a fresh seed batch with the
// stochastic policy, push transitions, then run gradient updates.
// Deterministic per cfg.rng_seed.
SacAgent train_agent(const PhantomVolume& v, const OracleModel* oracle,
                     const EnvConfig& env_cfg, const SacConfig& cfg,
                     TrainTrace* trace = nullptr, std::ostream* log = nullptr,
                     const std::string& checkpoint_path = "");

}  // namespace tractrl
