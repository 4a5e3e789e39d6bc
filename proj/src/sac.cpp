#include "tractrl/sac.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tractrl/error.hpp"
#include "tractrl/io.hpp"

namespace tractrl {

void SacConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("sac config: gamma must lie in (0,1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidInput("sac config: tau must lie in (0,1]");
  if (batch_size < 1 || buffer_capacity < batch_size)
    throw InvalidInput("sac config: buffer_capacity must be >= batch_size >= 1");
  if (hidden_dim < 1 || epochs < 0 || seeds_per_epoch < 1 || updates_per_epoch < 0)
    throw InvalidInput("sac config: bad loop sizes");
}

// --------------------------------------------------------------------------
// Networks

namespace {
Tensor he_init(Shape shape, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(shape[0]));
  return Tensor::uniform(std::move(shape), rng, -bound, bound, true);
}
}  // namespace

Mlp::Mlp(const std::string& prefix, int in_dim, int hidden_dim,
         const std::vector<int>& head_dims, Rng& rng)
    : prefix_(prefix), in_dim_(in_dim), hidden_dim_(hidden_dim), head_dims_(head_dims) {
  const int dims[4] = {in_dim, hidden_dim, hidden_dim, hidden_dim};
  for (int l = 0; l < 3; ++l) {
    params_.add(prefix + "w" + std::to_string(l), he_init({dims[l], dims[l + 1]}, rng));
    params_.add(prefix + "b" + std::to_string(l), Tensor::zeros({dims[l + 1]}, true));
  }
  for (size_t h = 0; h < head_dims.size(); ++h) {
    // Small final-layer init keeps initial outputs near zero.
    params_.add(prefix + "head" + std::to_string(h) + ".w",
                Tensor::uniform({hidden_dim, head_dims[h]}, rng, -3e-3, 3e-3, true));
    params_.add(prefix + "head" + std::to_string(h) + ".b",
                Tensor::zeros({head_dims[h]}, true));
  }
}

std::vector<Tensor> Mlp::forward(Graph& g, const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_dim_)
    throw ShapeError("mlp " + prefix_ + ": want [B," + std::to_string(in_dim_) + "], got " +
                     shape_str(x.shape()));
  Tensor h = x;
  for (int l = 0; l < 3; ++l) {
    h = g.relu(g.add(g.matmul(h, params_.get(prefix_ + "w" + std::to_string(l))),
                     params_.get(prefix_ + "b" + std::to_string(l))));
  }
  std::vector<Tensor> outs;
  for (size_t hd = 0; hd < head_dims_.size(); ++hd)
    outs.push_back(g.add(g.matmul(h, params_.get(prefix_ + "head" + std::to_string(hd) + ".w")),
                         params_.get(prefix_ + "head" + std::to_string(hd) + ".b")));
  return outs;
}

void Mlp::polyak(const Mlp& source, Mlp& target, double tau) {
  const auto& src_items = source.params_.items();
  const auto& dst_items = target.params_.items();
  if (src_items.size() != dst_items.size())
    throw ShapeError("polyak: parameter count mismatch");
  for (size_t i = 0; i < src_items.size(); ++i) {
    const Tensor& s = src_items[i].second;
    Tensor d = dst_items[i].second;
    for (int64_t j = 0; j < s.numel(); ++j)
      d.data()[j] = tau * s.data()[j] + (1.0 - tau) * d.data()[j];
  }
}

void Mlp::copy_from(const Mlp& source) {
  const auto& src_items = source.params_.items();
  const auto& dst_items = params_.items();
  if (src_items.size() != dst_items.size()) throw ShapeError("copy_from: mismatch");
  for (size_t i = 0; i < src_items.size(); ++i) {
    Tensor d = dst_items[i].second;
    std::copy(src_items[i].second.data(),
              src_items[i].second.data() + src_items[i].second.numel(), d.data());
  }
}

Actor::Actor(int state_dim, int hidden_dim, Rng& rng)
    : net_("actor.", state_dim, hidden_dim, {3, 3}, rng) {}

std::pair<Tensor, Tensor> Actor::forward(Graph& g, const Tensor& states) const {
  auto heads = net_.forward(g, states);
  return {heads[0], g.clamp(heads[1], -20.0, 2.0)};
}

std::vector<Vec3> Actor::act(const std::vector<std::vector<double>>& states, bool deterministic,
                             Rng& rng, std::vector<double>* log_probs) const {
  if (states.empty()) return {};
  const int64_t B = int64_t(states.size());
  const int64_t S = int64_t(states[0].size());
  Tensor x = Tensor::zeros({B, S});
  for (int64_t i = 0; i < B; ++i)
    std::copy(states[size_t(i)].begin(), states[size_t(i)].end(), x.data() + i * S);
  Graph g(false);
  auto [mean, log_std] = forward(g, x);
  std::vector<Vec3> actions(static_cast<size_t>(B));
  if (log_probs) log_probs->assign(size_t(B), 0.0);
  constexpr double kLog2Pi = 1.8378770664093453;
  for (int64_t i = 0; i < B; ++i) {
    Vec3 a;
    double lp = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double mu = mean.data()[i * 3 + d];
      const double ls = log_std.data()[i * 3 + d];
      double value = mu;
      if (!deterministic) {
        const double eps = rng.normal();
        value = mu + std::exp(ls) * eps;
        lp += -0.5 * eps * eps - ls - 0.5 * kLog2Pi;
      }
      (d == 0 ? a.x : d == 1 ? a.y : a.z) = value;
    }
    actions[size_t(i)] = a;
    if (log_probs) (*log_probs)[size_t(i)] = lp;
  }
  return actions;
}

// --------------------------------------------------------------------------
// Agent

SacAgent::SacAgent(int state_dim_, const SacConfig& cfg_) {
  cfg = cfg_;
  cfg.validate();
  state_dim = state_dim_;
  Rng rng(stream_seed(cfg.rng_seed, "sac-init"));
  actor = Actor(state_dim, cfg.hidden_dim, rng);
  q1 = Mlp("q1.", state_dim + 3, cfg.hidden_dim, {1}, rng);
  q2 = Mlp("q2.", state_dim + 3, cfg.hidden_dim, {1}, rng);
  q1_target = Mlp("q1t.", state_dim + 3, cfg.hidden_dim, {1}, rng);
  q2_target = Mlp("q2t.", state_dim + 3, cfg.hidden_dim, {1}, rng);
  q1_target.copy_from(q1);
  q2_target.copy_from(q2);
  log_alpha = Tensor::from({1}, {std::log(cfg.init_entropy_coef)}, true);
  opt_actor = Adam(cfg.lr);
  opt_q = Adam(cfg.lr);
  opt_alpha = Adam(cfg.lr);
}

double SacAgent::entropy_coef() const { return std::exp(log_alpha.data()[0]); }

// --------------------------------------------------------------------------
// Replay buffer

ReplayBuffer::ReplayBuffer(int capacity, int state_dim)
    : capacity_(capacity), state_dim_(state_dim) {
  states_.assign(size_t(capacity) * size_t(state_dim), 0.f);
  next_states_.assign(size_t(capacity) * size_t(state_dim), 0.f);
  actions_.assign(size_t(capacity) * 3, 0.f);
  rewards_.assign(size_t(capacity), 0.0);
  dones_.assign(size_t(capacity), 0);
}

void ReplayBuffer::push(const Transition& t) {
  if (int(t.state.size()) != state_dim_ || int(t.next_state.size()) != state_dim_)
    throw ShapeError("replay push: state width " + std::to_string(t.state.size()) +
                     ", expected " + std::to_string(state_dim_));
  const size_t row = size_t(cursor_);
  for (int i = 0; i < state_dim_; ++i) {
    states_[row * size_t(state_dim_) + size_t(i)] = float(t.state[size_t(i)]);
    next_states_[row * size_t(state_dim_) + size_t(i)] = float(t.next_state[size_t(i)]);
  }
  actions_[row * 3 + 0] = float(t.action.x);
  actions_[row * 3 + 1] = float(t.action.y);
  actions_[row * 3 + 2] = float(t.action.z);
  rewards_[row] = t.reward;
  dones_[row] = t.done ? 1 : 0;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  total_ += 1;
}

std::vector<int> ReplayBuffer::sample_indices(int batch, Rng& rng) const {
  if (size_ < 1) throw InvalidInput("replay sample: empty buffer");
  std::vector<int> idx(static_cast<size_t>(batch));
  for (int i = 0; i < batch; ++i) idx[size_t(i)] = int(rng.uniform_index(uint64_t(size_)));
  return idx;
}

void ReplayBuffer::fill_states(const std::vector<int>& idx, Tensor& out) const {
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < state_dim_; ++j)
      out.data()[int64_t(i) * state_dim_ + j] =
          double(states_[size_t(idx[i]) * size_t(state_dim_) + size_t(j)]);
}

void ReplayBuffer::fill_next_states(const std::vector<int>& idx, Tensor& out) const {
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < state_dim_; ++j)
      out.data()[int64_t(i) * state_dim_ + j] =
          double(next_states_[size_t(idx[i]) * size_t(state_dim_) + size_t(j)]);
}

void ReplayBuffer::fill_actions(const std::vector<int>& idx, Tensor& out) const {
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < 3; ++j)
      out.data()[int64_t(i) * 3 + j] = double(actions_[size_t(idx[i]) * 3 + size_t(j)]);
}

// --------------------------------------------------------------------------
// Update

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

// log N(a | mean, exp(log_std)) summed over action dims, as graph ops so the
// gradient flows into mean, log_std and (through reparameterization) a.
Tensor gaussian_log_prob(Graph& g, const Tensor& a, const Tensor& mean,
                         const Tensor& log_std) {
  Tensor z = g.mul(g.sub(a, mean), g.exp(g.neg(log_std)));
  Tensor t = g.add_scalar(g.sub(g.scale(g.mul(z, z), -0.5), log_std), -0.5 * kLog2Pi);
  return g.sum_last(t);  // [B]
}
}  // namespace

UpdateReport sac_update(SacAgent& agent, const ReplayBuffer& buffer, Rng& rng) {
  UpdateReport rep;
  rep.entropy_coef = agent.entropy_coef();
  if (buffer.size() < agent.cfg.batch_size) return rep;  // not ready

  const int B = agent.cfg.batch_size;
  const int S = agent.state_dim;
  const auto idx = buffer.sample_indices(B, rng);

  Tensor s = Tensor::zeros({B, S});
  Tensor s2 = Tensor::zeros({B, S});
  Tensor a = Tensor::zeros({B, 3});
  buffer.fill_states(idx, s);
  buffer.fill_next_states(idx, s2);
  buffer.fill_actions(idx, a);

  const double alpha = agent.entropy_coef();
  const double gamma = agent.cfg.gamma;

  // Targets: y = r + gamma * (1-done) * (min Q'(s', a') - alpha * log pi(a'|s')),
  // a' freshly sampled. Pure inference, no tape.
  std::vector<double> y(static_cast<size_t>(B));
  {
    Graph g(false);
    auto [mean2, log_std2] = agent.actor.forward(g, s2);
    Tensor a2 = g.gaussian_sample(mean2, log_std2, rng);
    Tensor logp2 = gaussian_log_prob(g, a2, mean2, log_std2);
    Tensor sa2 = g.concat({s2, a2}, 1);
    Tensor q1v = agent.q1_target.forward(g, sa2)[0];
    Tensor q2v = agent.q2_target.forward(g, sa2)[0];
    for (int i = 0; i < B; ++i) {
      const double qmin = std::min(q1v.data()[i], q2v.data()[i]);
      const double soft = qmin - alpha * logp2.data()[i];
      const double nd = buffer.done_at(idx[size_t(i)]) ? 0.0 : 1.0;
      y[size_t(i)] = buffer.reward_at(idx[size_t(i)]) + gamma * nd * soft;
    }
  }
  Tensor y_t = Tensor::from({B}, y);

  const auto q_params = [&] {
    auto p = agent.q1.params().tensors();
    const auto p2 = agent.q2.params().tensors();
    p.insert(p.end(), p2.begin(), p2.end());
    return p;
  }();
  const auto actor_params = agent.actor.net().params().tensors();

  // Critic regression.
  {
    Graph g;
    Tensor sa = g.concat({s, a}, 1);
    Tensor pred1 = g.reshape(agent.q1.forward(g, sa)[0], {B});
    Tensor pred2 = g.reshape(agent.q2.forward(g, sa)[0], {B});
    Tensor d1 = g.sub(pred1, y_t);
    Tensor d2 = g.sub(pred2, y_t);
    Tensor loss1 = g.mean(g.mul(d1, d1));
    Tensor loss2 = g.mean(g.mul(d2, d2));
    rep.critic1_loss = loss1.item();
    rep.critic2_loss = loss2.item();
    Tensor total = g.add(loss1, loss2);
    g.backward(total);
    agent.opt_q.step(q_params);
  }
  Adam::zero_grad(q_params);
  Adam::zero_grad(actor_params);

  // Actor: maximize min Q(s, a_new) - alpha * log pi; critics contribute
  // gradients only through a_new, their own accumulation is discarded below.
  double mean_logp = 0.0;
  {
    Graph g;
    auto [mean, log_std] = agent.actor.forward(g, s);
    Tensor a_new = g.gaussian_sample(mean, log_std, rng);
    Tensor logp = gaussian_log_prob(g, a_new, mean, log_std);
    Tensor sa = g.concat({s, a_new}, 1);
    Tensor q1v = g.reshape(agent.q1.forward(g, sa)[0], {B});
    Tensor q2v = g.reshape(agent.q2.forward(g, sa)[0], {B});
    Tensor qmin = g.minimum(q1v, q2v);
    Tensor loss = g.mean(g.sub(g.scale(logp, alpha), qmin));
    rep.actor_loss = loss.item();
    g.backward(loss);
    agent.opt_actor.step(actor_params);
    for (int i = 0; i < B; ++i) mean_logp += logp.data()[i];
    mean_logp /= double(B);
  }
  Adam::zero_grad(actor_params);
  Adam::zero_grad(q_params);

  // Entropy coefficient.
  if (agent.cfg.auto_entropy) {
    Graph g;
    Tensor la = agent.log_alpha;
    Tensor loss = g.scale(la, -(mean_logp + agent.cfg.target_entropy));
    rep.alpha_loss = loss.item();
    g.backward(loss);
    agent.opt_alpha.step({agent.log_alpha});
    agent.log_alpha.zero_grad();
  }
  rep.entropy_coef = agent.entropy_coef();

  // Exact polyak refresh.
  Mlp::polyak(agent.q1, agent.q1_target, agent.cfg.tau);
  Mlp::polyak(agent.q2, agent.q2_target, agent.cfg.tau);

  if (!std::isfinite(rep.critic1_loss) || !std::isfinite(rep.critic2_loss) ||
      !std::isfinite(rep.actor_loss) || !std::isfinite(rep.alpha_loss))
    throw NumericalError("sac update: non-finite loss");
  rep.updated = true;
  return rep;
}

// --------------------------------------------------------------------------
// Training loop

SacAgent train_agent(const PhantomVolume& v, const OracleModel* oracle,
                     const EnvConfig& env_cfg, const SacConfig& cfg, TrainTrace* trace,
                     std::ostream* log, const std::string& checkpoint_path) {
  env_cfg.validate();
  cfg.validate();
  const bool fast_before = fast_matmul_enabled();
  set_fast_matmul(cfg.fast_math);

  TrackingEnv env(v, env_cfg, oracle);
  SacAgent agent(env.state_width(), cfg);
  ReplayBuffer buffer(cfg.buffer_capacity, env.state_width());

  const auto iface = interface_voxels(v);
  if (iface.empty()) throw InvalidInput("train_agent: phantom has no interface voxels");

  Rng seed_rng(stream_seed(cfg.rng_seed, "sac-seeds"));
  Rng rollout_rng(stream_seed(cfg.rng_seed, "sac-rollout"));
  Rng update_rng(stream_seed(cfg.rng_seed, "sac-update"));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fresh jittered seeds from random interface voxels.
    std::vector<Vec3> seeds(size_t(cfg.seeds_per_epoch));
    for (auto& s : seeds) {
      const Vec3 c = iface[size_t(seed_rng.uniform_index(iface.size()))];
      s = Vec3(c.x + seed_rng.uniform(-0.5, 0.5), c.y + seed_rng.uniform(-0.5, 0.5),
               c.z + seed_rng.uniform(-0.5, 0.5));
    }
    env.reset(seeds);

    std::vector<double> returns(seeds.size(), 0.0);
    while (!env.all_done()) {
      const auto active = env.active_indices();
      const auto states = env.active_states();
      const auto actions = agent.actor.act(states, false, rollout_rng);
      const auto transitions = env.step(actions);
      for (size_t i = 0; i < transitions.size(); ++i) {
        buffer.push(transitions[i]);
        returns[size_t(active[i])] += transitions[i].reward;
      }
    }

    EpochStats stats;
    const Tractogram done = env.harvest();
    double len_sum = 0.0;
    for (size_t i = 0; i < done.size(); ++i) {
      len_sum += double(done.streamlines[i].size() - 1);
      stats.done_reasons[to_string(done.reasons[i])]++;
    }
    stats.mean_return = std::accumulate(returns.begin(), returns.end(), 0.0) /
                        double(returns.size());
    stats.mean_length = done.size() ? len_sum / double(done.size()) : 0.0;

    if (buffer.size() >= std::max(cfg.warmup_transitions, cfg.batch_size)) {
      for (int u = 0; u < cfg.updates_per_epoch; ++u)
        stats.last_update = sac_update(agent, buffer, update_rng);
    }

    if (trace) trace->epochs.push_back(stats);
    if (log) {
      (*log) << "[agent-train] epoch " << (epoch + 1) << "/" << cfg.epochs << " return "
             << stats.mean_return << " len " << stats.mean_length;
      if (stats.last_update.updated)
        (*log) << " critic " << stats.last_update.critic1_loss << " actor "
               << stats.last_update.actor_loss << " ent " << stats.last_update.entropy_coef;
      (*log) << "\n";
    }
    if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0)
      agent.save(checkpoint_path);
  }

  set_fast_matmul(fast_before);
  return agent;
}

// --------------------------------------------------------------------------
// Checkpointing

void SacAgent::save(const std::string& path) const {
  NamedTensors entries;
  entries.emplace_back(
      "__sac_config__",
      Tensor::from({14}, {cfg.lr, cfg.gamma, cfg.tau, double(cfg.batch_size),
                          double(cfg.buffer_capacity), cfg.target_entropy,
                          cfg.auto_entropy ? 1.0 : 0.0, double(cfg.epochs),
                          double(cfg.seeds_per_epoch), double(cfg.updates_per_epoch),
                          double(cfg.warmup_transitions), double(cfg.hidden_dim),
                          double(state_dim), double(cfg.rng_seed)}));
  auto dump = [&entries](const ParamStore& ps) {
    for (const auto& [name, t] : ps.items()) entries.emplace_back(name, t);
  };
  dump(actor.net().params());
  dump(q1.params());
  dump(q2.params());
  dump(q1_target.params());
  dump(q2_target.params());
  entries.emplace_back("log_alpha", log_alpha);

  auto dump_adam = [&entries](const Adam& opt, const ParamStore& ps) {
    for (const auto& [name, t] : ps.items()) {
      const Adam::Slot* slot = opt.slot(t);
      if (!slot) continue;
      entries.emplace_back("adam.m." + name, Tensor::from(t.shape(), slot->m));
      entries.emplace_back("adam.v." + name, Tensor::from(t.shape(), slot->v));
      entries.emplace_back("adam.t." + name,
                           Tensor::from({1}, {double(slot->t)}));
    }
  };
  dump_adam(opt_actor, actor.net().params());
  dump_adam(opt_q, q1.params());
  dump_adam(opt_q, q2.params());
  const Adam::Slot* aslot = opt_alpha.slot(log_alpha);
  if (aslot) {
    entries.emplace_back("adam.m.log_alpha", Tensor::from({1}, aslot->m));
    entries.emplace_back("adam.v.log_alpha", Tensor::from({1}, aslot->v));
    entries.emplace_back("adam.t.log_alpha", Tensor::from({1}, {double(aslot->t)}));
  }
  save_tensors(entries, path);
}

SacAgent SacAgent::load(const std::string& path) {
  NamedTensors entries = load_tensors(path);
  if (entries.empty() || entries[0].first != "__sac_config__")
    throw FormatError(path + ": missing __sac_config__ preamble");
  const Tensor& c = entries[0].second;
  if (c.numel() != 14) throw FormatError(path + ": bad config preamble");
  SacConfig cfg;
  cfg.lr = c.data()[0];
  cfg.gamma = c.data()[1];
  cfg.tau = c.data()[2];
  cfg.batch_size = int(c.data()[3]);
  cfg.buffer_capacity = int(c.data()[4]);
  cfg.target_entropy = c.data()[5];
  cfg.auto_entropy = c.data()[6] != 0.0;
  cfg.epochs = int(c.data()[7]);
  cfg.seeds_per_epoch = int(c.data()[8]);
  cfg.updates_per_epoch = int(c.data()[9]);
  cfg.warmup_transitions = int(c.data()[10]);
  cfg.hidden_dim = int(c.data()[11]);
  const int state_dim = int(c.data()[12]);
  cfg.rng_seed = uint64_t(c.data()[13]);

  SacAgent agent(state_dim, cfg);
  auto find = [&entries](const std::string& name) -> const Tensor* {
    for (const auto& [n, t] : entries)
      if (n == name) return &t;
    return nullptr;
  };
  auto restore = [&](ParamStore& ps) {
    for (auto& [name, t] : ps.items()) {
      const Tensor* src = find(name);
      if (!src) throw FormatError(path + ": missing tensor " + name);
      if (src->shape() != t.shape())
        throw FormatError(path + ": tensor " + name + " has shape " + shape_str(src->shape()) +
                          ", expected " + shape_str(t.shape()));
      Tensor dst = t;
      std::copy(src->data(), src->data() + src->numel(), dst.data());
    }
  };
  restore(agent.actor.net().params());
  restore(agent.q1.params());
  restore(agent.q2.params());
  restore(agent.q1_target.params());
  restore(agent.q2_target.params());
  if (const Tensor* la = find("log_alpha"))
    agent.log_alpha.data()[0] = la->data()[0];

  auto restore_adam = [&](Adam& opt, const ParamStore& ps) {
    for (const auto& [name, t] : ps.items()) {
      const Tensor* m = find("adam.m." + name);
      const Tensor* vv = find("adam.v." + name);
      const Tensor* tt = find("adam.t." + name);
      if (!m || !vv || !tt) continue;
      Adam::Slot slot;
      slot.m = m->vec();
      slot.v = vv->vec();
      slot.t = int64_t(tt->data()[0]);
      opt.restore_slot(t, std::move(slot));
    }
  };
  restore_adam(agent.opt_actor, agent.actor.net().params());
  restore_adam(agent.opt_q, agent.q1.params());
  restore_adam(agent.opt_q, agent.q2.params());
  {
    const Tensor* m = find("adam.m.log_alpha");
    const Tensor* vv = find("adam.v.log_alpha");
    const Tensor* tt = find("adam.t.log_alpha");
    if (m && vv && tt) {
      Adam::Slot slot;
      slot.m = m->vec();
      slot.v = vv->vec();
      slot.t = int64_t(tt->data()[0]);
      agent.opt_alpha.restore_slot(agent.log_alpha, std::move(slot));
    }
  }
  return agent;
}

}  // namespace tractrl
