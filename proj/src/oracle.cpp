#include "tractrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tractrl/error.hpp"
#include "tractrl/io.hpp"

namespace tractrl {

void OracleConfig::validate() const {
  if (n_points < 2) throw InvalidInput("oracle config: n_points must be >= 2");
  if (embed_dim < 1 || n_blocks < 1 || n_heads < 1 || ffn_dim < 1)
    throw InvalidInput("oracle config: dimensions must be positive");
  if (embed_dim % n_heads != 0)
    throw InvalidInput("oracle config: embed_dim " + std::to_string(embed_dim) +
                       " not divisible by n_heads " + std::to_string(n_heads));
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidInput("oracle config: threshold must lie in (0,1)");
}

namespace {

Tensor xavier(Shape shape, Rng& rng) {
  const double fan_in = double(shape[0]);
  const double fan_out = double(shape[shape.size() - 1]);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  return Tensor::uniform(std::move(shape), rng, -bound, bound, true);
}

Tensor sinusoidal_positions(int length, int dim) {
  Tensor pe = Tensor::zeros({length, dim});
  for (int pos = 0; pos < length; ++pos)
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, double(2 * (i / 2)) / double(dim));
      const double angle = double(pos) / rate;
      pe.data()[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

}  // namespace

OracleModel::OracleModel(OracleConfig cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);
  const int E = cfg_.embed_dim;
  const int F = cfg_.ffn_dim;

  params_.add("input.w", xavier({3, E}, rng));
  params_.add("input.b", Tensor::zeros({E}, true));
  params_.add("score_token", Tensor::randn({1, 1, E}, rng, 0.02, true));
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    const std::string p = "blk" + std::to_string(b) + ".";
    for (const char* name : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
      params_.add(p + name, xavier({E, E}, rng));
    for (const char* name : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
      params_.add(p + name, Tensor::zeros({E}, true));
    params_.add(p + "ln1.g", Tensor::full({E}, 1.0, true));
    params_.add(p + "ln1.b", Tensor::zeros({E}, true));
    params_.add(p + "ffn.w1", xavier({E, F}, rng));
    params_.add(p + "ffn.b1", Tensor::zeros({F}, true));
    params_.add(p + "ffn.w2", xavier({F, E}, rng));
    params_.add(p + "ffn.b2", Tensor::zeros({E}, true));
    params_.add(p + "ln2.g", Tensor::full({E}, 1.0, true));
    params_.add(p + "ln2.b", Tensor::zeros({E}, true));
  }
  params_.add("head.w", xavier({E, 1}, rng));
  params_.add("head.b", Tensor::zeros({1}, true));

  positional_ = sinusoidal_positions(cfg_.n_points, E);
}

int64_t OracleModel::encoder_parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_.items())
    if (name.rfind("blk", 0) == 0) n += t.numel();
  return n;
}

int64_t OracleModel::expected_encoder_parameter_count(const OracleConfig& cfg) {
  const int64_t E = cfg.embed_dim, F = cfg.ffn_dim;
  const int64_t attn = 4 * (E * E + E);
  const int64_t ffn = 2 * E * F + F + E;
  const int64_t norms = 2 * 2 * E;
  return cfg.n_blocks * (attn + ffn + norms);
}

int64_t OracleModel::expected_parameter_count(const OracleConfig& cfg) {
  const int64_t E = cfg.embed_dim;
  return expected_encoder_parameter_count(cfg) + (3 * E + E) + E + (E + 1);
}

Tensor OracleModel::forward(Graph& g, const Tensor& dirs) const {
  if (dirs.rank() != 3 || dirs.dim(2) != 3 || dirs.dim(1) != cfg_.n_points - 1)
    throw ShapeError("oracle forward: want [B," + std::to_string(cfg_.n_points - 1) +
                     ",3], got " + shape_str(dirs.shape()));
  const int64_t B = dirs.dim(0);
  const int E = cfg_.embed_dim;
  const int H = cfg_.n_heads;
  const int D = E / H;

  Tensor x = g.add(g.matmul(dirs, params_.get("input.w")), params_.get("input.b"));
  Tensor tok = g.expand0(params_.get("score_token"), B);
  x = g.concat({tok, x}, 1);      // [B, n_points, E], SCORE first
  x = g.add(x, positional_);      // PE broadcasts over the batch

  for (int b = 0; b < cfg_.n_blocks; ++b) {
    const std::string p = "blk" + std::to_string(b) + ".";
    Tensor q = g.add(g.matmul(x, params_.get(p + "attn.wq")), params_.get(p + "attn.bq"));
    Tensor k = g.add(g.matmul(x, params_.get(p + "attn.wk")), params_.get(p + "attn.bk"));
    Tensor v = g.add(g.matmul(x, params_.get(p + "attn.wv")), params_.get(p + "attn.bv"));
    std::vector<Tensor> heads;
    heads.reserve(size_t(H));
    for (int h = 0; h < H; ++h) {
      Tensor qh = g.slice(q, -1, h * D, D);
      Tensor kh = g.slice(k, -1, h * D, D);
      Tensor vh = g.slice(v, -1, h * D, D);
      Tensor scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(D)));
      heads.push_back(g.matmul(g.softmax(scores), vh));
    }
    Tensor ctx = g.concat(heads, -1);
    Tensor attn_out =
        g.add(g.matmul(ctx, params_.get(p + "attn.wo")), params_.get(p + "attn.bo"));
    x = g.add(x, attn_out);
    x = g.add(g.mul(g.layer_norm(x), params_.get(p + "ln1.g")), params_.get(p + "ln1.b"));

    Tensor h1 = g.relu(g.add(g.matmul(x, params_.get(p + "ffn.w1")), params_.get(p + "ffn.b1")));
    Tensor h2 = g.add(g.matmul(h1, params_.get(p + "ffn.w2")), params_.get(p + "ffn.b2"));
    x = g.add(x, h2);
    x = g.add(g.mul(g.layer_norm(x), params_.get(p + "ln2.g")), params_.get(p + "ln2.b"));
  }

  Tensor cls = g.slice(x, 1, 0, 1);  // [B,1,E], the SCORE position
  Tensor logits = g.add(g.matmul(cls, params_.get("head.w")), params_.get("head.b"));
  return g.reshape(g.sigmoid(logits), {B});
}

Tensor OracleModel::pack_directions(const std::vector<Streamline>& batch) const {
  const int T = cfg_.n_points - 1;
  Tensor out = Tensor::zeros({int64_t(batch.size()), T, 3});
  for (size_t i = 0; i < batch.size(); ++i) {
    const Streamline rs = resample(batch[i], cfg_.n_points);
    double* dst = out.data() + int64_t(i) * T * 3;
    for (int t = 0; t < T; ++t) {
      const Vec3 d = rs[size_t(t) + 1] - rs[size_t(t)];
      dst[t * 3 + 0] = d.x;
      dst[t * 3 + 1] = d.y;
      dst[t * 3 + 2] = d.z;
    }
  }
  return out;
}

double OracleModel::score(const Streamline& s) const {
  if (s.size() < 2) throw InvalidInput("oracle score: streamline needs >= 2 points");
  return score_batch({s})[0];
}

std::vector<double> OracleModel::score_batch(const std::vector<Streamline>& batch) const {
  if (batch.empty()) return {};
  for (const auto& s : batch)
    if (s.size() < 2) throw InvalidInput("oracle score: streamline needs >= 2 points");
  Graph g(false);
  Tensor scores = forward(g, pack_directions(batch));
  return std::vector<double>(scores.data(), scores.data() + scores.numel());
}

// --------------------------------------------------------------------------
// Checkpointing: TNSR archive with a config preamble record.

void OracleModel::save(const std::string& path) const {
  NamedTensors entries;
  entries.emplace_back(
      "__oracle_config__",
      Tensor::from({6}, {double(cfg_.n_points), double(cfg_.embed_dim), double(cfg_.n_blocks),
                         double(cfg_.n_heads), double(cfg_.ffn_dim), cfg_.threshold}));
  for (const auto& [name, t] : params_.items()) entries.emplace_back(name, t);
  save_tensors(entries, path);
}

OracleModel OracleModel::load(const std::string& path) {
  NamedTensors entries = load_tensors(path);
  if (entries.empty() || entries[0].first != "__oracle_config__")
    throw FormatError(path + ": missing __oracle_config__ preamble");
  const Tensor& c = entries[0].second;
  if (c.numel() != 6) throw FormatError(path + ": bad config preamble");
  OracleConfig cfg;
  cfg.n_points = int(c.data()[0]);
  cfg.embed_dim = int(c.data()[1]);
  cfg.n_blocks = int(c.data()[2]);
  cfg.n_heads = int(c.data()[3]);
  cfg.ffn_dim = int(c.data()[4]);
  cfg.threshold = c.data()[5];
  OracleModel m(cfg, 0);
  for (size_t i = 1; i < entries.size(); ++i) {
    const auto& [name, t] = entries[i];
    Tensor& dst = m.params_.get(name);
    if (dst.shape() != t.shape())
      throw FormatError(path + ": tensor " + name + " has shape " + shape_str(t.shape()) +
                        ", expected " + shape_str(dst.shape()));
    std::copy(t.data(), t.data() + t.numel(), dst.data());
  }
  return m;
}

// --------------------------------------------------------------------------
// Augmentation

std::pair<Streamline, double> augment(const Streamline& s, double target, Rng& rng,
                                      const AugmentOptions& opt, int n_points) {
  Streamline out = s;
  if (opt.flip_prob > 0.0 && rng.bernoulli(opt.flip_prob))
    std::reverse(out.begin(), out.end());
  if (opt.cut_prob > 0.0 && rng.bernoulli(opt.cut_prob) && out.size() > 3) {
    const double frac = rng.uniform(opt.cut_min_fraction, 1.0);
    const size_t keep = std::max<size_t>(2, size_t(std::llround(frac * double(out.size()))));
    if (keep < out.size()) {
      const bool prefix = rng.bernoulli(0.5);
      if (prefix)
        out.resize(keep);
      else
        out.erase(out.begin(), out.end() - ptrdiff_t(keep));
      out = resample(out, n_points);
    }
  }
  if (opt.noise_sigma > 0.0)
    for (Vec3& p : out) {
      p.x += rng.normal() * opt.noise_sigma;
      p.y += rng.normal() * opt.noise_sigma;
      p.z += rng.normal() * opt.noise_sigma;
    }
  return {std::move(out), target};
}

// --------------------------------------------------------------------------
// Training

ClassificationMetrics classify_metrics(const std::vector<double>& scores,
                                       const std::vector<double>& targets, double threshold) {
  ClassificationMetrics m;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = targets[i] >= 0.5;
    if (pred && pos)
      m.tp++;
    else if (pred && !pos)
      m.fp++;
    else if (!pred && pos)
      m.fn++;
    else
      m.tn++;
  }
  const double n = double(scores.size());
  m.accuracy = n > 0 ? double(m.tp + m.tn) / n : 0.0;
  m.sensitivity = (m.tp + m.fn) > 0 ? double(m.tp) / double(m.tp + m.fn) : 0.0;
  m.precision = (m.tp + m.fp) > 0 ? double(m.tp) / double(m.tp + m.fp) : 0.0;
  m.f1 = (m.sensitivity + m.precision) > 0.0
             ? 2.0 * m.sensitivity * m.precision / (m.sensitivity + m.precision)
             : 0.0;
  return m;
}

OracleModel train_oracle(const LabeledStreamlineSet& data, const OracleConfig& cfg,
                         const OracleTrainOptions& opt, OracleTrainReport* report,
                         std::ostream* log) {
  if (data.streamlines.empty() || data.streamlines.size() != data.targets.size())
    throw InvalidInput("train_oracle: empty or inconsistent labeled set");
  std::vector<size_t> pos_idx, neg_idx;
  for (size_t i = 0; i < data.targets.size(); ++i)
    (data.targets[i] >= 0.5 ? pos_idx : neg_idx).push_back(i);
  if (pos_idx.empty() || neg_idx.empty())
    throw InvalidInput("train_oracle: both classes must be present");

  const bool fast_before = fast_matmul_enabled();
  set_fast_matmul(opt.fast_math);

  Rng rng(stream_seed(opt.rng_seed, "oracle-train"));
  OracleModel model(cfg, stream_seed(opt.rng_seed, "oracle-init"));
  Adam adam(opt.lr);
  const auto param_list = model.params().tensors();

  // Stratified holdout.
  auto shuffle = [&rng](std::vector<size_t>& v) {
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[size_t(rng.uniform_index(i))]);
  };
  shuffle(pos_idx);
  shuffle(neg_idx);
  const size_t pos_val = std::max<size_t>(1, size_t(double(pos_idx.size()) * opt.val_fraction));
  const size_t neg_val = std::max<size_t>(1, size_t(double(neg_idx.size()) * opt.val_fraction));
  std::vector<size_t> train_idx, val_idx;
  for (size_t i = 0; i < pos_idx.size(); ++i)
    (i < pos_val ? val_idx : train_idx).push_back(pos_idx[i]);
  for (size_t i = 0; i < neg_idx.size(); ++i)
    (i < neg_val ? val_idx : train_idx).push_back(neg_idx[i]);
  if (train_idx.empty()) throw InvalidInput("train_oracle: no training samples after split");

  std::vector<Streamline> val_lines;
  std::vector<double> val_targets;
  for (size_t i : val_idx) {
    val_lines.push_back(data.streamlines[i]);
    val_targets.push_back(data.targets[i]);
  }

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle(train_idx);
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (size_t b0 = 0; b0 < train_idx.size(); b0 += size_t(opt.batch_size)) {
      const size_t b1 = std::min(train_idx.size(), b0 + size_t(opt.batch_size));
      std::vector<Streamline> batch;
      std::vector<double> targets;
      batch.reserve(b1 - b0);
      for (size_t i = b0; i < b1; ++i) {
        const Streamline& src = data.streamlines[train_idx[i]];
        const double tgt = data.targets[train_idx[i]];
        if (opt.augment_enabled) {
          auto [aug, t] = augment(src, tgt, rng, opt.augment, cfg.n_points);
          batch.push_back(std::move(aug));
          targets.push_back(t);
        } else {
          batch.push_back(src);
          targets.push_back(tgt);
        }
      }
      Graph g;
      Tensor scores = model.forward(g, model.pack_directions(batch));
      Tensor target_t = Tensor::from({int64_t(targets.size())}, targets);
      Tensor diff = g.sub(scores, target_t);
      Tensor loss = g.mean(g.mul(diff, diff));
      const double loss_v = loss.item();
      if (!std::isfinite(loss_v)) throw NumericalError("train_oracle: non-finite loss");
      g.backward(loss);
      adam.step(param_list);
      Adam::zero_grad(param_list);
      epoch_loss += loss_v;
      n_batches++;
    }
    epoch_loss /= std::max(1, n_batches);

    const auto val_scores = model.score_batch(val_lines);
    const auto m = classify_metrics(val_scores, val_targets, cfg.threshold);
    if (report) {
      report->train_loss.push_back(epoch_loss);
      report->val_accuracy.push_back(m.accuracy);
      report->val_sensitivity.push_back(m.sensitivity);
      report->val_precision.push_back(m.precision);
      report->val_f1.push_back(m.f1);
    }
    if (log)
      (*log) << "[oracle-train] epoch " << (epoch + 1) << "/" << opt.epochs << " loss "
             << epoch_loss << " val-acc " << m.accuracy << " val-f1 " << m.f1 << "\n";
  }

  set_fast_matmul(fast_before);
  return model;
}

}  // namespace tractrl
