#include <doctest.h>

#include <cmath>

#include "tractrl/error.hpp"
#include "tractrl/oracle.hpp"

using namespace tractrl;

namespace {

// Small config keeps full-model tests fast; the default config is covered by
// the count checks and the acceptance suite.
OracleConfig tiny_config() {
  OracleConfig cfg;
  cfg.n_points = 16;
  cfg.embed_dim = 16;
  cfg.n_blocks = 2;
  cfg.n_heads = 2;
  cfg.ffn_dim = 32;
  return cfg;
}

Streamline straight_line(double len, int n) {
  Streamline s;
  for (int i = 0; i < n; ++i) s.push_back({0, 0, len * double(i) / (n - 1)});
  return s;
}

Streamline kinked_line(double len, int n) {
  Streamline s;
  const int half = n / 2;
  for (int i = 0; i < half; ++i) s.push_back({0, 0, len * 0.5 * double(i) / (half - 1)});
  for (int i = 1; i <= n - half; ++i)
    s.push_back({len * 0.5 * double(i) / (n - half), 0, len * 0.5});
  return s;
}

}  // namespace

TEST_CASE("parameter count: default config allocates the published total") {
  OracleConfig cfg;  // defaults: 128 points, 32 dim, 4 blocks, 4 heads, 2048 ffn
  OracleModel m(cfg, 1);
  CHECK(m.encoder_parameter_count() == 550016);
  CHECK(OracleModel::expected_encoder_parameter_count(cfg) == 550016);
  // Input projection (128) + SCORE token (32) + head (33) ride on top.
  CHECK(m.parameter_count() == 550016 + 193);
  CHECK(OracleModel::expected_parameter_count(cfg) == m.parameter_count());
}

TEST_CASE("parameter count: closed form matches allocation for 20 random configs") {
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    OracleConfig cfg;
    cfg.n_heads = 1 + int(rng.uniform_index(4));
    cfg.embed_dim = cfg.n_heads * (2 + int(rng.uniform_index(12)));
    cfg.n_blocks = 1 + int(rng.uniform_index(5));
    cfg.ffn_dim = 8 + int(rng.uniform_index(256));
    cfg.n_points = 8 + int(rng.uniform_index(64));
    OracleModel m(cfg, uint64_t(i));
    CHECK(m.parameter_count() == OracleModel::expected_parameter_count(cfg));
    CHECK(m.encoder_parameter_count() ==
          OracleModel::expected_encoder_parameter_count(cfg));
  }
}

TEST_CASE("score: outputs lie strictly inside (0,1)") {
  OracleModel m(tiny_config(), 3);
  for (double len : {1.0, 5.0, 20.0}) {
    const double s = m.score(straight_line(len, 12));
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
  const double k = m.score(kinked_line(10.0, 9));
  CHECK(k > 0.0);
  CHECK(k < 1.0);
}

TEST_CASE("score: rejects sub-2-point streamlines") {
  OracleModel m(tiny_config(), 3);
  CHECK_THROWS_AS(m.score({{1, 2, 3}}), InvalidInput);
  CHECK_THROWS_AS(m.score_batch({straight_line(3, 5), {{0, 0, 0}}}), InvalidInput);
  // A 2-point streamline is scoreable (resampled to collinear points).
  CHECK(m.score({{0, 0, 0}, {0, 0, 4}}) > 0.0);
}

TEST_CASE("score_batch: empty input gives empty output") {
  OracleModel m(tiny_config(), 3);
  CHECK(m.score_batch({}).empty());
}

TEST_CASE("score_batch: batch of one equals single score") {
  OracleModel m(tiny_config(), 5);
  const Streamline s = kinked_line(8.0, 11);
  CHECK(std::abs(m.score_batch({s})[0] - m.score(s)) < 1e-6);
}

TEST_CASE("score_batch: duplicated streamline scores identically") {
  OracleModel m(tiny_config(), 5);
  const Streamline s = straight_line(6.0, 9);
  const auto scores = m.score_batch(std::vector<Streamline>(8, s));
  for (double v : scores) CHECK(v == scores[0]);
}

TEST_CASE("score_batch: random batch of 64 matches one-at-a-time loop") {
  OracleModel m(tiny_config(), 7);
  Rng rng(7);
  std::vector<Streamline> batch;
  for (int i = 0; i < 64; ++i) {
    Streamline s;
    Vec3 p(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10));
    s.push_back(p);
    const int n = 3 + int(rng.uniform_index(20));
    for (int j = 0; j < n; ++j) {
      p += Vec3(rng.normal() * 0.5, rng.normal() * 0.5, 0.5 + rng.uniform());
      s.push_back(p);
    }
    batch.push_back(s);
  }
  const auto fast = m.score_batch(batch);
  double max_diff = 0.0;
  for (size_t i = 0; i < batch.size(); ++i)
    max_diff = std::max(max_diff, std::abs(fast[i] - m.score(batch[i])));
  CHECK(max_diff < 1e-5);
}

TEST_CASE("augment: forced flip with no cut/noise reverses exactly") {
  Rng rng(1);
  AugmentOptions opt;
  opt.flip_prob = 1.0;
  opt.cut_prob = 0.0;
  opt.noise_sigma = 0.0;
  const Streamline s = kinked_line(10.0, 9);
  const auto [aug, target] = augment(s, 1.0, rng, opt, 16);
  REQUIRE(aug.size() == s.size());
  CHECK(target == 1.0);
  for (size_t i = 0; i < s.size(); ++i)
    CHECK((aug[i] - s[s.size() - 1 - i]).norm() == 0.0);
}

TEST_CASE("augment: everything disabled is the identity") {
  Rng rng(2);
  AugmentOptions opt;
  opt.flip_prob = 0.0;
  opt.cut_prob = 0.0;
  opt.noise_sigma = 0.0;
  const Streamline s = straight_line(7.0, 13);
  const auto [aug, target] = augment(s, 0.0, rng, opt, 16);
  REQUIRE(aug.size() == s.size());
  for (size_t i = 0; i < s.size(); ++i) CHECK((aug[i] - s[i]).norm() == 0.0);
}

TEST_CASE("augment: cut keeps at least half and resamples to n_points") {
  Rng rng(3);
  AugmentOptions opt;
  opt.flip_prob = 0.0;
  opt.cut_prob = 1.0;
  opt.noise_sigma = 0.0;
  const Streamline s = straight_line(20.0, 41);
  int cut_seen = 0;
  for (int i = 0; i < 50; ++i) {
    const auto [aug, target] = augment(s, 1.0, rng, opt, 16);
    const double len = arc_length(aug);
    CHECK(len >= 0.5 * 20.0 - 1.0);
    CHECK(len <= 20.0 + 1e-9);
    if (len < 20.0 - 1e-9) {
      cut_seen++;
      CHECK(aug.size() == 16);
    }
  }
  CHECK(cut_seen > 25);
}

TEST_CASE("augment: Monte-Carlo noise law, mean |displacement| = sigma*sqrt(2/pi)") {
  Rng rng(4);
  AugmentOptions opt;
  opt.flip_prob = 0.0;
  opt.cut_prob = 0.0;
  opt.noise_sigma = 0.1;
  const Streamline s = straight_line(5.0, 6);
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto [aug, target] = augment(s, 1.0, rng, opt, 16);
    for (size_t j = 0; j < s.size(); ++j) {
      acc += std::abs(aug[j].x - s[j].x) + std::abs(aug[j].y - s[j].y) +
             std::abs(aug[j].z - s[j].z);
      count += 3;
    }
  }
  const double want = 0.1 * std::sqrt(2.0 / M_PI);
  CHECK(std::abs(acc / count - want) / want < 0.05);
}

TEST_CASE("full tiny model gradient check under 1e-4") {
  OracleConfig cfg;
  cfg.n_points = 8;
  cfg.embed_dim = 8;
  cfg.n_blocks = 1;
  cfg.n_heads = 2;
  cfg.ffn_dim = 16;
  OracleModel m(cfg, 11);
  Rng rng(11);
  Tensor dirs = Tensor::uniform({2, cfg.n_points - 1, 3}, rng, -0.5, 0.5);
  // Input-side gradient through the whole stack.
  const double err_in = grad_check(
      [&](Graph& g, const Tensor& x) { return g.sum(m.forward(g, x)); }, dirs, 1e-5);
  CHECK(err_in < 1e-4);
  // Parameter-side gradient: pass the live parameter tensor as the probe so
  // finite differences perturb the model in place.
  const Tensor fixed = Tensor::uniform({2, cfg.n_points - 1, 3}, rng, -0.5, 0.5);
  for (const char* name : {"score_token", "head.w", "blk0.attn.wq", "blk0.ffn.w1"}) {
    const double err_p = grad_check(
        [&](Graph& g, const Tensor&) { return g.sum(m.forward(g, fixed)); },
        m.params().get(name), 1e-5);
    CHECK(err_p < 1e-4);
  }
}

TEST_CASE("train_oracle: separable straight-vs-kinked set reaches 0.95 accuracy") {
  OracleConfig cfg = tiny_config();
  LabeledStreamlineSet data;
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const double len = 8.0 + rng.uniform(0, 4);
    data.streamlines.push_back(straight_line(len, 10 + int(rng.uniform_index(5))));
    data.targets.push_back(1.0);
    data.streamlines.push_back(kinked_line(len, 11 + int(rng.uniform_index(4))));
    data.targets.push_back(0.0);
  }
  OracleTrainOptions opt;
  opt.epochs = 20;
  opt.batch_size = 16;
  opt.lr = 1e-3;
  opt.rng_seed = 5;
  opt.fast_math = false;
  opt.augment.noise_sigma = 0.05;
  OracleTrainReport report;
  train_oracle(data, cfg, opt, &report);
  REQUIRE(report.val_accuracy.size() == 20);
  CHECK(report.val_accuracy.back() >= 0.95);
}

TEST_CASE("train_oracle: zero epochs returns the initialization") {
  OracleConfig cfg = tiny_config();
  LabeledStreamlineSet data;
  data.streamlines = {straight_line(5, 8), kinked_line(5, 8)};
  data.targets = {1.0, 0.0};
  OracleTrainOptions opt;
  opt.epochs = 0;
  opt.rng_seed = 9;
  const OracleModel trained = train_oracle(data, cfg, opt);
  const OracleModel fresh(cfg, stream_seed(9, "oracle-init"));
  const auto& a = trained.params().items();
  const auto& b = fresh.params().items();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].first == b[i].first);
    for (int64_t j = 0; j < a[i].second.numel(); ++j)
      CHECK(a[i].second.data()[j] == b[i].second.data()[j]);
  }
}

TEST_CASE("train_oracle: identical seeds give identical loss traces") {
  OracleConfig cfg = tiny_config();
  LabeledStreamlineSet data;
  Rng rng(33);
  for (int i = 0; i < 24; ++i) {
    data.streamlines.push_back(straight_line(6 + rng.uniform(0, 2), 9));
    data.targets.push_back(1.0);
    data.streamlines.push_back(kinked_line(6 + rng.uniform(0, 2), 9));
    data.targets.push_back(0.0);
  }
  OracleTrainOptions opt;
  opt.epochs = 3;
  opt.batch_size = 8;
  opt.rng_seed = 77;
  OracleTrainReport r1, r2;
  train_oracle(data, cfg, opt, &r1);
  train_oracle(data, cfg, opt, &r2);
  REQUIRE(r1.train_loss.size() == r2.train_loss.size());
  for (size_t i = 0; i < r1.train_loss.size(); ++i)
    CHECK(r1.train_loss[i] == r2.train_loss[i]);
}

TEST_CASE("train_oracle: training loss decreases with frozen augmentation") {
  OracleConfig cfg = tiny_config();
  LabeledStreamlineSet data;
  Rng rng(44);
  for (int i = 0; i < 40; ++i) {
    data.streamlines.push_back(straight_line(7 + rng.uniform(0, 3), 10));
    data.targets.push_back(1.0);
    data.streamlines.push_back(kinked_line(7 + rng.uniform(0, 3), 10));
    data.targets.push_back(0.0);
  }
  OracleTrainOptions opt;
  opt.epochs = 10;
  opt.batch_size = 16;
  opt.augment_enabled = false;
  opt.rng_seed = 55;
  OracleTrainReport report;
  train_oracle(data, cfg, opt, &report);
  REQUIRE(report.train_loss.size() == 10);
  const double first = (report.train_loss[0] + report.train_loss[1]) / 2;
  const double last = (report.train_loss[8] + report.train_loss[9]) / 2;
  CHECK(last < first);
}

TEST_CASE("train_oracle: single-class data is rejected") {
  OracleConfig cfg = tiny_config();
  LabeledStreamlineSet data;
  data.streamlines = {straight_line(5, 8), straight_line(6, 8)};
  data.targets = {1.0, 1.0};
  CHECK_THROWS_AS(train_oracle(data, cfg, OracleTrainOptions{}), InvalidInput);
  LabeledStreamlineSet empty;
  CHECK_THROWS_AS(train_oracle(empty, cfg, OracleTrainOptions{}), InvalidInput);
}

TEST_CASE("trained model is sensitive to direction order (positional encoding)") {
  OracleConfig cfg = tiny_config();
  LabeledStreamlineSet data;
  Rng rng(66);
  for (int i = 0; i < 60; ++i) {
    data.streamlines.push_back(straight_line(8 + rng.uniform(0, 3), 10));
    data.targets.push_back(1.0);
    data.streamlines.push_back(kinked_line(8 + rng.uniform(0, 3), 10));
    data.targets.push_back(0.0);
  }
  OracleTrainOptions opt;
  opt.epochs = 8;
  opt.batch_size = 16;
  opt.rng_seed = 13;
  const OracleModel m = train_oracle(data, cfg, opt);

  int changed = 0;
  const int probes = 100;
  Rng scramble_rng(99);
  for (int p = 0; p < probes; ++p) {
    Streamline s;
    Vec3 pos(rng.uniform(2, 6), rng.uniform(2, 6), 0);
    s.push_back(pos);
    for (int j = 0; j < cfg.n_points - 1; ++j) {
      const double t = double(j) / (cfg.n_points - 2);
      pos += Vec3(std::cos(t * 2.5), std::sin(t * 2.5), 0.7) * 0.6;
      s.push_back(pos);
    }
    auto dirs = to_directions(s);
    for (size_t i = dirs.size(); i > 1; --i)
      std::swap(dirs[i - 1], dirs[scramble_rng.uniform_index(i)]);
    Streamline scrambled{s.front()};
    for (const Vec3& d : dirs) scrambled.push_back(scrambled.back() + d);
    if (std::abs(m.score(s) - m.score(scrambled)) > 1e-6) changed++;
  }
  CHECK(changed >= 90);
}

TEST_CASE("checkpoint: save/load round trip preserves config and parameters") {
  OracleConfig cfg = tiny_config();
  OracleModel m(cfg, 123);
  const std::string path = "/tmp/tractrl_oracle_rt.tnsr";
  m.save(path);
  const OracleModel back = OracleModel::load(path);
  CHECK(back.config() == cfg);
  const auto& a = m.params().items();
  const auto& b = back.params().items();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i)
    for (int64_t j = 0; j < a[i].second.numel(); ++j)
      CHECK(float(a[i].second.data()[j]) == float(b[i].second.data()[j]));
  const Streamline s = kinked_line(9, 12);
  CHECK(std::abs(m.score(s) - back.score(s)) < 1e-5);
}

TEST_CASE("config validation") {
  OracleConfig cfg;
  cfg.embed_dim = 30;
  cfg.n_heads = 4;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = OracleConfig{};
  cfg.threshold = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = OracleConfig{};
  cfg.n_points = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}
