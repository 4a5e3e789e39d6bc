#include <doctest.h>

#include "tractrl/config.hpp"
#include "tractrl/error.hpp"

using namespace tractrl;

TEST_CASE("config: parsing, sections, comments, types") {
  const Config c = Config::parse(R"(
seed = 7
# a comment
[env]
step_size = 0.25   ; trailing comment
oracle_stop = false
t_min = 15
[phantom]
preset = straight-tube
)");
  CHECK(config_seed(c) == 7);
  const EnvConfig e = env_config_from(c);
  CHECK(e.step_size == 0.25);
  CHECK(e.oracle_stop == false);
  CHECK(e.t_min == 15);
  CHECK(e.alpha == 10.0);        // paper default
  CHECK(e.max_angle == 30.0);    // paper default
  CHECK(e.wm_threshold == 0.1);  // paper default
}

TEST_CASE("config: paper constants surface as defaults") {
  const Config c = Config::parse("");
  const EnvConfig e = env_config_from(c);
  CHECK(e.step_size == 0.5);
  CHECK(e.alpha == 10.0);
  CHECK(e.t_min == 20);
  CHECK(e.max_angle == 30.0);
  CHECK(e.wm_threshold == 0.1);
  CHECK(e.oracle_threshold == 0.5);
  const SacConfig s = sac_config_from(c);
  CHECK(s.lr == 0.0005);
  CHECK(s.gamma == 0.95);
  CHECK(s.hidden_dim == 1024);
  const OracleConfig o = oracle_config_from(c);
  CHECK(o.n_points == 128);
  CHECK(o.embed_dim == 32);
  CHECK(o.n_blocks == 4);
  CHECK(o.n_heads == 4);
  CHECK(o.ffn_dim == 2048);
  CHECK(o.threshold == 0.5);
}

TEST_CASE("config: unknown keys are hard errors listing the offenders") {
  const Config c = Config::parse("[env]\nstepsize = 0.5\n[oracle]\nnheads = 2\n");
  try {
    c.validate_known_keys();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("stepsize") != std::string::npos);
    CHECK(msg.find("nheads") != std::string::npos);
  }
}

TEST_CASE("config: unknown sections are rejected") {
  const Config c = Config::parse("[nonsense]\nx = 1\n");
  CHECK_THROWS_AS(c.validate_known_keys(), ConfigError);
}

TEST_CASE("config: malformed values raise ConfigError") {
  const Config c = Config::parse("[env]\nstep_size = fast\n");
  CHECK_THROWS_AS(env_config_from(c), ConfigError);
  const Config c2 = Config::parse("[env]\noracle_stop = maybe\n");
  CHECK_THROWS_AS(env_config_from(c2), ConfigError);
  const Config c3 = Config::parse("[env]\nt_min = 2.5\n");
  CHECK_THROWS_AS(env_config_from(c3), ConfigError);
}

TEST_CASE("config: custom bundle keys build a custom phantom spec") {
  const Config c = Config::parse(R"(
[phantom]
dim_x = 20
dim_y = 20
dim_z = 24
bundle0_points = 9,9,4 | 9,9,19
bundle0_radius = 2.0
bundle0_labels = 5,6
)");
  c.validate_known_keys();
  const PhantomSpec spec = phantom_from_config(c);
  REQUIRE(spec.bundles.size() == 1);
  CHECK(spec.dims.x == 20);
  CHECK(spec.bundles[0].control_points.size() == 2);
  CHECK(spec.bundles[0].label_a == 5);
  CHECK(spec.bundles[0].radius == 2.0);
}

TEST_CASE("config: preset with overrides") {
  const Config c = Config::parse("[phantom]\npreset = straight-tube\nradius = 3.0\n");
  const PhantomSpec spec = phantom_from_config(c);
  CHECK(spec.bundles[0].radius == 3.0);
}

TEST_CASE("config: normalized form is stable for hashing") {
  const Config a = Config::parse("[env]\nalpha = 10\nstep_size = 0.5\n");
  const Config b = Config::parse("[env]\nstep_size = 0.5\nalpha = 10\n");
  CHECK(a.normalized() == b.normalized());
}

TEST_CASE("config: seed derives distinct per-stage streams") {
  CHECK(stream_seed(42, "phantom") != stream_seed(42, "oracle-train"));
  CHECK(stream_seed(42, "phantom") != stream_seed(43, "phantom"));
  CHECK(stream_seed(42, "phantom") == stream_seed(42, "phantom"));
}
