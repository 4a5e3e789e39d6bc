#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tractrl/config.hpp"
#include "tractrl/error.hpp"
#include "tractrl/evaluator.hpp"
#include "tractrl/io.hpp"
#include "tractrl/oracle.hpp"
#include "tractrl/phantom.hpp"
#include "tractrl/sac.hpp"
#include "tractrl/tracker.hpp"

extern "C" void openblas_set_num_threads(int);

namespace {

using namespace tractrl;

struct Cli {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  bool quiet = false;
  int workers = 0;
};

std::ostream* log_stream(const Cli& cli) { return cli.quiet ? nullptr : &std::cerr; }

void logln(const Cli& cli, const std::string& msg) {
  if (!cli.quiet) std::cerr << msg << "\n";
}

Config load_config(const Cli& cli) {
  Config c = cli.config_path.empty() ? Config::parse("") : Config::parse_file(cli.config_path);
  c.validate_known_keys();
  return c;
}

uint64_t effective_seed(const Cli& cli, const Config& c) {
  return cli.seed_set ? cli.seed : config_seed(c);
}

std::string hex64(uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// Sidecar recording everything needed to reproduce an artifact bit-exactly.
void write_manifest(const std::string& out_path, const std::string& command,
                    const Config& config, uint64_t seed,
                    const std::vector<std::string>& inputs) {
  nlohmann::json m;
  m["command"] = command;
  m["seed"] = seed;
  m["config_hash"] = hex64(fnv1a(config.normalized()));
  m["inputs"] = nlohmann::json::object();
  for (const auto& in : inputs) m["inputs"][in] = hex64(file_checksum(in));
  m["output"] = out_path;
  m["output_checksum"] = hex64(file_checksum(out_path));
  atomic_write_text(out_path + ".manifest.json", m.dump(2) + "\n");
}

int cmd_phantom_gen(const Cli& cli, const std::string& out) {
  const Config c = load_config(cli);
  const uint64_t seed = effective_seed(cli, c);
  const PhantomSpec spec = phantom_from_config(c);
  const PhantomVolume v = generate_phantom(spec, stream_seed(seed, "phantom"));
  save_phantom(v, out);
  write_manifest(out, "phantom-gen", c, seed, {});
  logln(cli, "[phantom-gen] " + out + ": " + std::to_string(v.dims.x) + "x" +
                 std::to_string(v.dims.y) + "x" + std::to_string(v.dims.z) + ", " +
                 std::to_string(v.bundles.size()) + " bundles");
  return 0;
}

int cmd_oracle_data(const Cli& cli, const std::string& phantom_path, const std::string& out) {
  const Config c = load_config(cli);
  const uint64_t seed = effective_seed(cli, c);
  const PhantomVolume v = load_phantom(phantom_path);
  const auto set = synthesize_labeled_set(v, oracle_data_n_pos(c), oracle_data_n_neg(c),
                                          stream_seed(seed, "oracle-data"));
  Tractogram t;
  t.streamlines = set.streamlines;
  save_tractogram(t, out);
  save_scores(set.targets, out + ".scores.txt");
  write_manifest(out, "oracle-data", c, seed, {phantom_path});
  logln(cli, "[oracle-data] " + out + ": " + std::to_string(set.streamlines.size()) +
                 " streamlines");
  return 0;
}

int cmd_oracle_train(const Cli& cli, const std::string& data_path, const std::string& out) {
  const Config c = load_config(cli);
  const uint64_t seed = effective_seed(cli, c);
  const Tractogram t = load_tractogram(data_path);
  LabeledStreamlineSet set;
  set.streamlines = t.streamlines;
  set.targets = load_scores(data_path + ".scores.txt");
  if (set.targets.size() != set.streamlines.size())
    throw InvalidInput("oracle-train: target sidecar length mismatch");
  OracleTrainOptions opt = oracle_train_options_from(c);
  opt.rng_seed = stream_seed(seed, "oracle-train");
  OracleTrainReport report;
  const OracleModel model =
      train_oracle(set, oracle_config_from(c), opt, &report, log_stream(cli));
  model.save(out);

  nlohmann::json trace;
  trace["train_loss"] = report.train_loss;
  trace["val_accuracy"] = report.val_accuracy;
  trace["val_sensitivity"] = report.val_sensitivity;
  trace["val_precision"] = report.val_precision;
  trace["val_f1"] = report.val_f1;
  atomic_write_text(out + ".trace.json", trace.dump(2) + "\n");
  write_manifest(out, "oracle-train", c, seed, {data_path, data_path + ".scores.txt"});
  if (!report.val_accuracy.empty())
    logln(cli, "[oracle-train] " + out +
                   ": final val accuracy " + std::to_string(report.val_accuracy.back()));
  return 0;
}

int cmd_oracle_score(const Cli& cli, const std::string& oracle_path,
                     const std::string& tract_path, const std::string& out) {
  const OracleModel model = OracleModel::load(oracle_path);
  const Tractogram t = load_tractogram(tract_path);
  const auto scores = model.score_batch(t.streamlines);
  if (out.empty()) {
    for (double s : scores) std::printf("%.6f\n", s);
  } else {
    save_scores(scores, out);
    const Config c = load_config(cli);
    write_manifest(out, "oracle-score", c, effective_seed(cli, c),
                   {oracle_path, tract_path});
  }
  logln(cli, "[oracle-score] scored " + std::to_string(scores.size()) + " streamlines");
  return 0;
}

int cmd_agent_train(const Cli& cli, const std::string& phantom_path,
                    const std::string& oracle_path, const std::string& out) {
  const Config c = load_config(cli);
  const uint64_t seed = effective_seed(cli, c);
  const PhantomVolume v = load_phantom(phantom_path);
  OracleModel oracle = OracleModel::load(oracle_path);
  EnvConfig env_cfg = env_config_from(c);
  SacConfig sac_cfg = sac_config_from(c);
  sac_cfg.rng_seed = stream_seed(seed, "agent-train");
  TrainTrace trace;
  const SacAgent agent =
      train_agent(v, &oracle, env_cfg, sac_cfg, &trace, log_stream(cli), out);
  agent.save(out);

  nlohmann::json jt = nlohmann::json::array();
  for (const auto& e : trace.epochs) {
    nlohmann::json je;
    je["mean_return"] = e.mean_return;
    je["mean_length"] = e.mean_length;
    je["done_reasons"] = e.done_reasons;
    jt.push_back(je);
  }
  atomic_write_text(out + ".trace.json", jt.dump(2) + "\n");
  write_manifest(out, "agent-train", c, seed, {phantom_path, oracle_path});
  return 0;
}

int cmd_track(const Cli& cli, const std::string& phantom_path, const std::string& agent_path,
              const std::string& oracle_path, bool baseline, const std::string& out) {
  const Config c = load_config(cli);
  const uint64_t seed = effective_seed(cli, c);
  const PhantomVolume v = load_phantom(phantom_path);
  EnvConfig env_cfg = env_config_from(c);
  Tractogram t;
  std::vector<std::string> inputs{phantom_path};
  if (baseline) {
    t = track_baseline(v, env_cfg, track_seeds_per_voxel(c), stream_seed(seed, "track"));
  } else {
    if (agent_path.empty()) throw InvalidInput("track: --agent required unless --baseline");
    const SacAgent agent = SacAgent::load(agent_path);
    inputs.push_back(agent_path);
    OracleModel oracle = oracle_path.empty() ? OracleModel(OracleConfig{}, 0)
                                             : OracleModel::load(oracle_path);
    const OracleModel* op = nullptr;
    if (!oracle_path.empty()) {
      op = &oracle;
      inputs.push_back(oracle_path);
    } else {
      env_cfg.oracle_stop = false;
    }
    t = track_policy(agent, op, v, env_cfg, track_seeds_per_voxel(c),
                     stream_seed(seed, "track"), !track_deterministic(c));
  }
  save_tractogram(t, out);
  if (!t.scores.empty()) save_scores(t.scores, out + ".scores.txt");
  write_manifest(out, baseline ? "track-baseline" : "track", c, seed, inputs);
  logln(cli, "[track] " + out + ": " + std::to_string(t.size()) + " streamlines");
  return 0;
}

int cmd_evaluate(const Cli& cli, const std::string& phantom_path,
                 const std::string& tract_path, const std::string& out) {
  const Config c = load_config(cli);
  const PhantomVolume v = load_phantom(phantom_path);
  const Tractogram t = load_tractogram(tract_path);
  const TractometerReport rep = report(t, v, eval_options_from(c));
  atomic_write_text(out, report_text(rep));
  atomic_write_text(out + ".json", report_json(rep));
  write_manifest(out, "evaluate", c, effective_seed(cli, c), {phantom_path, tract_path});
  logln(cli, "[evaluate] VC " + std::to_string(rep.vc_pct) + "% IC " +
                 std::to_string(rep.ic_pct) + "% NC " + std::to_string(rep.nc_pct) + "%");
  return 0;
}

int cmd_convert(const Cli& cli, const std::string& tract_path, const std::string& out) {
  const Tractogram t = load_tractogram(tract_path);
  export_tck(t, out);
  logln(cli, "[convert] " + out);
  return 0;
}

int cmd_pipeline(const Cli& cli, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string d = out_dir + "/";
  int rc = 0;
  logln(cli, "== phantom-gen ==");
  rc = cmd_phantom_gen(cli, d + "phantom.phv");
  if (rc) return rc;
  logln(cli, "== oracle-data ==");
  rc = cmd_oracle_data(cli, d + "phantom.phv", d + "train-data.tsf");
  if (rc) return rc;
  logln(cli, "== oracle-train ==");
  rc = cmd_oracle_train(cli, d + "train-data.tsf", d + "oracle.tnsr");
  if (rc) return rc;
  logln(cli, "== agent-train ==");
  rc = cmd_agent_train(cli, d + "phantom.phv", d + "oracle.tnsr", d + "agent.tnsr");
  if (rc) return rc;
  logln(cli, "== track ==");
  rc = cmd_track(cli, d + "phantom.phv", d + "agent.tnsr", d + "oracle.tnsr", false,
                 d + "tract.tsf");
  if (rc) return rc;
  logln(cli, "== evaluate ==");
  rc = cmd_evaluate(cli, d + "phantom.phv", d + "tract.tsf", d + "report.txt");
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RL tractography on synthetic phantoms with a learned streamline "
               "plausibility scorer"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "key=value config file");
  app.add_option("--seed", cli.seed, "top-level seed (overrides config)")
      ->each([&cli](const std::string&) { cli.seed_set = true; });
  app.add_flag("--quiet", cli.quiet, "suppress progress logging");
  app.add_option("--workers", cli.workers, "cap BLAS threads (0 = automatic)");

  std::string out, out_dir, phantom_path, data_path, oracle_path, agent_path, tract_path;
  bool baseline = false;

  auto* gen = app.add_subcommand("phantom-gen", "generate a synthetic phantom volume");
  gen->add_option("--out", out, "output .phv path")->required();

  auto* odata = app.add_subcommand("oracle-data", "synthesize a labeled streamline set");
  odata->add_option("--phantom", phantom_path, "input .phv")->required();
  odata->add_option("--out", out, "output .tsf path (targets in .scores.txt)")->required();

  auto* otrain = app.add_subcommand("oracle-train", "train the plausibility scorer");
  otrain->add_option("--data", data_path, "labeled .tsf (with .scores.txt sidecar)")
      ->required();
  otrain->add_option("--out", out, "output .tnsr checkpoint")->required();

  auto* oscore = app.add_subcommand("oracle-score", "score streamlines with a checkpoint");
  oscore->add_option("--oracle", oracle_path, "oracle .tnsr")->required();
  oscore->add_option("--tractogram", tract_path, "input .tsf")->required();
  oscore->add_option("--out", out, "output text file (default: stdout)");

  auto* atrain = app.add_subcommand("agent-train", "train the tracking policy");
  atrain->add_option("--phantom", phantom_path, "input .phv")->required();
  atrain->add_option("--oracle", oracle_path, "oracle .tnsr")->required();
  atrain->add_option("--out", out, "output agent .tnsr")->required();

  auto* track = app.add_subcommand("track", "generate a tractogram");
  track->add_option("--phantom", phantom_path, "input .phv")->required();
  track->add_option("--agent", agent_path, "agent .tnsr (policy mode)");
  track->add_option("--oracle", oracle_path, "oracle .tnsr (enables oracle stopping)");
  track->add_flag("--baseline", baseline, "deterministic peak following instead of the policy");
  track->add_option("--out", out, "output .tsf")->required();

  auto* eval = app.add_subcommand("evaluate", "score a tractogram against ground truth");
  eval->add_option("--phantom", phantom_path, "input .phv")->required();
  eval->add_option("--tractogram", tract_path, "input .tsf")->required();
  eval->add_option("--out", out, "output report path (also writes .json)")->required();

  auto* conv = app.add_subcommand("convert", "export a tractogram to .tck for viewers");
  conv->add_option("--tractogram", tract_path, "input .tsf")->required();
  conv->add_option("--out", out, "output .tck")->required();

  auto* pipe = app.add_subcommand("pipeline", "run every stage on one phantom");
  pipe->add_option("--out-dir", out_dir, "output directory")->required();

  for (CLI::App* s : {gen, odata, otrain, oscore, atrain, track, eval, conv, pipe})
    s->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (cli.workers > 0) openblas_set_num_threads(cli.workers);

  try {
    if (gen->parsed()) return cmd_phantom_gen(cli, out);
    if (odata->parsed()) return cmd_oracle_data(cli, phantom_path, out);
    if (otrain->parsed()) return cmd_oracle_train(cli, data_path, out);
    if (oscore->parsed()) return cmd_oracle_score(cli, oracle_path, tract_path, out);
    if (atrain->parsed()) return cmd_agent_train(cli, phantom_path, oracle_path, out);
    if (track->parsed()) return cmd_track(cli, phantom_path, agent_path, oracle_path,
                                          baseline, out);
    if (eval->parsed()) return cmd_evaluate(cli, phantom_path, tract_path, out);
    if (conv->parsed()) return cmd_convert(cli, tract_path, out);
    if (pipe->parsed()) return cmd_pipeline(cli, out_dir);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
