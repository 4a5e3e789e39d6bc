#include "tractrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "tractrl/error.hpp"

namespace tractrl {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(uint8_t(s[a]))) a++;
  while (b > a && std::isspace(uint8_t(s[b - 1]))) b--;
  return s.substr(a, b - a);
}

// section -> allowed keys; "bundle<N>_..." keys in [phantom] are matched by
// pattern.
const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"", {"seed", "workers"}},
      {"phantom",
       {"preset", "dim_x", "dim_y", "dim_z", "voxel_size", "max_peaks", "radius"}},
      {"oracle",
       {"n_points", "embed_dim", "n_blocks", "n_heads", "ffn_dim", "threshold", "epochs",
        "batch_size", "lr", "augment", "flip_prob", "cut_prob", "cut_min_fraction",
        "noise_sigma", "fast_math", "n_pos", "n_neg"}},
      {"env",
       {"step_size", "alpha", "t_min", "max_angle", "wm_threshold", "max_steps",
        "oracle_threshold", "oracle_stop", "oracle_stride", "min_length", "prev_dirs",
        "seeds_per_voxel", "deterministic_tracking"}},
      {"sac",
       {"lr", "gamma", "tau", "batch_size", "buffer_capacity", "target_entropy",
        "auto_entropy", "init_entropy_coef", "epochs", "seeds_per_epoch",
        "updates_per_epoch", "warmup_transitions", "hidden_dim", "checkpoint_every",
        "fast_math"}},
      {"eval", {"vc_path_threshold", "dilation"}},
  };
  return s;
}

bool is_bundle_key(const std::string& key) {
  static const std::regex re("^bundle[0-9]+_(points|radius|labels)$");
  return std::regex_match(key, re);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      c.sections_[section];
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    c.sections_[section][key] = value;
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key,
                        const std::string& fallback) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": not a number: \"" + v + "\"");
  }
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
  const double d = get_double(section, key, double(fallback));
  const int i = int(std::llround(d));
  if (double(i) != d)
    throw ConfigError("config [" + section + "] " + key + ": not an integer");
  return i;
}

uint64_t Config::get_u64(const std::string& section, const std::string& key,
                         uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("config [" + section + "] " + key + ": not an unsigned integer");
  }
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get(section, key, "");
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config [" + section + "] " + key + ": not a boolean: \"" + v + "\"");
}

void Config::validate_known_keys() const {
  std::vector<std::string> unknown;
  for (const auto& [section, keys] : sections_) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      unknown.push_back("[" + section + "] (unknown section)");
      continue;
    }
    for (const auto& [key, value] : keys) {
      if (it->second.count(key)) continue;
      if (section == "phantom" && is_bundle_key(key)) continue;
      unknown.push_back("[" + section + "] " + key);
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& u : unknown) msg += "\n  " + u;
    throw ConfigError(msg);
  }
}

std::string Config::normalized() const {
  std::ostringstream os;
  for (const auto& [section, keys] : sections_)
    for (const auto& [key, value] : keys)
      os << section << "." << key << "=" << value << "\n";
  return os.str();
}

// --------------------------------------------------------------------------
// Section readers

uint64_t config_seed(const Config& c) { return c.get_u64("", "seed", 42); }
int config_workers(const Config& c) { return c.get_int("", "workers", 0); }

namespace {
// "x,y,z | x,y,z | ..." ('|' because ';' starts a comment).
std::vector<Vec3> parse_points(const std::string& text) {
  std::vector<Vec3> pts;
  std::istringstream groups(text);
  std::string group;
  while (std::getline(groups, group, '|')) {
    group = trim(group);
    if (group.empty()) continue;
    std::istringstream coords(group);
    std::string c;
    std::vector<double> vals;
    while (std::getline(coords, c, ',')) vals.push_back(std::stod(trim(c)));
    if (vals.size() != 3)
      throw ConfigError("bundle points: expected x,y,z groups, got \"" + group + "\"");
    pts.emplace_back(vals[0], vals[1], vals[2]);
  }
  return pts;
}
}  // namespace

PhantomSpec phantom_from_config(const Config& c) {
  PhantomSpec spec;
  bool custom = false;
  for (int b = 0; b < 64; ++b) {
    const std::string pk = "bundle" + std::to_string(b) + "_points";
    if (!c.has("phantom", pk)) break;
    custom = true;
    BundleSpec bs;
    bs.name = "bundle" + std::to_string(b);
    bs.control_points = parse_points(c.get("phantom", pk, ""));
    bs.radius = c.get_double("phantom", "bundle" + std::to_string(b) + "_radius", 2.0);
    const std::string labels =
        c.get("phantom", "bundle" + std::to_string(b) + "_labels",
              std::to_string(2 * b + 1) + "," + std::to_string(2 * b + 2));
    const size_t comma = labels.find(',');
    if (comma == std::string::npos)
      throw ConfigError("bundle labels: expected a,b, got \"" + labels + "\"");
    bs.label_a = uint16_t(std::stoi(trim(labels.substr(0, comma))));
    bs.label_b = uint16_t(std::stoi(trim(labels.substr(comma + 1))));
    spec.bundles.push_back(std::move(bs));
  }
  if (custom) {
    spec.dims = {c.get_int("phantom", "dim_x", 32), c.get_int("phantom", "dim_y", 32),
                 c.get_int("phantom", "dim_z", 32)};
  } else {
    spec = phantom_preset(c.get("phantom", "preset", "two-arcs-one-crossing"));
    if (c.has("phantom", "dim_x")) spec.dims.x = c.get_int("phantom", "dim_x", spec.dims.x);
    if (c.has("phantom", "dim_y")) spec.dims.y = c.get_int("phantom", "dim_y", spec.dims.y);
    if (c.has("phantom", "dim_z")) spec.dims.z = c.get_int("phantom", "dim_z", spec.dims.z);
    if (c.has("phantom", "radius"))
      for (auto& b : spec.bundles) b.radius = c.get_double("phantom", "radius", b.radius);
  }
  spec.voxel_size = c.get_double("phantom", "voxel_size", spec.voxel_size);
  spec.max_peaks = c.get_int("phantom", "max_peaks", spec.max_peaks);
  return spec;
}

OracleConfig oracle_config_from(const Config& c) {
  OracleConfig o;
  o.n_points = c.get_int("oracle", "n_points", o.n_points);
  o.embed_dim = c.get_int("oracle", "embed_dim", o.embed_dim);
  o.n_blocks = c.get_int("oracle", "n_blocks", o.n_blocks);
  o.n_heads = c.get_int("oracle", "n_heads", o.n_heads);
  o.ffn_dim = c.get_int("oracle", "ffn_dim", o.ffn_dim);
  o.threshold = c.get_double("oracle", "threshold", o.threshold);
  o.validate();
  return o;
}

OracleTrainOptions oracle_train_options_from(const Config& c) {
  OracleTrainOptions o;
  o.epochs = c.get_int("oracle", "epochs", o.epochs);
  o.batch_size = c.get_int("oracle", "batch_size", o.batch_size);
  o.lr = c.get_double("oracle", "lr", o.lr);
  o.rng_seed = stream_seed(config_seed(c), "oracle-train");
  o.augment_enabled = c.get_bool("oracle", "augment", o.augment_enabled);
  o.augment.flip_prob = c.get_double("oracle", "flip_prob", o.augment.flip_prob);
  o.augment.cut_prob = c.get_double("oracle", "cut_prob", o.augment.cut_prob);
  o.augment.cut_min_fraction =
      c.get_double("oracle", "cut_min_fraction", o.augment.cut_min_fraction);
  o.augment.noise_sigma = c.get_double("oracle", "noise_sigma", o.augment.noise_sigma);
  o.fast_math = c.get_bool("oracle", "fast_math", o.fast_math);
  return o;
}

EnvConfig env_config_from(const Config& c) {
  EnvConfig e;
  e.step_size = c.get_double("env", "step_size", e.step_size);
  e.alpha = c.get_double("env", "alpha", e.alpha);
  e.t_min = c.get_int("env", "t_min", e.t_min);
  e.max_angle = c.get_double("env", "max_angle", e.max_angle);
  e.wm_threshold = c.get_double("env", "wm_threshold", e.wm_threshold);
  e.max_steps = c.get_int("env", "max_steps", e.max_steps);
  e.oracle_threshold = c.get_double("env", "oracle_threshold", e.oracle_threshold);
  e.oracle_stop = c.get_bool("env", "oracle_stop", e.oracle_stop);
  e.oracle_stride = c.get_int("env", "oracle_stride", e.oracle_stride);
  e.min_length = c.get_int("env", "min_length", e.min_length);
  e.prev_dirs = c.get_int("env", "prev_dirs", e.prev_dirs);
  e.validate();
  return e;
}

SacConfig sac_config_from(const Config& c) {
  SacConfig s;
  s.lr = c.get_double("sac", "lr", s.lr);
  s.gamma = c.get_double("sac", "gamma", s.gamma);
  s.tau = c.get_double("sac", "tau", s.tau);
  s.batch_size = c.get_int("sac", "batch_size", s.batch_size);
  s.buffer_capacity = c.get_int("sac", "buffer_capacity", s.buffer_capacity);
  s.target_entropy = c.get_double("sac", "target_entropy", s.target_entropy);
  s.auto_entropy = c.get_bool("sac", "auto_entropy", s.auto_entropy);
  s.init_entropy_coef = c.get_double("sac", "init_entropy_coef", s.init_entropy_coef);
  s.epochs = c.get_int("sac", "epochs", s.epochs);
  s.seeds_per_epoch = c.get_int("sac", "seeds_per_epoch", s.seeds_per_epoch);
  s.updates_per_epoch = c.get_int("sac", "updates_per_epoch", s.updates_per_epoch);
  s.warmup_transitions = c.get_int("sac", "warmup_transitions", s.warmup_transitions);
  s.hidden_dim = c.get_int("sac", "hidden_dim", s.hidden_dim);
  s.checkpoint_every = c.get_int("sac", "checkpoint_every", s.checkpoint_every);
  s.rng_seed = stream_seed(config_seed(c), "agent-train");
  s.fast_math = c.get_bool("sac", "fast_math", s.fast_math);
  s.validate();
  return s;
}

EvalOptions eval_options_from(const Config& c) {
  EvalOptions e;
  e.vc_path_threshold = c.get_double("eval", "vc_path_threshold", e.vc_path_threshold);
  e.dilation = c.get_int("eval", "dilation", e.dilation);
  return e;
}

int oracle_data_n_pos(const Config& c) { return c.get_int("oracle", "n_pos", 1000); }
int oracle_data_n_neg(const Config& c) { return c.get_int("oracle", "n_neg", 1000); }
int track_seeds_per_voxel(const Config& c) { return c.get_int("env", "seeds_per_voxel", 20); }
bool track_deterministic(const Config& c) {
  return c.get_bool("env", "deterministic_tracking", true);
}

}  // namespace tractrl
