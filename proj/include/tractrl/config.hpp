#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "tractrl/env.hpp"
#include "tractrl/evaluator.hpp"
#include "tractrl/oracle.hpp"
#include "tractrl/phantom.hpp"
#include "tractrl/sac.hpp"

namespace tractrl {

// Flat key=value configuration with [section] headers, '#' comments.
// Unknown keys are hard errors so typos cannot silently fall back to
// defaults.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& section, const std::string& key,
                   uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  // Throws ConfigError listing every key outside the known schema.
  void validate_known_keys() const;

  // Normalized "section.key=value" lines, sorted; hashed into manifests.
  std::string normalized() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Section readers. Every tracked constant surfaces as a named key with its
// default; [phantom] selects a preset plus optional overrides.
uint64_t config_seed(const Config& c);
int config_workers(const Config& c);
PhantomSpec phantom_from_config(const Config& c);
OracleConfig oracle_config_from(const Config& c);
OracleTrainOptions oracle_train_options_from(const Config& c);
EnvConfig env_config_from(const Config& c);
SacConfig sac_config_from(const Config& c);
EvalOptions eval_options_from(const Config& c);
int oracle_data_n_pos(const Config& c);
int oracle_data_n_neg(const Config& c);
int track_seeds_per_voxel(const Config& c);
bool track_deterministic(const Config& c);

}  // namespace tractrl
