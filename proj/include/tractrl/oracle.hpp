#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tractrl/geometry.hpp"
#include "tractrl/phantom.hpp"
#include "tractrl/tensor.hpp"

namespace tractrl {

struct OracleConfig {
  int n_points = 128;   // resampling target; tokens = n_points-1 dirs + SCORE
  int embed_dim = 32;
  int n_blocks = 4;
  int n_heads = 4;
  int ffn_dim = 2048;
  double threshold = 0.5;  // plausible/implausible cut

  void validate() const;
  bool operator==(const OracleConfig&) const = default;
};

// Transformer regressor mapping a streamline to a plausibility score in
// (0,1). Input pipeline: resample to n_points, take the n_points-1 segment
// directions, project each to embed_dim, prepend a learned SCORE token, add
// sinusoidal positions, run the encoder blocks, and squash the SCORE
// position through linear+sigmoid.
class OracleModel {
 public:
  OracleModel(OracleConfig cfg, uint64_t init_seed);

  static OracleModel load(const std::string& path);
  void save(const std::string& path) const;

  const OracleConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  int64_t parameter_count() const { return params_.parameter_count(); }
  int64_t encoder_parameter_count() const;

  // Closed-form counts for a given config. The encoder blocks dominate:
  // n_blocks * (4*(E^2+E) + 2*E*F + F + E + 4*E); the input projection,
  // SCORE token and scoring head add 4*E + E + (E+1) on top.
  static int64_t expected_parameter_count(const OracleConfig& cfg);
  static int64_t expected_encoder_parameter_count(const OracleConfig& cfg);

  double score(const Streamline& s) const;
  std::vector<double> score_batch(const std::vector<Streamline>& batch) const;

  // Differentiable forward on prepared inputs, [B, n_points-1, 3] -> [B].
  Tensor forward(Graph& g, const Tensor& direction_batch) const;

  // Packs streamlines into a [B, n_points-1, 3] direction tensor.
  Tensor pack_directions(const std::vector<Streamline>& batch) const;

 private:
  OracleConfig cfg_;
  ParamStore params_;
  Tensor positional_;  // [n_points, embed_dim], fixed sinusoidal table
};

struct AugmentOptions {
  double flip_prob = 0.5;
  double cut_prob = 0.3;
  double cut_min_fraction = 0.5;
  double noise_sigma = 0.1;  // voxels, per point, isotropic
};

// Flip / cut+resample / jitter; the target is unchanged.
std::pair<Streamline, double> augment(const Streamline& s, double target, Rng& rng,
                                      const AugmentOptions& opt, int n_points);

struct OracleTrainOptions {
  int epochs = 20;
  int batch_size = 32;
  double lr = 5e-4;
  uint64_t rng_seed = 1;
  bool augment_enabled = true;
  AugmentOptions augment;
  double val_fraction = 0.1;  // stratified holdout
  bool fast_math = true;
};

struct OracleTrainReport {
  std::vector<double> train_loss;       // per epoch
  std::vector<double> val_accuracy;
  std::vector<double> val_sensitivity;
  std::vector<double> val_precision;
  std::vector<double> val_f1;
};

// MSE regression with Adam; deterministic per rng_seed. Throws InvalidInput
// when the data is empty or single-class.
OracleModel train_oracle(const LabeledStreamlineSet& data, const OracleConfig& cfg,
                         const OracleTrainOptions& opt, OracleTrainReport* report = nullptr,
                         std::ostream* log = nullptr);

struct ClassificationMetrics {
  double accuracy = 0, sensitivity = 0, precision = 0, f1 = 0;
  int tp = 0, tn = 0, fp = 0, fn = 0;
};

ClassificationMetrics classify_metrics(const std::vector<double>& scores,
                                       const std::vector<double>& targets, double threshold);

}  // namespace tractrl
