#pragma once

#include <cstdint>
#include <string>

#include "patrec/trainer.hpp"

namespace patrec {

// Everything a run needs, resolved to concrete values. Serializes to a flat
// JSON document; parsing rejects unknown keys at every level, and the echoed
// manifest of a run is itself a valid config that reproduces the run.
struct ExperimentConfig {
  std::uint64_t seed = 1009;
  std::string out_dir = "runs";
  std::string cache_dir = "cache";
  int threads = 1;
  std::string dtype = "f32";  // "f32" or "f64"

  struct Phantom {
    int m = 32;
    double jitter = 0.05;
    int n_train = 64;
    int n_val = 8;
    int n_test = 16;
  } phantom;

  struct Sim {
    int pad = 2;
    double cfl = 0.3;
    double t_min = 2.5;
    double c_max = 1.0;
  } sim;

  struct Model {
    std::string variant = "dense";
    int unet_levels = 3;
    int unet_base_channels = 32;
    double eps_c = 0.01;
  } model;

  struct Train {
    std::string gamma_case = "gamma1";
    int batch_size = 2;
    double lr_linear = 1e-4;
    double lr_unet = 1e-3;
    double lr_mlp = 1e-3;
    std::int64_t max_iterations = 5000;
    std::int64_t eval_interval = 250;
    bool precompute_boundary = true;
  } train;

  void validate() const;
  trainer::TrainConfig to_train_config() const;
  GammaCase gamma() const { return gamma_case_from_string(train.gamma_case); }
};

// Defaults are the desk profile; "full" switches to the published scale
// (m = 64, 2048/128/512, 102,400 iterations).
void apply_profile(ExperimentConfig& cfg, const std::string& profile);

ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

// The generation-relevant subset (dataset + simulator parameters); its text
// keys the dataset cache directory.
std::string dataset_manifest_json(const ExperimentConfig& cfg);

} // namespace patrec
