#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lphom/classifier.hpp"
#include "lphom/diffusion.hpp"
#include "lphom/features.hpp"
#include "lphom/unet.hpp"
#include "lphom/vae.hpp"

namespace lphom {

// Every knob of a pipeline run. Config files use `key = value` lines; `#`
// starts a comment. Keys are listed by config_keys().
struct RunConfig {
  std::uint64_t seed = 0;
  double data_scale = 0.1;
  int image_size = 64;

  int schedule_T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  SamplerConfig sampler{};

  VaeConfig vae_model{};
  VaeTrainConfig vae_train{};

  UNetConfig unet_model{};
  LdmTrainConfig unet_train{};

  ClassifierConfig classifier{};

  int samples_per_cell = 64;
  int msssim_pairs = 100;
  FeatureKind features = FeatureKind::kRandomConv;
  // Feature space that decides the realism ordering; both are reported.
  FeatureKind realism_features = FeatureKind::kVaeEncoder;

  std::vector<ConditionLabel> held_out = default_held_out();

  static std::vector<ConditionLabel> default_held_out();

  bool is_held_out(const ConditionLabel& label) const;
  NoiseSchedule schedule() const;

  // Canonical `key = value` text covering every key.
  std::string to_text() const;
};

struct ConfigKey {
  const char* name;
  const char* help;
};
const std::vector<ConfigKey>& config_keys();

// Applies one assignment; throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace lphom
