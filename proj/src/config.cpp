#include "lphom/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "lphom/errors.hpp"

namespace lphom {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const char* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v, int lo) {
  const int n = parse_number<int>(key, v);
  if (n < lo) throw ConfigError(key + " must be >= " + std::to_string(lo) + ", got " + v);
  return n;
}

double parse_positive(const std::string& key, const std::string& v) {
  const double d = parse_number<double>(key, v);
  if (!(d > 0)) throw ConfigError(key + " must be positive, got " + v);
  return d;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<ConditionLabel> RunConfig::default_held_out() {
  using P = Pathology;
  using M = Modality;
  return {{P::kHealthy, M::kT1ce},   {P::kHealthy, M::kFlair}, {P::kGlioblastoma, M::kPd},
          {P::kDementia, M::kT1ce},  {P::kDementia, M::kT2w},  {P::kDementia, M::kFlair},
          {P::kDementia, M::kPd}};
}

bool RunConfig::is_held_out(const ConditionLabel& label) const {
  return std::find(held_out.begin(), held_out.end(), label) != held_out.end();
}

NoiseSchedule RunConfig::schedule() const {
  return make_schedule(ScheduleKind::kLinear, schedule_T, beta_start, beta_end);
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "master seed for data, training order and sampling"},
      {"data.scale", "multiplier on the reference per-cell counts (rounded up)"},
      {"data.image_size", "phantom side length in pixels"},
      {"schedule.T", "diffusion horizon"},
      {"schedule.beta_start", "first beta of the linear schedule"},
      {"schedule.beta_end", "last beta of the linear schedule"},
      {"sampler.steps", "DDIM steps"},
      {"sampler.sigma", "deterministic | ddpm"},
      {"vae.base_channels", "VAE width"},
      {"vae.latent_channels", "latent channels"},
      {"vae.steps", "VAE optimizer steps"},
      {"vae.batch_size", "VAE batch size"},
      {"vae.lr", "VAE Adam learning rate"},
      {"vae.kl_weight", "weight of the KL term"},
      {"unet.channels", "comma-separated channel ladder"},
      {"unet.blocks_per_level", "residual blocks per resolution"},
      {"unet.embed_dim", "timestep / condition embedding width"},
      {"unet.steps", "U-Net optimizer steps"},
      {"unet.batch_size", "U-Net batch size"},
      {"unet.lr", "U-Net Adam learning rate"},
      {"unet.balance", "cell | none: batch items drawn per label cell or per latent"},
      {"unet.lr_schedule", "cosine | constant"},
      {"classifier.steps", "condition classifier optimizer steps"},
      {"classifier.batch_size", "condition classifier batch size"},
      {"classifier.lr", "condition classifier learning rate"},
      {"classifier.images_per_cell", "fresh phantoms per cell for the classifier"},
      {"eval.samples_per_cell", "generated samples per cell"},
      {"eval.msssim_pairs", "random pairs for the diversity statistic"},
      {"eval.features", "random_conv | vae_encoder"},
      {"eval.realism_features", "random_conv | vae_encoder: feature space that decides the realism ordering"},
      {"heldout", "comma-separated Pathology/Modality cells excluded from training"},
  };
  return keys;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "data.scale") {
    c.data_scale = parse_number<double>(key, v);
    if (!(c.data_scale >= 0)) throw ConfigError("data.scale must be >= 0");
  } else if (key == "data.image_size") {
    c.image_size = parse_int(key, v, 32);
    if (c.image_size % 16 != 0) throw ConfigError("data.image_size must be a multiple of 16");
  } else if (key == "schedule.T") {
    c.schedule_T = parse_int(key, v, 1);
  } else if (key == "schedule.beta_start") {
    c.beta_start = parse_positive(key, v);
  } else if (key == "schedule.beta_end") {
    c.beta_end = parse_positive(key, v);
  } else if (key == "sampler.steps") {
    c.sampler.num_steps = parse_int(key, v, 1);
  } else if (key == "sampler.sigma") {
    if (v == "deterministic") c.sampler.sigma_mode = SigmaMode::kDeterministic;
    else if (v == "ddpm") c.sampler.sigma_mode = SigmaMode::kDdpm;
    else throw ConfigError("sampler.sigma must be deterministic or ddpm, got '" + v + "'");
  } else if (key == "vae.base_channels") {
    c.vae_model.base_channels = parse_int(key, v, 8);
  } else if (key == "vae.latent_channels") {
    c.vae_model.latent_channels = parse_int(key, v, 1);
  } else if (key == "vae.steps") {
    c.vae_train.steps = parse_int(key, v, 1);
  } else if (key == "vae.batch_size") {
    c.vae_train.batch_size = parse_int(key, v, 1);
  } else if (key == "vae.lr") {
    c.vae_train.lr = parse_positive(key, v);
  } else if (key == "vae.kl_weight") {
    c.vae_train.kl_weight = parse_number<double>(key, v);
    if (!(c.vae_train.kl_weight >= 0)) throw ConfigError("vae.kl_weight must be >= 0");
  } else if (key == "unet.channels") {
    std::vector<int> ch;
    for (const auto& s : split_list(v)) ch.push_back(parse_int(key, s, 8));
    if (ch.empty()) throw ConfigError("unet.channels is empty");
    c.unet_model.channels = ch;
  } else if (key == "unet.blocks_per_level") {
    c.unet_model.blocks_per_level = parse_int(key, v, 1);
  } else if (key == "unet.embed_dim") {
    c.unet_model.embed_dim = parse_int(key, v, 2);
    if (c.unet_model.embed_dim % 2 != 0) throw ConfigError("unet.embed_dim must be even");
  } else if (key == "unet.steps") {
    c.unet_train.steps = parse_int(key, v, 1);
  } else if (key == "unet.batch_size") {
    c.unet_train.batch_size = parse_int(key, v, 1);
  } else if (key == "unet.lr") {
    c.unet_train.lr = parse_positive(key, v);
  } else if (key == "unet.balance") {
    if (v == "cell") c.unet_train.balance_cells = true;
    else if (v == "none") c.unet_train.balance_cells = false;
    else throw ConfigError("unet.balance must be cell or none, got '" + v + "'");
  } else if (key == "unet.lr_schedule") {
    if (v == "cosine") c.unet_train.cosine_decay = true;
    else if (v == "constant") c.unet_train.cosine_decay = false;
    else throw ConfigError("unet.lr_schedule must be cosine or constant, got '" + v + "'");
  } else if (key == "classifier.steps") {
    c.classifier.steps = parse_int(key, v, 1);
  } else if (key == "classifier.batch_size") {
    c.classifier.batch_size = parse_int(key, v, 1);
  } else if (key == "classifier.lr") {
    c.classifier.lr = parse_positive(key, v);
  } else if (key == "classifier.images_per_cell") {
    c.classifier.images_per_cell = parse_int(key, v, 1);
  } else if (key == "eval.samples_per_cell") {
    c.samples_per_cell = parse_int(key, v, 2);
  } else if (key == "eval.msssim_pairs") {
    c.msssim_pairs = parse_int(key, v, 1);
  } else if (key == "eval.features") {
    if (v == "random_conv") c.features = FeatureKind::kRandomConv;
    else if (v == "vae_encoder") c.features = FeatureKind::kVaeEncoder;
    else throw ConfigError("eval.features must be random_conv or vae_encoder, got '" + v + "'");
  } else if (key == "eval.realism_features") {
    if (v == "random_conv") c.realism_features = FeatureKind::kRandomConv;
    else if (v == "vae_encoder") c.realism_features = FeatureKind::kVaeEncoder;
    else throw ConfigError("eval.realism_features must be random_conv or vae_encoder, got '" + v + "'");
  } else if (key == "heldout") {
    std::vector<ConditionLabel> cells;
    for (const auto& s : split_list(v)) {
      const ConditionLabel l = parse_label(s);
      if (std::find(cells.begin(), cells.end(), l) == cells.end()) cells.push_back(l);
    }
    c.held_out = cells;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_setting(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (base.beta_start > base.beta_end || base.beta_end >= 1.0) {
    throw ConfigError("config: need beta_start <= beta_end < 1");
  }
  if (base.sampler.num_steps > base.schedule_T) throw ConfigError("config: sampler.steps exceeds schedule.T");
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  auto list = [](const auto& xs, auto f) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + f(xs[i]);
    return s;
  };
  os << "seed = " << seed << "\n"
     << "data.scale = " << fmt(data_scale) << "\n"
     << "data.image_size = " << image_size << "\n"
     << "schedule.T = " << schedule_T << "\n"
     << "schedule.beta_start = " << fmt(beta_start) << "\n"
     << "schedule.beta_end = " << fmt(beta_end) << "\n"
     << "sampler.steps = " << sampler.num_steps << "\n"
     << "sampler.sigma = " << (sampler.sigma_mode == SigmaMode::kDdpm ? "ddpm" : "deterministic") << "\n"
     << "vae.base_channels = " << vae_model.base_channels << "\n"
     << "vae.latent_channels = " << vae_model.latent_channels << "\n"
     << "vae.steps = " << vae_train.steps << "\n"
     << "vae.batch_size = " << vae_train.batch_size << "\n"
     << "vae.lr = " << fmt(vae_train.lr) << "\n"
     << "vae.kl_weight = " << fmt(vae_train.kl_weight) << "\n"
     << "unet.channels = " << list(unet_model.channels, [](int v) { return std::to_string(v); }) << "\n"
     << "unet.blocks_per_level = " << unet_model.blocks_per_level << "\n"
     << "unet.embed_dim = " << unet_model.embed_dim << "\n"
     << "unet.steps = " << unet_train.steps << "\n"
     << "unet.batch_size = " << unet_train.batch_size << "\n"
     << "unet.lr = " << fmt(unet_train.lr) << "\n"
     << "unet.balance = " << (unet_train.balance_cells ? "cell" : "none") << "\n"
     << "unet.lr_schedule = " << (unet_train.cosine_decay ? "cosine" : "constant") << "\n"
     << "classifier.steps = " << classifier.steps << "\n"
     << "classifier.batch_size = " << classifier.batch_size << "\n"
     << "classifier.lr = " << fmt(classifier.lr) << "\n"
     << "classifier.images_per_cell = " << classifier.images_per_cell << "\n"
     << "eval.samples_per_cell = " << samples_per_cell << "\n"
     << "eval.msssim_pairs = " << msssim_pairs << "\n"
     << "eval.features = " << to_string(features) << "\n"
     << "eval.realism_features = " << to_string(realism_features) << "\n"
     << "heldout = " << list(held_out, [](const ConditionLabel& l) { return to_string(l); }) << "\n";
  return os.str();
}

}  // namespace lphom
