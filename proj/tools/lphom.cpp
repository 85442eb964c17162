// Command-line driver for the phantom latent-diffusion pipeline.
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lphom/checkpoint.hpp"
#include "lphom/errors.hpp"
#include "lphom/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kMissing = 2, kNumeric = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional latent diffusion on brain phantoms"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  bool quiet = false;
  app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "run directory")->capture_default_str();
  app.add_flag("-q,--quiet", quiet, "suppress progress messages");

  std::optional<double> scale;
  auto* gen = app.add_subcommand("gen-data", "generate the phantom dataset");
  gen->add_option("--scale", scale, "multiplier on the reference per-cell counts");
  app.add_subcommand("train-vae", "train the autoencoder");
  app.add_subcommand("train-ldm", "train the conditional noise predictor");
  app.add_subcommand("sample-grid", "sample every cell and write the grid montage");
  app.add_subcommand("eval", "FID, MS-SSIM, realism and extrapolation reports");
  app.add_subcommand("extrapolate", "extrapolation report for the held-out cells only");
  app.add_subcommand("all", "run every stage in order");
  app.add_subcommand("show-config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  const lphom::LogFn log = [quiet](const std::string& m) {
    if (!quiet) std::cerr << m << std::endl;
  };
  try {
    lphom::RunConfig cfg;
    if (!config_path.empty()) cfg = lphom::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (scale) lphom::apply_setting(cfg, "data.scale", std::to_string(*scale));
    const lphom::RunPaths paths{out};
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "gen-data") lphom::cmd_gen_data(cfg, paths, log);
    else if (cmd == "train-vae") lphom::cmd_train_vae(cfg, paths, log);
    else if (cmd == "train-ldm") lphom::cmd_train_ldm(cfg, paths, log);
    else if (cmd == "sample-grid") lphom::cmd_sample_grid(cfg, paths, log);
    else if (cmd == "eval") lphom::cmd_eval(cfg, paths, log);
    else if (cmd == "extrapolate") lphom::cmd_eval(cfg, paths, log, true);
    else if (cmd == "all") lphom::cmd_all(cfg, paths, log);
    else if (cmd == "show-config") std::cout << cfg.to_text();
    return kOk;
  } catch (const lphom::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const lphom::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissing;
  } catch (const lphom::CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissing;
  } catch (const lphom::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
