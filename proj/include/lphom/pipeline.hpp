#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lphom/config.hpp"
#include "lphom/dataset.hpp"

namespace lphom {

using LogFn = std::function<void(const std::string&)>;

// File layout of one run directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path manifest() const { return data_dir() / kManifestName; }
  std::filesystem::path vae_checkpoint() const { return root / "vae.ckpt"; }
  std::filesystem::path ldm_checkpoint() const { return root / "ldm.ckpt"; }
  std::filesystem::path samples_dir() const { return root / "samples"; }
  std::filesystem::path grid() const { return root / "grid.png"; }
};

// Copy of `config` with derived fields filled in: model sizes that follow
// from the image size and the per-stage seeds that follow from the master seed.
RunConfig resolve(const RunConfig& config);

DatasetManifest cmd_gen_data(const RunConfig& config, const RunPaths& paths, const LogFn& log = {});
void cmd_train_vae(const RunConfig& config, const RunPaths& paths, const LogFn& log = {});
void cmd_train_ldm(const RunConfig& config, const RunPaths& paths, const LogFn& log = {});

// Generated images per cell, indexed by cell; empty for cells not sampled.
using CellSamples = std::array<std::vector<Tensor>, kNumCells>;

// Samples every cell, writes samples/<cell>/ PNGs and the grid montage.
CellSamples cmd_sample_grid(const RunConfig& config, const RunPaths& paths, const LogFn& log = {});

// FID, MS-SSIM, realism-ordering and extrapolation reports. Reuses `samples`
// when given, otherwise samples the cells it needs. With held_out_only set,
// only the extrapolation report is produced.
void cmd_eval(const RunConfig& config, const RunPaths& paths, const LogFn& log = {}, bool held_out_only = false,
              const CellSamples* samples = nullptr);

// gen-data, train-vae, train-ldm, sample-grid and eval in sequence.
void cmd_all(const RunConfig& config, const RunPaths& paths, const LogFn& log = {});

// key = value lines written by the commands (vae_metrics.txt and friends).
std::string read_metric(const std::filesystem::path& file, const std::string& key);

}  // namespace lphom
