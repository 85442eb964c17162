#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lphom/tape.hpp"

namespace lphom {

inline constexpr char kCheckpointMagic[] = "LPHOM1";

// Layout: magic, config text, latent scale (f64), tensor count, then per
// tensor its name, rank, dims and float32 data, all little-endian, followed by
// the 64-bit FNV-1a hash of every preceding byte.
struct Checkpoint {
  std::string config;
  double latent_scale = 1.0;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws MissingArtifactError when absent and CheckpointError on bad magic or
// checksum.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

// Every parameter under its registered name.
void add_parameters(Checkpoint& ckpt, const ParameterSet<float>& params, const std::string& prefix = "");
// Copies stored tensors into params. Missing names and shape differences
// throw CheckpointError naming the tensor.
void restore_parameters(const Checkpoint& ckpt, ParameterSet<float>& params, const std::string& prefix = "");

}  // namespace lphom
