#pragma once

#include <cstdint>
#include <string>

#include "fsgen/subset_vae.hpp"

namespace fsgen {

/// Serialized model: a line-oriented text manifest (version tag, vocabulary
/// size, hyperparameters, training metadata, config hash, tensor table)
/// followed by every tensor's scalars as raw little-endian float32 in
/// manifest order. Round-trips bit exactly.
void save_checkpoint(const std::string& path, const SubsetVae<float>& model,
                     std::uint64_t config_hash);

/// Rebuilds the model from a manifest + blob file. Throws ArtifactError on an
/// unknown version tag, a tensor table that disagrees with the declared
/// hyperparameters, or a blob shorter than the table promises. The stored
/// config hash is written to *config_hash when non-null.
SubsetVae<float> load_checkpoint(const std::string& path,
                                 std::uint64_t* config_hash = nullptr);

}  // namespace fsgen
