#pragma once

#include "dider/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dider/physics_sim.hpp"

namespace dider {
inline namespace DIDER_ABI {

inline constexpr int kDatasetVersion = 1;

/// Extra provenance written into manifest.json.
struct DatasetProvenance {
  std::string split = "all";
  std::optional<std::uint64_t> seed;
  std::optional<SimConfig> generator;
};

/// Writes manifest.json, states.f32 and (if labelled) edges.u8 into dir.
void write_dataset(const TrajectoryBatch& batch, const std::filesystem::path& dir,
                   const DatasetProvenance& provenance = {});

/// Throws CorruptDataError when payload sizes disagree with the manifest and
/// VersionError for an unknown format version.
TrajectoryBatch read_dataset(const std::filesystem::path& dir);

/// Writes predicted states only (no labels) in the same layout.
void write_states(const std::filesystem::path& dir, std::size_t n_samples, std::size_t horizon, std::size_t n_agents,
                  const std::vector<float>& states, const Normalization& normalization);

}  // namespace DIDER_ABI
}  // namespace dider
