#pragma once

#include "dider/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dider {
inline namespace DIDER_ABI {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class EntryType : std::uint8_t { f32 = 1, u8 = 2, u64 = 3 };

/// One named array of a checkpoint container. Exactly one payload vector is
/// used, according to `type`.
struct CheckpointEntry {
  std::string name;
  EntryType type = EntryType::f32;
  std::vector<std::uint64_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;
  std::vector<std::uint64_t> u64;

  static CheckpointEntry floats(std::string name, std::vector<std::uint64_t> dims, std::vector<float> values);
  static CheckpointEntry bytes(std::string name, const std::string& text);
  static CheckpointEntry integers(std::string name, std::vector<std::uint64_t> values);
  std::uint64_t count() const;
  std::string text() const;
  friend bool operator==(const CheckpointEntry&, const CheckpointEntry&) = default;
};

/// Layout: "DIDERCKP", u32 version, u64 entry count, then per entry
/// u32 name length, name, u8 type, u32 rank, u64 dims, payload. All
/// integers and floats little-endian.
std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries);
/// Throws CorruptDataError on bad magic or truncation, VersionError on an
/// unknown version.
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint_file(const std::filesystem::path& path);

/// Entry lookup; CorruptDataError when missing or of the wrong type.
const CheckpointEntry& find_entry(const std::vector<CheckpointEntry>& entries, const std::string& name,
                                  EntryType type);

}  // namespace DIDER_ABI
}  // namespace dider
