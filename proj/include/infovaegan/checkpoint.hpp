#pragma once

// Binary checkpoint format (all integers and floats little-endian):
//
//   "IVGN" | version:u8 | section_count:u32
//   section*: name_len:u32 | name | payload_len:u64 | payload
//     payload: tensor_count:u32 | tensor*
//     tensor:  rank:u32 | extent:u64 * rank | value:f64 * prod(extents)
//   checksum:u64   FNV-1a over every preceding byte

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "infovaegan/tensor.hpp"
#include "infovaegan/training.hpp"

namespace ivg {

inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct CheckpointSection {
  std::string name;
  std::vector<Tensor> tensors;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_sections(const std::vector<CheckpointSection>& sections);
/// Verifies magic, version and checksum before decoding.
std::vector<CheckpointSection> parse_sections(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> save_checkpoint(const TrainState& state);
TrainState load_checkpoint(std::span<const std::uint8_t> bytes);

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace ivg
