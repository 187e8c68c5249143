#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dsnet/trainer.hpp"

// Checkpoint layout, all integers little-endian:
//
//   "DSCK"            4 bytes magic
//   0x01              format version
//   u32               length of the JSON header
//   JSON header       UTF-8: run config, epoch, Adam step, best-snapshot
//                     metadata and a manifest {name, shape, offset} per tensor
//   tensor data       float32 values in manifest order; offsets are relative
//                     to the start of this section
//
// Tensors are the parameters, batchnorm buffers, Adam moments ("adam.m/...",
// "adam.v/...") and, if present, the best snapshot ("best/...").
namespace dsnet::model {

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const TrainState& state);
// Throws FormatError (with byte offset) on bad magic, version, header or
// truncated/oversized data.
TrainState deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace dsnet::model
