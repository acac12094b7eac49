#pragma once

// Binary PPM images and the on-disk trajectory dataset.
//
// Dataset layout (one directory per trajectory, named NNNN):
//   manifest.json   {length, height, width, channels, seed, objects}
//   frames/NNNN.ppm binary P6, value * 255 rounded
//   actions.jsonl   {"dx":..,"dy":..,"lift":..} per line
//   states.jsonl    arm, lift counter and object poses per step

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vismpc/core.hpp"
#include "vismpc/sim2d.hpp"

namespace vismpc::io {

/// Single-channel frames are written as gray RGB.
std::string encode_ppm(const Frame& f);
/// Always returns a 3-channel frame. Throws Io on malformed input.
Frame decode_ppm(const std::string& bytes);

void write_ppm(const Frame& f, const std::filesystem::path& path);
Frame read_ppm(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_trajectory(const sim::TrajectoryRecord& rec, const std::filesystem::path& dir, std::uint64_t seed);
sim::TrajectoryRecord read_trajectory(const std::filesystem::path& dir);

/// Trajectory k goes to dir/NNNN with seed derive_seed(base_seed, k).
void write_dataset(std::span<const sim::TrajectoryRecord> records, const std::filesystem::path& dir,
                   std::uint64_t base_seed);
/// Reads every subdirectory holding a manifest.json, in name order.
std::vector<sim::TrajectoryRecord> read_dataset(const std::filesystem::path& dir);

}  // namespace vismpc::io
