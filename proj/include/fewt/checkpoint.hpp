#pragma once

#include <cstdint>
#include <string>

#include "fewt/trainer.hpp"

namespace fewt::ckpt {

inline constexpr std::uint32_t kMagic = 0x54574546u;  // "FEWT" little-endian
inline constexpr std::uint32_t kVersion = 1;

// Single binary file, little-endian throughout, layout documented in
// docs/checkpoint.md. Parameters are stored as 32-bit floats.
void save(const std::string& path, const trainer::TrainState& state,
          const std::string& config_json);

struct Loaded {
    trainer::TrainState state;
    std::string config_json;
};

// Throws on a bad magic or a version mismatch (reporting expected/actual).
// Mask schedules are not part of the file; callers restore them from config.
Loaded load(const std::string& path);

}  // namespace fewt::ckpt
