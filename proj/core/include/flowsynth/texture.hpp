#pragma once

#include <cstdint>

#include "flowsynth/image.hpp"

namespace flowsynth {

/// Deterministic synthetic photograph stand-in: multi-octave value noise with
/// a scatter of hard-edged disks and boxes on top. Used by tests and `bench`
/// when no corpus is at hand.
Image procedural_texture(int height, int width, std::uint64_t seed, int channels = 3);

}  // namespace flowsynth
