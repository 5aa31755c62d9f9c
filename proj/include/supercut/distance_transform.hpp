#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace supercut {

/// Exact squared Euclidean distance from every foreground pixel to the nearest
/// background pixel; background pixels get 0. Pixels outside the image count
/// as background, so a mask touching the border is distance 1 there.
/// Separable lower-envelope algorithm (Felzenszwalb & Huttenlocher), O(h*w).
std::vector<std::int64_t> squared_edt(std::span<const std::uint8_t> mask, std::int32_t height, std::int32_t width);

}  // namespace supercut
