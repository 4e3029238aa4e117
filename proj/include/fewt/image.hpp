#pragma once

#include <string>
#include <vector>

#include "fewt/geometry.hpp"

namespace fewt::img {

// Float RGB in [0,1], row-major, top-left origin.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

    float& at(int x, int y, int c) {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    float at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

// Decodes a PNG (any color type, 8/16 bit) and composites straight alpha
// over the given background. Throws with the path on failure.
Image read_png(const std::string& path, const Vec3& background);

// 8-bit RGB, written atomically (temp file + rename).
void write_png(const std::string& path, const Image& image);

// Box-average downscale; factor must divide both dimensions.
Image downscale(const Image& image, int factor);

}  // namespace fewt::img
