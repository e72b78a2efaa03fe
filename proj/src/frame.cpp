#include "actguide/frame.hpp"

#include <algorithm>
#include <cmath>

#include "actguide/error.hpp"

namespace actguide {

namespace {

template <typename T>
Frame checked(std::span<const T> pixels, std::array<float, kFramePixels>& dst) {
    if (pixels.size() != kFramePixels) throw InvalidInput("frame must have 256 pixels");
    for (std::size_t i = 0; i < kFramePixels; ++i) {
        const T v = pixels[i];
        if (!(v >= 0 && v <= 1)) throw InvalidInput("frame pixel outside [0, 1]");
        dst[i] = static_cast<float>(v);
    }
    return {};
}

}  // namespace

Frame Frame::from_pixels(std::span<const double> pixels) {
    Frame f;
    checked(pixels, f.pixels_);
    return f;
}

Frame Frame::from_pixels(std::span<const float> pixels) {
    Frame f;
    checked(pixels, f.pixels_);
    return f;
}

Frame Frame::from_latent(std::span<const double> latent) {
    if (latent.size() != kFramePixels) throw InvalidInput("latent does not match frame size");
    Frame f;
    for (std::size_t i = 0; i < kFramePixels; ++i) {
        const double v = latent[i];
        if (!std::isfinite(v)) throw NumericalError("non-finite latent converted to frame");
        f.pixels_[i] = static_cast<float>(std::clamp((v + 1.0) * 0.5, 0.0, 1.0));
    }
    return f;
}

std::vector<double> Frame::to_latent() const {
    std::vector<double> out(kFramePixels);
    for (std::size_t i = 0; i < kFramePixels; ++i) out[i] = 2.0 * static_cast<double>(pixels_[i]) - 1.0;
    return out;
}

}  // namespace actguide
