#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace actguide {

inline constexpr int kFrameSide = 16;
inline constexpr std::size_t kFramePixels = kFrameSide * kFrameSide;

/// 16x16 grayscale image, row-major, every pixel in [0, 1]. Pixels are held
/// in single precision so frames round-trip through the dataset file exactly.
class Frame {
public:
    Frame() { pixels_.fill(0.0f); }

    /// Throws InvalidInput unless `pixels` holds 256 values in [0, 1].
    static Frame from_pixels(std::span<const double> pixels);
    static Frame from_pixels(std::span<const float> pixels);

    /// Maps a diffusion-space latent (pixel * 2 - 1) back to a frame,
    /// clipping to the valid range.
    static Frame from_latent(std::span<const double> latent);
    std::vector<double> to_latent() const;

    float at(int row, int col) const { return pixels_[static_cast<std::size_t>(row * kFrameSide + col)]; }
    std::span<const float> pixels() const noexcept { return pixels_; }

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    std::array<float, kFramePixels> pixels_;
};

}  // namespace actguide
