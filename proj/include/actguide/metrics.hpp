#pragma once

#include <span>

#include "actguide/frame.hpp"

namespace actguide {

/// Returned by psnr() when the frames are identical (or MSE is vanishingly small).
inline constexpr double kPsnrCapDb = 100.0;
inline constexpr int kSsimWindow = 8;
inline constexpr int kLatentPool = 4;

double mse(const Frame& a, const Frame& b);

/// 10 log10(1 / MSE) for unit dynamic range, capped at kPsnrCapDb.
double psnr_from_mse(double mse);
double psnr(const Frame& pred, const Frame& gt);

/// Mean SSIM over every 8x8 window (stride 1, uniform weights, population
/// statistics), K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Frame& pred, const Frame& gt);

/// Mean over frames of |pool(pred_k) - pool(gt_k)|_2 / sqrt(16), where pool is
/// 4x4 average pooling down to a 4x4 grid.
double latent_l2(std::span<const Frame> pred, std::span<const Frame> gt);

}  // namespace actguide
