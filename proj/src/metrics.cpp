#include "actguide/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "actguide/error.hpp"

namespace actguide {

namespace {

constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);
constexpr int kIntegralSide = kFrameSide + 1;

using Integral = std::array<double, kIntegralSide * kIntegralSide>;

template <typename F>
Integral integral_image(F value) {
    Integral s{};
    for (int i = 0; i < kFrameSide; ++i) {
        double row = 0.0;
        for (int j = 0; j < kFrameSide; ++j) {
            row += value(i, j);
            s[(i + 1) * kIntegralSide + j + 1] = s[i * kIntegralSide + j + 1] + row;
        }
    }
    return s;
}

double box(const Integral& s, int i, int j, int n) {
    return s[(i + n) * kIntegralSide + j + n] - s[i * kIntegralSide + j + n] - s[(i + n) * kIntegralSide + j] +
           s[i * kIntegralSide + j];
}

constexpr int kPooledSide = kFrameSide / kLatentPool;

std::array<double, kPooledSide * kPooledSide> pool(const Frame& f) {
    std::array<double, kPooledSide * kPooledSide> out{};
    for (int i = 0; i < kFrameSide; ++i)
        for (int j = 0; j < kFrameSide; ++j)
            out[(i / kLatentPool) * kPooledSide + j / kLatentPool] += f.at(i, j);
    for (double& v : out) v /= kLatentPool * kLatentPool;
    return out;
}

}  // namespace

double mse(const Frame& a, const Frame& b) {
    double sum = 0.0;
    const auto pa = a.pixels();
    const auto pb = b.pixels();
    for (std::size_t i = 0; i < kFramePixels; ++i) {
        const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(kFramePixels);
}

double psnr_from_mse(double m) {
    if (!(m >= 0.0)) throw InvalidInput("psnr: MSE must be a non-negative number");
    if (m == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, -10.0 * std::log10(m));
}

double psnr(const Frame& pred, const Frame& gt) { return psnr_from_mse(mse(pred, gt)); }

double ssim(const Frame& pred, const Frame& gt) {
    auto px = [](const Frame& f) { return [&f](int i, int j) { return static_cast<double>(f.at(i, j)); }; };
    const Integral sx = integral_image(px(pred));
    const Integral sy = integral_image(px(gt));
    const Integral sxx = integral_image([&](int i, int j) { return double(pred.at(i, j)) * pred.at(i, j); });
    const Integral syy = integral_image([&](int i, int j) { return double(gt.at(i, j)) * gt.at(i, j); });
    const Integral sxy = integral_image([&](int i, int j) { return double(pred.at(i, j)) * gt.at(i, j); });

    constexpr int n = kSsimWindow;
    constexpr double count = n * n;
    constexpr int positions = kFrameSide - n + 1;
    double total = 0.0;
    for (int i = 0; i < positions; ++i) {
        for (int j = 0; j < positions; ++j) {
            const double mx = box(sx, i, j, n) / count;
            const double my = box(sy, i, j, n) / count;
            const double vx = box(sxx, i, j, n) / count - mx * mx;
            const double vy = box(syy, i, j, n) / count - my * my;
            const double cxy = box(sxy, i, j, n) / count - mx * my;
            total += ((2 * mx * my + kC1) * (2 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
        }
    }
    return total / (positions * positions);
}

double latent_l2(std::span<const Frame> pred, std::span<const Frame> gt) {
    if (pred.size() != gt.size()) throw InvalidInput("latent_l2: sequence lengths differ");
    if (pred.empty()) throw InvalidInput("latent_l2: empty sequences");
    double total = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const auto a = pool(pred[k]);
        const auto b = pool(gt[k]);
        double sq = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
        total += std::sqrt(sq / static_cast<double>(a.size()));
    }
    return total / static_cast<double>(pred.size());
}

}  // namespace actguide
