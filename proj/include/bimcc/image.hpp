#ifndef BIMCC_IMAGE_HPP
#define BIMCC_IMAGE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bimcc/error.hpp"

namespace bimcc {

/// Row-major grayscale image, values in [0, 1].
struct GrayImage {
    int width = 0, height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    /// Sample with replicated (clamped) borders.
    double at_clamped(int x, int y) const {
        return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
    }
};

/// Per-pixel image derivatives and their magnitude.
struct GradientField {
    int width = 0, height = 0;
    std::vector<double> gx, gy, magnitude;

    double mag(int x, int y) const { return magnitude[static_cast<std::size_t>(y) * width + x]; }
    double mag_clamped(int x, int y) const {
        return mag(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
    }
    Eigen::Vector2d grad(int x, int y) const {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        return {gx[i], gy[i]};
    }
};

/// Central-difference gradients with replicated borders.
inline GradientField gradient_field(const GrayImage& img) {
    if (img.width < 3 || img.height < 3)
        throw Error(ErrorCode::ImageTooSmall, "gradients need at least a 3x3 image");
    GradientField field;
    field.width = img.width;
    field.height = img.height;
    const std::size_t n = img.pixels.size();
    field.gx.resize(n);
    field.gy.resize(n);
    field.magnitude.resize(n);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            field.gx[i] = (img.at_clamped(x + 1, y) - img.at_clamped(x - 1, y)) / 2.0;
            field.gy[i] = (img.at_clamped(x, y + 1) - img.at_clamped(x, y - 1)) / 2.0;
            field.magnitude[i] = std::hypot(field.gx[i], field.gy[i]);
        }
    }
    return field;
}

namespace detail {

/// 1-D Gaussian taps at integer offsets within +-3 sigma, renormalized to
/// sum exactly 1.
inline std::vector<double> gaussian_taps(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw Error(ErrorCode::InvalidSigma, "gaussian sigma must be finite and positive");
    const int radius = std::max(1, static_cast<int>(std::floor(3.0 * sigma)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        taps[k + radius] = std::exp(-(static_cast<double>(k) * k) / (2.0 * sigma * sigma));
        sum += taps[k + radius];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

/// Separable convolution with replicated borders over a row-major field.
inline std::vector<double> separable_blur(const std::vector<double>& src, int width, int height,
                                          double sigma) {
    const std::vector<double> taps = gaussian_taps(sigma);
    const int radius = static_cast<int>(taps.size()) / 2;
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += taps[k + radius] * src[static_cast<std::size_t>(y) * width +
                                              std::clamp(x + k, 0, width - 1)];
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += taps[k + radius] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, height - 1)) * width + x];
            out[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    return out;
}

}  // namespace detail

inline GrayImage gaussian_smooth(const GrayImage& img, double sigma) {
    GrayImage out = img;
    out.pixels = detail::separable_blur(img.pixels, img.width, img.height, sigma);
    return out;
}

/// A 2-D contour sample: pixel position plus a direction vector.
struct ContourPoint {
    double x = 0.0, y = 0.0;
    Eigen::Vector2d direction{0.0, 0.0};
};

/// Mean absolute cosine between contour directions and the local image
/// gradient: S = (1/N) sum |d_i . grad| / (||grad|| ||d_i||), in [0, 1].
/// Zero-gradient samples contribute 0. Positions are rounded to the nearest
/// pixel and must land inside the field.
inline double shape_similarity(std::span<const ContourPoint> contour, const GradientField& grad) {
    if (contour.empty()) throw Error(ErrorCode::InvalidArgument, "contour must not be empty");
    long double acc = 0.0L;
    for (const ContourPoint& c : contour) {
        const double dn = c.direction.norm();
        if (!(dn > 0.0) || !c.direction.allFinite())
            throw Error(ErrorCode::InvalidDirection, "contour direction must be a nonzero finite vector");
        const int px = static_cast<int>(std::lround(c.x));
        const int py = static_cast<int>(std::lround(c.y));
        if (px < 0 || px >= grad.width || py < 0 || py >= grad.height)
            throw Error(ErrorCode::InvalidArgument, "contour point outside the image");
        const Eigen::Vector2d g = grad.grad(px, py);
        const double gn = g.norm();
        if (gn > 0.0) acc += std::abs(c.direction.dot(g)) / (gn * dn);
    }
    return static_cast<double>(acc / contour.size());
}

}  // namespace bimcc

#endif  // BIMCC_IMAGE_HPP
