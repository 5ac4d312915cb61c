#ifndef BIMCC_STEREO_HPP
#define BIMCC_STEREO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bimcc/error.hpp"
#include "bimcc/image.hpp"

namespace bimcc {

/// Knobs for the disparity pipeline. Windows are odd side lengths.
struct StereoConfig {
    int d_max = 0;
    int cost_window = 5;
    int agg_window = 5;
    double lr_tau = 1.0;        ///< left-right consistency tolerance, disparities
    double gaussian_sigma = 1.0;
    int wls_radius = 7;         ///< occlusion-fill neighborhood half-size, px
    double wls_lambda = 10.0;   ///< spatial falloff of the fill weights

    void validate(int image_width) const {
        if (d_max < 1 || d_max >= image_width)
            throw Error(ErrorCode::InvalidArgument, "d_max must be in [1, width)");
        if (cost_window < 1 || cost_window % 2 == 0 || agg_window < 1 || agg_window % 2 == 0)
            throw Error(ErrorCode::InvalidArgument, "cost/aggregation windows must be odd and positive");
        if (lr_tau < 0.0 || !(gaussian_sigma > 0.0) || wls_radius < 1 || !(wls_lambda > 0.0))
            throw Error(ErrorCode::InvalidArgument, "invalid stereo post-processing knobs");
    }
};

/// Per-pixel, per-disparity matching costs, disparity in [0, d_max].
struct CostVolume {
    int width = 0, height = 0, d_max = 0;
    std::vector<double> costs;  // index: (y * width + x) * (d_max + 1) + d

    CostVolume() = default;
    CostVolume(int w, int h, int dmax)
        : width(w), height(h), d_max(dmax),
          costs(static_cast<std::size_t>(w) * h * (dmax + 1), 0.0) {}

    double& at(int x, int y, int d) {
        return costs[(static_cast<std::size_t>(y) * width + x) * (d_max + 1) + d];
    }
    double at(int x, int y, int d) const {
        return costs[(static_cast<std::size_t>(y) * width + x) * (d_max + 1) + d];
    }
};

/// Disparity field with a validity mask.
struct DisparityMap {
    int width = 0, height = 0;
    std::vector<double> d;
    std::vector<std::uint8_t> valid;

    DisparityMap() = default;
    DisparityMap(int w, int h)
        : width(w), height(h), d(static_cast<std::size_t>(w) * h, 0.0),
          valid(static_cast<std::size_t>(w) * h, 1) {}

    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    double disparity(int x, int y) const { return d[idx(x, y)]; }
    bool is_valid(int x, int y) const { return valid[idx(x, y)] != 0; }
};

/// Sum-of-gradient matching cost: the mean over the cost window of
/// |m_l(x', y') - m_r(x' - d, y')|, window coordinates clamped to the image.
/// Samples whose right-image column x' - d falls outside the image take a
/// fixed penalty equal to the maximum in-bounds sample cost of this volume,
/// so winner-take-all never prefers an unobservable disparity.
inline CostVolume matching_cost(const GradientField& left, const GradientField& right,
                                const StereoConfig& cfg) {
    if (left.width != right.width || left.height != right.height)
        throw Error(ErrorCode::DimensionMismatch, "left/right gradient dimensions differ");
    cfg.validate(left.width);

    const int w = left.width, h = left.height;
    double max_sample = 0.0;
    for (int d = 0; d <= cfg.d_max; ++d)
        for (int y = 0; y < h; ++y)
            for (int x = d; x < w; ++x)
                max_sample = std::max(max_sample, std::abs(left.mag(x, y) - right.mag(x - d, y)));

    CostVolume vol(w, h, cfg.d_max);
    const int r = cfg.cost_window / 2;
    const double inv_count = 1.0 / (static_cast<double>(cfg.cost_window) * cfg.cost_window);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int d = 0; d <= cfg.d_max; ++d) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int sy = std::clamp(y + dy, 0, h - 1);
                    for (int dx = -r; dx <= r; ++dx) {
                        const int sx = std::clamp(x + dx, 0, w - 1);
                        acc += sx - d < 0 ? max_sample
                                          : std::abs(left.mag(sx, sy) - right.mag(sx - d, sy));
                    }
                }
                vol.at(x, y, d) = acc * inv_count;
            }
        }
    }
    return vol;
}

/// Per-disparity box mean over the aggregation window (replicated borders).
/// Preserves non-negativity and constants.
inline CostVolume aggregate_cost(const CostVolume& vol, const StereoConfig& cfg) {
    if (cfg.agg_window < 1 || cfg.agg_window % 2 == 0)
        throw Error(ErrorCode::InvalidArgument, "aggregation window must be odd and positive");
    CostVolume out(vol.width, vol.height, vol.d_max);
    const int r = cfg.agg_window / 2;
    const double inv_count = 1.0 / (static_cast<double>(cfg.agg_window) * cfg.agg_window);
    for (int y = 0; y < vol.height; ++y) {
        for (int x = 0; x < vol.width; ++x) {
            for (int d = 0; d <= vol.d_max; ++d) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int sy = std::clamp(y + dy, 0, vol.height - 1);
                    for (int dx = -r; dx <= r; ++dx)
                        acc += vol.at(std::clamp(x + dx, 0, vol.width - 1), sy, d);
                }
                out.at(x, y, d) = acc * inv_count;
            }
        }
    }
    return out;
}

/// Winner-take-all: the smallest disparity attaining the minimal aggregated
/// cost. Every pixel is marked valid.
inline DisparityMap select_disparity(const CostVolume& vol) {
    DisparityMap map(vol.width, vol.height);
    for (int y = 0; y < vol.height; ++y) {
        for (int x = 0; x < vol.width; ++x) {
            int best = 0;
            double best_cost = vol.at(x, y, 0);
            for (int d = 1; d <= vol.d_max; ++d) {
                const double c = vol.at(x, y, d);
                if (c < best_cost) {
                    best_cost = c;
                    best = d;
                }
            }
            map.d[map.idx(x, y)] = static_cast<double>(best);
        }
    }
    return map;
}

/// Invalidates pixel x when x - d_L(x) projects off-image or the right map
/// disagrees by more than tau: |d_L(x) - d_R(x - d_L(x))| > tau. Surviving
/// pixels keep their left disparity.
inline DisparityMap lr_consistency(const DisparityMap& d_left, const DisparityMap& d_right,
                                   double tau) {
    if (d_left.width != d_right.width || d_left.height != d_right.height)
        throw Error(ErrorCode::DimensionMismatch, "left/right disparity dimensions differ");
    DisparityMap out = d_left;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const double dl = d_left.disparity(x, y);
            const int xr = x - static_cast<int>(std::lround(dl));
            const bool ok = xr >= 0 && xr < out.width &&
                            std::abs(dl - d_right.disparity(xr, y)) <= tau;
            out.valid[out.idx(x, y)] = ok ? 1 : 0;
        }
    }
    return out;
}

/// Occlusion filling by local weighted least squares.
///
/// Rows are processed top to bottom. Within a row, each maximal invalid run
/// touching the left image border is filled scanning right to left (from its
/// nearest valid pixel); every other run is filled left to right. A filled
/// pixel becomes valid immediately, so later fills inside the same run build
/// on earlier ones. The fill value is the weighted mean of valid pixels
/// within wls_radius (weights exp(-dist^2 / wls_lambda)); a pixel with an
/// empty neighborhood takes the nearest valid value on its scanline in the
/// fill direction, falling back to the globally nearest valid pixel.
inline DisparityMap wls_fill(const DisparityMap& input, const StereoConfig& cfg) {
    if (cfg.wls_radius < 1 || !(cfg.wls_lambda > 0.0))
        throw Error(ErrorCode::InvalidArgument, "wls_radius >= 1 and wls_lambda > 0 required");
    if (std::find(input.valid.begin(), input.valid.end(), std::uint8_t{1}) == input.valid.end())
        throw Error(ErrorCode::NoValidDisparities, "cannot fill a map with no valid pixels");

    DisparityMap map = input;
    const int w = map.width, h = map.height, r = cfg.wls_radius;

    auto weighted_mean = [&](int x, int y, bool& found) {
        long double num = 0.0L, den = 0.0L;
        for (int dy = -r; dy <= r; ++dy) {
            const int sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            for (int dx = -r; dx <= r; ++dx) {
                const int sx = x + dx;
                if (sx < 0 || sx >= w) continue;
                if (!map.is_valid(sx, sy)) continue;
                const double wgt = std::exp(-(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) /
                                            cfg.wls_lambda);
                num += wgt * map.disparity(sx, sy);
                den += wgt;
            }
        }
        found = den > 0.0L;
        return found ? static_cast<double>(num / den) : 0.0;
    };
    auto scanline_donor = [&](int x, int y, bool from_right, bool& found) {
        if (from_right) {
            for (int sx = x + 1; sx < w; ++sx)
                if (map.is_valid(sx, y)) { found = true; return map.disparity(sx, y); }
        } else {
            for (int sx = x - 1; sx >= 0; --sx)
                if (map.is_valid(sx, y)) { found = true; return map.disparity(sx, y); }
        }
        found = false;
        return 0.0;
    };
    auto global_donor = [&](int x, int y) {
        double best_d2 = std::numeric_limits<double>::infinity();
        double value = 0.0;
        for (int sy = 0; sy < h; ++sy)
            for (int sx = 0; sx < w; ++sx)
                if (map.is_valid(sx, sy)) {
                    const double d2 = static_cast<double>(sx - x) * (sx - x) +
                                      static_cast<double>(sy - y) * (sy - y);
                    if (d2 < best_d2) { best_d2 = d2; value = map.disparity(sx, sy); }
                }
        return value;
    };
    auto fill_one = [&](int x, int y, bool border_run) {
        bool found = false;
        double value = weighted_mean(x, y, found);
        if (!found) value = scanline_donor(x, y, border_run, found);
        if (!found) value = global_donor(x, y);
        map.d[map.idx(x, y)] = value;
        map.valid[map.idx(x, y)] = 1;
    };

    for (int y = 0; y < h; ++y) {
        int x = 0;
        while (x < w) {
            if (map.is_valid(x, y)) { ++x; continue; }
            int end = x;
            while (end + 1 < w && !map.is_valid(end + 1, y)) ++end;
            if (x == 0) {
                for (int fx = end; fx >= 0; --fx) fill_one(fx, y, true);
            } else {
                for (int fx = x; fx <= end; ++fx) fill_one(fx, y, false);
            }
            x = end + 1;
        }
    }
    return map;
}

/// Gaussian smoothing of the disparity field; the validity mask is untouched.
inline DisparityMap gaussian_smooth(const DisparityMap& map, double sigma) {
    DisparityMap out = map;
    out.d = detail::separable_blur(map.d, map.width, map.height, sigma);
    return out;
}

namespace detail {

inline GrayImage mirror_horizontal(const GrayImage& img) {
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(x, y) = img.at(img.width - 1 - x, y);
    return out;
}

}  // namespace detail

/// Winner-take-all disparity of one matching direction (gradient, cost,
/// aggregation, selection). Exposed so stages can be tested in isolation.
inline DisparityMap stereo_wta(const GrayImage& left, const GrayImage& right,
                               const StereoConfig& cfg) {
    const GradientField gl = gradient_field(left);
    const GradientField gr = gradient_field(right);
    const CostVolume vol = aggregate_cost(matching_cost(gl, gr, cfg), cfg);
    return select_disparity(vol);
}

/// Right-reference disparity map via the mirrored-pair trick: matching the
/// horizontally mirrored right image against the mirrored left image with the
/// standard left-reference path, then un-mirroring the result.
inline DisparityMap stereo_wta_right(const GrayImage& left, const GrayImage& right,
                                     const StereoConfig& cfg) {
    const DisparityMap mirrored =
        stereo_wta(detail::mirror_horizontal(right), detail::mirror_horizontal(left), cfg);
    DisparityMap out(mirrored.width, mirrored.height);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.d[out.idx(x, y)] = mirrored.disparity(mirrored.width - 1 - x, y);
    return out;
}

/// Full pipeline: gradients, matching cost, aggregation, winner-take-all in
/// both directions, left-right consistency, occlusion filling, Gaussian
/// smoothing. The fill and smoothing stages can be skipped for inspection;
/// with the fill enabled the output has no invalid pixels.
inline DisparityMap stereo_pipeline(const GrayImage& left, const GrayImage& right,
                                    const StereoConfig& cfg, bool fill = true,
                                    bool smooth = true) {
    if (left.width != right.width || left.height != right.height)
        throw Error(ErrorCode::DimensionMismatch, "left/right image dimensions differ");
    const DisparityMap d_left = stereo_wta(left, right, cfg);
    const DisparityMap d_right = stereo_wta_right(left, right, cfg);
    DisparityMap map = lr_consistency(d_left, d_right, cfg.lr_tau);
    if (fill) map = wls_fill(map, cfg);
    if (smooth) map = gaussian_smooth(map, cfg.gaussian_sigma);
    return map;
}

}  // namespace bimcc

#endif  // BIMCC_STEREO_HPP
