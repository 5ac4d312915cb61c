#ifndef BIMCC_SYNTH_HPP
#define BIMCC_SYNTH_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bimcc/error.hpp"
#include "bimcc/icp.hpp"
#include "bimcc/image.hpp"
#include "bimcc/point_cloud.hpp"
#include "bimcc/stereo.hpp"

namespace bimcc {

/// Counter-free splitmix64 generator. The sequence is fully pinned by this
/// header (no standard-library distributions), so identical seeds give
/// bit-identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, bound) by Lemire's multiply-shift reduction.
    std::uint64_t below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        const double m = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 2.0 * 3.14159265358979323846;
        spare_ = m * std::sin(two_pi * u2);
        have_spare_ = true;
        return m * std::cos(two_pi * u2);
    }

    Vec3 gaussian3() {
        const double a = gaussian(), b = gaussian(), c = gaussian();
        return {a, b, c};
    }

    Vec3 unit_vector() {
        while (true) {
            const Vec3 v = gaussian3();
            const double n = v.norm();
            if (n > 1e-12) return v / n;
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Deterministic sub-seed derivation: independent streams for (cell, repeat,
/// stream) triples under one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    Rng rng(base ^ (0x9E3779B97F4A7C15ULL * (a + 1)) ^ (0xD1B54A32D192ED03ULL * (b + 1)) ^
            (0x8CB92BA72F3D8DD7ULL * (c + 1)));
    return rng.next_u64();
}

enum class SceneShape { sphere_surface, cube_grid, helix };

inline SceneShape scene_shape_from_string(const std::string& name) {
    if (name == "sphere_surface" || name == "sphere") return SceneShape::sphere_surface;
    if (name == "cube_grid" || name == "cube") return SceneShape::cube_grid;
    if (name == "helix") return SceneShape::helix;
    throw Error(ErrorCode::InvalidArgument, "unknown scene shape '" + name + "'");
}

inline std::string to_string(SceneShape shape) {
    switch (shape) {
        case SceneShape::sphere_surface: return "sphere_surface";
        case SceneShape::cube_grid: return "cube_grid";
        case SceneShape::helix: return "helix";
    }
    return "?";
}

struct SceneSpec {
    SceneShape shape = SceneShape::sphere_surface;
    int n_points = 500;
    double scale_mm = 100.0;
    std::uint64_t seed = 0;
};

/// Corruption model applied to a generated cloud: contiguous-slab overlap
/// trimming, the rigid ground-truth motion, isotropic Gaussian noise, and
/// uniform box outliers.
struct CorruptionSpec {
    RigidTransform true_transform;
    double noise_sigma_mm = 0.0;
    double outlier_fraction = 0.0;  ///< in [0, 1)
    double overlap_fraction = 1.0;  ///< in (0, 1]
    std::uint64_t seed = 0;
};

struct ErrorReport {
    double rotation_error_deg = 0.0;
    double translation_error_mm = 0.0;
    double rmse_mm = 0.0;
    int iterations = 0;
    double wall_time_ms = 0.0;
};

/// Deterministic scene generation. Points always lie inside
/// [-scale, scale]^3; sphere points sit exactly on the radius-scale sphere.
inline PointCloud generate_cloud(const SceneSpec& spec) {
    if (spec.n_points < 1)
        throw Error(ErrorCode::InvalidArgument, "n_points must be >= 1");
    if (!(spec.scale_mm > 0.0))
        throw Error(ErrorCode::InvalidArgument, "scale_mm must be positive");

    PointCloud cloud;
    cloud.id = to_string(spec.shape);
    cloud.points.reserve(spec.n_points);

    switch (spec.shape) {
        case SceneShape::sphere_surface: {
            Rng rng(spec.seed);
            for (int i = 0; i < spec.n_points; ++i)
                cloud.points.push_back(rng.unit_vector() * spec.scale_mm);
            break;
        }
        case SceneShape::cube_grid: {
            int m = 1;
            while (m * m * m < spec.n_points) ++m;
            for (int z = 0; z < m && static_cast<int>(cloud.size()) < spec.n_points; ++z)
                for (int y = 0; y < m && static_cast<int>(cloud.size()) < spec.n_points; ++y)
                    for (int x = 0; x < m && static_cast<int>(cloud.size()) < spec.n_points; ++x) {
                        auto coord = [&](int i) {
                            return m == 1 ? 0.0 : -spec.scale_mm + 2.0 * spec.scale_mm * i / (m - 1);
                        };
                        cloud.points.push_back({coord(x), coord(y), coord(z)});
                    }
            break;
        }
        case SceneShape::helix: {
            constexpr double turns = 2.0;
            for (int i = 0; i < spec.n_points; ++i) {
                const double t = spec.n_points == 1 ? 0.0
                                                    : static_cast<double>(i) / (spec.n_points - 1);
                const double angle = turns * 2.0 * 3.14159265358979323846 * t;
                cloud.points.push_back({spec.scale_mm * std::cos(angle),
                                        spec.scale_mm * std::sin(angle),
                                        spec.scale_mm * (2.0 * t - 1.0)});
            }
            break;
        }
    }
    return cloud;
}

/// Applies the corruption model and returns the target cloud with its
/// ground-truth transform. Overlap keeps the points in a contiguous spatial
/// slab (largest projections onto a seed-drawn direction); outliers replace
/// exactly round(kept * fraction) points with uniform samples in the
/// transformed cloud's bounding box.
inline std::pair<PointCloud, RigidTransform> corrupt(const PointCloud& cloud,
                                                     const CorruptionSpec& spec) {
    require_valid_cloud(cloud);
    if (spec.outlier_fraction < 0.0 || spec.outlier_fraction >= 1.0)
        throw Error(ErrorCode::InvalidArgument, "outlier_fraction must be in [0, 1)");
    if (!(spec.overlap_fraction > 0.0) || spec.overlap_fraction > 1.0)
        throw Error(ErrorCode::InvalidArgument, "overlap_fraction must be in (0, 1]");
    if (spec.noise_sigma_mm < 0.0)
        throw Error(ErrorCode::InvalidArgument, "noise_sigma_mm must be >= 0");

    Rng rng(spec.seed);
    const std::size_t n = cloud.size();

    std::vector<std::size_t> kept(n);
    for (std::size_t i = 0; i < n; ++i) kept[i] = i;
    if (spec.overlap_fraction < 1.0) {
        const Vec3 dir = rng.unit_vector();
        const std::size_t k =
            static_cast<std::size_t>(std::llround(spec.overlap_fraction * static_cast<double>(n)));
        if (k < 3) throw Error(ErrorCode::DegenerateScene, "overlap keeps fewer than 3 points");
        std::vector<std::size_t> by_proj = kept;
        std::sort(by_proj.begin(), by_proj.end(), [&](std::size_t a, std::size_t b) {
            const double pa = cloud.points[a].dot(dir), pb = cloud.points[b].dot(dir);
            return pa != pb ? pa > pb : a < b;
        });
        by_proj.resize(k);
        std::sort(by_proj.begin(), by_proj.end());
        kept = std::move(by_proj);
    }
    if (kept.size() < 3) throw Error(ErrorCode::DegenerateScene, "fewer than 3 points remain");

    PointCloud target;
    target.id = cloud.id;
    target.points.reserve(kept.size());
    for (std::size_t i : kept) target.points.push_back(spec.true_transform.apply(cloud.points[i]));

    if (spec.noise_sigma_mm > 0.0)
        for (Vec3& p : target.points) p += rng.gaussian3() * spec.noise_sigma_mm;

    const std::size_t m = static_cast<std::size_t>(
        std::llround(spec.outlier_fraction * static_cast<double>(target.size())));
    if (m > 0) {
        Vec3 lo = target.points.front(), hi = lo;
        for (const Vec3& p : target.points) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        // Partial Fisher-Yates draw of m distinct victim indices.
        std::vector<std::size_t> order(target.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
            std::swap(order[i], order[j]);
            target.points[order[i]] = {rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                                       rng.uniform(lo.z(), hi.z())};
        }
    }
    return {std::move(target), spec.true_transform};
}

/// Alignment error metrics between an estimated and a true transform.
/// The RMSE is taken over the source points mapped by both transforms.
inline ErrorReport error_report(const RigidTransform& estimated, const RigidTransform& truth,
                                const PointCloud& source) {
    ErrorReport report;
    report.rotation_error_deg = rotation_angle_deg(estimated.rotation(), truth.rotation());
    report.translation_error_mm = (estimated.translation() - truth.translation()).norm();
    if (!source.empty()) {
        long double acc = 0.0L;
        for (const Vec3& p : source.points)
            acc += static_cast<long double>((estimated.apply(p) - truth.apply(p)).squaredNorm());
        report.rmse_mm = std::sqrt(static_cast<double>(acc / source.size()));
    }
    return report;
}

enum class BenchAlgo { icp, bimcc, both };

inline BenchAlgo bench_algo_from_string(const std::string& name) {
    if (name == "icp") return BenchAlgo::icp;
    if (name == "bimcc") return BenchAlgo::bimcc;
    if (name == "both") return BenchAlgo::both;
    throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + name + "'");
}

/// One benchmark grid cell. The ground-truth motion is re-drawn per repeat:
/// a rot_deg rotation about a seed-derived random axis plus a translation of
/// trans_frac times the cloud's bounding-box diagonal in a seed-derived
/// direction.
struct BenchCell {
    std::string name = "cell";
    SceneSpec scene;
    double rot_deg = 10.0;
    double trans_frac = 0.1;
    double noise_sigma_mm = 0.0;
    double outlier_fraction = 0.0;
    double overlap_fraction = 1.0;
    BenchAlgo algo = BenchAlgo::both;
};

struct BenchRow {
    std::string scene;
    std::string algorithm;
    std::uint64_t seed = 0;
    double noise_sigma_mm = 0.0;
    double outlier_fraction = 0.0;
    double overlap_fraction = 1.0;
    ErrorReport report;
};

/// Runs every (cell, repeat, algorithm) combination with seeds derived
/// deterministically from (base_seed, cell index, repeat). Both algorithms
/// of a `both` cell see the identical instance. Rows are ordered by cell,
/// then repeat, with icp before bimcc.
inline std::vector<BenchRow> run_benchmark(std::span<const BenchCell> grid, int repeats,
                                           std::uint64_t base_seed,
                                           const IcpConfig& cfg = IcpConfig{},
                                           const KernelSchedule& sched = KernelSchedule{}) {
    if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
    std::vector<BenchRow> rows;
    for (std::size_t cell_idx = 0; cell_idx < grid.size(); ++cell_idx) {
        const BenchCell& cell = grid[cell_idx];
        for (int rep = 0; rep < repeats; ++rep) {
            const std::uint64_t row_seed = derive_seed(base_seed, cell_idx, rep);

            SceneSpec scene = cell.scene;
            scene.seed = derive_seed(row_seed, 1);
            const PointCloud source = generate_cloud(scene);

            Vec3 lo = source.points.front(), hi = lo;
            for (const Vec3& p : source.points) {
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
            }
            Rng truth_rng(derive_seed(row_seed, 2));
            const Vec3 axis = truth_rng.unit_vector();
            const Vec3 t_dir = truth_rng.unit_vector();
            const RigidTransform truth = RigidTransform::axis_angle(
                axis, cell.rot_deg, t_dir * (cell.trans_frac * (hi - lo).norm()));

            CorruptionSpec corr;
            corr.true_transform = truth;
            corr.noise_sigma_mm = cell.noise_sigma_mm;
            corr.outlier_fraction = cell.outlier_fraction;
            corr.overlap_fraction = cell.overlap_fraction;
            corr.seed = derive_seed(row_seed, 3);
            const auto [target, truth_out] = corrupt(source, corr);

            auto run_one = [&](const std::string& algo_name) {
                const auto t0 = std::chrono::steady_clock::now();
                const RegistrationResult res =
                    algo_name == "icp"
                        ? icp_classic(source, target, RigidTransform::identity(), cfg)
                        : bimcc_icp(source, target, RigidTransform::identity(), cfg, sched);
                const auto t1 = std::chrono::steady_clock::now();
                BenchRow row;
                row.scene = cell.name;
                row.algorithm = algo_name;
                row.seed = row_seed;
                row.noise_sigma_mm = cell.noise_sigma_mm;
                row.outlier_fraction = cell.outlier_fraction;
                row.overlap_fraction = cell.overlap_fraction;
                row.report = error_report(res.transform, truth_out, source);
                row.report.iterations = res.iterations;
                row.report.wall_time_ms =
                    std::chrono::duration<double, std::milli>(t1 - t0).count();
                rows.push_back(std::move(row));
            };
            if (cell.algo == BenchAlgo::icp || cell.algo == BenchAlgo::both) run_one("icp");
            if (cell.algo == BenchAlgo::bimcc || cell.algo == BenchAlgo::both) run_one("bimcc");
        }
    }
    return rows;
}

/// Random-dot stereogram with exact ground truth.
struct Stereogram {
    GrayImage left, right;
    DisparityMap ground_truth;
    std::vector<std::uint8_t> occlusion;  ///< left pixels not visible in the right image

    bool occluded(int x, int y) const {
        return occlusion[static_cast<std::size_t>(y) * left.width + x] != 0;
    }
};

/// Builds a random-dot pair from a per-pixel integer disparity field.
/// The right image is the forward warp right(x - d, y) = left(x, y); where
/// several left pixels land on one right pixel the largest disparity wins and
/// the losers are marked occluded, as are pixels whose projection leaves the
/// image. Unclaimed right pixels receive fresh random dots.
inline Stereogram generate_stereogram(int width, int height, std::span<const int> disparity_field,
                                      std::uint64_t seed) {
    if (width < 1 || height < 1)
        throw Error(ErrorCode::InvalidArgument, "stereogram dimensions must be positive");
    if (disparity_field.size() != static_cast<std::size_t>(width) * height)
        throw Error(ErrorCode::DimensionMismatch, "disparity field size != width * height");
    for (int d : disparity_field)
        if (d < 0 || d > width / 4)
            throw Error(ErrorCode::DisparityOutOfRange,
                        "disparities must lie in [0, width/4] = [0, " +
                            std::to_string(width / 4) + "]");

    Rng rng(seed);
    Stereogram s;
    s.left = GrayImage(width, height);
    s.right = GrayImage(width, height);
    s.ground_truth = DisparityMap(width, height);
    s.occlusion.assign(static_cast<std::size_t>(width) * height, 0);

    for (double& p : s.left.pixels) p = rng.uniform01();

    std::vector<int> zbuf(static_cast<std::size_t>(width) * height, -1);
    auto at = [&](int x, int y) { return static_cast<std::size_t>(y) * width + x; };
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int d = disparity_field[at(x, y)];
            s.ground_truth.d[at(x, y)] = static_cast<double>(d);
            const int xr = x - d;
            if (xr >= 0 && xr < width && d > zbuf[at(xr, y)]) zbuf[at(xr, y)] = d;
        }
    std::vector<std::uint8_t> claimed(static_cast<std::size_t>(width) * height, 0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int d = disparity_field[at(x, y)];
            const int xr = x - d;
            if (xr < 0 || xr >= width || zbuf[at(xr, y)] != d) {
                s.occlusion[at(x, y)] = 1;
            } else {
                s.right.at(xr, y) = s.left.at(x, y);
                claimed[at(xr, y)] = 1;
            }
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (!claimed[at(x, y)]) s.right.at(x, y) = rng.uniform01();
    return s;
}

}  // namespace bimcc

#endif  // BIMCC_SYNTH_HPP
