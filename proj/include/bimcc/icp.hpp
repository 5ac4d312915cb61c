#ifndef BIMCC_ICP_HPP
#define BIMCC_ICP_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "bimcc/error.hpp"
#include "bimcc/kdtree.hpp"
#include "bimcc/point_cloud.hpp"
#include "bimcc/rigid_fit.hpp"

namespace bimcc {

/// Shared iteration controls. `epsilon` bounds |e_k - e_{k-1}|: mean squared
/// correspondence distance (mm^2) for classic ICP, the dimensionless kernel
/// objective for the correntropy variant.
struct IcpConfig {
    int max_iterations = 100;
    double epsilon = 1e-8;
    int inner_iters = 1;  ///< reweighted fit steps per iteration (correntropy variant)
};

/// Kernel bandwidth schedule for the correntropy objective.
///   iteration 0:  sigma = max(sigma_floor, sigma_init_scale * median initial
///                 correspondence distance)
///   iteration k:  sigma = max(sigma_floor, eta * RMS residual norm)
struct KernelSchedule {
    double sigma_init_scale = 3.0;
    double sigma_floor = 1e-3;  ///< mm
    double eta = 2.0;
};

/// One row of a registration trace. `objective`, `combined` and `sigma` are
/// only present for the correntropy variant.
struct TraceEntry {
    int iteration = 0;
    double error = 0.0;  ///< mean squared correspondence distance, mm^2
    std::optional<double> objective;  ///< mean Gaussian-kernel value, in (0, 1]
    std::optional<double> combined;   ///< kernel sum over all pairs (N * objective)
    std::optional<double> sigma;      ///< bandwidth used this iteration, mm
};

struct RegistrationResult {
    RigidTransform transform;
    int iterations = 0;
    bool converged = false;
    std::vector<TraceEntry> trace;
};

/// Augmented correspondence list: the first `forward_count` pairs map each
/// source point to its nearest target point; the remainder map each target
/// point back to its nearest (pose-transformed) source point. `a` holds
/// untransformed source coordinates, `b` target coordinates.
struct BidirectionalPairs {
    std::vector<Vec3> a;
    std::vector<Vec3> b;
    std::size_t forward_count = 0;

    std::size_t size() const { return a.size(); }
};

namespace detail {

inline void require_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw Error(ErrorCode::InvalidSigma, "kernel bandwidth must be finite and positive");
}

/// Median of residual norms; extended accumulation is not needed here.
inline double median_norm(std::span<const Vec3> residuals) {
    std::vector<double> norms;
    norms.reserve(residuals.size());
    for (const Vec3& r : residuals) norms.push_back(r.norm());
    std::sort(norms.begin(), norms.end());
    const std::size_t n = norms.size();
    if (n == 0) return 0.0;
    return n % 2 == 1 ? norms[n / 2] : 0.5 * (norms[n / 2 - 1] + norms[n / 2]);
}

/// Mean squared residual norm, accumulated in extended precision so the
/// monotonicity guarantees are not drowned by summation noise.
inline double mean_squared_norm(std::span<const Vec3> residuals) {
    long double acc = 0.0L;
    for (const Vec3& r : residuals) acc += static_cast<long double>(r.squaredNorm());
    return residuals.empty() ? 0.0 : static_cast<double>(acc / residuals.size());
}

inline double rms_norm(std::span<const Vec3> residuals) {
    return std::sqrt(mean_squared_norm(residuals));
}

inline double kernel_sum(std::span<const Vec3> residuals, double sigma) {
    const double inv = 1.0 / (2.0 * sigma * sigma);
    long double acc = 0.0L;
    for (const Vec3& r : residuals)
        acc += static_cast<long double>(std::exp(-r.squaredNorm() * inv));
    return static_cast<double>(acc);
}

/// Iteration step used by both ICP drivers. When the matched pairs leave the
/// rotation unobservable (e.g. every source point grabbed the same target
/// point on far-apart clouds), falls back to the translation-only optimum so
/// the run still terminates with a result instead of aborting mid-iteration.
inline RigidTransform fit_or_translate(std::span<const Vec3> source,
                                       std::span<const Vec3> target,
                                       std::span<const double> weights) {
    try {
        return weighted_rigid_fit(source, target, weights);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateConfiguration) throw;
        double wsum = 0.0;
        Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
        for (std::size_t i = 0; i < source.size(); ++i) {
            wsum += weights[i];
            cs += weights[i] * source[i];
            ct += weights[i] * target[i];
        }
        return RigidTransform(Mat3::Identity(), ct / wsum - cs / wsum);
    }
}

}  // namespace detail

/// Residual of every pair under `t`: r_i = R * a_i + t - b_i, forward and
/// backward pairs alike.
inline std::vector<Vec3> pair_residuals(const BidirectionalPairs& pairs, const RigidTransform& t) {
    std::vector<Vec3> residuals;
    residuals.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        residuals.push_back(t.apply(pairs.a[i]) - pairs.b[i]);
    return residuals;
}

/// Gaussian kernel weights w_i = exp(-||r_i||^2 / (2 sigma^2)), clamped away
/// from zero so every weight stays in (0, 1] even for extreme outliers.
inline std::vector<double> correntropy_weights(std::span<const Vec3> residuals, double sigma) {
    detail::require_sigma(sigma);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> weights;
    weights.reserve(residuals.size());
    for (const Vec3& r : residuals)
        weights.push_back(std::max(std::exp(-r.squaredNorm() * inv), 1e-300));
    return weights;
}

/// Mean kernel value over all pairs under `t`; 1 at perfect alignment.
inline double bimcc_objective(const BidirectionalPairs& pairs, const RigidTransform& t,
                              double sigma) {
    detail::require_sigma(sigma);
    if (pairs.size() == 0) throw Error(ErrorCode::EmptyCloud, "no correspondence pairs");
    const std::vector<Vec3> residuals = pair_residuals(pairs, t);
    return detail::kernel_sum(residuals, sigma) / static_cast<double>(pairs.size());
}

/// Bandwidth schedule (see KernelSchedule). `sigma_prev` is accepted for
/// interface completeness; the stated rules do not depend on it.
inline double sigma_schedule(std::span<const Vec3> residuals, int iteration,
                             const KernelSchedule& sched, double /*sigma_prev*/ = 0.0) {
    if (!(sched.sigma_init_scale > 0.0) || !(sched.sigma_floor > 0.0) || !(sched.eta > 0.0))
        throw Error(ErrorCode::InvalidArgument, "kernel schedule fields must be positive");
    if (iteration < 0) throw Error(ErrorCode::InvalidArgument, "iteration must be >= 0");
    if (iteration == 0)
        return std::max(sched.sigma_floor, sched.sigma_init_scale * detail::median_norm(residuals));
    return std::max(sched.sigma_floor, sched.eta * detail::rms_norm(residuals));
}

/// Builds the augmented pair list in the pose given by `current`.
///
/// Forward: each source point x is matched against the target index with the
/// query R*x + t. Backward: each target point y is matched against the source
/// index with the inverse-mapped query R^T (y - t), which selects the nearest
/// transformed source point while the index itself stays fixed over the
/// untransformed cloud.
inline BidirectionalPairs build_bidirectional_pairs(const PointCloud& source,
                                                    const PointCloud& target,
                                                    const RigidTransform& current,
                                                    const NeighborIndex& idx_target,
                                                    const NeighborIndex& idx_source) {
    if (source.empty() || target.empty())
        throw Error(ErrorCode::EmptyCloud, "both clouds must be non-empty");

    BidirectionalPairs pairs;
    pairs.forward_count = source.size();
    pairs.a.reserve(source.size() + target.size());
    pairs.b.reserve(source.size() + target.size());

    for (const Vec3& x : source.points) {
        const NearestResult hit = idx_target.nearest(current.apply(x));
        pairs.a.push_back(x);
        pairs.b.push_back(target.points[hit.index]);
    }
    const RigidTransform inv = current.inverse();
    for (const Vec3& y : target.points) {
        const NearestResult hit = idx_source.nearest(inv.apply(y));
        pairs.a.push_back(source.points[hit.index]);
        pairs.b.push_back(y);
    }
    return pairs;
}

/// Classic point-to-point ICP. Per iteration: transform the source by the
/// current estimate, match forward nearest neighbors, solve the unweighted
/// rigid fit, and record e_k = mean squared correspondence distance under the
/// updated transform. Stops when |e_k - e_{k-1}| < epsilon or at the
/// iteration cap. The baseline e_0 is the error under `init`, so a run may
/// converge after a single iteration.
inline RegistrationResult icp_classic(const PointCloud& source, const PointCloud& target,
                                      const RigidTransform& init = RigidTransform::identity(),
                                      const IcpConfig& cfg = IcpConfig{}) {
    require_valid_cloud(source);
    require_valid_cloud(target);
    if (cfg.max_iterations < 1 || cfg.epsilon < 0.0)
        throw Error(ErrorCode::InvalidArgument, "max_iterations >= 1 and epsilon >= 0 required");

    const NeighborIndex idx_target(target);
    RegistrationResult result;
    result.transform = init;

    std::vector<Vec3> matched(source.size());
    std::vector<Vec3> current(source.size());
    const std::vector<double> uniform(source.size(), 1.0);

    auto match = [&](const RigidTransform& t) {
        for (std::size_t i = 0; i < source.size(); ++i) {
            current[i] = t.apply(source.points[i]);
            matched[i] = target.points[idx_target.nearest(current[i]).index];
        }
    };
    auto mse = [&](const RigidTransform& t) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < source.size(); ++i)
            acc += static_cast<long double>((t.apply(source.points[i]) - matched[i]).squaredNorm());
        return static_cast<double>(acc / source.size());
    };

    match(init);
    double error_prev = mse(init);

    for (int k = 1; k <= cfg.max_iterations; ++k) {
        match(result.transform);
        const RigidTransform step = detail::fit_or_translate(current, matched, uniform);
        result.transform = step.compose(result.transform);
        const double error = mse(result.transform);
        result.trace.push_back(TraceEntry{k, error, std::nullopt, std::nullopt, std::nullopt});
        if (std::abs(error - error_prev) < cfg.epsilon) {
            result.converged = true;
            break;
        }
        error_prev = error;
    }
    result.iterations = static_cast<int>(result.trace.size());
    return result;
}

/// ICP with the bidirectional maximum-correntropy objective.
///
/// Each iteration rebuilds the bidirectional pair list in the current pose,
/// weights every pair by a Gaussian kernel of its residual, solves the
/// weighted rigid fit (an exact majorize-minimize step on the kernel
/// objective for frozen pairs and bandwidth), and composes the incremental
/// update. Convergence is monitored on the objective; the trace additionally
/// records the mean squared error and the kernel sum over all pairs.
inline RegistrationResult bimcc_icp(const PointCloud& source, const PointCloud& target,
                                    const RigidTransform& init = RigidTransform::identity(),
                                    const IcpConfig& cfg = IcpConfig{},
                                    const KernelSchedule& sched = KernelSchedule{}) {
    require_valid_cloud(source);
    require_valid_cloud(target);
    if (cfg.max_iterations < 1 || cfg.epsilon < 0.0 || cfg.inner_iters < 1)
        throw Error(ErrorCode::InvalidArgument,
                    "max_iterations >= 1, inner_iters >= 1 and epsilon >= 0 required");

    const NeighborIndex idx_target(target);
    const NeighborIndex idx_source(source);

    RegistrationResult result;
    result.transform = init;

    // Deterministic sigma_0 from the initial correspondence distances, and
    // the baseline objective the first iteration is compared against.
    BidirectionalPairs pairs =
        build_bidirectional_pairs(source, target, result.transform, idx_target, idx_source);
    std::vector<Vec3> residuals = pair_residuals(pairs, result.transform);
    double sigma = sigma_schedule(residuals, 0, sched);
    double objective_prev = detail::kernel_sum(residuals, sigma) / pairs.size();

    for (int k = 1; k <= cfg.max_iterations; ++k) {
        pairs = build_bidirectional_pairs(source, target, result.transform, idx_target, idx_source);
        for (int inner = 0; inner < cfg.inner_iters; ++inner) {
            residuals = pair_residuals(pairs, result.transform);
            const std::vector<double> weights = correntropy_weights(residuals, sigma);
            std::vector<Vec3> moved(pairs.size());
            for (std::size_t i = 0; i < pairs.size(); ++i)
                moved[i] = result.transform.apply(pairs.a[i]);
            const RigidTransform step = detail::fit_or_translate(moved, pairs.b, weights);
            result.transform = step.compose(result.transform);
        }

        residuals = pair_residuals(pairs, result.transform);
        const double kernel_sum = detail::kernel_sum(residuals, sigma);
        const double objective = kernel_sum / pairs.size();
        const double error = detail::mean_squared_norm(residuals);
        result.trace.push_back(TraceEntry{k, error, objective, kernel_sum, sigma});

        sigma = sigma_schedule(residuals, k, sched, sigma);
        if (std::abs(objective - objective_prev) < cfg.epsilon) {
            result.converged = true;
            break;
        }
        objective_prev = objective;
    }
    result.iterations = static_cast<int>(result.trace.size());
    return result;
}

}  // namespace bimcc

#endif  // BIMCC_ICP_HPP
