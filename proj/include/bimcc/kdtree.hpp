#ifndef BIMCC_KDTREE_HPP
#define BIMCC_KDTREE_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "bimcc/error.hpp"
#include "bimcc/point_cloud.hpp"

namespace bimcc {

/// Result of a nearest-neighbor query.
struct NearestResult {
    std::size_t index;  ///< index into the indexed cloud
    double distance;    ///< exact Euclidean distance, mm
};

/// Exact nearest-neighbor index (kd-tree) over an immutable copy of a point
/// cloud. Queries return the true minimum-distance point; exact distance ties
/// are broken by the lowest point index, independent of traversal order.
/// Safe to query concurrently.
class NeighborIndex {
public:
    explicit NeighborIndex(const PointCloud& cloud) {
        require_valid_cloud(cloud);
        points_ = cloud.points;
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        nodes_.reserve(2 * points_.size() / kLeafSize + 4);
        root_ = build(0, points_.size());
    }

    std::size_t size() const { return points_.size(); }

    NearestResult nearest(const Vec3& query) const {
        if (!is_finite(query))
            throw Error(ErrorCode::InvalidQuery, "query point has a non-finite coordinate");
        Best best{std::numeric_limits<double>::infinity(), points_.size()};
        search(root_, query, best);
        return {best.index, std::sqrt(best.dist_sq)};
    }

private:
    static constexpr std::size_t kLeafSize = 16;

    struct Node {
        int axis = -1;       // -1 marks a leaf
        double split = 0.0;  // splitting coordinate
        int left = -1, right = -1;
        std::size_t begin = 0, end = 0;  // order_ range for leaves
    };

    struct Best {
        double dist_sq;
        std::size_t index;
    };

    int build(std::size_t begin, std::size_t end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.begin = begin;
            node.end = end;
            nodes_.push_back(node);
            return static_cast<int>(nodes_.size() - 1);
        }
        // Split on the axis of largest extent, at the median.
        Vec3 lo = points_[order_[begin]], hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) {
                             return points_[a][axis] < points_[b][axis];
                         });
        node.axis = axis;
        node.split = points_[order_[mid]][axis];
        nodes_.push_back(node);
        const int self = static_cast<int>(nodes_.size() - 1);
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void search(int node_id, const Vec3& q, Best& best) const {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t idx = order_[i];
                const double d2 = (points_[idx] - q).squaredNorm();
                if (d2 < best.dist_sq || (d2 == best.dist_sq && idx < best.index)) {
                    best.dist_sq = d2;
                    best.index = idx;
                }
            }
            return;
        }
        const double diff = q[node.axis] - node.split;
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        search(near, q, best);
        // Visit the far side unless it is strictly farther than the current
        // best; equality must still be visited so index ties stay exact.
        if (diff * diff <= best.dist_sq) search(far, q, best);
    }

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

/// Builds an exact NN index; throws EmptyCloud / InvalidArgument on invalid input.
inline NeighborIndex build_index(const PointCloud& cloud) { return NeighborIndex(cloud); }

inline NearestResult nearest(const NeighborIndex& index, const Vec3& query) {
    return index.nearest(query);
}

}  // namespace bimcc

#endif  // BIMCC_KDTREE_HPP
