#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "mib/common.hpp"

namespace mib {

/// Chebyshev (L-infinity) distance between two points of width d.
inline double chebyshev(const double* a, const double* b, std::size_t d) {
    double m = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double diff = a[j] > b[j] ? a[j] - b[j] : b[j] - a[j];
        if (diff > m) m = diff;
    }
    return m;
}

/// kd-tree over an N x d point set under the Chebyshev metric.
/// Median split on the widest-spread axis, leaf size 16 by default.
/// Queries are by point index so the query point excludes itself.
class KdTree {
public:
    explicit KdTree(const Matrix& points, std::size_t leaf_size = 16)
        : pts_(points), leaf_(std::max<std::size_t>(leaf_size, 1)) {
        const std::size_t n = pts_.rows();
        if (n == 0) throw UsageError("kd-tree: empty point set");
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(2 * n / leaf_ + 2);
        root_ = build(0, n);
    }

    const Matrix& points() const { return pts_; }

    /// Chebyshev distance from point qi to its k-th nearest other point.
    double kth_neighbor_distance(std::size_t qi, std::size_t k) const {
        if (k == 0 || k >= pts_.rows())
            throw UsageError("kd-tree: k must satisfy 1 <= k < N");
        std::priority_queue<double> best;  // max-heap of the k smallest distances
        knn(root_, qi, k, best);
        return best.top();
    }

    /// Number of points j != qi with distance < radius (strict) or
    /// <= radius (non-strict).
    std::size_t count_within(std::size_t qi, double radius, bool strict = true) const {
        std::size_t count = 0;
        range_count(root_, qi, radius, strict, count);
        // remove the query point's own contribution
        if (strict ? (radius > 0.0) : (radius >= 0.0)) --count;
        return count;
    }

private:
    struct Node {
        std::size_t begin = 0, end = 0;   // range in order_
        int left = -1, right = -1;
        std::vector<double> lo, hi;       // bounding box
        bool leaf() const { return left < 0; }
    };

    int build(std::size_t begin, std::size_t end) {
        Node node;
        node.begin = begin;
        node.end = end;
        const std::size_t d = pts_.cols();
        node.lo.assign(d, std::numeric_limits<double>::infinity());
        node.hi.assign(d, -std::numeric_limits<double>::infinity());
        for (std::size_t i = begin; i < end; ++i) {
            const double* p = pts_.row(order_[i]);
            for (std::size_t j = 0; j < d; ++j) {
                node.lo[j] = std::min(node.lo[j], p[j]);
                node.hi[j] = std::max(node.hi[j], p[j]);
            }
        }
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(std::move(node));
        if (end - begin <= leaf_) return id;

        std::size_t axis = 0;
        double spread = -1.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double s = nodes_[id].hi[j] - nodes_[id].lo[j];
            if (s > spread) {
                spread = s;
                axis = j;
            }
        }
        if (spread <= 0.0) return id;  // all points identical; stay a leaf

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + static_cast<long>(begin),
                         order_.begin() + static_cast<long>(mid),
                         order_.begin() + static_cast<long>(end),
                         [&](std::size_t a, std::size_t b) {
                             return pts_(a, axis) < pts_(b, axis);
                         });
        const int l = build(begin, mid);
        const int r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    double box_min_dist(const Node& node, const double* q) const {
        double m = 0.0;
        for (std::size_t j = 0; j < pts_.cols(); ++j) {
            double diff = 0.0;
            if (q[j] < node.lo[j]) diff = node.lo[j] - q[j];
            else if (q[j] > node.hi[j]) diff = q[j] - node.hi[j];
            if (diff > m) m = diff;
        }
        return m;
    }

    double box_max_dist(const Node& node, const double* q) const {
        double m = 0.0;
        for (std::size_t j = 0; j < pts_.cols(); ++j) {
            const double diff = std::max(q[j] - node.lo[j], node.hi[j] - q[j]);
            if (diff > m) m = diff;
        }
        return m;
    }

    void knn(int id, std::size_t qi, std::size_t k, std::priority_queue<double>& best) const {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        const double* q = pts_.row(qi);
        if (best.size() == k && box_min_dist(node, q) >= best.top()) return;
        if (node.leaf()) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t p = order_[i];
                if (p == qi) continue;
                const double dist = chebyshev(pts_.row(p), q, pts_.cols());
                if (best.size() < k) {
                    best.push(dist);
                } else if (dist < best.top()) {
                    best.pop();
                    best.push(dist);
                }
            }
            return;
        }
        const double dl = box_min_dist(nodes_[static_cast<std::size_t>(node.left)], q);
        const double dr = box_min_dist(nodes_[static_cast<std::size_t>(node.right)], q);
        if (dl <= dr) {
            knn(node.left, qi, k, best);
            knn(node.right, qi, k, best);
        } else {
            knn(node.right, qi, k, best);
            knn(node.left, qi, k, best);
        }
    }

    void range_count(int id, std::size_t qi, double radius, bool strict,
                     std::size_t& count) const {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        const double* q = pts_.row(qi);
        const double mind = box_min_dist(node, q);
        if (strict ? (mind >= radius) : (mind > radius)) return;
        const double maxd = box_max_dist(node, q);
        if (strict ? (maxd < radius) : (maxd <= radius)) {
            count += node.end - node.begin;
            return;
        }
        if (node.leaf()) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const double dist = chebyshev(pts_.row(order_[i]), q, pts_.cols());
                if (strict ? (dist < radius) : (dist <= radius)) ++count;
            }
            return;
        }
        range_count(node.left, qi, radius, strict, count);
        range_count(node.right, qi, radius, strict, count);
    }

    Matrix pts_;
    std::size_t leaf_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// O(N^2) reference paths; must agree with the tree bit-for-bit.

inline double brute_kth_neighbor_distance(const Matrix& pts, std::size_t qi,
                                          std::size_t k) {
    const std::size_t n = pts.rows();
    if (k == 0 || k >= n) throw UsageError("brute kth distance: need 1 <= k < N");
    std::vector<double> dists;
    dists.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        if (j == qi) continue;
        dists.push_back(chebyshev(pts.row(j), pts.row(qi), pts.cols()));
    }
    std::nth_element(dists.begin(), dists.begin() + static_cast<long>(k - 1), dists.end());
    return dists[k - 1];
}

inline std::size_t brute_count_within(const Matrix& pts, std::size_t qi, double radius,
                                      bool strict = true) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < pts.rows(); ++j) {
        if (j == qi) continue;
        const double dist = chebyshev(pts.row(j), pts.row(qi), pts.cols());
        if (strict ? (dist < radius) : (dist <= radius)) ++count;
    }
    return count;
}

}  // namespace mib
