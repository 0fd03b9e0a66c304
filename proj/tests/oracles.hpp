// freeq tests - oracles.hpp
// Independent reference implementations used to verify the library: these
// deliberately take different algorithmic routes than the code under test.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "freeq/geometry.hpp"
#include "freeq/linalg.hpp"

namespace oracles {

// Deterministic RNG for fixtures.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed + 0x12345) {}
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int pick(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

// ---------------------------------------------------------------------------
// Symmetric eigenvalues by Sturm-count bisection: the number of eigenvalues
// of M below x equals the count of negative pivots in the LDL^T factorization
// of M - xI (Sylvester's law of inertia). No rotations anywhere.

inline int eigen_count_below(const freeq::Matrix& m, double x) {
    const int n = m.rows;
    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[i][j] = m.at(i, j) - (i == j ? x : 0.0);
    int negatives = 0;
    for (int k = 0; k < n; ++k) {
        double pivot = a[k][k];
        if (pivot == 0.0) pivot = 1e-300;  // breakdown nudge; x is generic
        if (pivot < 0.0) negatives++;
        for (int i = k + 1; i < n; ++i) {
            const double f = a[i][k] / pivot;
            for (int j = k; j < n; ++j) a[i][j] -= f * a[k][j];
        }
    }
    return negatives;
}

inline std::vector<double> bisection_eigenvalues(const freeq::Matrix& m, double tol = 1e-12) {
    const int n = m.rows;
    double radius = 0.0;  // Gershgorin bound
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += std::fabs(m.at(i, j));
        radius = std::max(radius, row);
    }
    radius += 1.0;
    std::vector<double> values(n);
    for (int k = 1; k <= n; ++k) {
        double lo = -radius, hi = radius;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (eigen_count_below(m, mid) >= k)
                hi = mid;
            else
                lo = mid;
        }
        values[k - 1] = 0.5 * (lo + hi);
    }
    return values;
}

// ---------------------------------------------------------------------------
// union-find components over positive affinities

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

inline int component_count(const freeq::Matrix& affinity, double tol = 0.0) {
    const int n = affinity.rows;
    UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (affinity.at(i, j) > tol) uf.unite(i, j);
    std::set<int> roots;
    for (int i = 0; i < n; ++i) roots.insert(uf.find(i));
    return static_cast<int>(roots.size());
}

// ---------------------------------------------------------------------------
// Kruskal MST (the implementation under test uses Prim)

inline std::vector<std::pair<int, int>> kruskal_mst(const freeq::Matrix& weights) {
    const int n = weights.rows;
    struct E {
        double w;
        int a, b;
    };
    std::vector<E> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.push_back({weights.at(i, j), i, j});
    std::sort(edges.begin(), edges.end(), [](const E& x, const E& y) {
        if (x.w != y.w) return x.w < y.w;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });
    UnionFind uf(n);
    std::vector<std::pair<int, int>> mst;
    for (const E& e : edges) {
        if (uf.find(e.a) == uf.find(e.b)) continue;
        uf.unite(e.a, e.b);
        mst.emplace_back(e.a, e.b);
        if (static_cast<int>(mst.size()) == n - 1) break;
    }
    std::sort(mst.begin(), mst.end());
    return mst;
}

// ---------------------------------------------------------------------------
// Adjusted Rand Index

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const int n = static_cast<int>(a.size());
    std::map<std::pair<int, int>, std::int64_t> cont;
    std::map<int, std::int64_t> ra, rb;
    for (int i = 0; i < n; ++i) {
        cont[{a[i], b[i]}]++;
        ra[a[i]]++;
        rb[b[i]]++;
    }
    auto comb2 = [](std::int64_t x) { return x * (x - 1) / 2.0; };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, c] : cont) sum_ij += comb2(c);
    for (const auto& [key, c] : ra) sum_a += comb2(c);
    for (const auto& [key, c] : rb) sum_b += comb2(c);
    const double total = comb2(n);
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_ij - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// voxel-counting box IoU: counts voxel centers of a shared grid inside each
// box. Per-axis counts are enumerated cell by cell and combined through
// |A u B| = |A| + |B| - |A n B| (all three factor across axes for
// axis-aligned boxes), which keeps 500-pair sweeps cheap. voxel_box_iou_brute
// is the literal triple loop; the two must agree exactly.

inline double voxel_box_iou(const freeq::Box3D& a, const freeq::Box3D& b, double res) {
    std::int64_t count_a = 1, count_b = 1, count_ab = 1;
    for (int axis = 0; axis < 3; ++axis) {
        const double alo = axis == 0 ? a.lo.x : axis == 1 ? a.lo.y : a.lo.z;
        const double ahi = axis == 0 ? a.hi.x : axis == 1 ? a.hi.y : a.hi.z;
        const double blo = axis == 0 ? b.lo.x : axis == 1 ? b.lo.y : b.lo.z;
        const double bhi = axis == 0 ? b.hi.x : axis == 1 ? b.hi.y : b.hi.z;
        const double lo = std::min(alo, blo);
        const double hi = std::max(ahi, bhi);
        const int cells = static_cast<int>(std::ceil((hi - lo) / res));
        std::int64_t na = 0, nb = 0, nab = 0;
        for (int i = 0; i < cells; ++i) {
            const double c = lo + (i + 0.5) * res;
            const bool in_a = c >= alo && c <= ahi;
            const bool in_b = c >= blo && c <= bhi;
            na += in_a;
            nb += in_b;
            nab += (in_a && in_b);
        }
        count_a *= na;
        count_b *= nb;
        count_ab *= nab;
    }
    const std::int64_t uni = count_a + count_b - count_ab;
    return uni == 0 ? 0.0 : static_cast<double>(count_ab) / static_cast<double>(uni);
}

inline double voxel_box_iou_brute(const freeq::Box3D& a, const freeq::Box3D& b, double res) {
    const freeq::Vec3 lo{std::min(a.lo.x, b.lo.x), std::min(a.lo.y, b.lo.y),
                         std::min(a.lo.z, b.lo.z)};
    const freeq::Vec3 hi{std::max(a.hi.x, b.hi.x), std::max(a.hi.y, b.hi.y),
                         std::max(a.hi.z, b.hi.z)};
    const int nx = static_cast<int>(std::ceil((hi.x - lo.x) / res));
    const int ny = static_cast<int>(std::ceil((hi.y - lo.y) / res));
    const int nz = static_cast<int>(std::ceil((hi.z - lo.z) / res));
    std::int64_t inter = 0, uni = 0;
    for (int ix = 0; ix < nx; ++ix) {
        const double x = lo.x + (ix + 0.5) * res;
        for (int iy = 0; iy < ny; ++iy) {
            const double y = lo.y + (iy + 0.5) * res;
            for (int iz = 0; iz < nz; ++iz) {
                const double z = lo.z + (iz + 0.5) * res;
                const bool in_a = a.contains({x, y, z});
                const bool in_b = b.contains({x, y, z});
                inter += (in_a && in_b);
                uni += (in_a || in_b);
            }
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// per-point pinhole projection (no shared code with project_points)

inline bool pinhole_pixel(const freeq::Vec3& point, const freeq::CameraFrame& frame, int& px,
                          int& py) {
    // Invert the camera-to-world pose by explicit transpose-and-shift.
    const freeq::Mat4& m = frame.pose;
    const double dx = point.x - m.at(0, 3);
    const double dy = point.y - m.at(1, 3);
    const double dz = point.z - m.at(2, 3);
    const double cx = m.at(0, 0) * dx + m.at(1, 0) * dy + m.at(2, 0) * dz;
    const double cy = m.at(0, 1) * dx + m.at(1, 1) * dy + m.at(2, 1) * dz;
    const double cz = m.at(0, 2) * dx + m.at(1, 2) * dy + m.at(2, 2) * dz;
    if (cz <= 0.0) return false;
    px = static_cast<int>(std::lround(frame.fx * cx / cz + frame.cx));
    py = static_cast<int>(std::lround(frame.fy * cy / cz + frame.cy));
    return px >= 0 && px < frame.width && py >= 0 && py < frame.height;
}

}  // namespace oracles
