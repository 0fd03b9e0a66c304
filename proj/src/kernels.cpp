// freeq - kernels.cpp

#include "freeq/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "freeq/parallel.hpp"

namespace freeq {

namespace {

struct Candidate {
    double d2;
    int idx;
    bool operator<(const Candidate& o) const {
        return d2 != o.d2 ? d2 < o.d2 : idx < o.idx;
    }
};

// Keeps the k best (d2, idx) candidates; total order makes results independent
// of insertion order.
class BestK {
public:
    explicit BestK(int k) : k_(k) { heap_.reserve(k + 1); }

    void offer(double d2, int idx) {
        if (static_cast<int>(heap_.size()) < k_) {
            heap_.push_back({d2, idx});
            std::push_heap(heap_.begin(), heap_.end());
        } else if (Candidate{d2, idx} < heap_.front()) {
            std::pop_heap(heap_.begin(), heap_.end());
            heap_.back() = {d2, idx};
            std::push_heap(heap_.begin(), heap_.end());
        }
    }

    bool full() const { return static_cast<int>(heap_.size()) == k_; }
    double worst_d2() const { return heap_.front().d2; }

    void extract_sorted(std::vector<Candidate>& out) {
        out.assign(heap_.begin(), heap_.end());
        std::sort(out.begin(), out.end());
    }

private:
    int k_;
    std::vector<Candidate> heap_;
};

inline std::int64_t cell_key(int cx, int cy, int cz) {
    // 21 bits per axis, offset to stay positive.
    const std::int64_t bias = 1 << 20;
    return (((std::int64_t)(cx + bias)) << 42) | (((std::int64_t)(cy + bias)) << 21) |
           (std::int64_t)(cz + bias);
}

}  // namespace

namespace ref {

KnnGraph knn_neighbors(const std::vector<Vec3>& points, int k) {
    const int n = static_cast<int>(points.size());
    const int keff = std::min(k, n - 1);
    KnnGraph g;
    g.k = keff;
    g.neighbors.assign(static_cast<size_t>(n) * keff, -1);
    g.distances2.assign(static_cast<size_t>(n) * keff, 0.0);
    std::vector<Candidate> sorted;
    for (int i = 0; i < n; ++i) {
        BestK best(keff);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            best.offer((points[i] - points[j]).norm2(), j);
        }
        best.extract_sorted(sorted);
        for (int j = 0; j < keff; ++j) {
            g.neighbors[static_cast<size_t>(i) * keff + j] = sorted[j].idx;
            g.distances2[static_cast<size_t>(i) * keff + j] = sorted[j].d2;
        }
    }
    return g;
}

}  // namespace ref

namespace kernels {

KnnGraph knn_neighbors(const std::vector<Vec3>& points, int k) {
    const int n = static_cast<int>(points.size());
    const int keff = std::min(k, n - 1);
    KnnGraph g;
    g.k = keff;
    if (keff <= 0) return g;
    g.neighbors.assign(static_cast<size_t>(n) * keff, -1);
    g.distances2.assign(static_cast<size_t>(n) * keff, 0.0);

    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
    }
    const double extent = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
    const double cell = std::max(extent / std::max(1.0, std::cbrt(double(n))), 1e-9);

    std::unordered_map<std::int64_t, std::vector<int>> grid;
    grid.reserve(points.size());
    auto cell_of = [&](const Vec3& p, int& cx, int& cy, int& cz) {
        cx = static_cast<int>(std::floor((p.x - lo.x) / cell));
        cy = static_cast<int>(std::floor((p.y - lo.y) / cell));
        cz = static_cast<int>(std::floor((p.z - lo.z) / cell));
    };
    for (int i = 0; i < n; ++i) {
        int cx, cy, cz;
        cell_of(points[i], cx, cy, cz);
        grid[cell_key(cx, cy, cz)].push_back(i);
    }

    parallel::parallel_for(n, [&](std::int64_t i) {
        int cx, cy, cz;
        cell_of(points[i], cx, cy, cz);
        BestK best(keff);
        std::vector<Candidate> sorted;
        for (int ring = 0;; ++ring) {
            // Only cells on the surface of the Chebyshev ring are new.
            for (int dx = -ring; dx <= ring; ++dx)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dz = -ring; dz <= ring; ++dz) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                            continue;
                        auto it = grid.find(cell_key(cx + dx, cy + dy, cz + dz));
                        if (it == grid.end()) continue;
                        for (int j : it->second) {
                            if (j == static_cast<int>(i)) continue;
                            best.offer((points[i] - points[j]).norm2(), j);
                        }
                    }
            // Points in rings > ring lie at distance >= ring * cell.
            const double bound = static_cast<double>(ring) * cell;
            if (best.full() && best.worst_d2() < bound * bound) break;
            if (bound * bound > (hi - lo).norm2() && best.full()) break;
        }
        best.extract_sorted(sorted);
        for (int j = 0; j < keff; ++j) {
            g.neighbors[static_cast<size_t>(i) * keff + j] = sorted[j].idx;
            g.distances2[static_cast<size_t>(i) * keff + j] = sorted[j].d2;
        }
    });
    return g;
}

}  // namespace kernels

namespace detail {

namespace {

// Cyclic Jacobi on a 3x3 symmetric matrix; returns eigenvalues ascending and
// column eigenvectors. Small and deterministic; the spectral module has its
// own general solver.
void eig3_symmetric(const double m[3][3], double evals[3], double evecs[3][3]) {
    double a[3][3];
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a[i][j] = m[i][j];
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::fabs(a[0][1]) + std::fabs(a[0][2]) + std::fabs(a[1][2]);
        if (off < 1e-15) break;
        for (int p = 0; p < 2; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (std::fabs(a[p][q]) < 1e-18) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int r = 0; r < 3; ++r) {
                    const double arp = a[r][p], arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for (int r = 0; r < 3; ++r) {
                    const double apr = a[p][r], aqr = a[q][r];
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for (int r = 0; r < 3; ++r) {
                    const double vrp = v[r][p], vrq = v[r][q];
                    v[r][p] = c * vrp - s * vrq;
                    v[r][q] = s * vrp + c * vrq;
                }
            }
    }
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int x, int y) { return a[x][x] < a[y][y]; });
    for (int i = 0; i < 3; ++i) {
        evals[i] = a[order[i]][order[i]];
        for (int r = 0; r < 3; ++r) evecs[r][i] = v[r][order[i]];
    }
}

}  // namespace

Vec3 plane_normal(const std::vector<Vec3>& points, const int* neighbors, int k, int self,
                  const Vec3& orient_to) {
    Vec3 mean = points[self];
    for (int j = 0; j < k; ++j) mean = mean + points[neighbors[j]];
    mean = mean / static_cast<double>(k + 1);

    double cov[3][3] = {};
    auto accumulate = [&](const Vec3& p) {
        const Vec3 d = p - mean;
        cov[0][0] += d.x * d.x; cov[0][1] += d.x * d.y; cov[0][2] += d.x * d.z;
        cov[1][1] += d.y * d.y; cov[1][2] += d.y * d.z;
        cov[2][2] += d.z * d.z;
    };
    accumulate(points[self]);
    for (int j = 0; j < k; ++j) accumulate(points[neighbors[j]]);
    cov[1][0] = cov[0][1]; cov[2][0] = cov[0][2]; cov[2][1] = cov[1][2];

    double evals[3], evecs[3][3];
    eig3_symmetric(cov, evals, evecs);
    Vec3 n{evecs[0][0], evecs[1][0], evecs[2][0]};  // smallest eigenvalue
    const double len = n.norm();
    n = len > 0.0 ? n / len : Vec3{0, 0, 1};
    if (n.dot(orient_to - points[self]) < 0.0) n = n * -1.0;
    return n;
}

double ray_box_entry(const Vec3& origin, const Vec3& dir, const Box3D& box) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
    const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
    for (int ax = 0; ax < 3; ++ax) {
        if (d[ax] == 0.0) {
            if (o[ax] < lo[ax] || o[ax] > hi[ax])
                return std::numeric_limits<double>::infinity();
            continue;
        }
        double ta = (lo[ax] - o[ax]) / d[ax];
        double tb = (hi[ax] - o[ax]) / d[ax];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return std::numeric_limits<double>::infinity();
    }
    return t0;
}

void raycast_pixel(const RaycastScene& scene, const CameraFrame& frame, const Mat4& cam_to_world,
                   int px, int py, float& depth_out, int& hit_out) {
    const Vec3 dir_cam{(px - frame.cx) / frame.fx, (py - frame.cy) / frame.fy, 1.0};
    const Vec3 origin = cam_to_world.translation();
    const Vec3 dir = cam_to_world.rotate(dir_cam);
    double best_t = std::numeric_limits<double>::infinity();
    int best_box = -1;
    for (size_t b = 0; b < scene.boxes.size(); ++b) {
        const double t = detail::ray_box_entry(origin, dir, scene.boxes[b]);
        if (t > 1e-9 && t < best_t) {
            best_t = t;
            best_box = static_cast<int>(b);
        }
    }
    if (best_box >= 0) {
        // dir_cam.z == 1, so the ray parameter equals camera-space depth.
        depth_out = static_cast<float>(best_t);
        hit_out = best_box;
    } else {
        depth_out = 0.0f;
        hit_out = -1;
    }
}

}  // namespace detail

namespace kernels {

std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, const KnnGraph& knn,
                                   const Vec3& orient_to) {
    std::vector<Vec3> normals(points.size());
    parallel::parallel_for(static_cast<std::int64_t>(points.size()), [&](std::int64_t i) {
        normals[i] = detail::plane_normal(points, &knn.neighbors[i * knn.k], knn.k,
                                          static_cast<int>(i), orient_to);
    });
    return normals;
}

RaycastResult raycast_frame(const RaycastScene& scene, const CameraFrame& frame) {
    RaycastResult r;
    r.width = frame.width;
    r.height = frame.height;
    r.depth.assign(static_cast<size_t>(frame.width) * frame.height, 0.0f);
    r.hit.assign(static_cast<size_t>(frame.width) * frame.height, -1);
    const Mat4 cam_to_world = frame.pose;
    parallel::parallel_for(static_cast<std::int64_t>(r.depth.size()), [&](std::int64_t i) {
        const int px = static_cast<int>(i) % frame.width;
        const int py = static_cast<int>(i) / frame.width;
        detail::raycast_pixel(scene, frame, cam_to_world, px, py, r.depth[i], r.hit[i]);
    });
    return r;
}

}  // namespace kernels

namespace ref {

std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, const KnnGraph& knn,
                                   const Vec3& orient_to) {
    std::vector<Vec3> normals(points.size());
    for (size_t i = 0; i < points.size(); ++i)
        normals[i] = detail::plane_normal(points, &knn.neighbors[i * knn.k], knn.k,
                                          static_cast<int>(i), orient_to);
    return normals;
}

RaycastResult raycast_frame(const RaycastScene& scene, const CameraFrame& frame) {
    RaycastResult r;
    r.width = frame.width;
    r.height = frame.height;
    r.depth.assign(static_cast<size_t>(frame.width) * frame.height, 0.0f);
    r.hit.assign(static_cast<size_t>(frame.width) * frame.height, -1);
    const Mat4 cam_to_world = frame.pose;
    for (size_t i = 0; i < r.depth.size(); ++i) {
        const int px = static_cast<int>(i) % frame.width;
        const int py = static_cast<int>(i) / frame.width;
        detail::raycast_pixel(scene, frame, cam_to_world, px, py, r.depth[i], r.hit[i]);
    }
    return r;
}

}  // namespace ref

}  // namespace freeq
