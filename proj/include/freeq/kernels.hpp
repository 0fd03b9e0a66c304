// freeq - kernels.hpp
// Data-parallel kernels over point clouds and frames. Each kernel has a
// straightforward serial reference under freeq::ref used by the tests and the
// benchmark; the OpenMP path must agree with it bit-for-bit.

#pragma once

#include <cstdint>
#include <vector>

#include "freeq/geometry.hpp"

namespace freeq {

// k nearest neighbors per point, each list sorted by (distance^2, index);
// the query point itself is excluded.
struct KnnGraph {
    int k = 0;
    std::vector<int> neighbors;          // size points * k
    std::vector<double> distances2;      // matching squared distances

    int neighbor(int point, int j) const { return neighbors[static_cast<size_t>(point) * k + j]; }
    double dist2(int point, int j) const { return distances2[static_cast<size_t>(point) * k + j]; }
};

// Axis-aligned cuboid hit record from raycasting.
struct RaycastScene {
    std::vector<Box3D> boxes;
};

// Per-pixel nearest cuboid: depth in camera z (0 = no hit) and hit box index
// (-1 = none).
struct RaycastResult {
    int width = 0, height = 0;
    std::vector<float> depth;
    std::vector<int> hit;
};

namespace kernels {

// Grid-accelerated exact k-NN; parallel over query points.
KnnGraph knn_neighbors(const std::vector<Vec3>& points, int k);

// Plane-fit normals from each point's k nearest neighbors, sign oriented
// toward orient_to (the first camera center in the pipeline).
std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, const KnnGraph& knn,
                                   const Vec3& orient_to);

// Nearest-hit raycast of axis-aligned cuboids through every pixel center.
RaycastResult raycast_frame(const RaycastScene& scene, const CameraFrame& frame);

}  // namespace kernels

namespace ref {

// Brute-force O(n^2) k-NN, serial.
KnnGraph knn_neighbors(const std::vector<Vec3>& points, int k);

std::vector<Vec3> estimate_normals(const std::vector<Vec3>& points, const KnnGraph& knn,
                                   const Vec3& orient_to);

RaycastResult raycast_frame(const RaycastScene& scene, const CameraFrame& frame);

}  // namespace ref

// Shared single-point primitives, used by both paths.
namespace detail {

// Plane normal via smallest eigenvector of the neighborhood covariance.
Vec3 plane_normal(const std::vector<Vec3>& points, const int* neighbors, int k, int self,
                  const Vec3& orient_to);

// Slab-method ray/box intersection; returns entry t or +inf on miss.
double ray_box_entry(const Vec3& origin, const Vec3& dir, const Box3D& box);

// Camera-z depth and box id of the nearest hit along pixel (px, py)'s center ray.
void raycast_pixel(const RaycastScene& scene, const CameraFrame& frame, const Mat4& cam_to_world,
                   int px, int py, float& depth_out, int& hit_out);

}  // namespace detail

}  // namespace freeq
