// freeq - geometry.hpp
// Point clouds, pinhole cameras, 2D masks, axis-aligned 3D boxes, and the
// projection / IoU primitives used by superpoint merging, edge building,
// and evaluation.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "freeq/errors.hpp"
#include "freeq/linalg.hpp"

namespace freeq {

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> colors;   // optional, RGB in [0,1]; empty or points.size()
    std::vector<Vec3> normals;  // optional, unit; computed on demand

    bool has_colors() const { return !colors.empty(); }
    bool has_normals() const { return !normals.empty(); }
    int size() const { return static_cast<int>(points.size()); }

    // Throws FormatError on non-finite coords, size mismatches, empty cloud,
    // or non-unit normals (1e-6).
    void validate() const;
};

struct CameraFrame {
    int frame_id = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Mat4 pose = Mat4::identity();  // camera-to-world
    int width = 0, height = 0;
    std::vector<float> depth;  // row-major, meters; empty when absent

    bool has_depth() const { return !depth.empty(); }
    float depth_at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
    Vec3 camera_center() const { return pose.translation(); }
    Vec3 world_to_camera(const Vec3& p) const { return pose.inverse_rigid().transform_point(p); }

    void validate() const;  // rotation orthonormality 1e-6, fx/fy > 0, depth size
};

struct Mask2D {
    int frame_id = 0;
    int width = 0, height = 0;
    std::vector<std::uint8_t> bits;  // row-major, nonzero = set
    std::string label;
    double confidence = 1.0;

    bool test(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
    void set(int x, int y) { bits[static_cast<size_t>(y) * width + x] = 1; }
    int count() const;

    static Mask2D empty_like(int frame_id, int width, int height);
    void validate() const;  // dims positive, at least one set pixel

    // Tight pixel bounds of set pixels: {x0, y0, x1, y1} inclusive.
    std::array<int, 4> bounds() const;
};

struct Box3D {
    Vec3 lo, hi;

    Vec3 center() const { return (lo + hi) * 0.5; }
    double volume() const {
        return std::max(0.0, hi.x - lo.x) * std::max(0.0, hi.y - lo.y) *
               std::max(0.0, hi.z - lo.z);
    }
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
    void validate() const;  // lo <= hi component-wise, volume > 0
};

// Rasterizes the depth-visible footprint of the selected points into a mask.
// Each point maps to its nearest pixel, no splatting. Points behind the camera
// are dropped. When the frame carries depth, a point survives only if its
// camera-space z <= stored depth + z_tolerance; pixels with depth <= 0 carry
// no measurement and do not occlude.
// Throws EmptyProjection when no point lands inside the image.
Mask2D project_points(const PointCloud& cloud, std::span<const int> indices,
                      const CameraFrame& frame, double z_tolerance = 0.05);

// |a n b| / |a u b|. Throws DimensionMismatch on differing mask dimensions.
double mask_iou(const Mask2D& a, const Mask2D& b);

// Axis-aligned intersection volume over union volume.
double box_iou(const Box3D& a, const Box3D& b);

// Euclidean distance between box centers.
double center_distance(const Box3D& a, const Box3D& b);

// Tightest axis-aligned box over the selected points, inflated by 1e-6 m per
// axis so degenerate selections keep a positive volume.
// Throws EmptySelection on an empty index set.
Box3D bounding_box(const PointCloud& cloud, std::span<const int> indices);

inline constexpr double kDegenerateBoxEpsilon = 1e-6;

}  // namespace freeq
