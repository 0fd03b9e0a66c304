// freeq - geometry.cpp

#include "freeq/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace freeq {

void PointCloud::validate() const {
    if (points.empty()) throw FormatError("point cloud is empty");
    for (const Vec3& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw FormatError("point cloud contains non-finite coordinates");
    if (has_colors() && colors.size() != points.size())
        throw FormatError("color count does not match point count");
    if (has_normals()) {
        if (normals.size() != points.size())
            throw FormatError("normal count does not match point count");
        for (const Vec3& n : normals)
            if (std::fabs(n.norm() - 1.0) > 1e-6)
                throw FormatError("normals must have unit norm");
    }
}

void CameraFrame::validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw FormatError("camera focal lengths must be positive");
    if (width <= 0 || height <= 0) throw FormatError("camera dimensions must be positive");
    if (pose.rotation_defect() > 1e-6)
        throw FormatError("camera pose rotation block is not orthonormal with det +1");
    if (has_depth() && depth.size() != static_cast<size_t>(width) * height)
        throw FormatError("depth raster size does not match frame dimensions");
}

int Mask2D::count() const {
    int n = 0;
    for (std::uint8_t b : bits) n += (b != 0);
    return n;
}

Mask2D Mask2D::empty_like(int frame_id, int width, int height) {
    Mask2D m;
    m.frame_id = frame_id;
    m.width = width;
    m.height = height;
    m.bits.assign(static_cast<size_t>(width) * height, 0);
    return m;
}

void Mask2D::validate() const {
    if (width <= 0 || height <= 0) throw FormatError("mask dimensions must be positive");
    if (bits.size() != static_cast<size_t>(width) * height)
        throw FormatError("mask bitmap size does not match dimensions");
    if (count() == 0) throw FormatError("mask has no set pixel");
}

std::array<int, 4> Mask2D::bounds() const {
    int x0 = width, y0 = height, x1 = -1, y1 = -1;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (test(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    return {x0, y0, x1, y1};
}

void Box3D::validate() const {
    if (!(lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z))
        throw FormatError("box min corner exceeds max corner");
    if (volume() <= 0.0) throw FormatError("box volume must be positive");
}

Mask2D project_points(const PointCloud& cloud, std::span<const int> indices,
                      const CameraFrame& frame, double z_tolerance) {
    Mask2D mask = Mask2D::empty_like(frame.frame_id, frame.width, frame.height);
    const Mat4 world_to_cam = frame.pose.inverse_rigid();
    bool any = false;
    for (int idx : indices) {
        const Vec3 pc = world_to_cam.transform_point(cloud.points[idx]);
        if (pc.z <= 0.0) continue;
        const double u = frame.fx * pc.x / pc.z + frame.cx;
        const double v = frame.fy * pc.y / pc.z + frame.cy;
        const int px = static_cast<int>(std::lround(u));
        const int py = static_cast<int>(std::lround(v));
        if (px < 0 || px >= frame.width || py < 0 || py >= frame.height) continue;
        if (frame.has_depth()) {
            const float d = frame.depth_at(px, py);
            if (d > 0.0f && pc.z > static_cast<double>(d) + z_tolerance) continue;
        }
        mask.set(px, py);
        any = true;
    }
    if (!any) throw EmptyProjection("no point projects inside the image bounds");
    return mask;
}

double mask_iou(const Mask2D& a, const Mask2D& b) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("mask dimensions differ");
    std::int64_t inter = 0, uni = 0;
    const size_t n = a.bits.size();
    for (size_t i = 0; i < n; ++i) {
        const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
        inter += (pa && pb);
        uni += (pa || pb);
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const Box3D& a, const Box3D& b) {
    const double ix = std::min(a.hi.x, b.hi.x) - std::max(a.lo.x, b.lo.x);
    const double iy = std::min(a.hi.y, b.hi.y) - std::max(a.lo.y, b.lo.y);
    const double iz = std::min(a.hi.z, b.hi.z) - std::max(a.lo.z, b.lo.z);
    if (ix <= 0.0 || iy <= 0.0 || iz <= 0.0) return 0.0;
    const double inter = ix * iy * iz;
    const double uni = a.volume() + b.volume() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double center_distance(const Box3D& a, const Box3D& b) {
    return distance(a.center(), b.center());
}

Box3D bounding_box(const PointCloud& cloud, std::span<const int> indices) {
    if (indices.empty()) throw EmptySelection("bounding_box over empty selection");
    Box3D box;
    box.lo = box.hi = cloud.points[indices[0]];
    for (int idx : indices) {
        const Vec3& p = cloud.points[idx];
        box.lo.x = std::min(box.lo.x, p.x);
        box.lo.y = std::min(box.lo.y, p.y);
        box.lo.z = std::min(box.lo.z, p.z);
        box.hi.x = std::max(box.hi.x, p.x);
        box.hi.y = std::max(box.hi.y, p.y);
        box.hi.z = std::max(box.hi.z, p.z);
    }
    // Inflate by epsilon per axis so degenerate selections (single point, plane)
    // still satisfy the volume > 0 invariant.
    box.lo = box.lo - Vec3{kDegenerateBoxEpsilon, kDegenerateBoxEpsilon, kDegenerateBoxEpsilon};
    box.hi = box.hi + Vec3{kDegenerateBoxEpsilon, kDegenerateBoxEpsilon, kDegenerateBoxEpsilon};
    return box;
}

}  // namespace freeq
