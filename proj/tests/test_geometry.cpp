// freeq tests - geometry: projection, IoU primitives, bounding boxes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "freeq/geometry.hpp"
#include "oracles.hpp"

using namespace freeq;

namespace {

CameraFrame simple_frame(int size = 64, double focal = 32.0) {
    CameraFrame frame;
    frame.frame_id = 0;
    frame.fx = frame.fy = focal;
    frame.cx = frame.cy = size / 2.0;
    frame.width = frame.height = size;
    frame.pose = Mat4::identity();
    return frame;
}

std::vector<int> all_indices(const PointCloud& cloud) {
    std::vector<int> idx(cloud.points.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace

TEST_CASE("project_points: optical-axis point lands on the principal pixel") {
    PointCloud cloud;
    cloud.points = {{0, 0, 1}};
    const CameraFrame frame = simple_frame(64, 32.0);
    const Mask2D mask = project_points(cloud, all_indices(cloud), frame);
    CHECK(mask.test(32, 32));
    CHECK(mask.count() == 1);
}

TEST_CASE("project_points: all points behind the camera raises EmptyProjection") {
    PointCloud cloud;
    cloud.points = {{0, 0, -1}, {0.5, 0.2, -3}};
    CHECK_THROWS_AS(project_points(cloud, all_indices(cloud), simple_frame()), EmptyProjection);
}

TEST_CASE("project_points: cube corners match the per-point pinhole oracle") {
    PointCloud cloud;
    for (int corner = 0; corner < 8; ++corner)
        cloud.points.push_back({(corner & 1) ? 0.4 : -0.4, (corner & 2) ? 0.4 : -0.4,
                                2.0 + ((corner & 4) ? 0.4 : -0.4)});
    const CameraFrame frame = simple_frame(64, 32.0);
    const Mask2D mask = project_points(cloud, all_indices(cloud), frame);

    Mask2D expected = Mask2D::empty_like(0, frame.width, frame.height);
    for (const Vec3& p : cloud.points) {
        int px, py;
        REQUIRE(oracles::pinhole_pixel(p, frame, px, py));
        expected.set(px, py);
    }
    CHECK(mask.bits == expected.bits);
}

TEST_CASE("project_points: depth test drops occluded points") {
    CameraFrame frame = simple_frame(64, 32.0);
    frame.depth.assign(64 * 64, 1.0f);  // a wall at 1 m everywhere
    PointCloud cloud;
    cloud.points = {{0, 0, 0.8}, {0.3, 0.1, 2.0}};
    const Mask2D mask = project_points(cloud, all_indices(cloud), frame, 0.05);
    CHECK(mask.count() == 1);  // only the point in front of the wall survives
    int px, py;
    oracles::pinhole_pixel(cloud.points[0], frame, px, py);
    CHECK(mask.test(px, py));
}

TEST_CASE("project_points: equivariant under an exact rigid transform") {
    // 90-degree rotation about z plus a translation has exact float entries,
    // so the projected mask must match bit for bit.
    Mat4 transform = Mat4::identity();
    transform.at(0, 0) = 0;
    transform.at(0, 1) = -1;
    transform.at(1, 0) = 1;
    transform.at(1, 1) = 0;
    transform.at(0, 3) = 3.0;
    transform.at(1, 3) = -2.0;
    transform.at(2, 3) = 0.5;

    oracles::Rng rng(11);
    PointCloud cloud, moved;
    for (int i = 0; i < 200; ++i) {
        const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.5, 4.0)};
        cloud.points.push_back(p);
        moved.points.push_back(transform.transform_point(p));
    }
    CameraFrame frame = simple_frame(96, 48.0);
    CameraFrame moved_frame = frame;
    moved_frame.pose = transform * frame.pose;

    const Mask2D a = project_points(cloud, all_indices(cloud), frame);
    const Mask2D b = project_points(moved, all_indices(moved), moved_frame);
    CHECK(a.bits == b.bits);
}

TEST_CASE("mask_iou: identity, disjoint, and the 2/6 fixture") {
    Mask2D a = Mask2D::empty_like(0, 8, 8);
    a.set(1, 1);
    a.set(2, 1);
    a.set(1, 2);
    a.set(2, 2);
    CHECK(mask_iou(a, a) == doctest::Approx(1.0));

    Mask2D disjoint = Mask2D::empty_like(0, 8, 8);
    disjoint.set(6, 6);
    CHECK(mask_iou(a, disjoint) == doctest::Approx(0.0));

    Mask2D b = Mask2D::empty_like(0, 8, 8);
    b.set(2, 1);
    b.set(1, 2);
    b.set(5, 5);
    b.set(6, 5);
    CHECK(mask_iou(a, b) == doctest::Approx(2.0 / 6.0));

    Mask2D wrong_size = Mask2D::empty_like(0, 4, 4);
    wrong_size.set(0, 0);
    CHECK_THROWS_AS(mask_iou(a, wrong_size), DimensionMismatch);
}

TEST_CASE("box_iou: identity, disjoint, and the exact 1/15 fixture") {
    const Box3D a{{0, 0, 0}, {2, 2, 2}};
    const Box3D b{{1, 1, 1}, {3, 3, 3}};
    CHECK(box_iou(a, a) == doctest::Approx(1.0));
    CHECK(box_iou(a, {{5, 5, 5}, {6, 6, 6}}) == doctest::Approx(0.0));
    CHECK(std::fabs(box_iou(a, b) - 1.0 / 15.0) < 1e-9);
}

TEST_CASE("voxel oracle: per-axis counting equals the literal triple loop") {
    oracles::Rng rng(99);
    for (int i = 0; i < 10; ++i) {
        auto random_box = [&]() {
            const Vec3 lo{rng.uniform(0, 1.5), rng.uniform(0, 1.5), rng.uniform(0, 1.5)};
            const Vec3 ext{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
            return Box3D{lo, lo + ext};
        };
        const Box3D a = random_box(), b = random_box();
        CHECK(oracles::voxel_box_iou(a, b, 0.02) ==
              doctest::Approx(oracles::voxel_box_iou_brute(a, b, 0.02)).epsilon(1e-12));
    }
}

TEST_CASE("box_iou: agrees with the voxel-counting oracle on random pairs") {
    oracles::Rng rng(21);
    double worst = 0.0;
    for (int i = 0; i < 60; ++i) {
        auto random_box = [&]() {
            const Vec3 lo{rng.uniform(0, 2.4), rng.uniform(0, 2.4), rng.uniform(0, 2.4)};
            const Vec3 ext{rng.uniform(0.8, 1.6), rng.uniform(0.8, 1.6), rng.uniform(0.8, 1.6)};
            return Box3D{lo, lo + ext};
        };
        const Box3D a = random_box(), b = random_box();
        worst = std::max(worst, std::fabs(box_iou(a, b) - oracles::voxel_box_iou(a, b, 0.01)));
    }
    CHECK(worst < 0.02);
}

TEST_CASE("box_iou and mask_iou: symmetric and bounded") {
    oracles::Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        const Vec3 lo1{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3)};
        const Vec3 lo2{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3)};
        const Box3D a{lo1, lo1 + Vec3{rng.uniform(0.1, 1), rng.uniform(0.1, 1),
                                      rng.uniform(0.1, 1)}};
        const Box3D b{lo2, lo2 + Vec3{rng.uniform(0.1, 1), rng.uniform(0.1, 1),
                                      rng.uniform(0.1, 1)}};
        const double ab = box_iou(a, b), ba = box_iou(b, a);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("center_distance: fixtures and the triangle inequality") {
    const Box3D a{{-1, -1, -1}, {1, 1, 1}};
    CHECK(center_distance(a, a) == doctest::Approx(0.0));

    const Box3D b{{2, 3, -1}, {4, 5, 1}};  // center (3, 4, 0)
    CHECK(center_distance(a, b) == doctest::Approx(5.0));

    oracles::Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        auto random_box = [&]() {
            const Vec3 lo{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            return Box3D{lo, lo + Vec3{rng.uniform(0.1, 1), rng.uniform(0.1, 1),
                                       rng.uniform(0.1, 1)}};
        };
        const Box3D x = random_box(), y = random_box(), z = random_box();
        CHECK(center_distance(x, z) <= center_distance(x, y) + center_distance(y, z) + 1e-12);
        // direct component-wise formula
        const Vec3 cx = x.center(), cy = y.center();
        const double manual = std::sqrt((cx.x - cy.x) * (cx.x - cy.x) +
                                        (cx.y - cy.y) * (cx.y - cy.y) +
                                        (cx.z - cy.z) * (cx.z - cy.z));
        CHECK(center_distance(x, y) == doctest::Approx(manual).epsilon(1e-12));
    }
}

TEST_CASE("bounding_box: single point, unit cube, and the fold oracle") {
    PointCloud cloud;
    cloud.points = {{1, 2, 3}};
    const Box3D single = bounding_box(cloud, all_indices(cloud));
    CHECK(single.lo.x == doctest::Approx(1 - 1e-6));
    CHECK(single.hi.x == doctest::Approx(1 + 1e-6));
    CHECK(single.volume() > 0.0);

    PointCloud cube;
    for (int corner = 0; corner < 8; ++corner)
        cube.points.push_back({(corner & 1) ? 1.0 : 0.0, (corner & 2) ? 1.0 : 0.0,
                               (corner & 4) ? 1.0 : 0.0});
    const Box3D unit = bounding_box(cube, all_indices(cube));
    CHECK(unit.lo.x == doctest::Approx(-1e-6));
    CHECK(unit.hi.y == doctest::Approx(1 + 1e-6));

    oracles::Rng rng(17);
    PointCloud random;
    for (int i = 0; i < 100; ++i)
        random.points.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)});
    const Box3D box = bounding_box(random, all_indices(random));
    Vec3 lo = random.points[0], hi = random.points[0];
    for (const Vec3& p : random.points) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    CHECK(box.lo.x == doctest::Approx(lo.x - 1e-6).epsilon(1e-12));
    CHECK(box.hi.z == doctest::Approx(hi.z + 1e-6).epsilon(1e-12));

    CHECK_THROWS_AS(bounding_box(cloud, std::span<const int>{}), EmptySelection);
}

TEST_CASE("type invariants are enforced") {
    PointCloud cloud;
    CHECK_THROWS_AS(cloud.validate(), FormatError);  // empty
    cloud.points = {{0, 0, std::numeric_limits<double>::infinity()}};
    CHECK_THROWS_AS(cloud.validate(), FormatError);  // non-finite

    CameraFrame frame = simple_frame();
    frame.fx = -1;
    CHECK_THROWS_AS(frame.validate(), FormatError);

    frame = simple_frame();
    frame.pose.at(0, 0) = 2.0;  // not a rotation
    CHECK_THROWS_AS(frame.validate(), FormatError);

    Box3D bad{{1, 0, 0}, {0, 1, 1}};
    CHECK_THROWS_AS(bad.validate(), FormatError);

    Mask2D empty = Mask2D::empty_like(0, 4, 4);
    CHECK_THROWS_AS(empty.validate(), FormatError);  // no set pixel
}
