// freeq tests - superpoints: segmentation partitions, visibility gates, the
// similarity matrix of the merge, and label voting.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <set>

#include "freeq/superpoints.hpp"
#include "oracles.hpp"

using namespace freeq;

namespace {

// Flat square patch at a given z, constant color, n x n grid.
void add_patch(PointCloud& cloud, double cx, double cy, double z, double extent, int n,
               Vec3 color) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            cloud.points.push_back({cx - extent / 2 + extent * i / (n - 1),
                                    cy - extent / 2 + extent * j / (n - 1), z});
            cloud.colors.push_back(color);
        }
}

void check_partition(const std::vector<Superpoint>& sps, int total_points) {
    std::set<int> seen;
    for (const Superpoint& sp : sps) {
        CHECK_FALSE(sp.point_indices.empty());
        for (int p : sp.point_indices) CHECK(seen.insert(p).second);  // disjoint
    }
    CHECK(static_cast<int>(seen.size()) == total_points);  // covering
}

Superpoint make_sp(int id, std::vector<int> points, const std::string& label,
                   std::uint64_t seed = 0) {
    Superpoint sp;
    sp.id = id;
    sp.point_indices = std::move(points);
    sp.label = label;
    sp.label_feature = mock_embed(label, 64, seed);
    return sp;
}

}  // namespace

TEST_CASE("segment_superpoints: distant clusters never merge") {
    PointCloud cloud;
    add_patch(cloud, 0, 0, 0, 0.5, 6, {1, 0, 0});
    add_patch(cloud, 10, 0, 0, 0.5, 6, {1, 0, 0});  // same look, 10 m away
    MergeConfig config;
    config.graphcut_k = 5;
    const auto sps = segment_superpoints(cloud, config, {0, 0, 5});
    CHECK(sps.size() == 2);
    check_partition(sps, cloud.size());
}

TEST_CASE("segment_superpoints: a uniform planar patch stays one superpoint") {
    PointCloud cloud;
    add_patch(cloud, 0, 0, 0, 1.0, 8, {0.2, 0.4, 0.8});
    MergeConfig config;
    const auto sps = segment_superpoints(cloud, config, {0, 0, 5});
    CHECK(sps.size() == 1);
    check_partition(sps, cloud.size());
}

TEST_CASE("segment_superpoints: three separated primitives match components") {
    PointCloud cloud;
    add_patch(cloud, 0, 0, 0, 0.6, 6, {1, 0, 0});
    add_patch(cloud, 5, 0, 0, 0.6, 6, {0, 1, 0});
    add_patch(cloud, 0, 5, 1, 0.6, 6, {0, 0, 1});
    MergeConfig config;
    config.graphcut_k = 5;
    const auto sps = segment_superpoints(cloud, config, {0, 0, 5});
    CHECK(sps.size() == 3);
    check_partition(sps, cloud.size());

    // Connected-components oracle on the distance-cut k-NN graph: each patch
    // is one component.
    for (const Superpoint& sp : sps) {
        const int base = sp.point_indices.front();
        for (int p : sp.point_indices) CHECK(p / 36 == base / 36);
    }
}

TEST_CASE("segment_superpoints: too few points throws") {
    PointCloud cloud;
    cloud.points = {{0, 0, 0}, {1, 0, 0}};
    MergeConfig config;  // graphcut_k = 10 needs 11 points
    CHECK_THROWS_AS(segment_superpoints(cloud, config, {}), TooFewPoints);
}

TEST_CASE("visibility_gate: invisible, identical, and boundary cases") {
    PointCloud cloud;
    add_patch(cloud, 0, 0, 2.0, 0.8, 7, {1, 1, 1});  // patch 2 m in front (z up? camera looks +z)
    CameraFrame frame;
    frame.frame_id = 0;
    frame.width = frame.height = 64;
    frame.fx = frame.fy = 40;
    frame.cx = frame.cy = 32;
    frame.pose = Mat4::identity();

    Superpoint sp;
    sp.id = 0;
    sp.point_indices.resize(cloud.size());
    std::iota(sp.point_indices.begin(), sp.point_indices.end(), 0);

    // The projected footprint itself as the instance mask: IoU = 1 > 0.9.
    const Mask2D footprint = project_points(cloud, sp.point_indices, frame);
    CHECK(visibility_gate(sp, cloud, frame, {footprint}, 0.9) == 1);

    // Invisible superpoint: camera looking the other way.
    CameraFrame away = frame;
    away.pose.at(2, 2) = -1;  // flip z
    away.pose.at(0, 0) = -1;  // keep det +1
    CHECK(visibility_gate(sp, cloud, away, {footprint}, 0.9) == 0);

    // IoU exactly at the threshold gates to 0 (strict inequality).
    CHECK(visibility_gate(sp, cloud, frame, {footprint}, 1.0) == 0);
}

TEST_CASE("build_similarity: co-visibility count times label cosine") {
    PointCloud cloud;
    cloud.points = {{0, 0, 1}};  // geometry unused; gates are synthesized
    std::vector<Superpoint> sps = {make_sp(0, {0}, "desk"), make_sp(1, {0}, "desk"),
                                   make_sp(2, {0}, "lamp")};
    // Gate table: 4 frames; sp0 and sp1 co-visible in 3, sp2 in none.
    const std::vector<std::uint8_t> gates = {
        1, 1, 1, 0,   // sp0
        1, 1, 1, 1,   // sp1
        0, 0, 0, 0};  // sp2
    const SimilarityMatrix A = similarity_from_gates(sps, gates, 4);
    A.validate();

    CHECK(A.entries.at(0, 1) == doctest::Approx(3.0));  // identical labels: cosine 1
    CHECK(A.entries.at(1, 0) == doctest::Approx(3.0));
    CHECK(A.entries.at(0, 2) == doctest::Approx(0.0));  // never co-visible
    CHECK(A.entries.at(0, 0) == doctest::Approx(3.0));  // diagonal counts frames
    CHECK(A.entries.at(1, 1) == doctest::Approx(4.0));

    // Orthogonal label features zero the pair even when co-visible.
    std::vector<Superpoint> ortho = {make_sp(0, {0}, "a"), make_sp(1, {0}, "b")};
    Feature ea, eb;
    ea.values.assign(64, 0.0);
    eb.values.assign(64, 0.0);
    ea.values[0] = 1.0;
    eb.values[1] = 1.0;
    ortho[0].label_feature = ea;
    ortho[1].label_feature = eb;
    const SimilarityMatrix O = similarity_from_gates(ortho, {1, 1, 1, 1}, 2);
    CHECK(O.entries.at(0, 1) == 0.0);
    CHECK(O.entries.at(0, 0) == doctest::Approx(2.0));

    // Negative label cosine clamps to zero.
    std::vector<Superpoint> anti = {make_sp(0, {0}, "a"), make_sp(1, {0}, "b")};
    Feature flipped = *anti[0].label_feature;
    for (double& v : flipped.values) v = -v;
    anti[1].label_feature = flipped;
    const SimilarityMatrix B =
        similarity_from_gates(anti, {1, 1, 1, 1}, 2);
    CHECK(B.entries.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("build_similarity: missing label feature throws") {
    std::vector<Superpoint> sps = {make_sp(0, {0}, "desk")};
    sps[0].label_feature.reset();
    CHECK_THROWS_AS(similarity_from_gates(sps, {1}, 1), MissingLabelFeature);
}

TEST_CASE("build_similarity: permuting superpoints permutes the matrix") {
    std::vector<Superpoint> sps = {make_sp(0, {0}, "desk"), make_sp(1, {0}, "chair"),
                                   make_sp(2, {0}, "desk"), make_sp(3, {0}, "lamp")};
    const std::vector<std::uint8_t> gates = {1, 1, 0, 1, 1, 0, 1, 0, 1, 0, 1, 1};
    const SimilarityMatrix A = similarity_from_gates(sps, gates, 3);

    const std::vector<int> perm = {2, 0, 3, 1};
    std::vector<Superpoint> permuted;
    std::vector<std::uint8_t> gates_perm;
    for (int p : perm) {
        permuted.push_back(sps[p]);
        for (int m = 0; m < 3; ++m) gates_perm.push_back(gates[p * 3 + m]);
    }
    const SimilarityMatrix B = similarity_from_gates(permuted, gates_perm, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(B.entries.at(i, j) == A.entries.at(perm[i], perm[j]));
}

TEST_CASE("gate table: parallel path equals the serial reference") {
    PointCloud cloud;
    add_patch(cloud, 0, 0, 2.0, 0.8, 8, {1, 0, 0});
    add_patch(cloud, 1.2, 0.3, 2.5, 0.6, 8, {0, 1, 0});

    CameraFrame frame;
    frame.frame_id = 0;
    frame.width = frame.height = 64;
    frame.fx = frame.fy = 40;
    frame.cx = frame.cy = 32;
    frame.pose = Mat4::identity();
    CameraFrame frame2 = frame;
    frame2.frame_id = 1;
    frame2.pose.at(0, 3) = 0.4;

    MergeConfig config;
    config.graphcut_k = 5;
    config.tau_iou = 0.5;
    auto sps = segment_superpoints(cloud, config, {0, 0, -5});
    std::vector<Mask2D> masks0 = {project_points(cloud, sps[0].point_indices, frame)};
    masks0[0].label = "red";
    std::vector<Mask2D> masks1 = {project_points(cloud, sps[0].point_indices, frame2)};
    masks1[0].label = "red";

    const auto par = build_gate_table(sps, cloud, {frame, frame2}, {masks0, masks1}, config);
    const auto ser = superpoints_ref::build_gate_table(sps, cloud, {frame, frame2},
                                                       {masks0, masks1}, config);
    CHECK(par == ser);
}

TEST_CASE("build_similarity: rigid scene transform leaves A bitwise unchanged") {
    // Exact rigid motion (90-degree rotation about z + binary-exact shift)
    // applied to both the cloud and the camera poses.
    Mat4 transform = Mat4::identity();
    transform.at(0, 0) = 0;
    transform.at(0, 1) = -1;
    transform.at(1, 0) = 1;
    transform.at(1, 1) = 0;
    transform.at(0, 3) = 2.0;
    transform.at(1, 3) = -1.5;
    transform.at(2, 3) = 0.25;

    PointCloud cloud;
    add_patch(cloud, 0, 0, 2.0, 0.8, 7, {1, 0, 0});
    add_patch(cloud, 0.9, 0.2, 2.4, 0.5, 7, {0, 1, 0});
    CameraFrame frame;
    frame.frame_id = 0;
    frame.width = frame.height = 64;
    frame.fx = frame.fy = 40;
    frame.cx = frame.cy = 32;
    frame.pose = Mat4::identity();

    MergeConfig config;
    config.graphcut_k = 5;
    config.tau_iou = 0.4;
    auto sps = segment_superpoints(cloud, config, {0, 0, -5});
    REQUIRE(sps.size() == 2);
    MockEmbeddingProvider embedder(64, 0);
    std::vector<Mask2D> masks = {project_points(cloud, sps[0].point_indices, frame),
                                 project_points(cloud, sps[1].point_indices, frame)};
    masks[0].label = "red";
    masks[1].label = "green";
    sps = assign_labels(std::move(sps), cloud, {frame}, {masks}, config, embedder);
    const SimilarityMatrix A = build_similarity(sps, cloud, {frame}, {masks}, config);

    PointCloud moved = cloud;
    for (Vec3& p : moved.points) p = transform.transform_point(p);
    CameraFrame moved_frame = frame;
    moved_frame.pose = transform * frame.pose;
    const SimilarityMatrix B = build_similarity(sps, moved, {moved_frame}, {masks}, config);

    CHECK(A.entries.a == B.entries.a);  // bit-for-bit
}

TEST_CASE("assign_labels: unanimous, invisible, and majority votes") {
    PointCloud cloud;
    add_patch(cloud, 0, 0, 2.0, 0.8, 7, {1, 1, 1});
    CameraFrame frame;
    frame.frame_id = 0;
    frame.width = frame.height = 64;
    frame.fx = frame.fy = 40;
    frame.cx = frame.cy = 32;
    frame.pose = Mat4::identity();

    std::vector<Superpoint> sps(1);
    sps[0].id = 0;
    sps[0].point_indices.resize(cloud.size());
    std::iota(sps[0].point_indices.begin(), sps[0].point_indices.end(), 0);

    Mask2D desk_mask = project_points(cloud, sps[0].point_indices, frame);
    desk_mask.label = "desk";

    MergeConfig config;
    MockEmbeddingProvider embedder(64, 0);
    auto labeled = assign_labels(sps, cloud, {frame}, {{desk_mask}}, config, embedder);
    CHECK(*labeled[0].label == "desk");
    CHECK(labeled[0].label_feature.has_value());

    // Invisible: no frames at all see it.
    CameraFrame away = frame;
    away.pose.at(2, 2) = -1;
    away.pose.at(0, 0) = -1;
    auto unknown = assign_labels(sps, cloud, {away}, {{desk_mask}}, config, embedder);
    CHECK(*unknown[0].label == "unknown");

    // Majority over three views: desk, desk, chair.
    Mask2D chair_mask = desk_mask;
    chair_mask.label = "chair";
    CameraFrame f2 = frame;
    f2.frame_id = 1;
    CameraFrame f3 = frame;
    f3.frame_id = 2;
    auto voted = assign_labels(sps, cloud, {frame, f2, f3},
                               {{desk_mask}, {desk_mask}, {chair_mask}}, config, embedder);
    CHECK(*voted[0].label == "desk");
}

TEST_CASE("apply_tau_sim_gate: mixed clusters split back to singletons") {
    std::vector<Superpoint> sps = {make_sp(0, {0}, "desk"), make_sp(1, {1}, "desk"),
                                   make_sp(2, {2}, "lamp"), make_sp(3, {3}, "lamp")};
    std::map<int, int> assignment = {{0, 0}, {1, 0}, {2, 0}, {3, 1}};
    // Cluster 0 mixes desk+lamp: mean pairwise cosine far below 0.9.
    const auto gated = apply_tau_sim_gate(sps, assignment, 0.9);
    CHECK(gated.at(0) != gated.at(2));
    CHECK(gated.at(0) != gated.at(1));
    // Pure clusters survive: rebuild with two clean clusters.
    std::map<int, int> clean = {{0, 0}, {1, 0}, {2, 1}, {3, 1}};
    const auto kept = apply_tau_sim_gate(sps, clean, 0.9);
    CHECK(kept.at(0) == kept.at(1));
    CHECK(kept.at(2) == kept.at(3));
    CHECK(kept.at(0) != kept.at(2));
}
