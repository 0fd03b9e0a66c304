// freeq - superpoints.hpp
// Graph-cut superpoint segmentation and the visibility-weighted similarity
// matrix driving the spectral merge.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freeq/embeddings.hpp"
#include "freeq/geometry.hpp"
#include "freeq/kernels.hpp"
#include "freeq/linalg.hpp"

namespace freeq {

struct Superpoint {
    int id = 0;
    std::vector<int> point_indices;          // sorted, non-empty
    std::optional<std::string> label;        // semantic label text
    std::optional<Feature> label_feature;    // unit vector of the label
};

struct SimilarityMatrix {
    Matrix entries;                  // S x S, symmetric, non-negative
    std::vector<int> superpoint_ids; // row/column order

    int size() const { return static_cast<int>(superpoint_ids.size()); }
    void validate() const;  // symmetry 1e-9, finite, non-negative diagonal
};

struct MergeConfig {
    double tau_iou = 0.9;
    double tau_sim = 0.9;
    int top_k_views = 5;
    double z_tolerance = 0.05;
    int graphcut_k = 10;
    double graphcut_kappa = 0.08;

    void validate() const;
};

// Felzenszwalb-Huttenlocher segmentation of the k-NN graph. Edge weight is
// (1 - normal cosine) + 0.5 * color distance; edges longer than 10x the
// median k-th neighbor distance are dropped so well-separated clusters never
// merge. Normals are estimated on demand (plane fit over 10 neighbors,
// oriented toward orient_to). The result is an exact partition, each piece
// connected in the k-NN graph, ids in first-point order.
// Throws TooFewPoints when the cloud has fewer than graphcut_k + 1 points.
std::vector<Superpoint> segment_superpoints(const PointCloud& cloud, const MergeConfig& config,
                                            const Vec3& orient_to = Vec3{0, 0, 0});

// g(O, tau_iou) of the merge: 1 iff the superpoint's projected mask overlaps
// some instance mask of the frame with IoU strictly above tau_iou. Empty
// projections gate to 0.
int visibility_gate(const Superpoint& sp, const PointCloud& cloud, const CameraFrame& frame,
                    const std::vector<Mask2D>& frame_masks, double tau_iou,
                    double z_tolerance = 0.05);

// S x F gate table; cell (s, f) = visibility_gate of superpoint s in frame f.
// Parallel over cells; freeq::superpoints_ref has the serial twin.
std::vector<std::uint8_t> build_gate_table(const std::vector<Superpoint>& sps,
                                           const PointCloud& cloud,
                                           const std::vector<CameraFrame>& frames,
                                           const std::vector<std::vector<Mask2D>>& masks,
                                           const MergeConfig& config);

// A_ij = (sum_m g_i,m * g_j,m) * max(0, cosine(f_Qi, f_Qj)); the diagonal is
// the frame count where the superpoint gates to 1. Symmetric by construction.
// Throws MissingLabelFeature when a superpoint lacks its label feature.
SimilarityMatrix build_similarity(const std::vector<Superpoint>& sps, const PointCloud& cloud,
                                  const std::vector<CameraFrame>& frames,
                                  const std::vector<std::vector<Mask2D>>& masks,
                                  const MergeConfig& config);

// Same contract, reusing a precomputed gate table (S x frames.size()).
SimilarityMatrix similarity_from_gates(const std::vector<Superpoint>& sps,
                                       const std::vector<std::uint8_t>& gates, int frame_count);

// Labels each superpoint with the best-overlap mask label voted over its
// top_k_views best views; invisible superpoints get "unknown". Label features
// are filled from the embedding provider.
std::vector<Superpoint> assign_labels(std::vector<Superpoint> sps, const PointCloud& cloud,
                                      const std::vector<CameraFrame>& frames,
                                      const std::vector<std::vector<Mask2D>>& masks,
                                      const MergeConfig& config, EmbeddingProvider& embedder);

// Post-merge gate for tau_sim: clusters whose mean pairwise label cosine
// falls below tau_sim split back into singletons. Returns superpoint id ->
// final cluster id with cluster ids renumbered densely.
std::map<int, int> apply_tau_sim_gate(const std::vector<Superpoint>& sps,
                                      const std::map<int, int>& assignment, double tau_sim);

namespace superpoints_ref {

std::vector<std::uint8_t> build_gate_table(const std::vector<Superpoint>& sps,
                                           const PointCloud& cloud,
                                           const std::vector<CameraFrame>& frames,
                                           const std::vector<std::vector<Mask2D>>& masks,
                                           const MergeConfig& config);

}  // namespace superpoints_ref

}  // namespace freeq
