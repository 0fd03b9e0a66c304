// freeq - scenegraph.hpp
// Scene graph construction: grounded detection, multi-view association,
// semantic alignment against superpoint clusters, captioning, and MST-pruned
// relation edges.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freeq/agents.hpp"
#include "freeq/embeddings.hpp"
#include "freeq/geometry.hpp"
#include "freeq/io.hpp"
#include "freeq/superpoints.hpp"

namespace freeq {

struct Node {
    int id = 0;
    std::vector<int> point_indices;  // sorted, disjoint across nodes
    Feature feature;                 // fused, unit-normalized
    std::string caption;
    Box3D box;
    std::string semantic_label;
};

struct Edge {
    int a = 0, b = 0;  // node ids, a < b
    std::string relation;
    double distance = 0.0;  // center_distance of the endpoint boxes
};

struct SceneGraph {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::string scene_caption;

    const Node* find_node(int id) const;
    void validate() const;  // endpoint existence, no duplicate undirected edges
};

struct AssocConfig {
    double voxel_size = 0.025;
    double nn_threshold = 0.025;
    double assoc_threshold = 1.1;

    void validate() const;
};

// One grounded 2D detection: a manifest mask that matched a listed category.
struct GroundedDetection {
    int frame_index = 0;  // into capture.frames
    int mask_index = 0;   // into capture.masks[frame_index]
    std::string category; // normalized
};

struct DetectionResult {
    std::vector<std::string> categories;        // the set V, sorted
    std::vector<GroundedDetection> detections;  // ordered by (frame, mask)
};

// Node draft accumulated by association; views remember the contributing
// detections for captioning.
struct NodeDraft {
    int id = 0;
    std::vector<int> point_indices;       // full back-projected set, sorted
    std::vector<int> scoring_indices;     // voxel-downsampled subset
    Feature visual_feature;
    std::vector<GroundedDetection> views;
    std::map<int, int> claims;            // point -> times claimed by this draft
};

// LVLM object listing intersected with the manifest masks; hallucinated
// categories without any matching mask are dropped.
DetectionResult detect_objects(const SceneCapture& capture, agents::AgentProvider& provider,
                               agents::TranscriptLog* log);

// Multi-view association: back-project each grounded mask to cloud indices
// (pixel hit inside the mask, |z - depth| <= z_tolerance), score against
// drafts as overlap ratio + visual cosine, merge when the score reaches
// assoc_threshold. Scoring uses voxel-downsampled sets; node membership
// keeps the full sets. A final majority vote makes point sets disjoint.
// Throws MissingDepth when a detection's frame lacks depth.
std::vector<NodeDraft> associate_objects(const DetectionResult& detections,
                                         const SceneCapture& capture, const AssocConfig& config,
                                         EmbeddingProvider& embedder,
                                         double z_tolerance = 0.05);

// Cluster labeling (majority label over member superpoints) and node/cluster
// alignment by maximal point overlap; the node feature becomes the
// re-normalized mean of its visual and label embeddings.
struct ClusterInfo {
    int cluster_id = 0;
    std::string label;
    std::vector<int> point_indices;
};

std::vector<ClusterInfo> make_clusters(const std::vector<Superpoint>& sps,
                                       const std::map<int, int>& assignment);

std::vector<Node> attach_semantics(const std::vector<NodeDraft>& drafts, const PointCloud& cloud,
                                   const std::vector<ClusterInfo>& clusters,
                                   EmbeddingProvider& embedder);

// Complete graph weighted by 1 - box_iou + 0.001 * center_distance, pruned to
// the MST plus every pair with box_iou > 0.05; relations labeled by the agent.
std::vector<Edge> build_edges(const std::vector<Node>& nodes, agents::AgentProvider& provider,
                              agents::TranscriptLog* log);

// Deterministic Prim MST over a dense weight matrix; returns edges (a < b).
std::vector<std::pair<int, int>> minimum_spanning_tree(const Matrix& weights);

// One LLM summarization over all node captions.
std::string scene_caption(const std::vector<Node>& nodes, agents::AgentProvider& provider,
                          agents::TranscriptLog* log);

struct PipelineConfig {
    MergeConfig merge;
    AssocConfig assoc;
    int caption_views = 10;  // top views per node for captioning
};

// Full pipeline: detect -> associate -> superpoints -> similarity -> spectral
// -> attach semantics -> captions -> edges -> scene caption. Deterministic
// under mock/oracle providers. Errors are annotated with the failing stage.
SceneGraph build_graph(const SceneCapture& capture, const PipelineConfig& config,
                       agents::AgentProvider& agent, EmbeddingProvider& embedder,
                       agents::TranscriptLog* log);

// Byte-stable serialization: fixed field order, floats at 9 significant
// digits. parse validates the graph invariants.
std::string serialize_graph(const SceneGraph& graph);
SceneGraph parse_graph(const std::string& json_text);

// Superpoint checkpoint format: [{id, point_indices, label, label_feature}].
std::string serialize_superpoints(const std::vector<Superpoint>& sps);
std::vector<Superpoint> parse_superpoints(const std::string& json_text);

}  // namespace freeq
