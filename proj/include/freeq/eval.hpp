// freeq - eval.hpp
// Evaluation metrics (grounding accuracy, segmentation means, scene-graph
// recall), the synthetic planted-scene generator, and the oracle agent
// backend that answers prompts from planted ground truth.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freeq/agents.hpp"
#include "freeq/embeddings.hpp"
#include "freeq/io.hpp"
#include "freeq/scenegraph.hpp"

namespace freeq::eval {

// ---------------------------------------------------------------------------
// metrics

struct BoxSample {
    std::string query_id;
    Box3D box;
};

// Fraction of queries with box_iou(pred, gt) >= t, per threshold.
// Throws IdMismatch when the query id sets differ.
std::map<double, double> grounding_accuracy(const std::vector<BoxSample>& predictions,
                                            const std::vector<BoxSample>& gts,
                                            const std::vector<double>& thresholds);

struct TargetSample {
    std::string query_id;
    int target_id = 0;
};

// Fraction of queries whose chosen proposal equals the ground-truth proposal.
// proposal_map translates graph node ids to proposal ids.
double top1_with_gt_boxes(const std::vector<TargetSample>& answers,
                          const std::map<std::string, int>& gt_proposals,
                          const std::map<int, int>& proposal_map);

struct SegmentationMetrics {
    double mAcc = 0.0;
    double mIoU = 0.0;
    double fmIoU = 0.0;
};

// Class means over per-point labels; classes absent from gt are excluded.
SegmentationMetrics segmentation_metrics(const std::vector<std::string>& predicted,
                                         const std::vector<std::string>& ground_truth,
                                         const std::vector<std::string>& classes);

// Assigns each node's points the class whose embedded prompt "an image of
// {class}" maximizes cosine with the node feature; unassigned points become
// "background".
std::vector<std::string> semantic_segment(const SceneGraph& graph, int point_count,
                                          const std::vector<std::string>& classes,
                                          EmbeddingProvider& embedder);

// Top-k recall for objects / predicates / relationships under point-overlap
// Hungarian node matching. Keys look like "object_r@5".
std::map<std::string, double> scene_graph_recall(const SceneGraph& predicted,
                                                 const SceneGraph& ground_truth,
                                                 const std::vector<int>& object_ks,
                                                 const std::vector<int>& predicate_ks,
                                                 const std::vector<int>& relationship_ks,
                                                 EmbeddingProvider& embedder);

// Min-cost assignment (Hungarian, O(n^3)); returns row -> column or -1.
std::vector<int> hungarian_min_cost(const Matrix& cost);

struct EvalReport {
    std::map<std::string, double> metrics;
    std::vector<std::pair<std::string, double>> per_sample;  // (id, value or 0/1)
    std::string config_echo;
    std::string transcripts_digest;

    std::string to_json() const;
    std::string to_table() const;
};

// ---------------------------------------------------------------------------
// planted scenes

struct PlantedObject {
    std::string category;
    std::string caption;
    Box3D box;
    int point_start = 0;
    int point_count = 0;
};

struct PlantedRelation {
    int a = 0, b = 0;
    std::string relation;
};

struct PlantedQuery {
    std::string query_id;
    std::string text;
    int gt_object = 0;
};

struct PlantedScene {
    std::uint64_t seed = 0;
    std::vector<PlantedObject> objects;
    std::vector<PlantedRelation> relations;
    std::vector<PlantedQuery> queries;
    SceneCapture capture;                        // cloud + frames + masks
    std::vector<std::vector<int>> mask_objects;  // per frame, mask -> object index
};

struct PlantedConfig {
    int object_count = 4;
    int frame_count = 4;
    int query_count = 20;
    int points_per_object = 350;
    int image_size = 128;
};

// Places non-overlapping boxes in a 6x6x3 m room, samples visibility-checked
// surface points, raycasts exact depth and masks, derives relations from
// geometry rules, and emits relational queries with unique answers (verified
// exhaustively). Deterministic per seed.
// Throws PlacementFailure after bounded rejection attempts.
PlantedScene generate_planted_scene(std::uint64_t seed, const PlantedConfig& config = {});

// Shared geometry rules: every relation holding between the two boxes, and
// the single priority relation used for edge labels.
std::vector<std::string> relations_between(const Box3D& a, const Box3D& b,
                                           const CameraFrame& frame0);
std::string geometric_relation(const Box3D& a, const Box3D& b, const CameraFrame& frame0);

// Writes manifest + PLY + PNG masks + depth rasters + planted.json +
// queries.jsonl into dir. Returns the manifest path.
std::string write_planted_scene(const PlantedScene& scene, const std::string& dir);

// Truth record loader (planted.json next to the manifest by default).
struct PlantedTruth {
    std::vector<PlantedObject> objects;
    std::vector<PlantedRelation> relations;
    std::vector<PlantedQuery> queries;
    std::vector<CameraFrame> frames;             // poses only; no depth
    std::vector<std::vector<int>> mask_objects;
};

PlantedTruth load_planted_truth(const std::string& path);
std::string serialize_planted_truth(const PlantedScene& scene);

// Ground-truth scene graph equivalent of the planted record, for sg eval.
SceneGraph planted_ground_truth_graph(const PlantedTruth& truth, EmbeddingProvider& embedder);

// ---------------------------------------------------------------------------
// oracle backend

// Answers every pipeline prompt from the planted record: object lists and
// captions by lookup, relations and reasoning by the shared geometry rules.
class OracleProvider final : public agents::AgentProvider {
public:
    explicit OracleProvider(PlantedTruth truth);

    std::string complete(const agents::AgentRequest& request) override;
    std::string name() const override { return "oracle"; }

private:
    PlantedTruth truth_;
};

}  // namespace freeq::eval
