// freeq - scenegraph.cpp

#include "freeq/scenegraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "freeq/parallel.hpp"
#include "freeq/spectral.hpp"

namespace freeq {

const Node* SceneGraph::find_node(int id) const {
    for (const Node& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

void SceneGraph::validate() const {
    std::set<int> ids;
    for (const Node& n : nodes) {
        if (n.point_indices.empty()) throw FormatError("node with empty point set");
        if (!ids.insert(n.id).second) throw FormatError("duplicate node id");
    }
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : edges) {
        if (e.a == e.b) throw FormatError("edge endpoints must be distinct");
        if (!ids.count(e.a) || !ids.count(e.b))
            throw FormatError("edge references a missing node");
        if (e.relation.empty()) throw FormatError("edge relation must be non-empty");
        const auto key = std::minmax(e.a, e.b);
        if (!seen.insert(key).second) throw FormatError("duplicate undirected edge");
    }
}

void AssocConfig::validate() const {
    if (voxel_size <= 0.0 || nn_threshold <= 0.0 || assoc_threshold <= 0.0)
        throw FormatError("association config values must be positive");
}

// ---------------------------------------------------------------------------
// detection

DetectionResult detect_objects(const SceneCapture& capture, agents::AgentProvider& provider,
                               agents::TranscriptLog* log) {
    DetectionResult result;
    std::set<std::string> categories;
    for (size_t f = 0; f < capture.frames.size(); ++f) {
        // The listing prompt carries the frame image when the capture has one
        // (the file is already a PNG, so its bytes go straight into the URL).
        std::string image_data_url;
        if (!capture.rgb_files[f].empty()) {
            const std::string bytes = io::read_file(capture.rgb_files[f]);
            image_data_url = "data:image/png;base64," +
                             io::base64_encode(std::vector<std::uint8_t>(bytes.begin(),
                                                                         bytes.end()));
        }
        const std::vector<std::string> listed =
            agents::list_objects(capture.frames[f], provider, log, 2, image_data_url);
        std::set<std::string> listed_set;
        for (const std::string& cat : listed) listed_set.insert(agents::normalize_category(cat));

        for (size_t m = 0; m < capture.masks[f].size(); ++m) {
            const std::string mask_cat = agents::normalize_category(capture.masks[f][m].label);
            if (!listed_set.count(mask_cat)) continue;  // not confirmed by the agent
            result.detections.push_back(
                {static_cast<int>(f), static_cast<int>(m), mask_cat});
            categories.insert(mask_cat);
        }
    }
    // Hallucinated listings never matched a mask, so they are already gone.
    result.categories.assign(categories.begin(), categories.end());
    return result;
}

// ---------------------------------------------------------------------------
// association

namespace {

std::int64_t voxel_key(const Vec3& p, double voxel) {
    const std::int64_t bias = 1 << 20;
    const auto qx = static_cast<std::int64_t>(std::floor(p.x / voxel)) + bias;
    const auto qy = static_cast<std::int64_t>(std::floor(p.y / voxel)) + bias;
    const auto qz = static_cast<std::int64_t>(std::floor(p.z / voxel)) + bias;
    return (qx << 42) | (qy << 21) | qz;
}

// Lowest index per occupied voxel; input must be sorted.
std::vector<int> voxel_downsample(const PointCloud& cloud, const std::vector<int>& indices,
                                  double voxel) {
    std::unordered_set<std::int64_t> occupied;
    std::vector<int> kept;
    kept.reserve(indices.size());
    for (int idx : indices)
        if (occupied.insert(voxel_key(cloud.points[idx], voxel)).second) kept.push_back(idx);
    return kept;
}

// Cloud indices whose projection lands inside the mask and agrees with the
// stored depth.
std::vector<int> backproject_mask(const PointCloud& cloud, const CameraFrame& frame,
                                  const Mask2D& mask, double z_tolerance) {
    if (!frame.has_depth())
        throw MissingDepth("frame " + std::to_string(frame.frame_id) +
                           " has no depth for back-projection");
    const Mat4 world_to_cam = frame.pose.inverse_rigid();
    const int n = cloud.size();
    std::vector<std::uint8_t> hit(n, 0);
    parallel::parallel_for(n, [&](std::int64_t i) {
        const Vec3 pc = world_to_cam.transform_point(cloud.points[i]);
        if (pc.z <= 0.0) return;
        const int px = static_cast<int>(std::lround(frame.fx * pc.x / pc.z + frame.cx));
        const int py = static_cast<int>(std::lround(frame.fy * pc.y / pc.z + frame.cy));
        if (px < 0 || px >= frame.width || py < 0 || py >= frame.height) return;
        if (!mask.test(px, py)) return;
        const float d = frame.depth_at(px, py);
        if (d <= 0.0f || std::fabs(pc.z - d) > z_tolerance) return;
        hit[i] = 1;
    });
    std::vector<int> indices;
    for (int i = 0; i < n; ++i)
        if (hit[i]) indices.push_back(i);
    return indices;
}

// Fraction of detection points with a draft point within nn_threshold.
double overlap_ratio(const PointCloud& cloud, const std::vector<int>& detection,
                     const std::vector<int>& draft, double nn_threshold) {
    if (detection.empty()) return 0.0;
    std::unordered_map<std::int64_t, std::vector<int>> grid;
    for (int idx : draft) grid[voxel_key(cloud.points[idx], nn_threshold)].push_back(idx);
    const double t2 = nn_threshold * nn_threshold;
    int matched = 0;
    for (int q : detection) {
        const Vec3& p = cloud.points[q];
        bool found = false;
        for (int dx = -1; dx <= 1 && !found; ++dx)
            for (int dy = -1; dy <= 1 && !found; ++dy)
                for (int dz = -1; dz <= 1 && !found; ++dz) {
                    const Vec3 shifted{p.x + dx * nn_threshold, p.y + dy * nn_threshold,
                                       p.z + dz * nn_threshold};
                    const auto it = grid.find(voxel_key(shifted, nn_threshold));
                    if (it == grid.end()) continue;
                    for (int c : it->second)
                        if ((cloud.points[c] - p).norm2() <= t2) {
                            found = true;
                            break;
                        }
                }
        matched += found;
    }
    return static_cast<double>(matched) / detection.size();
}

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

}  // namespace

std::vector<NodeDraft> associate_objects(const DetectionResult& detections,
                                         const SceneCapture& capture, const AssocConfig& config,
                                         EmbeddingProvider& embedder, double z_tolerance) {
    config.validate();
    std::vector<NodeDraft> drafts;

    for (const GroundedDetection& det : detections.detections) {
        const CameraFrame& frame = capture.frames[det.frame_index];
        const Mask2D& mask = capture.masks[det.frame_index][det.mask_index];
        std::vector<int> points = backproject_mask(capture.cloud, frame, mask, z_tolerance);
        if (points.empty()) continue;  // mask sees no sampled surface
        std::vector<int> scoring = voxel_downsample(capture.cloud, points, config.voxel_size);
        Feature visual = embedder.embed_image_crop(frame, mask).normalized_copy();

        int best = -1;
        double best_score = 0.0;
        for (size_t d = 0; d < drafts.size(); ++d) {
            const double geo = overlap_ratio(capture.cloud, scoring, drafts[d].scoring_indices,
                                             config.nn_threshold);
            const double score = geo + cosine(visual, drafts[d].visual_feature);
            if (score > best_score) {
                best_score = score;
                best = static_cast<int>(d);
            }
        }

        if (best >= 0 && best_score >= config.assoc_threshold) {
            NodeDraft& draft = drafts[best];
            draft.point_indices = sorted_union(draft.point_indices, points);
            draft.scoring_indices =
                voxel_downsample(capture.cloud, draft.point_indices, config.voxel_size);
            draft.visual_feature = fuse_features(draft.visual_feature, visual);
            draft.views.push_back(det);
            for (int p : points) draft.claims[p]++;
        } else {
            NodeDraft draft;
            draft.id = static_cast<int>(drafts.size());
            draft.point_indices = points;
            draft.scoring_indices = std::move(scoring);
            draft.visual_feature = std::move(visual);
            draft.views.push_back(det);
            for (int p : points) draft.claims[p]++;
            drafts.push_back(std::move(draft));
        }
    }

    // Majority vote per point keeps node point sets pairwise disjoint;
    // ties go to the smaller draft id.
    std::unordered_map<int, std::pair<int, int>> winner;  // point -> (draft, count)
    for (const NodeDraft& draft : drafts)
        for (const auto& [point, count] : draft.claims) {
            auto it = winner.find(point);
            if (it == winner.end() || count > it->second.second)
                winner[point] = {draft.id, count};
        }
    for (NodeDraft& draft : drafts) {
        std::vector<int> owned;
        owned.reserve(draft.point_indices.size());
        for (int p : draft.point_indices)
            if (winner.at(p).first == draft.id) owned.push_back(p);
        draft.point_indices = std::move(owned);
        draft.scoring_indices =
            voxel_downsample(capture.cloud, draft.point_indices, config.voxel_size);
    }
    std::erase_if(drafts, [](const NodeDraft& d) { return d.point_indices.empty(); });
    for (size_t d = 0; d < drafts.size(); ++d) drafts[d].id = static_cast<int>(d);
    return drafts;
}

// ---------------------------------------------------------------------------
// semantics

std::vector<ClusterInfo> make_clusters(const std::vector<Superpoint>& sps,
                                       const std::map<int, int>& assignment) {
    std::map<int, const Superpoint*> by_id;
    for (const Superpoint& sp : sps) by_id[sp.id] = &sp;

    std::map<int, std::vector<const Superpoint*>> groups;
    for (const auto& [sp_id, cluster] : assignment) groups[cluster].push_back(by_id.at(sp_id));

    std::vector<ClusterInfo> clusters;
    clusters.reserve(groups.size());
    for (const auto& [cluster_id, members] : groups) {
        ClusterInfo info;
        info.cluster_id = cluster_id;
        std::map<std::string, int> votes;
        for (const Superpoint* sp : members) {
            votes[sp->label.value_or("unknown")]++;
            info.point_indices.insert(info.point_indices.end(), sp->point_indices.begin(),
                                      sp->point_indices.end());
        }
        std::sort(info.point_indices.begin(), info.point_indices.end());
        auto best = votes.begin();
        for (auto it = std::next(votes.begin()); it != votes.end(); ++it)
            if (it->second > best->second) best = it;
        info.label = best->first;
        clusters.push_back(std::move(info));
    }
    return clusters;
}

std::vector<Node> attach_semantics(const std::vector<NodeDraft>& drafts, const PointCloud& cloud,
                                   const std::vector<ClusterInfo>& clusters,
                                   EmbeddingProvider& embedder) {
    std::vector<Node> nodes;
    nodes.reserve(drafts.size());
    for (const NodeDraft& draft : drafts) {
        Node node;
        node.id = draft.id;
        node.point_indices = draft.point_indices;
        node.box = bounding_box(cloud, draft.point_indices);

        int best_overlap = 0;
        const ClusterInfo* best = nullptr;
        for (const ClusterInfo& cluster : clusters) {
            std::vector<int> common;
            std::set_intersection(draft.point_indices.begin(), draft.point_indices.end(),
                                  cluster.point_indices.begin(), cluster.point_indices.end(),
                                  std::back_inserter(common));
            if (static_cast<int>(common.size()) > best_overlap) {
                best_overlap = static_cast<int>(common.size());
                best = &cluster;
            }
        }
        if (best != nullptr && best->label != "unknown") {
            node.semantic_label = best->label;
            node.feature = fuse_features(draft.visual_feature, embedder.embed_text(best->label));
        } else {
            node.semantic_label = "unknown";
            node.feature = draft.visual_feature.normalized_copy();
        }
        nodes.push_back(std::move(node));
    }
    return nodes;
}

// ---------------------------------------------------------------------------
// edges

std::vector<std::pair<int, int>> minimum_spanning_tree(const Matrix& weights) {
    const int n = weights.rows;
    std::vector<std::pair<int, int>> edges;
    if (n < 2) return edges;
    std::vector<bool> in_tree(n, false);
    std::vector<double> best_w(n, std::numeric_limits<double>::infinity());
    std::vector<int> best_from(n, -1);
    in_tree[0] = true;
    for (int j = 1; j < n; ++j) {
        best_w[j] = weights.at(0, j);
        best_from[j] = 0;
    }
    for (int step = 1; step < n; ++step) {
        int pick = -1;
        for (int j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            if (pick < 0 || best_w[j] < best_w[pick]) pick = j;  // index breaks ties
        }
        in_tree[pick] = true;
        edges.emplace_back(std::min(best_from[pick], pick), std::max(best_from[pick], pick));
        for (int j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            if (weights.at(pick, j) < best_w[j]) {
                best_w[j] = weights.at(pick, j);
                best_from[j] = pick;
            }
        }
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

std::vector<Edge> build_edges(const std::vector<Node>& nodes, agents::AgentProvider& provider,
                              agents::TranscriptLog* log) {
    const int n = static_cast<int>(nodes.size());
    if (n < 2) throw FormatError("build_edges needs at least 2 nodes");

    Matrix weights(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double iou = box_iou(nodes[i].box, nodes[j].box);
            const double dist = center_distance(nodes[i].box, nodes[j].box);
            weights.at(i, j) = 1.0 - iou + 0.001 * dist;
        }

    const auto mst = minimum_spanning_tree(weights);
    std::set<std::pair<int, int>> kept(mst.begin(), mst.end());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (box_iou(nodes[i].box, nodes[j].box) > 0.05) kept.insert({i, j});

    std::vector<Edge> edges;
    for (const auto& [i, j] : kept) {
        agents::NodeSummary sa{nodes[i].id, nodes[i].semantic_label, nodes[i].caption,
                               nodes[i].box};
        agents::NodeSummary sb{nodes[j].id, nodes[j].semantic_label, nodes[j].caption,
                               nodes[j].box};
        Edge e;
        e.a = std::min(nodes[i].id, nodes[j].id);
        e.b = std::max(nodes[i].id, nodes[j].id);
        e.relation = agents::relation_label(sa, sb, provider, log);
        e.distance = center_distance(nodes[i].box, nodes[j].box);
        edges.push_back(std::move(e));
    }
    return edges;
}

std::string scene_caption(const std::vector<Node>& nodes, agents::AgentProvider& provider,
                          agents::TranscriptLog* log) {
    if (nodes.empty()) throw EmptyScene("scene_caption needs at least one node");
    agents::AgentRequest req;
    req.task = "scene_caption";
    std::ostringstream prompt;
    prompt << "These objects were found in a 3D scene:\n";
    for (const Node& node : nodes)
        prompt << "- [" << node.id << "] " << node.semantic_label << ": " << node.caption
               << "\n";
    prompt << "Summarize the scene in one short paragraph. Respond with the summary only.";
    req.messages.push_back({"system", "You summarize 3D indoor scenes.", ""});
    req.messages.push_back({"user", prompt.str(), ""});

    std::string caption;
    agents::complete_validated(req, provider, log, [&](const std::string& raw) {
        const auto begin = raw.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) return false;
        const auto end = raw.find_last_not_of(" \t\r\n");
        caption = raw.substr(begin, end - begin + 1);
        return true;
    });
    return caption;
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const ProviderUnavailable& e) {
        throw ProviderUnavailable(std::string(stage) + ": " + e.what());
    } catch (const AuthError& e) {
        throw AuthError(std::string(stage) + ": " + e.what());
    } catch (const RateLimited& e) {
        throw RateLimited(std::string(stage) + ": " + e.what());
    } catch (const ParseFailure& e) {
        throw ParseFailure(std::string(stage) + ": " + e.what());
    } catch (const Error& e) {
        throw Error(std::string(stage) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(std::string(stage) + ": " + e.what());
    }
}

// Crop rectangle: mask bounds expanded by 10 percent, clamped to the frame.
std::array<int, 4> expanded_bounds(const Mask2D& mask) {
    auto b = mask.bounds();
    const int dx = std::max(1, (b[2] - b[0] + 1) / 10);
    const int dy = std::max(1, (b[3] - b[1] + 1) / 10);
    return {std::max(0, b[0] - dx), std::max(0, b[1] - dy),
            std::min(mask.width - 1, b[2] + dx), std::min(mask.height - 1, b[3] + dy)};
}

// PNG crop for the LVLM: the RGB frame when the manifest provides one, the
// mask bitmap otherwise.
std::string crop_data_url(const SceneCapture& capture, int frame_index, int mask_index,
                          const std::array<int, 4>& bbox) {
    const Mask2D& mask = capture.masks[frame_index][mask_index];
    const int cw = bbox[2] - bbox[0] + 1, ch = bbox[3] - bbox[1] + 1;
    std::vector<std::uint8_t> png;
    if (!capture.rgb_files[frame_index].empty()) {
        int w = 0, h = 0;
        const auto rgb = io::decode_png_rgb(capture.rgb_files[frame_index], w, h);
        std::vector<std::uint8_t> crop(static_cast<size_t>(cw) * ch * 3);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x)
                for (int c = 0; c < 3; ++c)
                    crop[(static_cast<size_t>(y) * cw + x) * 3 + c] =
                        rgb[(static_cast<size_t>(y + bbox[1]) * w + (x + bbox[0])) * 3 + c];
        png = io::encode_png_rgb(crop, cw, ch);
    } else {
        std::vector<std::uint8_t> crop(static_cast<size_t>(cw) * ch);
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x)
                crop[static_cast<size_t>(y) * cw + x] =
                    mask.test(x + bbox[0], y + bbox[1]) ? 255 : 0;
        png = io::encode_png_gray(crop, cw, ch);
    }
    return "data:image/png;base64," + io::base64_encode(png);
}

}  // namespace

SceneGraph build_graph(const SceneCapture& capture, const PipelineConfig& config,
                       agents::AgentProvider& agent, EmbeddingProvider& embedder,
                       agents::TranscriptLog* log) {
    run_stage("validate", [&] { capture.validate(); return 0; });
    if (capture.cloud.points.empty() || capture.frames.empty())
        throw EmptyScene("scene capture has no points or frames");

    const DetectionResult detections =
        run_stage("detect", [&] { return detect_objects(capture, agent, log); });
    if (detections.detections.empty()) throw EmptyScene("no grounded detections in any frame");

    std::vector<NodeDraft> drafts = run_stage("associate", [&] {
        return associate_objects(detections, capture, config.assoc, embedder,
                                 config.merge.z_tolerance);
    });
    if (drafts.empty()) throw EmptyScene("association produced no node drafts");

    // Grounded masks only: superpoint labels must come from the same evidence
    // the nodes were built from.
    std::vector<std::vector<Mask2D>> grounded_masks(capture.frames.size());
    for (const GroundedDetection& det : detections.detections)
        grounded_masks[det.frame_index].push_back(capture.masks[det.frame_index][det.mask_index]);

    const Vec3 orient_to = capture.frames.front().camera_center();
    std::vector<Superpoint> sps = run_stage("superpoints", [&] {
        return segment_superpoints(capture.cloud, config.merge, orient_to);
    });
    sps = run_stage("superpoint_labels", [&] {
        return assign_labels(std::move(sps), capture.cloud, capture.frames, grounded_masks,
                             config.merge, embedder);
    });

    std::map<int, int> assignment;
    if (static_cast<int>(sps.size()) >= 3) {
        const SimilarityMatrix similarity = run_stage("similarity", [&] {
            return build_similarity(sps, capture.cloud, capture.frames, grounded_masks,
                                    config.merge);
        });
        const SpectralResult spectral =
            run_stage("spectral", [&] { return spectral_cluster(similarity); });
        assignment = run_stage("tau_sim_gate", [&] {
            return apply_tau_sim_gate(sps, spectral.assignment, config.merge.tau_sim);
        });
    } else {
        for (const Superpoint& sp : sps) assignment[sp.id] = sp.id;
    }

    const std::vector<ClusterInfo> clusters = make_clusters(sps, assignment);
    std::vector<Node> nodes = run_stage("attach_semantics", [&] {
        return attach_semantics(drafts, capture.cloud, clusters, embedder);
    });

    run_stage("captions", [&] {
        for (size_t d = 0; d < drafts.size(); ++d) {
            // Top views by detection mask area, capped at caption_views.
            std::vector<std::pair<int, const GroundedDetection*>> ranked;
            for (const GroundedDetection& det : drafts[d].views)
                ranked.push_back(
                    {capture.masks[det.frame_index][det.mask_index].count(), &det});
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& x, const auto& y) { return x.first > y.first; });
            if (static_cast<int>(ranked.size()) > config.caption_views)
                ranked.resize(config.caption_views);
            std::vector<agents::ViewCrop> crops;
            for (const auto& [area, det] : ranked) {
                const Mask2D& mask = capture.masks[det->frame_index][det->mask_index];
                agents::ViewCrop crop;
                crop.frame_id = capture.frames[det->frame_index].frame_id;
                crop.mask_index = det->mask_index;
                crop.bbox = expanded_bounds(mask);
                crop.image_data_url =
                    crop_data_url(capture, det->frame_index, det->mask_index, crop.bbox);
                crops.push_back(std::move(crop));
            }
            nodes[d].caption = agents::caption_node(crops, agent, log);
        }
        return 0;
    });

    SceneGraph graph;
    graph.nodes = std::move(nodes);
    if (graph.nodes.size() >= 2)
        graph.edges = run_stage("edges", [&] { return build_edges(graph.nodes, agent, log); });
    graph.scene_caption =
        run_stage("scene_caption", [&] { return scene_caption(graph.nodes, agent, log); });
    graph.validate();
    return graph;
}

// ---------------------------------------------------------------------------
// serialization

std::string serialize_graph(const SceneGraph& graph) {
    io::JsonWriter w;
    w.begin_object();
    w.key("scene_caption");
    w.value_string(graph.scene_caption);
    w.key("nodes");
    w.begin_array();
    for (const Node& node : graph.nodes) {
        w.begin_object();
        w.key("id");
        w.value_int(node.id);
        w.key("label");
        w.value_string(node.semantic_label);
        w.key("caption");
        w.value_string(node.caption);
        w.key("box");
        w.begin_object();
        w.key("min");
        w.begin_array();
        w.value_double(node.box.lo.x);
        w.value_double(node.box.lo.y);
        w.value_double(node.box.lo.z);
        w.end_array();
        w.key("max");
        w.begin_array();
        w.value_double(node.box.hi.x);
        w.value_double(node.box.hi.y);
        w.value_double(node.box.hi.z);
        w.end_array();
        w.end_object();
        w.key("feature");
        w.begin_array();
        for (double v : node.feature.values) w.value_double(v);
        w.end_array();
        w.key("point_indices");
        w.begin_array();
        for (int p : node.point_indices) w.value_int(p);
        w.end_array();
        w.end_object();
    }
    w.end_array();
    w.key("edges");
    w.begin_array();
    for (const Edge& e : graph.edges) {
        w.begin_object();
        w.key("a");
        w.value_int(e.a);
        w.key("b");
        w.value_int(e.b);
        w.key("relation");
        w.value_string(e.relation);
        w.key("distance");
        w.value_double(e.distance);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    return w.str();
}

SceneGraph parse_graph(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("graph parse error: ") + e.what());
    }
    SceneGraph graph;
    try {
        graph.scene_caption = j.at("scene_caption").get<std::string>();
        for (const auto& nj : j.at("nodes")) {
            Node node;
            node.id = nj.at("id").get<int>();
            node.semantic_label = nj.at("label").get<std::string>();
            node.caption = nj.at("caption").get<std::string>();
            const auto lo = nj.at("box").at("min").get<std::vector<double>>();
            const auto hi = nj.at("box").at("max").get<std::vector<double>>();
            if (lo.size() != 3 || hi.size() != 3) throw FormatError("box needs 3 coordinates");
            node.box.lo = {lo[0], lo[1], lo[2]};
            node.box.hi = {hi[0], hi[1], hi[2]};
            node.feature.values = nj.at("feature").get<std::vector<double>>();
            node.feature.normalized = true;
            node.point_indices = nj.at("point_indices").get<std::vector<int>>();
            graph.nodes.push_back(std::move(node));
        }
        for (const auto& ej : j.at("edges")) {
            Edge e;
            e.a = ej.at("a").get<int>();
            e.b = ej.at("b").get<int>();
            e.relation = ej.at("relation").get<std::string>();
            e.distance = ej.at("distance").get<double>();
            graph.edges.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("graph field error: ") + e.what());
    }
    graph.validate();
    return graph;
}

std::string serialize_superpoints(const std::vector<Superpoint>& sps) {
    io::JsonWriter w;
    w.begin_array();
    for (const Superpoint& sp : sps) {
        w.begin_object();
        w.key("id");
        w.value_int(sp.id);
        w.key("point_indices");
        w.begin_array();
        for (int p : sp.point_indices) w.value_int(p);
        w.end_array();
        if (sp.label) {
            w.key("label");
            w.value_string(*sp.label);
        }
        if (sp.label_feature) {
            w.key("label_feature");
            w.begin_array();
            for (double v : sp.label_feature->values) w.value_double(v);
            w.end_array();
        }
        w.end_object();
    }
    w.end_array();
    return w.str();
}

std::vector<Superpoint> parse_superpoints(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    std::vector<Superpoint> sps;
    for (const auto& sj : j) {
        Superpoint sp;
        sp.id = sj.at("id").get<int>();
        sp.point_indices = sj.at("point_indices").get<std::vector<int>>();
        if (sj.contains("label")) sp.label = sj.at("label").get<std::string>();
        if (sj.contains("label_feature")) {
            Feature f;
            f.values = sj.at("label_feature").get<std::vector<double>>();
            f.normalized = true;
            sp.label_feature = std::move(f);
        }
        sps.push_back(std::move(sp));
    }
    return sps;
}

}  // namespace freeq
