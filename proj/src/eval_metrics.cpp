// freeq - eval_metrics.cpp
// Grounding, segmentation, and scene-graph recall metrics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "freeq/eval.hpp"

namespace freeq::eval {

std::map<double, double> grounding_accuracy(const std::vector<BoxSample>& predictions,
                                            const std::vector<BoxSample>& gts,
                                            const std::vector<double>& thresholds) {
    std::map<std::string, const Box3D*> gt_by_id;
    for (const BoxSample& s : gts) gt_by_id[s.query_id] = &s.box;
    if (gt_by_id.size() != predictions.size())
        throw IdMismatch("prediction and ground-truth query id sets differ");

    std::vector<double> ious;
    ious.reserve(predictions.size());
    std::set<std::string> seen;
    for (const BoxSample& p : predictions) {
        const auto it = gt_by_id.find(p.query_id);
        if (it == gt_by_id.end() || !seen.insert(p.query_id).second)
            throw IdMismatch("prediction query id " + p.query_id + " has no unique ground truth");
        ious.push_back(box_iou(p.box, *it->second));
    }

    std::map<double, double> accuracy;
    for (double t : thresholds) {
        int hits = 0;
        for (double iou : ious) hits += (iou >= t);
        accuracy[t] = predictions.empty() ? 0.0 : static_cast<double>(hits) / predictions.size();
    }
    return accuracy;
}

double top1_with_gt_boxes(const std::vector<TargetSample>& answers,
                          const std::map<std::string, int>& gt_proposals,
                          const std::map<int, int>& proposal_map) {
    if (answers.empty()) throw IdMismatch("no answers to score");
    if (answers.size() != gt_proposals.size())
        throw IdMismatch("answer and ground-truth query id sets differ");
    int hits = 0;
    for (const TargetSample& a : answers) {
        const auto gt = gt_proposals.find(a.query_id);
        if (gt == gt_proposals.end()) throw IdMismatch("no ground truth for " + a.query_id);
        const auto prop = proposal_map.find(a.target_id);
        if (prop == proposal_map.end())
            throw IdMismatch("answer target " + std::to_string(a.target_id) +
                             " maps to no proposal");
        hits += (prop->second == gt->second);
    }
    return static_cast<double>(hits) / answers.size();
}

SegmentationMetrics segmentation_metrics(const std::vector<std::string>& predicted,
                                         const std::vector<std::string>& ground_truth,
                                         const std::vector<std::string>& classes) {
    if (predicted.size() != ground_truth.size())
        throw LengthMismatch("predicted and ground-truth label counts differ");

    SegmentationMetrics out;
    double acc_sum = 0.0, iou_sum = 0.0, fiou_sum = 0.0;
    int counted = 0;
    std::int64_t gt_total = 0;
    for (const std::string& c : classes) {
        std::int64_t tp = 0, fp = 0, fn = 0, gt_count = 0;
        for (size_t i = 0; i < predicted.size(); ++i) {
            const bool in_gt = ground_truth[i] == c;
            const bool in_pred = predicted[i] == c;
            gt_count += in_gt;
            tp += (in_gt && in_pred);
            fp += (!in_gt && in_pred);
            fn += (in_gt && !in_pred);
        }
        if (gt_count == 0) continue;  // absent classes are excluded from the means
        const double acc = static_cast<double>(tp) / gt_count;
        const double iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        acc_sum += acc;
        iou_sum += iou;
        fiou_sum += static_cast<double>(gt_count) * iou;
        gt_total += gt_count;
        counted++;
    }
    if (counted > 0) {
        out.mAcc = acc_sum / counted;
        out.mIoU = iou_sum / counted;
        out.fmIoU = fiou_sum / static_cast<double>(gt_total);
    }
    return out;
}

std::vector<std::string> semantic_segment(const SceneGraph& graph, int point_count,
                                          const std::vector<std::string>& classes,
                                          EmbeddingProvider& embedder) {
    std::vector<std::string> labels(point_count, "background");
    if (classes.empty()) return labels;

    std::vector<Feature> class_features;
    class_features.reserve(classes.size());
    for (const std::string& c : classes)
        class_features.push_back(embedder.embed_text("an image of " + c));

    for (const Node& node : graph.nodes) {
        int best = 0;
        double best_cos = -2.0;
        for (size_t c = 0; c < classes.size(); ++c) {
            const double cs = cosine(node.feature, class_features[c]);
            if (cs > best_cos) {
                best_cos = cs;
                best = static_cast<int>(c);
            }
        }
        for (int p : node.point_indices)
            if (p >= 0 && p < point_count) labels[p] = classes[best];
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Hungarian assignment (potentials form), minimizing total cost.

std::vector<int> hungarian_min_cost(const Matrix& cost) {
    const int n = cost.rows, m = cost.cols;
    const int dim = std::max(n, m);
    const double INF = std::numeric_limits<double>::infinity();
    auto at = [&](int r, int c) {
        return (r < n && c < m) ? cost.at(r, c) : 0.0;  // square padding
    };

    std::vector<double> u(dim + 1, 0.0), v(dim + 1, 0.0);
    std::vector<int> p(dim + 1, 0), way(dim + 1, 0);
    for (int i = 1; i <= dim; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(dim + 1, INF);
        std::vector<bool> used(dim + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = INF;
            int j1 = -1;
            for (int j = 1; j <= dim; ++j) {
                if (used[j]) continue;
                const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= dim; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> match(n, -1);
    for (int j = 1; j <= dim; ++j)
        if (p[j] >= 1 && p[j] <= n && j <= m) match[p[j] - 1] = j - 1;
    return match;
}

// ---------------------------------------------------------------------------
// scene-graph recall

namespace {

int point_overlap(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return static_cast<int>(common.size());
}

struct LabelRanking {
    std::vector<std::string> ranked;  // vocabulary sorted by cosine desc
    double top_cosine = -1.0;
};

LabelRanking rank_labels(const Feature& feature, const std::vector<std::string>& vocabulary,
                         EmbeddingProvider& embedder) {
    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(vocabulary.size());
    for (const std::string& label : vocabulary)
        scored.push_back({cosine(feature, embedder.embed_text(label)), label});
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    LabelRanking r;
    for (const auto& [score, label] : scored) r.ranked.push_back(label);
    r.top_cosine = scored.empty() ? -1.0 : scored.front().first;
    return r;
}

const Edge* find_edge(const SceneGraph& graph, int a, int b) {
    for (const Edge& e : graph.edges)
        if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return &e;
    return nullptr;
}

}  // namespace

std::map<std::string, double> scene_graph_recall(const SceneGraph& predicted,
                                                 const SceneGraph& ground_truth,
                                                 const std::vector<int>& object_ks,
                                                 const std::vector<int>& predicate_ks,
                                                 const std::vector<int>& relationship_ks,
                                                 EmbeddingProvider& embedder) {
    if (predicted.nodes.empty() || ground_truth.nodes.empty())
        throw EmptyGraph("scene_graph_recall needs non-empty graphs");

    const int g = static_cast<int>(ground_truth.nodes.size());
    const int p = static_cast<int>(predicted.nodes.size());

    // Node correspondence: Hungarian on negated point overlap.
    Matrix cost(g, p);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < p; ++j)
            cost.at(i, j) = -static_cast<double>(point_overlap(
                ground_truth.nodes[i].point_indices, predicted.nodes[j].point_indices));
    const std::vector<int> match = hungarian_min_cost(cost);

    std::map<int, int> gt_to_pred;  // node ids, only real (overlap > 0) matches
    for (int i = 0; i < g; ++i)
        if (match[i] >= 0 && cost.at(i, match[i]) < 0.0)
            gt_to_pred[ground_truth.nodes[i].id] = predicted.nodes[match[i]].id;

    std::vector<std::string> vocabulary;
    {
        std::set<std::string> vocab_set;
        for (const Node& n : ground_truth.nodes) vocab_set.insert(n.semantic_label);
        vocabulary.assign(vocab_set.begin(), vocab_set.end());
    }
    std::map<int, LabelRanking> pred_rankings;  // pred node id -> ranking
    for (const Node& n : predicted.nodes)
        pred_rankings[n.id] = rank_labels(n.feature, vocabulary, embedder);

    std::map<std::string, double> out;

    // Object R@k.
    for (int k : object_ks) {
        int hits = 0;
        for (const Node& gt_node : ground_truth.nodes) {
            const auto it = gt_to_pred.find(gt_node.id);
            if (it == gt_to_pred.end()) continue;
            const auto& ranked = pred_rankings.at(it->second).ranked;
            const int limit = std::min<int>(k, static_cast<int>(ranked.size()));
            for (int r = 0; r < limit; ++r)
                if (ranked[r] == gt_node.semantic_label) {
                    hits++;
                    break;
                }
        }
        out["object_r@" + std::to_string(k)] = static_cast<double>(hits) / g;
    }

    // Predicate R@k over matched edges.
    const int gt_edge_count = static_cast<int>(ground_truth.edges.size());
    for (int k : predicate_ks) {
        int hits = 0;
        for (const Edge& ge : ground_truth.edges) {
            const auto ita = gt_to_pred.find(ge.a);
            const auto itb = gt_to_pred.find(ge.b);
            if (ita == gt_to_pred.end() || itb == gt_to_pred.end()) continue;
            const Edge* pe = find_edge(predicted, ita->second, itb->second);
            // A single predicted relation per edge: a rank-1 list.
            if (pe != nullptr && k >= 1 && pe->relation == ge.relation) hits++;
        }
        out["predicate_r@" + std::to_string(k)] =
            gt_edge_count == 0 ? 0.0 : static_cast<double>(hits) / gt_edge_count;
    }

    // Relationship R@k: triplets (top-1 subject label, relation, top-1 object
    // label) ranked by the product of the endpoint label confidences.
    struct Triplet {
        double score;
        int a, b;
        std::string relation;
    };
    std::vector<Triplet> ranked_triplets;
    for (const Edge& pe : predicted.edges) {
        const auto& ra = pred_rankings.at(pe.a);
        const auto& rb = pred_rankings.at(pe.b);
        ranked_triplets.push_back(
            {std::max(0.0, ra.top_cosine) * std::max(0.0, rb.top_cosine), pe.a, pe.b,
             pe.relation});
    }
    std::stable_sort(ranked_triplets.begin(), ranked_triplets.end(),
                     [](const Triplet& x, const Triplet& y) { return x.score > y.score; });

    for (int k : relationship_ks) {
        int hits = 0;
        const int limit = std::min<int>(k, static_cast<int>(ranked_triplets.size()));
        for (const Edge& ge : ground_truth.edges) {
            const auto ita = gt_to_pred.find(ge.a);
            const auto itb = gt_to_pred.find(ge.b);
            if (ita == gt_to_pred.end() || itb == gt_to_pred.end()) continue;
            for (int t = 0; t < limit; ++t) {
                const Triplet& trip = ranked_triplets[t];
                const bool same_pair =
                    (trip.a == ita->second && trip.b == itb->second) ||
                    (trip.a == itb->second && trip.b == ita->second);
                if (same_pair && trip.relation == ge.relation) {
                    hits++;
                    break;
                }
            }
        }
        out["relationship_r@" + std::to_string(k)] =
            gt_edge_count == 0 ? 0.0 : static_cast<double>(hits) / gt_edge_count;
    }
    return out;
}

// ---------------------------------------------------------------------------
// report

std::string EvalReport::to_json() const {
    io::JsonWriter w;
    w.begin_object();
    w.key("metrics");
    w.begin_object();
    for (const auto& [name, value] : metrics) {
        w.key(name);
        w.value_double(value);
    }
    w.end_object();
    w.key("per_sample");
    w.begin_array();
    for (const auto& [id, value] : per_sample) {
        w.begin_object();
        w.key("id");
        w.value_string(id);
        w.key("value");
        w.value_double(value);
        w.end_object();
    }
    w.end_array();
    w.key("config");
    w.value_string(config_echo);
    w.key("transcripts_digest");
    w.value_string(transcripts_digest);
    w.end_object();
    return w.str();
}

std::string EvalReport::to_table() const {
    std::ostringstream ss;
    ss << "metric                         value\n";
    ss << "-----------------------------  ---------\n";
    for (const auto& [name, value] : metrics) {
        ss << name;
        for (size_t pad = name.size(); pad < 31; ++pad) ss << ' ';
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", value);
        ss << buf << "\n";
    }
    return ss.str();
}

}  // namespace freeq::eval
