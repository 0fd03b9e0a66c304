// freeq - superpoints.cpp

#include "freeq/superpoints.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "freeq/parallel.hpp"

namespace freeq {

void SimilarityMatrix::validate() const {
    if (entries.rows != size() || entries.cols != size())
        throw DimensionMismatch("similarity matrix shape does not match id list");
    if (entries.max_asymmetry() > 1e-9)
        throw FormatError("similarity matrix is not symmetric within 1e-9");
    for (double v : entries.a)
        if (!std::isfinite(v)) throw FormatError("similarity matrix has non-finite entries");
    for (int i = 0; i < size(); ++i)
        if (entries.at(i, i) < 0.0) throw FormatError("similarity matrix diagonal is negative");
}

void MergeConfig::validate() const {
    if (tau_iou < 0.0 || tau_iou > 1.0 || tau_sim < 0.0 || tau_sim > 1.0)
        throw FormatError("tau_iou and tau_sim must lie in [0,1]");
    if (top_k_views <= 0 || graphcut_k <= 0)
        throw FormatError("top_k_views and graphcut_k must be positive");
    if (z_tolerance <= 0.0) throw FormatError("z_tolerance must be positive");
}

namespace {

struct UnionFind {
    std::vector<int> parent, size;
    explicit UnionFind(int n) : parent(n), size(n, 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    int unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        return a;
    }
};

struct GraphEdge {
    double weight;
    double length2;
    int a, b;
};

const std::string kUnknownLabel = "unknown";

}  // namespace

std::vector<Superpoint> segment_superpoints(const PointCloud& cloud, const MergeConfig& config,
                                            const Vec3& orient_to) {
    config.validate();
    const int n = cloud.size();
    if (n < config.graphcut_k + 1)
        throw TooFewPoints("segment_superpoints needs at least graphcut_k + 1 points");

    const KnnGraph knn = kernels::knn_neighbors(cloud.points, config.graphcut_k);
    std::vector<Vec3> normals = cloud.has_normals()
                                    ? cloud.normals
                                    : kernels::estimate_normals(
                                          cloud.points, kernels::knn_neighbors(cloud.points, 10),
                                          orient_to);

    // Scale-free edge length cutoff: distant clusters must never merge even
    // when their surfaces look alike.
    std::vector<double> kth(n);
    for (int i = 0; i < n; ++i) kth[i] = knn.dist2(i, knn.k - 1);
    std::nth_element(kth.begin(), kth.begin() + n / 2, kth.end());
    const double median_kth = std::sqrt(kth[n / 2]);
    const double cutoff2 = 100.0 * median_kth * median_kth;  // (10x median)^2

    std::vector<GraphEdge> edges;
    edges.reserve(static_cast<size_t>(n) * knn.k / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < knn.k; ++j) {
            const int nb = knn.neighbor(i, j);
            if (nb <= i) continue;
            const double len2 = knn.dist2(i, j);
            if (len2 > cutoff2) continue;
            double w = 1.0 - normals[i].dot(normals[nb]);
            if (cloud.has_colors()) w += 0.5 * distance(cloud.colors[i], cloud.colors[nb]);
            edges.push_back({w, len2, i, nb});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
        if (x.weight != y.weight) return x.weight < y.weight;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });

    UnionFind uf(n);
    std::vector<double> internal(n, 0.0);  // max internal weight per component root
    for (const GraphEdge& e : edges) {
        const int ra = uf.find(e.a), rb = uf.find(e.b);
        if (ra == rb) continue;
        const double ta = internal[ra] + config.graphcut_kappa / uf.size[ra];
        const double tb = internal[rb] + config.graphcut_kappa / uf.size[rb];
        if (e.weight <= std::min(ta, tb)) {
            const int root = uf.unite(ra, rb);
            internal[root] = e.weight;
        }
    }

    std::map<int, std::vector<int>> groups;  // root -> members, ordered by first point
    for (int i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);
    std::vector<std::vector<int>> ordered;
    ordered.reserve(groups.size());
    std::vector<std::pair<int, int>> first_point;  // (min index, root)
    for (auto& [root, members] : groups) first_point.push_back({members.front(), root});
    std::sort(first_point.begin(), first_point.end());

    std::vector<Superpoint> sps;
    sps.reserve(first_point.size());
    for (size_t s = 0; s < first_point.size(); ++s) {
        Superpoint sp;
        sp.id = static_cast<int>(s);
        sp.point_indices = std::move(groups[first_point[s].second]);
        sps.push_back(std::move(sp));
    }
    return sps;
}

int visibility_gate(const Superpoint& sp, const PointCloud& cloud, const CameraFrame& frame,
                    const std::vector<Mask2D>& frame_masks, double tau_iou, double z_tolerance) {
    Mask2D projection;
    try {
        projection = project_points(cloud, sp.point_indices, frame, z_tolerance);
    } catch (const EmptyProjection&) {
        return 0;
    }
    double best = 0.0;
    for (const Mask2D& m : frame_masks) best = std::max(best, mask_iou(projection, m));
    return best > tau_iou ? 1 : 0;  // strict: "exceeds threshold"
}

std::vector<std::uint8_t> build_gate_table(const std::vector<Superpoint>& sps,
                                           const PointCloud& cloud,
                                           const std::vector<CameraFrame>& frames,
                                           const std::vector<std::vector<Mask2D>>& masks,
                                           const MergeConfig& config) {
    const int s = static_cast<int>(sps.size());
    const int f = static_cast<int>(frames.size());
    std::vector<std::uint8_t> gates(static_cast<size_t>(s) * f, 0);
    parallel::parallel_for(static_cast<std::int64_t>(s) * f, [&](std::int64_t cell) {
        const int i = static_cast<int>(cell / f);
        const int m = static_cast<int>(cell % f);
        gates[cell] = static_cast<std::uint8_t>(
            visibility_gate(sps[i], cloud, frames[m], masks[m], config.tau_iou,
                            config.z_tolerance));
    });
    return gates;
}

namespace superpoints_ref {

std::vector<std::uint8_t> build_gate_table(const std::vector<Superpoint>& sps,
                                           const PointCloud& cloud,
                                           const std::vector<CameraFrame>& frames,
                                           const std::vector<std::vector<Mask2D>>& masks,
                                           const MergeConfig& config) {
    const int s = static_cast<int>(sps.size());
    const int f = static_cast<int>(frames.size());
    std::vector<std::uint8_t> gates(static_cast<size_t>(s) * f, 0);
    for (int i = 0; i < s; ++i)
        for (int m = 0; m < f; ++m)
            gates[static_cast<size_t>(i) * f + m] = static_cast<std::uint8_t>(
                visibility_gate(sps[i], cloud, frames[m], masks[m], config.tau_iou,
                                config.z_tolerance));
    return gates;
}

}  // namespace superpoints_ref

SimilarityMatrix similarity_from_gates(const std::vector<Superpoint>& sps,
                                       const std::vector<std::uint8_t>& gates, int frame_count) {
    const int s = static_cast<int>(sps.size());
    for (const Superpoint& sp : sps)
        if (!sp.label_feature.has_value())
            throw MissingLabelFeature("superpoint " + std::to_string(sp.id) +
                                      " lacks a label feature");

    SimilarityMatrix A;
    A.entries = Matrix(s, s);
    A.superpoint_ids.resize(s);
    for (int i = 0; i < s; ++i) A.superpoint_ids[i] = sps[i].id;

    // Each (i, j) cell is independent; compute the upper triangle in parallel
    // and mirror afterwards so the matrix is symmetric by construction.
    parallel::parallel_for(s, [&](std::int64_t i) {
        const std::uint8_t* gi = &gates[i * frame_count];
        for (int j = static_cast<int>(i); j < s; ++j) {
            const std::uint8_t* gj = &gates[static_cast<size_t>(j) * frame_count];
            int covis = 0;
            for (int m = 0; m < frame_count; ++m) covis += gi[m] * gj[m];
            double value;
            if (i == static_cast<std::int64_t>(j)) {
                value = static_cast<double>(covis);  // cosine with itself = 1
            } else {
                const double cos = covis > 0 ? cosine(*sps[i].label_feature, *sps[j].label_feature)
                                             : 0.0;
                value = covis * std::max(0.0, cos);
            }
            A.entries.at(static_cast<int>(i), j) = value;
        }
    });
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < i; ++j) A.entries.at(i, j) = A.entries.at(j, i);
    return A;
}

SimilarityMatrix build_similarity(const std::vector<Superpoint>& sps, const PointCloud& cloud,
                                  const std::vector<CameraFrame>& frames,
                                  const std::vector<std::vector<Mask2D>>& masks,
                                  const MergeConfig& config) {
    const auto gates = build_gate_table(sps, cloud, frames, masks, config);
    return similarity_from_gates(sps, gates, static_cast<int>(frames.size()));
}

std::vector<Superpoint> assign_labels(std::vector<Superpoint> sps, const PointCloud& cloud,
                                      const std::vector<CameraFrame>& frames,
                                      const std::vector<std::vector<Mask2D>>& masks,
                                      const MergeConfig& config, EmbeddingProvider& embedder) {
    struct View {
        double iou;
        int frame;
        std::string label;
    };

    parallel::parallel_for(static_cast<std::int64_t>(sps.size()), [&](std::int64_t si) {
        Superpoint& sp = sps[si];
        std::vector<View> views;
        for (size_t f = 0; f < frames.size(); ++f) {
            Mask2D projection;
            try {
                projection = project_points(cloud, sp.point_indices, frames[f],
                                            config.z_tolerance);
            } catch (const EmptyProjection&) {
                continue;
            }
            double best_iou = 0.0;
            const Mask2D* best_mask = nullptr;
            for (const Mask2D& m : masks[f]) {
                const double iou = mask_iou(projection, m);
                if (iou > best_iou) {
                    best_iou = iou;
                    best_mask = &m;
                }
            }
            if (best_mask != nullptr && best_iou > 0.0)
                views.push_back({best_iou, static_cast<int>(f), best_mask->label});
        }
        if (views.empty()) {
            sp.label = kUnknownLabel;
        } else {
            std::sort(views.begin(), views.end(), [](const View& x, const View& y) {
                if (x.iou != y.iou) return x.iou > y.iou;
                return x.frame < y.frame;
            });
            if (static_cast<int>(views.size()) > config.top_k_views)
                views.resize(config.top_k_views);
            std::map<std::string, std::pair<int, double>> votes;  // label -> (count, iou sum)
            for (const View& v : views) {
                votes[v.label].first++;
                votes[v.label].second += v.iou;
            }
            // Majority, then summed IoU, then lexicographic order.
            auto best = votes.begin();
            for (auto it = std::next(votes.begin()); it != votes.end(); ++it)
                if (it->second.first > best->second.first ||
                    (it->second.first == best->second.first &&
                     it->second.second > best->second.second))
                    best = it;
            sp.label = best->first;
        }
    });
    // Embedding providers are safe for concurrent calls, but fill features
    // serially so cache writes stay ordered.
    for (Superpoint& sp : sps) sp.label_feature = embedder.embed_text(*sp.label);
    return sps;
}

std::map<int, int> apply_tau_sim_gate(const std::vector<Superpoint>& sps,
                                      const std::map<int, int>& assignment, double tau_sim) {
    std::map<int, const Superpoint*> by_id;
    for (const Superpoint& sp : sps) by_id[sp.id] = &sp;

    std::map<int, std::vector<int>> clusters;  // cluster -> member superpoint ids
    for (const auto& [sp_id, cluster] : assignment) clusters[cluster].push_back(sp_id);

    std::map<int, bool> keep;
    for (const auto& [cluster, members] : clusters) {
        bool ok = true;
        if (members.size() > 1) {
            double sum = 0.0;
            int pairs = 0;
            for (size_t i = 0; i < members.size(); ++i)
                for (size_t j = i + 1; j < members.size(); ++j) {
                    sum += cosine(*by_id.at(members[i])->label_feature,
                                  *by_id.at(members[j])->label_feature);
                    pairs++;
                }
            ok = (sum / pairs) >= tau_sim;
        }
        keep[cluster] = ok;
    }

    // Renumber densely in ascending superpoint id order; split clusters
    // dissolve into fresh singletons.
    std::map<int, int> result;
    std::map<int, int> surviving;  // old cluster -> new id
    int next = 0;
    for (const auto& [sp_id, cluster] : assignment) {
        if (keep.at(cluster)) {
            auto it = surviving.find(cluster);
            if (it == surviving.end()) it = surviving.emplace(cluster, next++).first;
            result[sp_id] = it->second;
        } else {
            result[sp_id] = next++;
        }
    }
    return result;
}

}  // namespace freeq
