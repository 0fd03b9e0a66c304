// freeq - eval_planted.cpp
// Synthetic planted scenes: deterministic layout, exact raycast frames,
// visibility-checked surface sampling, relation/query derivation, and the
// oracle agent backend.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <cstdio>
#include <sstream>

#include "freeq/eval.hpp"
#include "freeq/kernels.hpp"

namespace freeq::eval {

namespace {

// ---------------------------------------------------------------------------
// deterministic RNG

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed * 0x9E3779B97F4A7C15ULL + 1) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int pick(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }
};

const char* kCategories[] = {"desk", "chair", "lamp", "sofa", "shelf",
                             "box",  "plant", "monitor"};
const char* kColorNames[] = {"red",  "green",  "blue",   "yellow",
                             "teal", "purple", "orange", "gray"};
const double kPalette[][3] = {{0.85, 0.2, 0.2},  {0.2, 0.75, 0.25}, {0.2, 0.35, 0.85},
                              {0.9, 0.85, 0.2},  {0.15, 0.7, 0.7},  {0.6, 0.25, 0.75},
                              {0.95, 0.55, 0.15}, {0.55, 0.55, 0.55}};

// Emission margins: queries are only planted when the winner satisfies the
// rule with slack and every same-category competitor violates it with slack,
// so node boxes recovered by the pipeline cannot flip the answer.
constexpr double kNearThreshold = 1.0;
constexpr double kNearEmit = 0.88;
constexpr double kNearAnti = 1.12;
constexpr double kPixelEmit = 6.0;
constexpr double kDepthThreshold = 0.0;
constexpr double kDepthEmit = 0.25;
constexpr double kOnGap = 0.05;
constexpr double kSuperlativeGap = 0.25;  // winner-vs-runner-up margin (m)

struct Frame0Projection {
    double px = 0.0;   // pixel x of the box center in frame 0
    double zc = 0.0;   // camera-space depth of the box center
    bool valid = false;
};

Frame0Projection project_center(const Box3D& box, const CameraFrame& frame0) {
    Frame0Projection out;
    const Vec3 pc = frame0.pose.inverse_rigid().transform_point(box.center());
    if (pc.z <= 0.0) return out;
    out.px = frame0.fx * pc.x / pc.z + frame0.cx;
    out.zc = pc.z;
    out.valid = true;
    return out;
}

bool xy_overlap(const Box3D& a, const Box3D& b) {
    return std::min(a.hi.x, b.hi.x) > std::max(a.lo.x, b.lo.x) &&
           std::min(a.hi.y, b.hi.y) > std::max(a.lo.y, b.lo.y);
}

}  // namespace

std::vector<std::string> relations_between(const Box3D& a, const Box3D& b,
                                           const CameraFrame& frame0) {
    std::vector<std::string> rels;
    if (std::fabs(a.lo.z - b.hi.z) <= kOnGap && xy_overlap(a, b)) rels.push_back("on");
    if (center_distance(a, b) < kNearThreshold) rels.push_back("near");
    const Frame0Projection pa = project_center(a, frame0);
    const Frame0Projection pb = project_center(b, frame0);
    if (pa.valid && pb.valid) {
        if (pa.px < pb.px) rels.push_back("left of");
        if (pa.px > pb.px) rels.push_back("right of");
        if (pa.zc < pb.zc - kDepthThreshold) rels.push_back("in front of");
        if (pa.zc > pb.zc + kDepthThreshold) rels.push_back("behind");
    }
    return rels;
}

std::string geometric_relation(const Box3D& a, const Box3D& b, const CameraFrame& frame0) {
    if (std::fabs(a.lo.z - b.hi.z) <= kOnGap && xy_overlap(a, b)) return "on";
    if (center_distance(a, b) < kNearThreshold) return "near";
    const Frame0Projection pa = project_center(a, frame0);
    const Frame0Projection pb = project_center(b, frame0);
    if (pa.valid && pb.valid) {
        const double px_gap = std::fabs(pa.px - pb.px);
        const double z_gap = std::fabs(pa.zc - pb.zc);
        // Prefer the visually dominant axis in frame 0.
        if (px_gap / kPixelEmit >= z_gap / kDepthEmit && px_gap > 0.0)
            return pa.px < pb.px ? "left of" : "right of";
        if (z_gap > 0.0) return pa.zc < pb.zc ? "in front of" : "behind";
    }
    return "far from";
}

namespace {

// ---------------------------------------------------------------------------
// layout

CameraFrame make_camera(int frame_id, const Vec3& eye, const Vec3& target, int image_size,
                        double focal) {
    CameraFrame frame;
    frame.frame_id = frame_id;
    frame.width = frame.height = image_size;
    frame.fx = frame.fy = focal;
    frame.cx = frame.cy = (image_size - 1) / 2.0;

    // Camera axes: x right, y down (pixel convention), z forward.
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(Vec3{0, 0, 1});
    if (right.norm() < 1e-9) right = Vec3{1, 0, 0};
    right = right.normalized();
    const Vec3 down = forward.cross(right);

    frame.pose = Mat4::identity();
    const Vec3 axes[3] = {right, down, forward};
    for (int c = 0; c < 3; ++c) {
        frame.pose.at(0, c) = axes[c].x;
        frame.pose.at(1, c) = axes[c].y;
        frame.pose.at(2, c) = axes[c].z;
    }
    frame.pose.at(0, 3) = eye.x;
    frame.pose.at(1, 3) = eye.y;
    frame.pose.at(2, 3) = eye.z;
    return frame;
}

std::vector<CameraFrame> make_cameras(int frame_count, int image_size) {
    const Vec3 target{0, 0, 0.7};
    const double focal = 0.62 * image_size;
    const std::vector<Vec3> eyes = {
        {2.75, 2.75, 2.5},  {-2.75, 2.75, 2.5},  {-2.75, -2.75, 2.5}, {2.75, -2.75, 2.5},
        {0.0, 2.75, 2.3},   {-2.75, 0.0, 2.3},   {0.0, -2.75, 2.3},   {2.75, 0.0, 2.3}};
    std::vector<CameraFrame> frames;
    for (int f = 0; f < frame_count; ++f)
        frames.push_back(make_camera(f, eyes[f % eyes.size()], target, image_size, focal));
    return frames;
}

struct RuleCheck {
    bool margin = false;  // holds with emission slack
    bool anti = false;    // violates with emission slack
};

RuleCheck check_rule(const std::string& rel, const Box3D& s, const std::vector<Box3D>& objects,
                     const std::vector<int>& object_choices, const CameraFrame& frame0) {
    // Satisfaction is existential over the object category's instances.
    RuleCheck out;
    bool margin_any = false, all_anti = true;
    for (int o : object_choices) {
        const Box3D& ob = objects[o];
        if (rel == "near") {
            const double d = center_distance(s, ob);
            if (d <= kNearEmit) margin_any = true;
            if (d < kNearAnti) all_anti = false;
        } else {
            const Frame0Projection ps = project_center(s, frame0);
            const Frame0Projection po = project_center(ob, frame0);
            if (!ps.valid || !po.valid) {
                all_anti = false;
                continue;
            }
            if (rel == "left of") {
                if (po.px - ps.px >= kPixelEmit) margin_any = true;
                if (po.px - ps.px > -kPixelEmit) all_anti = false;
            } else if (rel == "right of") {
                if (ps.px - po.px >= kPixelEmit) margin_any = true;
                if (ps.px - po.px > -kPixelEmit) all_anti = false;
            } else if (rel == "in front of") {
                if (po.zc - ps.zc >= kDepthEmit) margin_any = true;
                if (po.zc - ps.zc > -kDepthEmit) all_anti = false;
            } else if (rel == "behind") {
                if (ps.zc - po.zc >= kDepthEmit) margin_any = true;
                if (ps.zc - po.zc > -kDepthEmit) all_anti = false;
            }
        }
    }
    out.margin = margin_any;
    out.anti = all_anti;
    return out;
}

struct Layout {
    std::vector<std::string> categories;
    std::vector<std::string> captions;
    std::vector<Box3D> boxes;
    std::vector<int> colors;
};

bool try_layout(Rng& rng, int object_count, Layout& out) {
    // One duplicated category pair (when possible) so relational queries have
    // same-category distractors to disambiguate.
    const int pool = static_cast<int>(std::size(kCategories));
    std::vector<int> cat_ids;
    const int dup = rng.pick(pool);
    cat_ids.push_back(dup);
    if (object_count >= 3) cat_ids.push_back(dup);
    while (static_cast<int>(cat_ids.size()) < object_count) {
        const int c = rng.pick(pool);
        if (std::count(cat_ids.begin(), cat_ids.end(), c) == 0) cat_ids.push_back(c);
    }

    out.categories.clear();
    out.captions.clear();
    out.boxes.clear();
    out.colors.clear();

    // The deliberate near pair links distinct categories so "near" queries
    // survive the same-category filter: the duplicated category occupies
    // slots 0 and 1, so anchor object 2 to object 1 (or 1 to 0 when only two
    // objects exist and the categories already differ).
    const int near_subject = object_count >= 3 ? 2 : 1;
    const int near_anchor = near_subject - 1;

    for (int i = 0; i < object_count; ++i) {
        const double sx = rng.uniform(0.45, 0.7);
        const double sy = rng.uniform(0.45, 0.7);
        const double sz = rng.uniform(0.5, 1.0);
        bool placed = false;
        for (int attempt = 0; attempt < 300 && !placed; ++attempt) {
            Vec3 center;
            if (i == near_subject && !out.boxes.empty()) {
                const Vec3 anchor = out.boxes[near_anchor].center();
                const double angle = rng.uniform(0.0, 2.0 * M_PI);
                const double radius = rng.uniform(0.78, 0.85);
                center = {anchor.x + radius * std::cos(angle),
                          anchor.y + radius * std::sin(angle), 0.0};
            } else {
                center = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), 0.0};
            }
            if (std::fabs(center.x) > 2.05 || std::fabs(center.y) > 2.05) continue;
            Box3D box{{center.x - sx / 2, center.y - sy / 2, 0.0},
                      {center.x + sx / 2, center.y + sy / 2, sz}};
            bool ok = true;
            for (size_t j = 0; j < out.boxes.size(); ++j) {
                const Box3D& other = out.boxes[j];
                const double gap_x = std::max(other.lo.x - box.hi.x, box.lo.x - other.hi.x);
                const double gap_y = std::max(other.lo.y - box.hi.y, box.lo.y - other.hi.y);
                const double gap = std::max(gap_x, gap_y);
                const bool near_pair =
                    (i == near_subject && static_cast<int>(j) == near_anchor);
                if (gap < (near_pair ? 0.22 : 0.30)) {
                    ok = false;
                    break;
                }
                if (!near_pair && center_distance(box, other) < 1.25) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            out.boxes.push_back(box);
            placed = true;
        }
        if (!placed) return false;
    }

    for (int i = 0; i < object_count; ++i) {
        const int color = (cat_ids[i] + i) % static_cast<int>(std::size(kPalette));
        out.categories.push_back(kCategories[cat_ids[i]]);
        out.colors.push_back(color);
        out.captions.push_back(std::string("a ") + kColorNames[color] + " " +
                               kCategories[cat_ids[i]]);
    }
    return true;
}

// All emission-safe queries, sorted by text; each has a unique winner.
// A query survives only when exactly one same-category subject satisfies the
// rule with margin and every other one violates it with margin.
std::vector<PlantedQuery> derive_queries(const Layout& layout, const CameraFrame& frame0) {
    const int n = static_cast<int>(layout.boxes.size());
    const std::vector<std::string> rel_kinds = {"near", "left of", "right of", "in front of",
                                                "behind"};
    const std::set<std::string> cats(layout.categories.begin(), layout.categories.end());

    std::vector<PlantedQuery> queries;
    for (const std::string& rel : rel_kinds) {
        for (const std::string& cat_s : cats) {
            for (const std::string& cat_o : cats) {
                if (cat_s == cat_o) continue;
                std::vector<int> subjects, object_choices;
                for (int i = 0; i < n; ++i) {
                    if (layout.categories[i] == cat_s) subjects.push_back(i);
                    if (layout.categories[i] == cat_o) object_choices.push_back(i);
                }
                std::set<int> winners;
                bool spoiled = false;
                for (int s : subjects) {
                    const RuleCheck check =
                        check_rule(rel, layout.boxes[s], layout.boxes, object_choices, frame0);
                    if (check.margin)
                        winners.insert(s);
                    else if (!check.anti)
                        spoiled = true;  // inside the ambiguous band
                }
                if (spoiled || winners.size() != 1) continue;
                PlantedQuery q;
                q.text = "the " + cat_s + " " + rel + " the " + cat_o;
                q.gt_object = *winners.begin();
                queries.push_back(std::move(q));
            }
        }
    }

    // Superlatives on the distance-to-nearest-instance metric; the winner
    // must beat the runner-up by a clear gap.
    for (const std::string& cat_s : cats) {
        for (const std::string& cat_o : cats) {
            if (cat_s == cat_o) continue;
            std::vector<int> subjects, object_choices;
            for (int i = 0; i < n; ++i) {
                if (layout.categories[i] == cat_s) subjects.push_back(i);
                if (layout.categories[i] == cat_o) object_choices.push_back(i);
            }
            if (object_choices.empty() || subjects.empty()) continue;
            std::vector<std::pair<double, int>> metric;  // (min distance, subject)
            for (int s : subjects) {
                double best = 1e18;
                for (int o : object_choices)
                    best = std::min(best, center_distance(layout.boxes[s], layout.boxes[o]));
                metric.push_back({best, s});
            }
            std::sort(metric.begin(), metric.end());
            const bool closest_safe =
                metric.size() == 1 || metric[1].first - metric[0].first >= kSuperlativeGap;
            const bool farthest_safe =
                metric.size() == 1 ||
                metric.back().first - metric[metric.size() - 2].first >= kSuperlativeGap;
            if (closest_safe) {
                PlantedQuery q;
                q.text = "the " + cat_s + " closest to the " + cat_o;
                q.gt_object = metric.front().second;
                queries.push_back(std::move(q));
            }
            if (farthest_safe) {
                PlantedQuery q;
                q.text = "the " + cat_s + " farthest from the " + cat_o;
                q.gt_object = metric.back().second;
                queries.push_back(std::move(q));
            }
        }
    }

    std::sort(queries.begin(), queries.end(),
              [](const PlantedQuery& x, const PlantedQuery& y) { return x.text < y.text; });
    return queries;
}

}  // namespace

PlantedScene generate_planted_scene(std::uint64_t seed, const PlantedConfig& config) {
    if (config.object_count < 2) throw PlacementFailure("need at least 2 objects");
    if (config.frame_count < 2) throw PlacementFailure("need at least 2 frames");
    if (config.object_count > 8)
        throw PlacementFailure("desk-scale scenes cap at 8 objects");

    for (int attempt = 0; attempt < 250; ++attempt) {
        Rng rng(seed ^ (0x51caf3a5u * static_cast<std::uint64_t>(attempt + 1)));
        Layout layout;
        if (!try_layout(rng, config.object_count, layout)) continue;

        std::vector<CameraFrame> frames = make_cameras(config.frame_count, config.image_size);

        // Exact depth and per-object masks from analytic raycasting.
        RaycastScene rc_scene;
        rc_scene.boxes = layout.boxes;
        std::vector<RaycastResult> casts;
        for (const CameraFrame& frame : frames)
            casts.push_back(kernels::raycast_frame(rc_scene, frame));

        const int n = config.object_count;
        std::vector<std::vector<int>> mask_pixels(frames.size(), std::vector<int>(n, 0));
        for (size_t f = 0; f < frames.size(); ++f)
            for (int hit : casts[f].hit)
                if (hit >= 0) mask_pixels[f][hit]++;

        bool visible_enough = true;
        for (int i = 0; i < n && visible_enough; ++i) {
            int frames_with_mask = 0;
            for (size_t f = 0; f < frames.size(); ++f)
                if (mask_pixels[f][i] >= 25) frames_with_mask++;
            visible_enough = frames_with_mask >= 2;
        }
        if (!visible_enough) continue;

        PlantedScene scene;
        scene.seed = seed;

        // Surface sampling: faces except the bottom, area-weighted, each point
        // verified visible (its pixel's nearest hit is this object and the
        // depths agree) in at least one frame that carries the object's mask.
        PointCloud cloud;
        bool sampling_ok = true;
        for (int i = 0; i < n && sampling_ok; ++i) {
            const Box3D& box = layout.boxes[i];
            const double ex = box.hi.x - box.lo.x, ey = box.hi.y - box.lo.y,
                         ez = box.hi.z - box.lo.z;
            const double areas[5] = {ey * ez, ey * ez, ex * ez, ex * ez, ex * ey};
            double total = 0.0;
            for (double a : areas) total += a;

            PlantedObject record;
            record.category = layout.categories[i];
            record.caption = layout.captions[i];
            record.box = box;
            record.point_start = cloud.size();

            int produced = 0;
            int budget = config.points_per_object * 80;
            while (produced < config.points_per_object && budget-- > 0) {
                double pickv = rng.uniform() * total;
                int face = 0;
                while (face < 4 && pickv > areas[face]) {
                    pickv -= areas[face];
                    face++;
                }
                const double u = rng.uniform(), v = rng.uniform();
                Vec3 p;
                switch (face) {
                    case 0: p = {box.lo.x, box.lo.y + u * ey, box.lo.z + v * ez}; break;
                    case 1: p = {box.hi.x, box.lo.y + u * ey, box.lo.z + v * ez}; break;
                    case 2: p = {box.lo.x + u * ex, box.lo.y, box.lo.z + v * ez}; break;
                    case 3: p = {box.lo.x + u * ex, box.hi.y, box.lo.z + v * ez}; break;
                    default: p = {box.lo.x + u * ex, box.lo.y + u * 0 + v * ey, box.hi.z}; break;
                }
                bool visible = false;
                for (size_t f = 0; f < frames.size() && !visible; ++f) {
                    if (mask_pixels[f][i] < 25) continue;
                    const Vec3 pc = frames[f].pose.inverse_rigid().transform_point(p);
                    if (pc.z <= 0.0) continue;
                    const int px = static_cast<int>(
                        std::lround(frames[f].fx * pc.x / pc.z + frames[f].cx));
                    const int py = static_cast<int>(
                        std::lround(frames[f].fy * pc.y / pc.z + frames[f].cy));
                    if (px < 0 || px >= frames[f].width || py < 0 || py >= frames[f].height)
                        continue;
                    const size_t at = static_cast<size_t>(py) * frames[f].width + px;
                    if (casts[f].hit[at] != i) continue;
                    if (std::fabs(pc.z - casts[f].depth[at]) > 0.03) continue;
                    visible = true;
                }
                if (!visible) continue;
                cloud.points.push_back(p);
                cloud.colors.push_back({kPalette[layout.colors[i]][0],
                                        kPalette[layout.colors[i]][1],
                                        kPalette[layout.colors[i]][2]});
                produced++;
            }
            if (produced < config.points_per_object) {
                sampling_ok = false;
                break;
            }
            record.point_count = produced;
            scene.objects.push_back(std::move(record));
        }
        if (!sampling_ok) continue;

        // Queries need margins; retry the layout when too few are safe.
        std::vector<PlantedQuery> queries = derive_queries(layout, frames[0]);
        if (static_cast<int>(queries.size()) < config.query_count) continue;
        queries.resize(config.query_count);
        for (size_t q = 0; q < queries.size(); ++q) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "q%03zu", q);
            queries[q].query_id = buf;
        }
        scene.queries = std::move(queries);

        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                scene.relations.push_back(
                    {a, b, geometric_relation(layout.boxes[a], layout.boxes[b], frames[0])});

        // Assemble the capture: masks ordered by object index within a frame.
        scene.capture.cloud = std::move(cloud);
        scene.mask_objects.resize(frames.size());
        scene.capture.masks.resize(frames.size());
        for (size_t f = 0; f < frames.size(); ++f) {
            frames[f].depth = casts[f].depth;
            for (int i = 0; i < n; ++i) {
                if (mask_pixels[f][i] < 25) continue;
                Mask2D mask = Mask2D::empty_like(frames[f].frame_id, frames[f].width,
                                                 frames[f].height);
                for (size_t at = 0; at < casts[f].hit.size(); ++at)
                    if (casts[f].hit[at] == i) mask.bits[at] = 1;
                mask.label = layout.categories[i];
                mask.confidence = 1.0;
                scene.capture.masks[f].push_back(std::move(mask));
                scene.mask_objects[f].push_back(i);
            }
        }
        scene.capture.frames = std::move(frames);
        scene.capture.rgb_files.assign(scene.capture.frames.size(), "");
        scene.capture.validate();
        return scene;
    }
    throw PlacementFailure("no valid planted layout after bounded attempts");
}

// ---------------------------------------------------------------------------
// serialization

std::string serialize_planted_truth(const PlantedScene& scene) {
    io::JsonWriter w;
    w.begin_object();
    w.key("seed");
    w.value_int(static_cast<std::int64_t>(scene.seed));
    w.key("objects");
    w.begin_array();
    for (const PlantedObject& o : scene.objects) {
        w.begin_object();
        w.key("category");
        w.value_string(o.category);
        w.key("caption");
        w.value_string(o.caption);
        w.key("box");
        w.begin_object();
        w.key("min");
        w.begin_array();
        w.value_double(o.box.lo.x);
        w.value_double(o.box.lo.y);
        w.value_double(o.box.lo.z);
        w.end_array();
        w.key("max");
        w.begin_array();
        w.value_double(o.box.hi.x);
        w.value_double(o.box.hi.y);
        w.value_double(o.box.hi.z);
        w.end_array();
        w.end_object();
        w.key("point_start");
        w.value_int(o.point_start);
        w.key("point_count");
        w.value_int(o.point_count);
        w.end_object();
    }
    w.end_array();
    w.key("relations");
    w.begin_array();
    for (const PlantedRelation& r : scene.relations) {
        w.begin_object();
        w.key("a");
        w.value_int(r.a);
        w.key("b");
        w.value_int(r.b);
        w.key("relation");
        w.value_string(r.relation);
        w.end_object();
    }
    w.end_array();
    w.key("queries");
    w.begin_array();
    for (const PlantedQuery& q : scene.queries) {
        w.begin_object();
        w.key("query_id");
        w.value_string(q.query_id);
        w.key("text");
        w.value_string(q.text);
        w.key("gt_object");
        w.value_int(q.gt_object);
        w.end_object();
    }
    w.end_array();
    w.key("frames");
    w.begin_array();
    for (const CameraFrame& f : scene.capture.frames) {
        w.begin_object();
        w.key("frame_id");
        w.value_int(f.frame_id);
        w.key("intrinsics");
        w.begin_object();
        w.key("fx");
        w.value_double(f.fx);
        w.key("fy");
        w.value_double(f.fy);
        w.key("cx");
        w.value_double(f.cx);
        w.key("cy");
        w.value_double(f.cy);
        w.end_object();
        w.key("pose");
        w.begin_array();
        for (double v : f.pose.m) w.value_double(v);
        w.end_array();
        w.key("width");
        w.value_int(f.width);
        w.key("height");
        w.value_int(f.height);
        w.end_object();
    }
    w.end_array();
    w.key("mask_objects");
    w.begin_array();
    for (const auto& per_frame : scene.mask_objects) {
        w.begin_array();
        for (int o : per_frame) w.value_int(o);
        w.end_array();
    }
    w.end_array();
    w.end_object();
    return w.str();
}

PlantedTruth load_planted_truth(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("planted truth parse error: " + std::string(e.what()));
    }
    PlantedTruth truth;
    for (const auto& oj : j.at("objects")) {
        PlantedObject o;
        o.category = oj.at("category").get<std::string>();
        o.caption = oj.at("caption").get<std::string>();
        const auto lo = oj.at("box").at("min").get<std::vector<double>>();
        const auto hi = oj.at("box").at("max").get<std::vector<double>>();
        o.box.lo = {lo[0], lo[1], lo[2]};
        o.box.hi = {hi[0], hi[1], hi[2]};
        o.point_start = oj.at("point_start").get<int>();
        o.point_count = oj.at("point_count").get<int>();
        truth.objects.push_back(std::move(o));
    }
    for (const auto& rj : j.at("relations"))
        truth.relations.push_back({rj.at("a").get<int>(), rj.at("b").get<int>(),
                                   rj.at("relation").get<std::string>()});
    for (const auto& qj : j.at("queries"))
        truth.queries.push_back({qj.at("query_id").get<std::string>(),
                                 qj.at("text").get<std::string>(),
                                 qj.at("gt_object").get<int>()});
    for (const auto& fj : j.at("frames")) {
        CameraFrame f;
        f.frame_id = fj.at("frame_id").get<int>();
        f.fx = fj.at("intrinsics").at("fx").get<double>();
        f.fy = fj.at("intrinsics").at("fy").get<double>();
        f.cx = fj.at("intrinsics").at("cx").get<double>();
        f.cy = fj.at("intrinsics").at("cy").get<double>();
        const auto pose = fj.at("pose").get<std::vector<double>>();
        std::copy(pose.begin(), pose.end(), f.pose.m.begin());
        f.width = fj.at("width").get<int>();
        f.height = fj.at("height").get<int>();
        truth.frames.push_back(std::move(f));
    }
    for (const auto& mj : j.at("mask_objects"))
        truth.mask_objects.push_back(mj.get<std::vector<int>>());
    return truth;
}

std::string write_planted_scene(const PlantedScene& scene, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "masks");
    fs::create_directories(fs::path(dir) / "depth");

    io::save_ply((fs::path(dir) / "cloud.ply").string(), scene.capture.cloud);

    std::vector<std::vector<std::string>> mask_files(scene.capture.frames.size());
    std::vector<std::string> depth_files(scene.capture.frames.size());
    for (size_t f = 0; f < scene.capture.frames.size(); ++f) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "depth/frame_%04zu.f32", f);
        depth_files[f] = buf;
        io::save_depth_raster((fs::path(dir) / buf).string(), scene.capture.frames[f].depth);
        for (size_t m = 0; m < scene.capture.masks[f].size(); ++m) {
            std::snprintf(buf, sizeof(buf), "masks/frame_%04zu_mask_%02zu.png", f, m);
            mask_files[f].push_back(buf);
            io::save_mask_png((fs::path(dir) / buf).string(), scene.capture.masks[f][m]);
        }
    }

    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    io::save_manifest(manifest_path, scene.capture, "cloud.ply", mask_files, depth_files);
    io::atomic_write_file((fs::path(dir) / "planted.json").string(),
                          serialize_planted_truth(scene));

    // Query batch: one {query_id, text, gt_box} per line.
    std::string batch;
    for (const PlantedQuery& q : scene.queries) {
        io::JsonWriter w;
        w.begin_object();
        w.key("query_id");
        w.value_string(q.query_id);
        w.key("text");
        w.value_string(q.text);
        w.key("gt_box");
        w.begin_object();
        const Box3D& box = scene.objects[q.gt_object].box;
        w.key("min");
        w.begin_array();
        w.value_double(box.lo.x);
        w.value_double(box.lo.y);
        w.value_double(box.lo.z);
        w.end_array();
        w.key("max");
        w.begin_array();
        w.value_double(box.hi.x);
        w.value_double(box.hi.y);
        w.value_double(box.hi.z);
        w.end_array();
        w.end_object();
        w.end_object();
        batch += w.str();
        batch += '\n';
    }
    io::atomic_write_file((fs::path(dir) / "queries.jsonl").string(), batch);
    return manifest_path;
}

SceneGraph planted_ground_truth_graph(const PlantedTruth& truth, EmbeddingProvider& embedder) {
    SceneGraph graph;
    for (size_t i = 0; i < truth.objects.size(); ++i) {
        const PlantedObject& o = truth.objects[i];
        Node node;
        node.id = static_cast<int>(i);
        node.semantic_label = o.category;
        node.caption = o.caption;
        node.box = o.box;
        node.feature = embedder.embed_text(o.category);
        for (int p = o.point_start; p < o.point_start + o.point_count; ++p)
            node.point_indices.push_back(p);
        graph.nodes.push_back(std::move(node));
    }

    const int n = static_cast<int>(graph.nodes.size());
    if (n >= 2) {
        Matrix weights(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                weights.at(i, j) = 1.0 - box_iou(graph.nodes[i].box, graph.nodes[j].box) +
                                   0.001 * center_distance(graph.nodes[i].box, graph.nodes[j].box);
            }
        const auto mst = minimum_spanning_tree(weights);
        std::set<std::pair<int, int>> kept(mst.begin(), mst.end());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (box_iou(graph.nodes[i].box, graph.nodes[j].box) > 0.05) kept.insert({i, j});
        for (const auto& [i, j] : kept) {
            Edge e;
            e.a = i;
            e.b = j;
            e.relation =
                geometric_relation(graph.nodes[i].box, graph.nodes[j].box, truth.frames[0]);
            e.distance = center_distance(graph.nodes[i].box, graph.nodes[j].box);
            graph.edges.push_back(std::move(e));
        }
    }
    graph.scene_caption = "planted scene";
    return graph;
}

// ---------------------------------------------------------------------------
// oracle provider

namespace {

struct ParsedQuery {
    std::string subject_cat, object_cat, relation;
    bool valid = false;
};

ParsedQuery parse_query_grammar(const std::string& text) {
    ParsedQuery out;
    const std::vector<std::string> rels = {"near",   "left of",    "right of",
                                           "in front of", "behind", "on",
                                           "closest to",  "farthest from"};
    for (const std::string& rel : rels) {
        const std::string needle = " " + rel + " the ";
        const auto at = text.find(needle);
        if (at == std::string::npos) continue;
        std::string subject = text.substr(0, at);
        const auto lead = subject.rfind("the ");
        if (lead != std::string::npos) subject = subject.substr(lead + 4);
        out.subject_cat = agents::normalize_category(subject);
        out.object_cat = agents::normalize_category(text.substr(at + needle.size()));
        out.relation = rel;
        out.valid = !out.subject_cat.empty() && !out.object_cat.empty();
        return out;
    }
    return out;
}

struct MetaNode {
    int id = 0;
    std::string label;
    Box3D box;
};

std::vector<MetaNode> parse_meta_nodes(const nlohmann::json& list) {
    std::vector<MetaNode> nodes;
    for (const auto& nj : list) {
        MetaNode n;
        n.id = nj.at("id").get<int>();
        n.label = agents::normalize_category(nj.at("label").get<std::string>());
        const auto lo = nj.at("box").at("min").get<std::vector<double>>();
        const auto hi = nj.at("box").at("max").get<std::vector<double>>();
        n.box.lo = {lo[0], lo[1], lo[2]};
        n.box.hi = {hi[0], hi[1], hi[2]};
        nodes.push_back(std::move(n));
    }
    return nodes;
}

// Higher is better; applies the threshold rules to node boxes.
double relation_score(const std::string& rel, const Box3D& s, const Box3D& o,
                      const CameraFrame& frame0) {
    if (rel == "near") return -center_distance(s, o);
    if (rel == "on") return -std::fabs(s.lo.z - o.hi.z) + (xy_overlap(s, o) ? 0.0 : -100.0);
    const Frame0Projection ps = project_center(s, frame0);
    const Frame0Projection po = project_center(o, frame0);
    if (!ps.valid || !po.valid) return -1e9;
    if (rel == "left of") return po.px - ps.px;
    if (rel == "right of") return ps.px - po.px;
    if (rel == "in front of") return po.zc - ps.zc;
    if (rel == "behind") return ps.zc - po.zc;
    return -1e9;
}

// Resolves the query against node boxes: the subject best satisfying the
// relation, and the object instance it satisfies it with.
struct Resolution {
    const MetaNode* subject = nullptr;
    const MetaNode* object = nullptr;
};

Resolution resolve_relation(const std::string& rel, const std::vector<const MetaNode*>& subjects,
                            const std::vector<const MetaNode*>& objects,
                            const CameraFrame& frame0) {
    Resolution out;
    if (subjects.empty()) return out;
    if (rel == "closest to" || rel == "farthest from") {
        const bool closest = rel == "closest to";
        double best_metric = closest ? 1e18 : -1e18;
        for (const MetaNode* s : subjects) {
            double metric = 1e18;
            const MetaNode* nearest = nullptr;
            for (const MetaNode* o : objects) {
                if (o->id == s->id) continue;
                const double d = center_distance(s->box, o->box);
                if (d < metric) {
                    metric = d;
                    nearest = o;
                }
            }
            if (nearest == nullptr) continue;
            if ((closest && metric < best_metric) || (!closest && metric > best_metric)) {
                best_metric = metric;
                out.subject = s;
                out.object = nearest;
            }
        }
        return out;
    }
    double best = -1e18;
    for (const MetaNode* s : subjects)
        for (const MetaNode* o : objects) {
            if (s->id == o->id) continue;
            const double score = relation_score(rel, s->box, o->box, frame0);
            if (score > best) {
                best = score;
                out.subject = s;
                out.object = o;
            }
        }
    return out;
}

}  // namespace

OracleProvider::OracleProvider(PlantedTruth truth) : truth_(std::move(truth)) {}

std::string OracleProvider::complete(const agents::AgentRequest& request) {
    const std::string& task = request.task;
    const nlohmann::json& meta = request.meta;

    if (task == "list_objects") {
        const int frame_id = meta.at("frame_id").get<int>();
        std::vector<std::string> cats;
        if (frame_id >= 0 && frame_id < static_cast<int>(truth_.mask_objects.size()))
            for (int obj : truth_.mask_objects[frame_id]) {
                const std::string& cat = truth_.objects[obj].category;
                if (std::find(cats.begin(), cats.end(), cat) == cats.end())
                    cats.push_back(cat);
            }
        std::string out;
        for (size_t i = 0; i < cats.size(); ++i) out += (i ? ", " : "") + cats[i];
        return out.empty() ? "nothing" : out;
    }

    if (task == "caption_view") {
        const int frame_id = meta.at("frame_id").get<int>();
        const int mask_index = meta.at("mask_index").get<int>();
        return truth_.objects[truth_.mask_objects.at(frame_id).at(mask_index)].caption;
    }

    if (task == "caption_distill") {
        const auto& views = meta.at("views");
        const int frame_id = views.at(0).at("frame_id").get<int>();
        const int mask_index = views.at(0).at("mask_index").get<int>();
        return truth_.objects[truth_.mask_objects.at(frame_id).at(mask_index)].caption;
    }

    if (task == "relation") {
        auto parse_box = [](const nlohmann::json& bj) {
            const auto lo = bj.at("min").get<std::vector<double>>();
            const auto hi = bj.at("max").get<std::vector<double>>();
            return Box3D{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
        };
        return geometric_relation(parse_box(meta.at("a_box")), parse_box(meta.at("b_box")),
                                  truth_.frames.at(0));
    }

    if (task == "scene_caption") {
        std::string out;
        for (size_t i = 0; i < truth_.objects.size(); ++i)
            out += (i ? ". " : "") + truth_.objects[i].caption;
        return out;
    }

    if (task == "stage1") {
        const ParsedQuery q = parse_query_grammar(meta.at("query").get<std::string>());
        const std::vector<MetaNode> nodes = parse_meta_nodes(meta.at("nodes"));
        nlohmann::json out;
        out["candidates"] = nlohmann::json::array();
        out["relations"] = nlohmann::json::array();
        if (!q.valid) {
            for (const MetaNode& n : nodes) out["candidates"].push_back(n.id);
            out["rationale"] = "unparsed query; all objects are candidates";
            return out.dump();
        }
        std::vector<const MetaNode*> subjects, objects;
        for (const MetaNode& n : nodes) {
            if (n.label == q.subject_cat) subjects.push_back(&n);
            if (n.label == q.object_cat) objects.push_back(&n);
        }
        for (const MetaNode* n : subjects) out["candidates"].push_back(n->id);
        for (const MetaNode* n : objects)
            if (n->label != q.subject_cat) out["candidates"].push_back(n->id);

        const Resolution res = resolve_relation(q.relation, subjects, objects, truth_.frames[0]);
        if (res.subject != nullptr)
            out["relations"].push_back({{"subject", res.subject->id},
                                        {"relation", q.relation},
                                        {"object", res.object->id}});
        out["rationale"] = "candidates are all " + q.subject_cat + " and " + q.object_cat +
                           " instances";
        return out.dump();
    }

    if (task == "stage2") {
        const ParsedQuery q = parse_query_grammar(meta.at("query").get<std::string>());
        const std::vector<MetaNode> candidates = parse_meta_nodes(meta.at("candidates"));
        nlohmann::json out;
        if (!q.valid || candidates.empty()) {
            out["target"] = candidates.empty() ? -1 : candidates.front().id;
            out["rationale"] = "fallback: first candidate";
            return out.dump();
        }
        std::vector<const MetaNode*> subjects, objects;
        for (const MetaNode& n : candidates) {
            if (n.label == q.subject_cat) subjects.push_back(&n);
            if (n.label == q.object_cat) objects.push_back(&n);
        }
        if (subjects.empty()) {
            out["target"] = candidates.front().id;
            out["rationale"] = "no candidate matches the subject category";
            return out.dump();
        }
        const Resolution res = resolve_relation(q.relation, subjects, objects, truth_.frames[0]);
        out["target"] = res.subject != nullptr ? res.subject->id : subjects.front()->id;
        out["rationale"] = "the " + q.subject_cat + " best satisfying \"" + q.relation +
                           "\" relative to the " + q.object_cat;
        return out.dump();
    }

    return "unscripted-oracle:" + task;
}

}  // namespace freeq::eval
