// freeq - reasoning.cpp

#include "freeq/reasoning.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace freeq {

void Query::validate() const {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw FormatError("query text must be non-empty");
}

namespace {

std::string box_text(const Box3D& box) {
    std::ostringstream ss;
    ss << "[" << box.lo.x << ", " << box.lo.y << ", " << box.lo.z << "] - [" << box.hi.x << ", "
       << box.hi.y << ", " << box.hi.z << "]";
    return ss.str();
}

nlohmann::json node_meta(const Node& node) {
    const Vec3 c = node.box.center();
    return {{"id", node.id},
            {"label", node.semantic_label},
            {"center", {c.x, c.y, c.z}},
            {"box",
             {{"min", {node.box.lo.x, node.box.lo.y, node.box.lo.z}},
              {"max", {node.box.hi.x, node.box.hi.y, node.box.hi.z}}}}};
}

// The serialized object list is capped; overflowing graphs rank nodes by
// query cosine and truncate.
std::vector<const Node*> select_nodes(const SceneGraph& graph, const Query& query, int cap,
                                      EmbeddingProvider* embedder, bool& truncated) {
    std::vector<const Node*> nodes;
    nodes.reserve(graph.nodes.size());
    for (const Node& n : graph.nodes) nodes.push_back(&n);
    truncated = false;
    if (static_cast<int>(nodes.size()) <= cap) return nodes;
    if (embedder == nullptr)
        throw FormatError("node cap exceeded and no embedder available for ranking");
    const Feature qf = embedder->embed_text(query.text);
    std::vector<std::pair<double, const Node*>> ranked;
    ranked.reserve(nodes.size());
    for (const Node* n : nodes) ranked.push_back({cosine(n->feature, qf), n});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    nodes.clear();
    for (int i = 0; i < cap; ++i) nodes.push_back(ranked[i].second);
    std::sort(nodes.begin(), nodes.end(),
              [](const Node* x, const Node* y) { return x->id < y->id; });
    truncated = true;
    return nodes;
}

}  // namespace

Stage1Result stage1_analyze(const Query& query, const SceneGraph& graph,
                            agents::AgentProvider& provider, agents::TranscriptLog* log,
                            const ReasoningConfig& config, EmbeddingProvider* embedder) {
    query.validate();
    if (graph.nodes.empty()) throw EmptyGraph("stage1_analyze on an empty graph");

    bool truncated = false;
    const std::vector<const Node*> nodes =
        select_nodes(graph, query, config.node_cap, embedder, truncated);

    std::set<int> valid_ids;
    agents::AgentRequest req;
    req.task = "stage1";
    req.response_format = "stage1_schema";
    req.max_retries = config.max_retries;
    {
        nlohmann::json meta_nodes = nlohmann::json::array();
        for (const Node* n : nodes) {
            meta_nodes.push_back(node_meta(*n));
            valid_ids.insert(n->id);
        }
        req.meta = {{"query", query.text}, {"nodes", std::move(meta_nodes)}};
    }

    std::ostringstream prompt;
    prompt << "Scene: " << graph.scene_caption << "\n\nObjects:\n";
    for (const Node* n : nodes)
        prompt << "- id " << n->id << " (" << n->semantic_label << "): " << n->caption
               << ", box " << box_text(n->box) << "\n";
    if (truncated) prompt << "(object list truncated to the most query-relevant entries)\n";
    prompt << "\nQuery: \"" << query.text << "\"\n\n"
           << "Decompose the query: list the ids of candidate target objects and the relation "
              "queries connecting them. Respond with JSON only: "
              "{\"candidates\": [int], \"relations\": [{\"subject\": int, \"relation\": "
              "\"text\", \"object\": int or null}]}";
    req.messages.push_back(
        {"system", "You analyze 3D scenes and decompose spatial queries.", ""});
    req.messages.push_back({"user", prompt.str(), ""});

    Stage1Result result;
    auto accept = [&](const std::string& raw) {
        const auto parsed = agents::try_parse_json(raw);
        if (!parsed) return false;
        result.candidate_ids.clear();
        result.relation_queries.clear();
        try {
            for (const auto& c : parsed->at("candidates")) {
                const int id = c.get<int>();
                if (valid_ids.count(id)) result.candidate_ids.push_back(id);
            }
            for (const auto& r : parsed->value("relations", nlohmann::json::array())) {
                RelationQuery rq;
                rq.subject = r.at("subject").get<int>();
                rq.relation = r.at("relation").get<std::string>();
                if (r.contains("object") && !r.at("object").is_null())
                    rq.object = r.at("object").get<int>();
                if (!valid_ids.count(rq.subject)) continue;
                if (rq.object && !valid_ids.count(*rq.object)) continue;
                result.relation_queries.push_back(std::move(rq));
            }
            if (parsed->contains("rationale"))
                result.rationale = parsed->at("rationale").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            return false;
        }
        // All ids filtered out means the response referenced nothing real.
        return !result.candidate_ids.empty();
    };
    agents::complete_validated(req, provider, log, accept);

    std::sort(result.candidate_ids.begin(), result.candidate_ids.end());
    result.candidate_ids.erase(
        std::unique(result.candidate_ids.begin(), result.candidate_ids.end()),
        result.candidate_ids.end());
    return result;
}

Answer stage2_reason(const Query& query, const SceneGraph& graph, const Stage1Result& stage1,
                     agents::AgentProvider& provider, agents::TranscriptLog* log,
                     const ReasoningConfig& config) {
    query.validate();
    if (stage1.candidate_ids.empty()) throw FormatError("stage2_reason needs candidates");

    std::vector<const Node*> candidates;
    for (int id : stage1.candidate_ids) {
        const Node* n = graph.find_node(id);
        if (n == nullptr) throw FormatError("candidate id missing from graph");
        candidates.push_back(n);
    }

    Vec3 centroid{};
    for (const Node* n : candidates) centroid = centroid + n->box.center();
    centroid = centroid / static_cast<double>(candidates.size());

    agents::AgentRequest req;
    req.task = "stage2";
    req.response_format = "stage2_schema";
    req.max_retries = config.max_retries;
    {
        nlohmann::json meta_candidates = nlohmann::json::array();
        for (const Node* n : candidates) meta_candidates.push_back(node_meta(*n));
        nlohmann::json meta_relations = nlohmann::json::array();
        for (const RelationQuery& rq : stage1.relation_queries)
            meta_relations.push_back({{"subject", rq.subject},
                                      {"relation", rq.relation},
                                      {"object", rq.object ? nlohmann::json(*rq.object)
                                                           : nlohmann::json(nullptr)}});
        req.meta = {{"query", query.text},
                    {"candidates", std::move(meta_candidates)},
                    {"relations", std::move(meta_relations)},
                    {"centroid", {centroid.x, centroid.y, centroid.z}}};
    }

    std::ostringstream prompt;
    prompt << "Query: \"" << query.text << "\"\n\nCandidates:\n";
    for (const Node* n : candidates) {
        prompt << "- id " << n->id << " (" << n->semantic_label << "): " << n->caption
               << "\n  box " << box_text(n->box) << ", distance to candidate centroid "
               << distance(n->box.center(), centroid) << " m\n  relations:";
        bool any = false;
        for (const Edge& e : graph.edges) {
            if (e.a != n->id && e.b != n->id) continue;
            const int other = e.a == n->id ? e.b : e.a;
            prompt << " [" << e.relation << " -> id " << other << ", " << e.distance << " m]";
            any = true;
        }
        if (!any) prompt << " none";
        prompt << "\n";
    }
    if (!stage1.relation_queries.empty()) {
        prompt << "\nRelation queries from the analysis stage:\n";
        for (const RelationQuery& rq : stage1.relation_queries) {
            prompt << "- subject " << rq.subject << " \"" << rq.relation << "\"";
            if (rq.object) prompt << " object " << *rq.object;
            prompt << "\n";
        }
    }
    prompt << "\nPick the single candidate that answers the query. Respond with JSON only: "
              "{\"target\": int, \"rationale\": \"text\"}";
    req.messages.push_back({"system", "You resolve spatial queries over 3D scene graphs.", ""});
    req.messages.push_back({"user", prompt.str(), ""});

    int target = 0;
    std::string rationale;
    auto accept = [&](const std::string& raw) {
        const auto parsed = agents::try_parse_json(raw);
        if (!parsed) return false;
        try {
            target = parsed->at("target").get<int>();
            rationale = parsed->value("rationale", "");
        } catch (const nlohmann::json::exception&) {
            return false;
        }
        return true;
    };
    agents::complete_validated(req, provider, log, accept);

    if (std::find(stage1.candidate_ids.begin(), stage1.candidate_ids.end(), target) ==
        stage1.candidate_ids.end())
        throw NotACandidate("stage 2 chose id " + std::to_string(target) +
                            " outside the candidate set");

    const Node* chosen = graph.find_node(target);
    Answer answer;
    answer.target_id = target;
    answer.target_label = chosen->semantic_label;
    answer.target_caption = chosen->caption;
    answer.target_box = chosen->box;
    answer.rationale = stage1.degraded
                           ? "degraded: stage 1 parse failure, all nodes considered. " + rationale
                           : rationale;
    return answer;
}

Answer answer_query(const Query& query, const SceneGraph& graph,
                    agents::AgentProvider& provider, agents::TranscriptLog* log,
                    const ReasoningConfig& config, EmbeddingProvider* embedder) {
    query.validate();
    if (graph.nodes.empty()) throw EmptyGraph("answer_query on an empty graph");

    Stage1Result stage1;
    try {
        stage1 = stage1_analyze(query, graph, provider, log, config, embedder);
    } catch (const ParseFailure&) {
        stage1.degraded = true;
        for (const Node& n : graph.nodes) stage1.candidate_ids.push_back(n.id);
        stage1.rationale = "stage 1 parse failure; considering all nodes";
    }
    Answer answer = stage2_reason(query, graph, stage1, provider, log, config);
    if (log != nullptr) answer.transcripts = log->snapshot();
    return answer;
}

}  // namespace freeq
