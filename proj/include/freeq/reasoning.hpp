// freeq - reasoning.hpp
// Two-stage query engine: scene+object analysis produces candidates and
// relation queries, then target reasoning picks the final node.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "freeq/agents.hpp"
#include "freeq/embeddings.hpp"
#include "freeq/scenegraph.hpp"

namespace freeq {

struct Query {
    std::string text;
    void validate() const;  // non-empty
};

struct RelationQuery {
    int subject = 0;
    std::string relation;
    std::optional<int> object;
};

struct Stage1Result {
    std::vector<int> candidate_ids;
    std::vector<RelationQuery> relation_queries;
    std::string rationale;
    bool degraded = false;  // stage 1 parse failed; all nodes became candidates
};

struct Answer {
    int target_id = 0;
    std::string target_label;
    std::string target_caption;
    Box3D target_box;
    std::string rationale;
    std::vector<agents::AgentTranscript> transcripts;
};

struct ReasoningConfig {
    int node_cap = 200;  // s_o entries beyond this are truncated by query cosine
    int max_retries = 2;
};

// Prompts with the scene caption and the full object-level list; the response
// must be JSON {candidates:[int], relations:[{subject, relation, object}]}.
// Ids outside the graph are filtered; an empty filtered set is a parse
// failure. Throws EmptyGraph on a graph without nodes.
Stage1Result stage1_analyze(const Query& query, const SceneGraph& graph,
                            agents::AgentProvider& provider, agents::TranscriptLog* log,
                            const ReasoningConfig& config = {},
                            EmbeddingProvider* embedder = nullptr);

// Prompts per candidate with caption, incident relations, box, and distance
// to the candidate centroid; response is JSON {target:int, rationale:str}.
// Throws NotACandidate when the chosen id is outside the candidate set.
Answer stage2_reason(const Query& query, const SceneGraph& graph, const Stage1Result& stage1,
                     agents::AgentProvider& provider, agents::TranscriptLog* log,
                     const ReasoningConfig& config = {});

// stage1 then stage2; a stage-1 parse failure degrades to all nodes as
// candidates rather than failing the query.
Answer answer_query(const Query& query, const SceneGraph& graph,
                    agents::AgentProvider& provider, agents::TranscriptLog* log,
                    const ReasoningConfig& config = {}, EmbeddingProvider* embedder = nullptr);

}  // namespace freeq
