// freeq tests - reasoning: two-stage query protocol, candidate filtering,
// degraded fallback, and prompt content requirements.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "freeq/eval.hpp"
#include "freeq/reasoning.hpp"

using namespace freeq;

namespace {

SceneGraph two_desks_and_window() {
    SceneGraph graph;
    auto add = [&](int id, const std::string& label, Vec3 center) {
        Node node;
        node.id = id;
        node.semantic_label = label;
        node.caption = "a " + label;
        node.box = {center - Vec3{0.5, 0.5, 0.5}, center + Vec3{0.5, 0.5, 0.5}};
        node.point_indices = {id};
        node.feature = mock_embed(label, 64, 0);
        graph.nodes.push_back(node);
    };
    add(0, "desk", {0, 0, 0.5});    // far from the window
    add(1, "desk", {4, 0, 0.5});    // near the window
    add(2, "window", {5, 0, 1.5});
    Edge e;
    e.a = 1;
    e.b = 2;
    e.relation = "near";
    e.distance = center_distance(graph.nodes[1].box, graph.nodes[2].box);
    graph.edges.push_back(e);
    graph.scene_caption = "a room with two desks and a window";
    return graph;
}

class ScriptedJson final : public agents::AgentProvider {
public:
    explicit ScriptedJson(std::string stage1, std::string stage2 = "")
        : stage1_(std::move(stage1)), stage2_(std::move(stage2)) {}
    std::string complete(const agents::AgentRequest& request) override {
        last_request = request;
        return request.task == "stage1" ? stage1_ : stage2_;
    }
    std::string name() const override { return "scripted"; }
    agents::AgentRequest last_request;

private:
    std::string stage1_, stage2_;
};

}  // namespace

TEST_CASE("stage1: prompt carries scene caption, object list, and the query") {
    const SceneGraph graph = two_desks_and_window();
    ScriptedJson provider(R"({"candidates":[0,1,2],"relations":[]})");
    const Query query{"the desk near the window"};
    const Stage1Result result = stage1_analyze(query, graph, provider, nullptr);
    CHECK(result.candidate_ids == std::vector<int>{0, 1, 2});

    const std::string& prompt = provider.last_request.messages.back().text;
    CHECK(prompt.find("a room with two desks and a window") != std::string::npos);
    CHECK(prompt.find("the desk near the window") != std::string::npos);
    CHECK(prompt.find("id 0") != std::string::npos);
    CHECK(prompt.find("id 2") != std::string::npos);
    CHECK(prompt.find("box") != std::string::npos);
}

TEST_CASE("stage1: ids outside the graph are filtered; all filtered fails") {
    const SceneGraph graph = two_desks_and_window();
    ScriptedJson partial(R"({"candidates":[1,99],"relations":[]})");
    const Stage1Result kept = stage1_analyze({"any"}, graph, partial, nullptr);
    CHECK(kept.candidate_ids == std::vector<int>{1});

    ScriptedJson bogus(R"({"candidates":[99],"relations":[]})");
    CHECK_THROWS_AS(stage1_analyze({"any"}, graph, bogus, nullptr), ParseFailure);
}

TEST_CASE("stage1: single-node graph yields that node") {
    SceneGraph graph = two_desks_and_window();
    graph.edges.clear();
    graph.nodes.resize(1);
    ScriptedJson provider(R"({"candidates":[0],"relations":[]})");
    const Stage1Result result = stage1_analyze({"anything"}, graph, provider, nullptr);
    CHECK(result.candidate_ids == std::vector<int>{0});
}

TEST_CASE("stage1: empty graph raises EmptyGraph") {
    SceneGraph graph;
    ScriptedJson provider("{}");
    CHECK_THROWS_AS(stage1_analyze({"q"}, graph, provider, nullptr), EmptyGraph);
}

TEST_CASE("stage2: prompt carries relations, boxes, and centroid distances") {
    const SceneGraph graph = two_desks_and_window();
    Stage1Result stage1;
    stage1.candidate_ids = {0, 1};
    stage1.relation_queries.push_back({1, "near", 2});
    ScriptedJson provider("", R"({"target":1,"rationale":"closer to the window"})");
    const Answer answer = stage2_reason({"the desk near the window"}, graph, stage1, provider,
                                        nullptr);
    CHECK(answer.target_id == 1);
    CHECK(answer.target_label == "desk");
    CHECK(answer.rationale == "closer to the window");

    const std::string& prompt = provider.last_request.messages.back().text;
    CHECK(prompt.find("distance to candidate centroid") != std::string::npos);
    CHECK(prompt.find("near -> id 2") != std::string::npos);  // incident relation
    CHECK(prompt.find("box") != std::string::npos);
}

TEST_CASE("stage2: non-candidate target raises NotACandidate") {
    const SceneGraph graph = two_desks_and_window();
    Stage1Result stage1;
    stage1.candidate_ids = {0, 1};
    ScriptedJson provider("", R"({"target":2,"rationale":"wrong"})");
    CHECK_THROWS_AS(stage2_reason({"q"}, graph, stage1, provider, nullptr), NotACandidate);
}

TEST_CASE("stage2: single candidate is a forced choice") {
    const SceneGraph graph = two_desks_and_window();
    Stage1Result stage1;
    stage1.candidate_ids = {2};
    ScriptedJson provider("", R"({"target":2,"rationale":"only option"})");
    const Answer answer = stage2_reason({"the window"}, graph, stage1, provider, nullptr);
    CHECK(answer.target_id == 2);
}

TEST_CASE("answer_query: degraded fallback when stage 1 fails to parse") {
    const SceneGraph graph = two_desks_and_window();
    class DegradedProvider final : public agents::AgentProvider {
    public:
        std::string complete(const agents::AgentRequest& request) override {
            if (request.task == "stage1") return "this is not json";
            return R"({"target":0,"rationale":"picked"})";
        }
        std::string name() const override { return "degraded"; }
    };
    DegradedProvider provider;
    const Answer answer = answer_query({"pick something"}, graph, provider, nullptr);
    CHECK(answer.target_id == 0);
    CHECK(answer.rationale.find("degraded") != std::string::npos);
}

TEST_CASE("answer_query: oracle resolves the relational query geometrically") {
    const SceneGraph graph = two_desks_and_window();
    eval::PlantedTruth truth;
    // The oracle only needs frame 0 for view-dependent relations.
    CameraFrame frame0;
    frame0.frame_id = 0;
    frame0.width = frame0.height = 64;
    frame0.fx = frame0.fy = 32;
    frame0.cx = frame0.cy = 32;
    truth.frames.push_back(frame0);

    eval::OracleProvider oracle(truth);
    agents::TranscriptLog log;
    const Answer answer = answer_query({"the desk near the window"}, graph, oracle, &log);
    CHECK(answer.target_id == 1);  // the desk whose center is nearest the window
    CHECK_FALSE(answer.transcripts.empty());

    // Repeated calls agree (pure function of graph and query).
    const Answer again = answer_query({"the desk near the window"}, graph, oracle, nullptr);
    CHECK(again.target_id == answer.target_id);
}

TEST_CASE("answer_query: empty query is rejected") {
    const SceneGraph graph = two_desks_and_window();
    ScriptedJson provider("{}");
    CHECK_THROWS_AS(answer_query({"   "}, graph, provider, nullptr), FormatError);
}

TEST_CASE("stage1: node cap truncates the object list by query cosine") {
    SceneGraph graph;
    for (int i = 0; i < 12; ++i) {
        Node node;
        node.id = i;
        node.semantic_label = i == 7 ? "piano" : "crate";
        node.caption = "a " + node.semantic_label;
        node.box = {{1.0 * i, 0, 0}, {1.0 * i + 0.5, 0.5, 0.5}};
        node.point_indices = {i};
        node.feature = mock_embed(node.semantic_label, 64, 0);
        graph.nodes.push_back(node);
    }
    graph.scene_caption = "a storage room";

    ScriptedJson provider(R"({"candidates":[7],"relations":[]})");
    MockEmbeddingProvider embedder(64, 0);
    ReasoningConfig config;
    config.node_cap = 3;
    const Stage1Result result =
        stage1_analyze({"piano"}, graph, provider, nullptr, config, &embedder);
    CHECK(result.candidate_ids == std::vector<int>{7});

    // The piano outranks the crates for the query "piano", so it survives the
    // cut; most crates must be gone.
    const std::string& prompt = provider.last_request.messages.back().text;
    CHECK(prompt.find("piano") != std::string::npos);
    CHECK(prompt.find("truncated") != std::string::npos);
    int listed = 0;
    for (size_t at = prompt.find("- id"); at != std::string::npos;
         at = prompt.find("- id", at + 1))
        listed++;
    CHECK(listed == 3);

    // Without an embedder the cap cannot be applied.
    CHECK_THROWS_AS(stage1_analyze({"piano"}, graph, provider, nullptr, config, nullptr),
                    FormatError);
}
