// freeq tests - agents: prompt ops with the mock backend, transcript
// replay, and the wire client against a local fixture HTTP server.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "freeq/agents.hpp"
#include "freeq/embeddings.hpp"
#include "freeq/io.hpp"

using namespace freeq;
using namespace freeq::agents;

namespace {

CameraFrame frame_with_id(int id) {
    CameraFrame frame;
    frame.frame_id = id;
    frame.width = frame.height = 32;
    frame.fx = frame.fy = 16;
    frame.cx = frame.cy = 16;
    return frame;
}

// Scripts the exact request an operation will send by replaying it against a
// capture provider first.
class CaptureProvider final : public AgentProvider {
public:
    std::string complete(const AgentRequest& request) override {
        last = request;
        return response;
    }
    std::string name() const override { return "capture"; }
    AgentRequest last;
    std::string response = "ok";
};

}  // namespace

TEST_CASE("list_objects: parses, lowercases, and deduplicates") {
    CaptureProvider capture;
    capture.response = "Desk, desk\nLamp; monitor";
    const auto listed = list_objects(frame_with_id(0), capture, nullptr);
    CHECK(listed == std::vector<std::string>{"desk", "lamp", "monitor"});

    // The prompt carries the protocol phrasing.
    CHECK(capture.last.messages.back().text.find("smaller or overlooked objects") !=
          std::string::npos);
    CHECK(capture.last.messages.back().text.find("list all the central objects") !=
          std::string::npos);

    capture.response = "   ";
    CHECK_THROWS_AS(list_objects(frame_with_id(0), capture, nullptr), ParseFailure);
}

TEST_CASE("caption_node: single view passes through, multi-view distills") {
    MockProvider mock;
    ViewCrop crop;
    crop.frame_id = 0;
    crop.mask_index = 0;
    crop.bbox = {1, 1, 8, 8};

    // Script the single-view request.
    CaptureProvider capture;
    capture.response = "a wooden desk";
    CHECK(caption_node({crop}, capture, nullptr) == "a wooden desk");
    CHECK(capture.last.task == "caption_view");
    CHECK(capture.last.messages.back().text.find("central object") != std::string::npos);

    // Three contradicting views: the distillation response wins verbatim.
    class TwoStage final : public AgentProvider {
    public:
        std::string complete(const AgentRequest& request) override {
            if (request.task == "caption_view")
                return "view-" + std::to_string(request.meta.at("frame_id").get<int>());
            CHECK(request.task == "caption_distill");
            return "the distilled caption";
        }
        std::string name() const override { return "two-stage"; }
    };
    TwoStage two_stage;
    ViewCrop crop2 = crop;
    crop2.frame_id = 1;
    ViewCrop crop3 = crop;
    crop3.frame_id = 2;
    CHECK(caption_node({crop, crop2, crop3}, two_stage, nullptr) == "the distilled caption");
}

TEST_CASE("relation_label: passthrough, prompt content, and error path") {
    CaptureProvider capture;
    capture.response = "on";
    NodeSummary a{1, "desk", "a desk", {{0, 0, 0}, {1, 1, 1}}};
    NodeSummary b{2, "lamp", "a lamp", {{0, 0, 1}, {1, 1, 2}}};
    CHECK(relation_label(a, b, capture, nullptr) == "on");
    CHECK(capture.last.messages.back().text.find("relationship between 1 and 2") !=
          std::string::npos);

    capture.response = "";
    CHECK_THROWS_AS(relation_label(a, b, capture, nullptr), ParseFailure);
}

TEST_CASE("transcripts: one per op call, replay reproduces responses") {
    CaptureProvider capture;
    capture.response = "desk, chair";
    TranscriptLog log;
    list_objects(frame_with_id(3), capture, &log);
    list_objects(frame_with_id(4), capture, &log);
    const auto entries = log.snapshot();
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].attempt_count == 1);
    CHECK(entries[0].parsed_ok);
    CHECK(entries[0].provider_name == "capture");
    CHECK(entries[0].request_hash != entries[1].request_hash);  // per-frame prompts

    // Round-trip through the JSONL format.
    const auto path = std::filesystem::temp_directory_path() / "freeq_transcripts.jsonl";
    log.save_jsonl(path.string());
    ReplayProvider replay = ReplayProvider::from_log_file(path.string());
    const auto replayed = list_objects(frame_with_id(3), replay, nullptr);
    CHECK(replayed == std::vector<std::string>{"desk", "chair"});
    std::filesystem::remove(path);
}

TEST_CASE("replay: unknown request raises ProviderUnavailable") {
    ReplayProvider replay{std::vector<AgentTranscript>{}};
    CHECK_THROWS_AS(list_objects(frame_with_id(9), replay, nullptr), ProviderUnavailable);
}

TEST_CASE("mock fixture file round-trip keys by request hash") {
    AgentRequest req;
    req.task = "t";
    req.messages.push_back({"user", "hello", ""});
    std::map<std::uint64_t, std::string> fixture = {{request_hash(req), "fixture answer"}};
    const auto path = std::filesystem::temp_directory_path() / "freeq_fixture.json";
    MockProvider::save_fixture_file(path.string(), fixture);
    MockProvider mock = MockProvider::from_fixture_file(path.string());
    CHECK(mock.complete(req) == "fixture answer");

    AgentRequest other = req;
    other.messages[0].text = "different";
    CHECK(mock.complete(other).rfind("unscripted:", 0) == 0);
    std::filesystem::remove(path);
}

TEST_CASE("request_hash: sensitive to content, stable across runs") {
    AgentRequest a;
    a.messages.push_back({"user", "alpha", ""});
    AgentRequest b = a;
    CHECK(request_hash(a) == request_hash(b));
    b.messages[0].text = "beta";
    CHECK(request_hash(a) != request_hash(b));
    b = a;
    b.response_format = "schema";
    CHECK(request_hash(a) != request_hash(b));
}

TEST_CASE("complete_validated: corrective retry then ParseFailure") {
    class AlwaysBad final : public AgentProvider {
    public:
        std::string complete(const AgentRequest& request) override {
            calls++;
            last_message_count = static_cast<int>(request.messages.size());
            return "";
        }
        std::string name() const override { return "bad"; }
        int calls = 0;
        int last_message_count = 0;
    };
    AlwaysBad bad;
    AgentRequest req;
    req.task = "x";
    req.max_retries = 2;
    req.messages.push_back({"user", "anything", ""});
    TranscriptLog log;
    CHECK_THROWS_AS(
        complete_validated(req, bad, &log, [](const std::string& raw) { return !raw.empty(); }),
        ParseFailure);
    CHECK(bad.calls == 3);                 // 1 + 2 retries
    CHECK(bad.last_message_count == 3);    // corrective instruction appended twice
    REQUIRE(log.snapshot().size() == 1);   // still exactly one transcript
    CHECK(log.snapshot()[0].attempt_count == 3);
    CHECK_FALSE(log.snapshot()[0].parsed_ok);
}

TEST_CASE("normalize_category: case, whitespace, plurals") {
    CHECK(normalize_category("  Desks ") == "desk");
    CHECK(normalize_category("Boxes") == "box");
    CHECK(normalize_category("SHELVES") == "shelf");
    CHECK(normalize_category("categories") == "category");
    CHECK(normalize_category("glass") == "glass");
    CHECK(normalize_category("1. lamp") == "lamp");
}

// ---------------------------------------------------------------------------
// wire client against a local fixture server

namespace {

struct FixtureServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};

    explicit FixtureServer(std::function<void(const httplib::Request&, httplib::Response&,
                                              int)> handler) {
        server.Post("/v1/chat/completions",
                    [this, handler](const httplib::Request& req, httplib::Response& res) {
                        handler(req, res, ++requests);
                    });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FixtureServer() {
        server.stop();
        thread.join();
    }

    EndpointConfig endpoint() const {
        EndpointConfig e;
        e.api_base = "http://127.0.0.1:" + std::to_string(port) + "/v1";
        e.api_key = "test-key";
        e.model = "fixture-model";
        e.backoff_base_ms = 2;  // fast retries in tests
        return e;
    }
};

std::string completion_body(const std::string& text) {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array(
        {{{"message", {{"role", "assistant"}, {"content", text}}}}});
    return j.dump();
}

AgentRequest simple_request(int max_retries = 1) {
    AgentRequest req;
    req.task = "wire";
    req.max_retries = max_retries;
    req.messages.push_back({"system", "sys", ""});
    req.messages.push_back({"user", "hello", ""});
    return req;
}

}  // namespace

TEST_CASE("http_complete: canned fixture body passes through") {
    FixtureServer fixture([](const httplib::Request&, httplib::Response& res, int) {
        res.set_content(completion_body("canned reply"), "application/json");
    });
    CHECK(http_complete(simple_request(), fixture.endpoint()) == "canned reply");
}

TEST_CASE("http_complete: temperature pinned to 0 and auth header present") {
    nlohmann::json seen_body;
    std::string seen_auth;
    FixtureServer fixture(
        [&](const httplib::Request& req, httplib::Response& res, int) {
            seen_body = nlohmann::json::parse(req.body);
            seen_auth = req.get_header_value("Authorization");
            res.set_content(completion_body("ok"), "application/json");
        });
    http_complete(simple_request(), fixture.endpoint());
    REQUIRE(seen_body.contains("temperature"));
    CHECK(seen_body["temperature"].get<double>() == 0.0);
    CHECK(seen_body["model"] == "fixture-model");
    CHECK(seen_body["messages"].size() == 2);
    CHECK(seen_auth == "Bearer test-key");
}

TEST_CASE("http_complete: 500 then 200 succeeds on the retry") {
    FixtureServer fixture([](const httplib::Request&, httplib::Response& res, int count) {
        if (count == 1) {
            res.status = 500;
            res.set_content("boom", "text/plain");
        } else {
            res.set_content(completion_body("recovered"), "application/json");
        }
    });
    CHECK(http_complete(simple_request(1), fixture.endpoint()) == "recovered");
    CHECK(fixture.requests.load() == 2);
}

TEST_CASE("http_complete: 401 raises AuthError with no retry") {
    FixtureServer fixture([](const httplib::Request&, httplib::Response& res, int) {
        res.status = 401;
        res.set_content("denied", "text/plain");
    });
    CHECK_THROWS_AS(http_complete(simple_request(3), fixture.endpoint()), AuthError);
    CHECK(fixture.requests.load() == 1);
}

TEST_CASE("http_complete: persistent 500 raises ProviderUnavailable after retries") {
    FixtureServer fixture([](const httplib::Request&, httplib::Response& res, int) {
        res.status = 503;
        res.set_content("down", "text/plain");
    });
    CHECK_THROWS_AS(http_complete(simple_request(2), fixture.endpoint()), ProviderUnavailable);
    CHECK(fixture.requests.load() == 3);
}

TEST_CASE("http_complete: 429 surfaces RateLimited after retries") {
    FixtureServer fixture([](const httplib::Request&, httplib::Response& res, int) {
        res.status = 429;
        res.set_content("slow down", "text/plain");
    });
    CHECK_THROWS_AS(http_complete(simple_request(1), fixture.endpoint()), RateLimited);
    CHECK(fixture.requests.load() == 2);
}

TEST_CASE("http_complete: image messages become data-URL content parts") {
    nlohmann::json seen_body;
    FixtureServer fixture([&](const httplib::Request& req, httplib::Response& res, int) {
        seen_body = nlohmann::json::parse(req.body);
        res.set_content(completion_body("ok"), "application/json");
    });
    AgentRequest req = simple_request();
    req.messages.back().image_data_url = "data:image/png;base64,AAAA";
    http_complete(req, fixture.endpoint());
    const auto& content = seen_body["messages"][1]["content"];
    REQUIRE(content.is_array());
    CHECK(content[0]["type"] == "text");
    CHECK(content[1]["type"] == "image_url");
    CHECK(content[1]["image_url"]["url"] == "data:image/png;base64,AAAA");
}
