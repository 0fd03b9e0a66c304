// freeq - agents.hpp
// LLM/LVLM interaction: request/transcript types, prompt-building operations,
// deterministic mock and replay backends, and the HTTP chat-completion client.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "freeq/errors.hpp"
#include "freeq/geometry.hpp"

namespace freeq::agents {

struct AgentMessage {
    std::string role;  // "system" | "user"
    std::string text;
    std::string image_data_url;  // optional base64 PNG data URL
};

struct AgentRequest {
    std::vector<AgentMessage> messages;
    std::string response_format = "free_text";  // or a json schema name
    int max_retries = 2;
    std::string task;         // transcript tag, e.g. "list_objects"
    nlohmann::json meta;      // structured params; oracle backends read these

    void validate() const;  // at least one user message, max_retries >= 0
};

// Stable hash over the wire-visible request content (messages + format).
std::uint64_t request_hash(const AgentRequest& request);

struct AgentTranscript {
    std::uint64_t request_hash = 0;
    std::string task;
    std::string raw_response;
    bool parsed_ok = false;
    int attempt_count = 0;
    std::string provider_name;
    double wall_ms = 0.0;
};

class AgentProvider {
public:
    virtual ~AgentProvider() = default;
    virtual std::string complete(const AgentRequest& request) = 0;
    virtual std::string name() const = 0;
};

// Append-only transcript recorder, ordered by completion.
class TranscriptLog {
public:
    void append(AgentTranscript t);
    std::vector<AgentTranscript> snapshot() const;
    void save_jsonl(const std::string& path) const;
    static std::vector<AgentTranscript> load_jsonl(const std::string& path);

private:
    mutable std::mutex mutex_;
    std::vector<AgentTranscript> entries_;
};

// Scripted responses keyed by request hash; unscripted requests produce a
// deterministic placeholder.
class MockProvider final : public AgentProvider {
public:
    MockProvider() = default;
    explicit MockProvider(std::map<std::uint64_t, std::string> fixture);
    static MockProvider from_fixture_file(const std::string& path);
    static void save_fixture_file(const std::string& path,
                                  const std::map<std::uint64_t, std::string>& fixture);

    void script(const AgentRequest& request, const std::string& response);
    std::string complete(const AgentRequest& request) override;
    std::string name() const override { return "mock"; }

private:
    std::map<std::uint64_t, std::string> fixture_;
};

// Replays a recorded transcript log in place of live calls.
class ReplayProvider final : public AgentProvider {
public:
    explicit ReplayProvider(const std::vector<AgentTranscript>& transcripts);
    static ReplayProvider from_log_file(const std::string& path);

    std::string complete(const AgentRequest& request) override;
    std::string name() const override { return "replay"; }

private:
    std::map<std::uint64_t, std::string> responses_;
};

// ---------------------------------------------------------------------------
// wire client

struct EndpointConfig {
    std::string api_base;  // e.g. http://localhost:8080/v1
    std::string api_key;
    std::string model;
    int backoff_base_ms = 1000;
    double backoff_factor = 2.0;
    int max_inflight = 4;

    static EndpointConfig from_env();  // FREEQ_API_BASE / FREEQ_API_KEY / FREEQ_MODEL
};

// POSTs {model, messages, temperature: 0} to {base}/chat/completions and
// returns the first choice's text. Retries network errors, 5xx, and 429 with
// exponential backoff up to request.max_retries extra attempts.
// 401/403 raise AuthError immediately.
std::string http_complete(const AgentRequest& request, const EndpointConfig& endpoint);

class HttpProvider final : public AgentProvider {
public:
    explicit HttpProvider(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}
    std::string complete(const AgentRequest& request) override {
        return http_complete(request, endpoint_);
    }
    std::string name() const override { return "http"; }

private:
    EndpointConfig endpoint_;
};

// ---------------------------------------------------------------------------
// completion wrapper + operations

// Runs the provider with parse-validation retries: on a rejected response the
// request is re-sent with a corrective instruction appended, up to
// max_retries extra attempts. Exactly one transcript is recorded per call,
// keyed by the hash of the original request so recorded logs replay cleanly.
// Throws ParseFailure when every attempt is rejected.
std::string complete_validated(const AgentRequest& request, AgentProvider& provider,
                               TranscriptLog* log,
                               const std::function<bool(const std::string&)>& accept);

// Plain node summary passed to relation/reasoning prompts.
struct NodeSummary {
    int id = 0;
    std::string label;
    std::string caption;
    Box3D box;
};

// One LVLM view of a node: which detection mask it came from plus the crop.
struct ViewCrop {
    int frame_id = 0;
    int mask_index = 0;
    std::array<int, 4> bbox{};       // expanded pixel bounds x0,y0,x1,y1
    std::string image_data_url;      // PNG crop when pixels are available
};

// Parses the comma/line-separated object list for one frame; case-insensitive
// deduplication, lowercased output. The prompt names the view and carries the
// frame image when one is available, so requests hash distinctly per frame.
std::vector<std::string> list_objects(const CameraFrame& frame, AgentProvider& provider,
                                      TranscriptLog* log, int max_retries = 2,
                                      const std::string& image_data_url = "");

// Two-stage captioning: per-view descriptions, then one LLM distillation.
// A single view passes through without distillation.
std::string caption_node(const std::vector<ViewCrop>& crops, AgentProvider& provider,
                         TranscriptLog* log, int max_retries = 2);

// Short spatial relation phrase between two summarized nodes.
std::string relation_label(const NodeSummary& a, const NodeSummary& b, AgentProvider& provider,
                           TranscriptLog* log, int max_retries = 2);

// Strips markdown fences and parses the first JSON object in the text.
std::optional<nlohmann::json> try_parse_json(const std::string& text);

// Lowercase, trim, and naive English singularization; shared by grounding
// and the oracle backend.
std::string normalize_category(const std::string& raw);

}  // namespace freeq::agents
