// freeq - agents.cpp

#include "freeq/agents.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstring>
#include <condition_variable>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "freeq/embeddings.hpp"
#include "freeq/io.hpp"

namespace freeq::agents {

void AgentRequest::validate() const {
    if (max_retries < 0) throw FormatError("max_retries must be >= 0");
    for (const AgentMessage& m : messages)
        if (m.role == "user") return;
    throw FormatError("agent request needs at least one user message");
}

std::uint64_t request_hash(const AgentRequest& request) {
    std::string canon;
    for (const AgentMessage& m : request.messages) {
        canon += m.role;
        canon += '\x1f';
        canon += m.text;
        canon += '\x1f';
        canon += m.image_data_url;
        canon += '\x1e';
    }
    canon += request.response_format;
    return fnv1a64(canon);
}

void TranscriptLog::append(AgentTranscript t) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(t));
}

std::vector<AgentTranscript> TranscriptLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_;
}

void TranscriptLog::save_jsonl(const std::string& path) const {
    std::string out;
    for (const AgentTranscript& t : snapshot()) {
        nlohmann::json j;
        j["request_hash"] = hash_hex(t.request_hash);
        j["task"] = t.task;
        j["raw_response"] = t.raw_response;
        j["parsed_ok"] = t.parsed_ok;
        j["attempt_count"] = t.attempt_count;
        j["provider_name"] = t.provider_name;
        j["wall_ms"] = t.wall_ms;
        out += j.dump();
        out += '\n';
    }
    io::atomic_write_file(path, out);
}

std::vector<AgentTranscript> TranscriptLog::load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open transcript log " + path);
    std::vector<AgentTranscript> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        AgentTranscript t;
        t.request_hash = std::stoull(j.at("request_hash").get<std::string>(), nullptr, 16);
        t.task = j.value("task", "");
        t.raw_response = j.at("raw_response").get<std::string>();
        t.parsed_ok = j.value("parsed_ok", false);
        t.attempt_count = j.value("attempt_count", 1);
        t.provider_name = j.value("provider_name", "");
        t.wall_ms = j.value("wall_ms", 0.0);
        out.push_back(std::move(t));
    }
    return out;
}

MockProvider::MockProvider(std::map<std::uint64_t, std::string> fixture)
    : fixture_(std::move(fixture)) {}

MockProvider MockProvider::from_fixture_file(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_file(path));
    std::map<std::uint64_t, std::string> fixture;
    for (auto it = j.begin(); it != j.end(); ++it)
        fixture[std::stoull(it.key(), nullptr, 16)] = it.value().get<std::string>();
    return MockProvider(std::move(fixture));
}

void MockProvider::save_fixture_file(const std::string& path,
                                     const std::map<std::uint64_t, std::string>& fixture) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [hash, response] : fixture) j[hash_hex(hash)] = response;
    io::atomic_write_file(path, j.dump(2));
}

void MockProvider::script(const AgentRequest& request, const std::string& response) {
    fixture_[request_hash(request)] = response;
}

std::string MockProvider::complete(const AgentRequest& request) {
    const auto it = fixture_.find(request_hash(request));
    if (it != fixture_.end()) return it->second;
    return "unscripted:" + hash_hex(request_hash(request));
}

ReplayProvider::ReplayProvider(const std::vector<AgentTranscript>& transcripts) {
    for (const AgentTranscript& t : transcripts) responses_[t.request_hash] = t.raw_response;
}

ReplayProvider ReplayProvider::from_log_file(const std::string& path) {
    return ReplayProvider(TranscriptLog::load_jsonl(path));
}

std::string ReplayProvider::complete(const AgentRequest& request) {
    const auto it = responses_.find(request_hash(request));
    if (it == responses_.end())
        throw ProviderUnavailable("transcript log has no entry for request " +
                                  hash_hex(request_hash(request)));
    return it->second;
}

// ---------------------------------------------------------------------------
// wire client

EndpointConfig EndpointConfig::from_env() {
    EndpointConfig c;
    if (const char* v = std::getenv("FREEQ_API_BASE")) c.api_base = v;
    if (const char* v = std::getenv("FREEQ_API_KEY")) c.api_key = v;
    if (const char* v = std::getenv("FREEQ_MODEL")) c.model = v;
    return c;
}

namespace {

// Bounds concurrent wire requests; the limit is per-process.
class InflightGate {
public:
    void acquire(int limit) {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return inflight_ < limit; });
        ++inflight_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --inflight_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int inflight_ = 0;
};

InflightGate g_inflight;

struct SplitUrl {
    std::string host;  // scheme://host[:port]
    std::string path_prefix;
};

SplitUrl split_url(const std::string& base) {
    const auto scheme_end = base.find("://");
    if (scheme_end == std::string::npos)
        throw FormatError("endpoint URL needs a scheme: " + base);
    const auto path_start = base.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base, ""};
    std::string prefix = base.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base.substr(0, path_start), prefix};
}

nlohmann::json wire_body(const AgentRequest& request, const std::string& model) {
    nlohmann::json body;
    body["model"] = model;
    body["temperature"] = 0;  // pinned; never omitted
    body["messages"] = nlohmann::json::array();
    for (const AgentMessage& m : request.messages) {
        nlohmann::json msg;
        msg["role"] = m.role;
        if (m.image_data_url.empty()) {
            msg["content"] = m.text;
        } else {
            msg["content"] = nlohmann::json::array(
                {{{"type", "text"}, {"text", m.text}},
                 {{"type", "image_url"}, {"image_url", {{"url", m.image_data_url}}}}});
        }
        body["messages"].push_back(std::move(msg));
    }
    return body;
}

}  // namespace

std::string http_complete(const AgentRequest& request, const EndpointConfig& endpoint) {
    request.validate();
    if (endpoint.api_base.empty()) throw ProviderUnavailable("no API base configured");
    if (endpoint.model.empty()) throw ProviderUnavailable("no model configured");

    const SplitUrl url = split_url(endpoint.api_base);
    const std::string path = url.path_prefix + "/chat/completions";
    const std::string body = wire_body(request, endpoint.model).dump();

    httplib::Client client(url.host);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!endpoint.api_key.empty())
        headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    const int attempts_allowed = request.max_retries + 1;
    std::string last_error;
    bool rate_limited = false;
    for (int attempt = 0; attempt < attempts_allowed; ++attempt) {
        if (attempt > 0) {
            const double delay =
                endpoint.backoff_base_ms * std::pow(endpoint.backoff_factor, attempt - 1);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long>(delay)));
        }
        g_inflight.acquire(endpoint.max_inflight);
        auto result = client.Post(path, headers, body, "application/json");
        g_inflight.release();

        if (!result) {
            last_error = "network error: " + httplib::to_string(result.error());
            continue;
        }
        const int status = result->status;
        if (status == 401 || status == 403)
            throw AuthError("authentication rejected (HTTP " + std::to_string(status) + ")");
        if (status == 429) {
            rate_limited = true;
            last_error = "rate limited (HTTP 429)";
            continue;
        }
        if (status >= 500) {
            last_error = "server error (HTTP " + std::to_string(status) + ")";
            continue;
        }
        if (status != 200)
            throw ProviderUnavailable("unexpected HTTP " + std::to_string(status) + ": " +
                                      result->body);
        try {
            nlohmann::json j = nlohmann::json::parse(result->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseFailure(std::string("malformed completion body: ") + e.what());
        }
    }
    if (rate_limited) throw RateLimited(last_error + " after retries");
    throw ProviderUnavailable(last_error + " after retries");
}

// ---------------------------------------------------------------------------
// completion wrapper

std::string complete_validated(const AgentRequest& request, AgentProvider& provider,
                               TranscriptLog* log,
                               const std::function<bool(const std::string&)>& accept) {
    request.validate();
    const std::uint64_t original_hash = request_hash(request);
    const auto start = std::chrono::steady_clock::now();

    AgentRequest current = request;
    std::string raw;
    bool ok = false;
    int attempts = 0;
    for (; attempts < request.max_retries + 1; ) {
        raw = provider.complete(current);
        ++attempts;
        if (accept(raw)) {
            ok = true;
            break;
        }
        AgentMessage corrective;
        corrective.role = "user";
        corrective.text = current.response_format == "free_text"
                              ? "Respond with exactly the requested format only."
                              : "Respond with valid JSON only.";
        current.messages.push_back(std::move(corrective));
    }

    if (log != nullptr) {
        AgentTranscript t;
        t.request_hash = original_hash;
        t.task = request.task;
        t.raw_response = raw;
        t.parsed_ok = ok;
        t.attempt_count = attempts;
        t.provider_name = provider.name();
        t.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
        log->append(std::move(t));
    }
    if (!ok)
        throw ParseFailure("provider response for task '" + request.task +
                           "' failed validation after " + std::to_string(attempts) +
                           " attempts");
    return raw;
}

// ---------------------------------------------------------------------------
// parsing helpers

std::optional<nlohmann::json> try_parse_json(const std::string& text) {
    // Tolerate markdown fences and prose around the first JSON object.
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        return std::nullopt;
    try {
        return nlohmann::json::parse(text.substr(open, close - open + 1));
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

std::string normalize_category(const std::string& raw) {
    std::string s;
    s.reserve(raw.size());
    for (char c : raw) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto begin = s.find_first_not_of(" \t\r\n.-*0123456789");
    const auto end = s.find_last_not_of(" \t\r\n.");
    if (begin == std::string::npos) return "";
    s = s.substr(begin, end - begin + 1);

    // Naive singularization: boxes -> box, shelves -> shelf, lamps -> lamp.
    auto ends_with = [&](const char* suffix) {
        const size_t n = std::strlen(suffix);
        return s.size() > n && s.compare(s.size() - n, n, suffix) == 0;
    };
    if (ends_with("ies")) {
        s = s.substr(0, s.size() - 3) + "y";
    } else if (ends_with("ves")) {
        s = s.substr(0, s.size() - 3) + "f";
    } else if (ends_with("xes") || ends_with("ses") || ends_with("ches") || ends_with("shes")) {
        s = s.substr(0, s.size() - 2);
    } else if (s.size() > 1 && s.back() == 's' && !ends_with("ss")) {
        s.pop_back();
    }
    return s;
}

// ---------------------------------------------------------------------------
// operations

std::vector<std::string> list_objects(const CameraFrame& frame, AgentProvider& provider,
                                      TranscriptLog* log, int max_retries,
                                      const std::string& image_data_url) {
    AgentRequest req;
    req.task = "list_objects";
    req.max_retries = max_retries;
    req.meta = {{"frame_id", frame.frame_id}};
    req.messages.push_back({"system", "You identify objects in indoor scenes.", ""});
    std::ostringstream prompt;
    prompt << "This is view " << frame.frame_id
           << " of the scene. Please list all the central objects in the scene, focus on "
              "smaller or overlooked objects, and visual attributes, omitting background "
              "details. Respond with a comma-separated list of object category names only.";
    req.messages.push_back({"user", prompt.str(), image_data_url});

    std::vector<std::string> parsed;
    auto accept = [&](const std::string& raw) {
        parsed.clear();
        std::string token;
        std::vector<std::string> seen;
        auto flush = [&]() {
            const std::string cat = normalize_category(token);
            token.clear();
            if (cat.empty()) return;
            for (const std::string& existing : seen)
                if (existing == cat) return;
            seen.push_back(cat);
            parsed.push_back(cat);
        };
        for (char c : raw) {
            if (c == ',' || c == '\n' || c == ';') {
                flush();
            } else {
                token += c;
            }
        }
        flush();
        return !parsed.empty();
    };
    complete_validated(req, provider, log, accept);
    return parsed;
}

namespace {

std::string trimmed_nonempty(const std::string& raw) {
    const auto begin = raw.find_first_not_of(" \t\r\n");
    const auto end = raw.find_last_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    return raw.substr(begin, end - begin + 1);
}

}  // namespace

std::string caption_node(const std::vector<ViewCrop>& crops, AgentProvider& provider,
                         TranscriptLog* log, int max_retries) {
    if (crops.empty()) throw FormatError("caption_node needs at least one crop");

    std::vector<std::string> views;
    for (const ViewCrop& crop : crops) {
        AgentRequest req;
        req.task = "caption_view";
        req.max_retries = max_retries;
        req.meta = {{"frame_id", crop.frame_id}, {"mask_index", crop.mask_index}};
        req.messages.push_back({"system", "You describe objects in indoor scenes.", ""});
        std::ostringstream prompt;
        prompt << "Describe the central object in this view crop (frame " << crop.frame_id
               << ", region [" << crop.bbox[0] << "," << crop.bbox[1] << "," << crop.bbox[2]
               << "," << crop.bbox[3] << "]). Respond with one concise caption only.";
        req.messages.push_back({"user", prompt.str(), crop.image_data_url});

        std::string view;
        complete_validated(req, provider, log, [&](const std::string& raw) {
            view = trimmed_nonempty(raw);
            return !view.empty();
        });
        views.push_back(std::move(view));
    }
    if (views.size() == 1) return views.front();

    AgentRequest req;
    req.task = "caption_distill";
    req.max_retries = max_retries;
    {
        nlohmann::json view_meta = nlohmann::json::array();
        for (const ViewCrop& crop : crops)
            view_meta.push_back({{"frame_id", crop.frame_id}, {"mask_index", crop.mask_index}});
        req.meta = {{"views", std::move(view_meta)}};
    }
    std::ostringstream prompt;
    prompt << "These are descriptions of the same object seen from different views:\n";
    for (const std::string& view : views) prompt << "- " << view << "\n";
    prompt << "Distill them into one coherent caption for the object. "
              "Respond with the caption only.";
    req.messages.push_back({"system", "You summarize multi-view object descriptions.", ""});
    req.messages.push_back({"user", prompt.str(), ""});

    std::string caption;
    complete_validated(req, provider, log, [&](const std::string& raw) {
        caption = trimmed_nonempty(raw);
        return !caption.empty();
    });
    return caption;
}

std::string relation_label(const NodeSummary& a, const NodeSummary& b, AgentProvider& provider,
                           TranscriptLog* log, int max_retries) {
    AgentRequest req;
    req.task = "relation";
    req.max_retries = max_retries;
    auto box_json = [](const Box3D& box) {
        return nlohmann::json{{"min", {box.lo.x, box.lo.y, box.lo.z}},
                              {"max", {box.hi.x, box.hi.y, box.hi.z}}};
    };
    req.meta = {{"a", a.id},      {"b", b.id},          {"a_box", box_json(a.box)},
                {"b_box", box_json(b.box)}, {"a_label", a.label}, {"b_label", b.label}};

    auto center_text = [](const Box3D& box) {
        const Vec3 c = box.center();
        std::ostringstream ss;
        ss << "(" << c.x << ", " << c.y << ", " << c.z << ")";
        return ss.str();
    };
    std::ostringstream prompt;
    prompt << "Object " << a.id << ": " << a.caption << ", center " << center_text(a.box)
           << ".\nObject " << b.id << ": " << b.caption << ", center " << center_text(b.box)
           << ".\nWhat is the relationship between " << a.id << " and " << b.id
           << "? Respond with a short spatial relation phrase only, for example: on, near, "
              "left of.";
    req.messages.push_back({"system", "You name spatial relations between 3D objects.", ""});
    req.messages.push_back({"user", prompt.str(), ""});

    std::string relation;
    complete_validated(req, provider, log, [&](const std::string& raw) {
        relation = trimmed_nonempty(raw);
        if (relation.size() > 64) return false;  // phrases, not paragraphs
        return !relation.empty();
    });
    std::transform(relation.begin(), relation.end(), relation.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return relation;
}

}  // namespace freeq::agents
