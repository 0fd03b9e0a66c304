// freeq - embeddings_http.cpp

#include "freeq/embeddings_http.hpp"

#include <httplib.h>

#include <json.hpp>

#include "freeq/io.hpp"

namespace freeq {

namespace {

struct SplitUrl {
    std::string host;
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

}  // namespace

HttpEmbeddingProvider::HttpEmbeddingProvider(agents::EndpointConfig endpoint,
                                             std::string cache_dir)
    : endpoint_(std::move(endpoint)), cache_(std::move(cache_dir)) {}

Feature HttpEmbeddingProvider::embed_input(const std::string& kind, const std::string& input) {
    const std::string key = hash_hex(fnv1a64(kind + "\x1f" + input));
    Feature cached;
    if (cache_.lookup(key, cached)) {
        if (dimension_ == 0) dimension_ = cached.dimension();
        return cached;
    }

    if (endpoint_.api_base.empty()) throw ProviderUnavailable("no API base configured");
    const SplitUrl url = split_url(endpoint_.api_base);
    httplib::Client client(url.host);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!endpoint_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

    nlohmann::json body;
    body["model"] = endpoint_.model;
    body["input"] = nlohmann::json::array({input});
    const auto result =
        client.Post(url.path_prefix + "/embeddings", headers, body.dump(), "application/json");
    if (!result)
        throw ProviderUnavailable("embeddings endpoint unreachable: " +
                                  httplib::to_string(result.error()));
    if (result->status == 401 || result->status == 403)
        throw AuthError("embeddings endpoint rejected authentication");
    if (result->status != 200)
        throw ProviderUnavailable("embeddings endpoint returned HTTP " +
                                  std::to_string(result->status));

    Feature feature;
    try {
        nlohmann::json j = nlohmann::json::parse(result->body);
        feature.values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure(std::string("malformed embeddings body: ") + e.what());
    }
    feature = feature.normalized_copy();
    if (dimension_ == 0) dimension_ = feature.dimension();
    cache_.store(key, feature);
    return feature;
}

Feature HttpEmbeddingProvider::embed_text(const std::string& text) {
    return embed_input("text", text);
}

Feature HttpEmbeddingProvider::embed_image_crop(const CameraFrame&, const Mask2D& mask) {
    const auto b = mask.bounds();
    const int cw = b[2] - b[0] + 1, ch = b[3] - b[1] + 1;
    std::vector<std::uint8_t> crop(static_cast<size_t>(cw) * ch);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            crop[static_cast<size_t>(y) * cw + x] = mask.test(x + b[0], y + b[1]) ? 255 : 0;
    const auto png = io::encode_png_gray(crop, cw, ch);
    return embed_input("image", "data:image/png;base64," + io::base64_encode(png));
}

}  // namespace freeq
