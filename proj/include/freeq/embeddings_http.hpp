// freeq - embeddings_http.hpp
// Embedding provider backed by an embeddings endpoint, with a disk cache so
// runs replay without re-hitting the wire.

#pragma once

#include <string>

#include "freeq/agents.hpp"
#include "freeq/embeddings.hpp"

namespace freeq {

class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(agents::EndpointConfig endpoint, std::string cache_dir);

    Feature embed_text(const std::string& text) override;
    // Sends the crop as a base64 PNG data URL; the endpoint must accept
    // multimodal inputs.
    Feature embed_image_crop(const CameraFrame& frame, const Mask2D& mask) override;
    int dimension() const override { return dimension_; }

private:
    Feature embed_input(const std::string& kind, const std::string& input);

    agents::EndpointConfig endpoint_;
    EmbeddingCache cache_;
    int dimension_ = 0;  // discovered from the first response
};

}  // namespace freeq
