// freeq - embeddings.hpp
// Text/image embedding providers and semantic feature fusion. Cosine
// similarity anywhere in the system goes through this module.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "freeq/errors.hpp"
#include "freeq/geometry.hpp"

namespace freeq {

struct Feature {
    std::vector<double> values;
    bool normalized = false;

    int dimension() const { return static_cast<int>(values.size()); }
    double norm() const;
    Feature normalized_copy() const;  // throws ZeroVector on zero input
};

double cosine(const Feature& a, const Feature& b);  // throws DimensionMismatch

// Component-wise mean of two unit features, re-normalized. Commutative.
// Throws DimensionMismatch, ZeroVector (antipodal inputs).
Feature fuse_features(const Feature& visual, const Feature& label);

// Deterministic pseudo-random unit vector keyed by (text, seed).
Feature mock_embed(const std::string& text, int dimension, std::uint64_t seed);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Feature embed_text(const std::string& text) = 0;
    virtual Feature embed_image_crop(const CameraFrame& frame, const Mask2D& mask) = 0;
    virtual int dimension() const = 0;
};

// Test provider: text hashes to a fixed unit vector; image crops embed the
// mask's label so views of one object agree. Known prompt templates are
// stripped before hashing so "an image of desk" and a node labeled "desk"
// land on the same vector.
class MockEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(int dimension = 64, std::uint64_t seed = 0);

    Feature embed_text(const std::string& text) override;
    Feature embed_image_crop(const CameraFrame& frame, const Mask2D& mask) override;
    int dimension() const override { return dimension_; }

    static std::string canonical_text(const std::string& text);

private:
    int dimension_;
    std::uint64_t seed_;
};

// Disk cache keyed by content hash; one JSON file per key with
// {input_hash, dimension, values}.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::string directory);

    bool lookup(const std::string& key, Feature& out) const;
    void store(const std::string& key, const Feature& feature) const;

private:
    std::string dir_;
};

// Stable content hash used for cache keys and request hashing.
std::uint64_t fnv1a64(const std::string& data, std::uint64_t seed = 1469598103934665603ULL);
std::string hash_hex(std::uint64_t h);

}  // namespace freeq
