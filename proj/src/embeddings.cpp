// freeq - embeddings.cpp

#include "freeq/embeddings.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace freeq {

double Feature::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

Feature Feature::normalized_copy() const {
    const double n = norm();
    if (n <= 0.0) throw ZeroVector("cannot normalize a zero feature");
    Feature out;
    out.values.reserve(values.size());
    for (double v : values) out.values.push_back(v / n);
    out.normalized = true;
    return out;
}

double cosine(const Feature& a, const Feature& b) {
    if (a.dimension() != b.dimension())
        throw DimensionMismatch("feature dimensions differ in cosine");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < a.dimension(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw ZeroVector("cosine of a zero feature");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

Feature fuse_features(const Feature& visual, const Feature& label) {
    if (visual.dimension() != label.dimension())
        throw DimensionMismatch("feature dimensions differ in fuse_features");
    Feature mean;
    mean.values.resize(visual.values.size());
    for (size_t i = 0; i < mean.values.size(); ++i)
        mean.values[i] = 0.5 * (visual.values[i] + label.values[i]);
    return mean.normalized_copy();
}

namespace {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline double uniform01(std::uint64_t& state) {
    return (splitmix64(state) >> 11) * 0x1.0p-53;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Feature mock_embed(const std::string& text, int dimension, std::uint64_t seed) {
    if (dimension < 2) throw DimensionMismatch("mock_embed needs dimension >= 2");
    std::uint64_t state = fnv1a64(text) ^ (seed * 0x9E3779B97F4A7C15ULL);
    Feature f;
    f.values.resize(dimension);
    // Box-Muller gaussians give a direction uniform on the sphere.
    for (int i = 0; i < dimension; i += 2) {
        double u1 = uniform01(state);
        double u2 = uniform01(state);
        while (u1 <= 1e-300) u1 = uniform01(state);
        const double r = std::sqrt(-2.0 * std::log(u1));
        f.values[i] = r * std::cos(2.0 * M_PI * u2);
        if (i + 1 < dimension) f.values[i + 1] = r * std::sin(2.0 * M_PI * u2);
    }
    return f.normalized_copy();
}

MockEmbeddingProvider::MockEmbeddingProvider(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {}

std::string MockEmbeddingProvider::canonical_text(const std::string& text) {
    static const std::string kPrefix = "an image of ";
    if (text.rfind(kPrefix, 0) == 0) return text.substr(kPrefix.size());
    return text;
}

Feature MockEmbeddingProvider::embed_text(const std::string& text) {
    return mock_embed(canonical_text(text), dimension_, seed_);
}

Feature MockEmbeddingProvider::embed_image_crop(const CameraFrame&, const Mask2D& mask) {
    return mock_embed(canonical_text(mask.label), dimension_, seed_);
}

EmbeddingCache::EmbeddingCache(std::string directory) : dir_(std::move(directory)) {
    std::filesystem::create_directories(dir_);
}

bool EmbeddingCache::lookup(const std::string& key, Feature& out) const {
    const auto path = std::filesystem::path(dir_) / (key + ".json");
    std::ifstream in(path);
    if (!in) return false;
    nlohmann::json j;
    try {
        in >> j;
        out.values = j.at("values").get<std::vector<double>>();
        out.normalized = true;
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

void EmbeddingCache::store(const std::string& key, const Feature& feature) const {
    nlohmann::json j;
    j["input_hash"] = key;
    j["dimension"] = feature.dimension();
    j["values"] = feature.values;
    const auto path = std::filesystem::path(dir_) / (key + ".json");
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        out << j.dump();
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace freeq
