// freeq - io.hpp
// Scene manifest loading and the binary formats it references: little-endian
// PLY clouds, PNG masks (nonzero = set), raw float32 depth rasters.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freeq/errors.hpp"
#include "freeq/geometry.hpp"

namespace freeq {

struct SceneCapture {
    PointCloud cloud;
    std::vector<CameraFrame> frames;
    std::vector<std::vector<Mask2D>> masks;  // per frame, aligned with frames
    std::vector<std::string> rgb_files;      // optional per-frame PNG path ("" = none)

    void validate() const;
};

namespace io {

// PLY, binary little-endian, fields x,y,z[,red,green,blue].
void save_ply(const std::string& path, const PointCloud& cloud);
PointCloud load_ply(const std::string& path);

// 8-bit PNG. Masks store 255 for set pixels; loaders treat nonzero as set.
void save_mask_png(const std::string& path, const Mask2D& mask);
Mask2D load_mask_png(const std::string& path);

// In-memory PNG encode (grayscale or RGB8) for crop data URLs.
std::vector<std::uint8_t> encode_png_gray(const std::vector<std::uint8_t>& pixels, int width,
                                          int height);
std::vector<std::uint8_t> encode_png_rgb(const std::vector<std::uint8_t>& pixels, int width,
                                         int height);
// Decodes any PNG to RGB8 (width, height out-params).
std::vector<std::uint8_t> decode_png_rgb(const std::string& path, int& width, int& height);

// Headerless little-endian float32 raster, row-major; dimensions come from
// the owning frame record.
void save_depth_raster(const std::string& path, const std::vector<float>& depth);
std::vector<float> load_depth_raster(const std::string& path, int width, int height);

// Scene manifest JSON; file references resolve relative to the manifest.
SceneCapture load_manifest(const std::string& path);
void save_manifest(const std::string& path, const SceneCapture& capture,
                   const std::string& ply_file,
                   const std::vector<std::vector<std::string>>& mask_files,
                   const std::vector<std::string>& depth_files);

// Write-all-or-nothing: temp file in the target directory, then rename.
void atomic_write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

std::string base64_encode(const std::vector<std::uint8_t>& data);

// Shortest-width formatting with 9 significant digits; used for every float
// that lands in a JSON artifact so round-trips are byte-stable.
std::string format_double(double v);

// Minimal ordered-field JSON emitter for byte-stable artifacts.
class JsonWriter {
public:
    const std::string& str() const { return out_; }

    void begin_object();
    void end_object();
    void begin_array();
    void end_array();
    void key(const std::string& k);
    void value_string(const std::string& s);
    void value_double(double v);
    void value_int(std::int64_t v);
    void value_bool(bool v);

private:
    void separator();
    std::string out_;
    bool fresh_ = true;
};

std::string json_escape(const std::string& s);

}  // namespace io
}  // namespace freeq
