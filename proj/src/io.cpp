// freeq - io.cpp

#include "freeq/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace freeq {

void SceneCapture::validate() const {
    cloud.validate();
    if (frames.empty()) throw FormatError("scene capture has no frames");
    if (masks.size() != frames.size())
        throw FormatError("per-frame mask lists do not align with frames");
    for (size_t f = 0; f < frames.size(); ++f) {
        frames[f].validate();
        for (const Mask2D& m : masks[f]) {
            m.validate();
            if (m.width != frames[f].width || m.height != frames[f].height)
                throw FormatError("mask dimensions do not match its frame");
            if (m.frame_id != frames[f].frame_id)
                throw FormatError("mask frame_id does not match its frame");
        }
    }
}

namespace io {

// ---------------------------------------------------------------------------
// small helpers

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write_file(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

void JsonWriter::separator() {
    if (!fresh_) out_ += ',';
    fresh_ = false;
}
void JsonWriter::begin_object() { separator(); out_ += '{'; fresh_ = true; }
void JsonWriter::end_object() { out_ += '}'; fresh_ = false; }
void JsonWriter::begin_array() { separator(); out_ += '['; fresh_ = true; }
void JsonWriter::end_array() { out_ += ']'; fresh_ = false; }
void JsonWriter::key(const std::string& k) {
    separator();
    out_ += '"';
    out_ += json_escape(k);
    out_ += "\":";
    fresh_ = true;
}
void JsonWriter::value_string(const std::string& s) {
    separator();
    out_ += '"';
    out_ += json_escape(s);
    out_ += '"';
}
void JsonWriter::value_double(double v) {
    separator();
    out_ += format_double(v);
}
void JsonWriter::value_int(std::int64_t v) {
    separator();
    out_ += std::to_string(v);
}
void JsonWriter::value_bool(bool v) {
    separator();
    out_ += v ? "true" : "false";
}

std::string base64_encode(const std::vector<std::uint8_t>& data) {
    static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += table[(v >> 6) & 63];
        out += table[v & 63];
    }
    if (i + 1 == data.size()) {
        const std::uint32_t v = data[i] << 16;
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == data.size()) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += table[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

// ---------------------------------------------------------------------------
// PLY

void save_ply(const std::string& path, const PointCloud& cloud) {
    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n"
           << "element vertex " << cloud.points.size() << "\n"
           << "property float x\nproperty float y\nproperty float z\n";
    if (cloud.has_colors())
        header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    header << "end_header\n";

    std::string body = header.str();
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const float xyz[3] = {static_cast<float>(cloud.points[i].x),
                              static_cast<float>(cloud.points[i].y),
                              static_cast<float>(cloud.points[i].z)};
        body.append(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        if (cloud.has_colors()) {
            auto to_byte = [](double v) {
                return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            };
            const std::uint8_t rgb[3] = {to_byte(cloud.colors[i].x), to_byte(cloud.colors[i].y),
                                         to_byte(cloud.colors[i].z)};
            body.append(reinterpret_cast<const char*>(rgb), sizeof(rgb));
        }
    }
    atomic_write_file(path, body);
}

PointCloud load_ply(const std::string& path) {
    const std::string data = read_file(path);
    size_t pos = 0;
    auto next_line = [&]() {
        const size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) throw FormatError("truncated PLY header in " + path);
        std::string line = data.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };

    if (next_line() != "ply") throw FormatError(path + " is not a PLY file");
    if (next_line() != "format binary_little_endian 1.0")
        throw FormatError(path + ": only binary little-endian PLY is supported");

    size_t count = 0;
    std::vector<std::string> props;
    for (std::string line = next_line(); line != "end_header"; line = next_line()) {
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "comment") continue;
        if (word == "element") {
            std::string kind;
            ss >> kind >> count;
            if (kind != "vertex") throw FormatError(path + ": unsupported element " + kind);
        } else if (word == "property") {
            std::string type, name;
            ss >> type >> name;
            props.push_back(type + ":" + name);
        } else {
            throw FormatError(path + ": unsupported header line '" + line + "'");
        }
    }

    const std::vector<std::string> xyz = {"float:x", "float:y", "float:z"};
    const std::vector<std::string> xyzrgb = {"float:x",   "float:y",     "float:z",
                                             "uchar:red", "uchar:green", "uchar:blue"};
    bool with_color;
    if (props == xyz)
        with_color = false;
    else if (props == xyzrgb)
        with_color = true;
    else
        throw FormatError(path + ": expected x,y,z[,red,green,blue] vertex properties");

    const size_t stride = 12 + (with_color ? 3 : 0);
    if (data.size() - pos < stride * count) throw FormatError(path + ": truncated vertex data");

    PointCloud cloud;
    cloud.points.resize(count);
    if (with_color) cloud.colors.resize(count);
    for (size_t i = 0; i < count; ++i) {
        float xyzv[3];
        std::memcpy(xyzv, data.data() + pos, sizeof(xyzv));
        cloud.points[i] = {xyzv[0], xyzv[1], xyzv[2]};
        if (with_color) {
            const auto* rgb = reinterpret_cast<const std::uint8_t*>(data.data() + pos + 12);
            cloud.colors[i] = {rgb[0] / 255.0, rgb[1] / 255.0, rgb[2] / 255.0};
        }
        pos += stride;
    }
    return cloud;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct PngBuffer {
    std::vector<std::uint8_t> data;
};

void png_buffer_write(png_structp png, png_bytep chunk, png_size_t n) {
    auto* buf = static_cast<PngBuffer*>(png_get_io_ptr(png));
    buf->data.insert(buf->data.end(), chunk, chunk + n);
}

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int width, int height,
                                     int channels) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    PngBuffer buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed");
    }
    png_set_write_fn(png, &buf, png_buffer_write, nullptr);
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(pixels + static_cast<size_t>(y) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return std::move(buf.data);
}

struct PngReader {
    const std::uint8_t* data;
    size_t size;
    size_t offset;
};

void png_buffer_read(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
    if (r->offset + n > r->size) png_error(png, "truncated PNG");
    std::memcpy(out, r->data + r->offset, n);
    r->offset += n;
}

std::vector<std::uint8_t> decode_png_rgb_bytes(const std::string& bytes, int& width,
                                               int& height) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    PngReader reader{reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size(), 0};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("PNG decode failed");
    }
    png_set_read_fn(png, &reader, png_buffer_read);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    std::vector<std::uint8_t> out(static_cast<size_t>(width) * height * 3);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = out.data() + static_cast<size_t>(y) * width * 3;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png_gray(const std::vector<std::uint8_t>& pixels, int width,
                                          int height) {
    return encode_png(pixels.data(), width, height, 1);
}

std::vector<std::uint8_t> encode_png_rgb(const std::vector<std::uint8_t>& pixels, int width,
                                         int height) {
    return encode_png(pixels.data(), width, height, 3);
}

std::vector<std::uint8_t> decode_png_rgb(const std::string& path, int& width, int& height) {
    return decode_png_rgb_bytes(read_file(path), width, height);
}

void save_mask_png(const std::string& path, const Mask2D& mask) {
    std::vector<std::uint8_t> pixels(mask.bits.size());
    for (size_t i = 0; i < mask.bits.size(); ++i) pixels[i] = mask.bits[i] ? 255 : 0;
    const auto png = encode_png_gray(pixels, mask.width, mask.height);
    atomic_write_file(path, std::string(png.begin(), png.end()));
}

Mask2D load_mask_png(const std::string& path) {
    int width = 0, height = 0;
    const auto rgb = decode_png_rgb_bytes(read_file(path), width, height);
    Mask2D mask = Mask2D::empty_like(0, width, height);
    for (size_t i = 0; i < mask.bits.size(); ++i) {
        const size_t o = i * 3;
        mask.bits[i] = (rgb[o] | rgb[o + 1] | rgb[o + 2]) ? 1 : 0;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// depth raster

void save_depth_raster(const std::string& path, const std::vector<float>& depth) {
    std::string body(reinterpret_cast<const char*>(depth.data()), depth.size() * sizeof(float));
    atomic_write_file(path, body);
}

std::vector<float> load_depth_raster(const std::string& path, int width, int height) {
    const std::string data = read_file(path);
    const size_t expected = static_cast<size_t>(width) * height * sizeof(float);
    if (data.size() != expected)
        throw FormatError(path + ": depth raster size does not match frame dimensions");
    std::vector<float> depth(static_cast<size_t>(width) * height);
    std::memcpy(depth.data(), data.data(), expected);
    return depth;
}

// ---------------------------------------------------------------------------
// manifest

SceneCapture load_manifest(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest parse error in " + path + ": " + e.what());
    }

    const auto dir = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& rel) { return (dir / rel).string(); };

    SceneCapture capture;
    try {
        capture.cloud = load_ply(resolve(j.at("ply_file").get<std::string>()));
        for (const auto& fj : j.at("frames")) {
            CameraFrame frame;
            frame.frame_id = fj.at("frame_id").get<int>();
            const auto& in = fj.at("intrinsics");
            frame.fx = in.at("fx").get<double>();
            frame.fy = in.at("fy").get<double>();
            frame.cx = in.at("cx").get<double>();
            frame.cy = in.at("cy").get<double>();
            const auto pose = fj.at("pose").get<std::vector<double>>();
            if (pose.size() != 16) throw FormatError("pose must have 16 numbers");
            std::copy(pose.begin(), pose.end(), frame.pose.m.begin());
            frame.width = fj.at("width").get<int>();
            frame.height = fj.at("height").get<int>();
            if (fj.contains("depth_file"))
                frame.depth = load_depth_raster(resolve(fj.at("depth_file").get<std::string>()),
                                                frame.width, frame.height);
            std::vector<Mask2D> frame_masks;
            for (const auto& mj : fj.value("masks", nlohmann::json::array())) {
                Mask2D mask = load_mask_png(resolve(mj.at("bitmap_file").get<std::string>()));
                mask.frame_id = frame.frame_id;
                mask.label = mj.at("label").get<std::string>();
                mask.confidence = mj.value("confidence", 1.0);
                frame_masks.push_back(std::move(mask));
            }
            capture.rgb_files.push_back(
                fj.contains("rgb_file") ? resolve(fj.at("rgb_file").get<std::string>()) : "");
            capture.frames.push_back(std::move(frame));
            capture.masks.push_back(std::move(frame_masks));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest field error in " + path + ": " + e.what());
    }
    capture.validate();
    return capture;
}

void save_manifest(const std::string& path, const SceneCapture& capture,
                   const std::string& ply_file,
                   const std::vector<std::vector<std::string>>& mask_files,
                   const std::vector<std::string>& depth_files) {
    JsonWriter w;
    w.begin_object();
    w.key("ply_file");
    w.value_string(ply_file);
    w.key("frames");
    w.begin_array();
    for (size_t f = 0; f < capture.frames.size(); ++f) {
        const CameraFrame& frame = capture.frames[f];
        w.begin_object();
        w.key("frame_id");
        w.value_int(frame.frame_id);
        w.key("intrinsics");
        w.begin_object();
        w.key("fx");
        w.value_double(frame.fx);
        w.key("fy");
        w.value_double(frame.fy);
        w.key("cx");
        w.value_double(frame.cx);
        w.key("cy");
        w.value_double(frame.cy);
        w.end_object();
        w.key("pose");
        w.begin_array();
        for (double v : frame.pose.m) w.value_double(v);
        w.end_array();
        w.key("width");
        w.value_int(frame.width);
        w.key("height");
        w.value_int(frame.height);
        if (!depth_files[f].empty()) {
            w.key("depth_file");
            w.value_string(depth_files[f]);
        }
        w.key("masks");
        w.begin_array();
        for (size_t m = 0; m < capture.masks[f].size(); ++m) {
            const Mask2D& mask = capture.masks[f][m];
            w.begin_object();
            w.key("bitmap_file");
            w.value_string(mask_files[f][m]);
            w.key("label");
            w.value_string(mask.label);
            w.key("confidence");
            w.value_double(mask.confidence);
            w.end_object();
        }
        w.end_array();
        w.end_object();
    }
    w.end_array();
    w.end_object();
    atomic_write_file(path, w.str());
}

}  // namespace io
}  // namespace freeq
