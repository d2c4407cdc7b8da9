#pragma once

// Persistence layer. Formats are deliberately boring and byte-exact:
//
//   frames       PGM (binary P5, 8/16-bit) and PNG (grayscale or RGB)
//   flow fields  Middlebury .flo: "PIEH", int32 LE width, height, then
//                row-major interleaved float32 LE (u, v) pairs
//   heatmaps     grayscale PFM "Pf", scale -1.0 (little-endian), rows
//                stored bottom-to-top per the PFM convention
//   annotations  CSV: frame_index,class,x,y,w,h,sounding,confidence
//   reports      JSON (round-trippable) or flat CSV
//
// Writers are deterministic: the same value always produces the same bytes.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include <nlohmann/json.hpp>

#include "flowgrad/core.hpp"
#include "flowgrad/errors.hpp"
#include "flowgrad/metrics.hpp"

namespace flowgrad {

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed reading file: " + path.string());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const void* data, size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("failed writing file: " + path.string());
}

inline void put_u32_le(std::vector<char>& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32_le(std::vector<char>& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32_le(out, bits);
}

inline uint32_t get_u32_le(const char* p) {
    return static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
           static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
           static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
           static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

inline float get_f32_le(const char* p) {
    const uint32_t bits = get_u32_le(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PGM

inline void write_pgm(const Frame& frame, const std::filesystem::path& path) {
    std::string header = "P5\n" + std::to_string(frame.width) + " " +
                         std::to_string(frame.height) + "\n255\n";
    std::vector<char> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + frame.size());
    for (double v : frame.values) {
        const int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        bytes.push_back(static_cast<char>(q));
    }
    detail::write_file_bytes(path, bytes.data(), bytes.size());
}

namespace detail {

// Reads one PNM token, skipping whitespace and '#' comments.
inline std::string pnm_token(const std::vector<char>& bytes, size_t& pos,
                             const std::filesystem::path& path) {
    while (pos < bytes.size()) {
        if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("truncated PGM header: " + path.string());
    return std::string(bytes.begin() + start, bytes.begin() + pos);
}

}  // namespace detail

inline Frame read_pgm(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    size_t pos = 0;
    if (detail::pnm_token(bytes, pos, path) != "P5")
        throw FormatError("not a binary PGM (P5): " + path.string());
    const int w = std::stoi(detail::pnm_token(bytes, pos, path));
    const int h = std::stoi(detail::pnm_token(bytes, pos, path));
    const int maxval = std::stoi(detail::pnm_token(bytes, pos, path));
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw FormatError("bad PGM header: " + path.string());
    ++pos;  // single whitespace after maxval
    const size_t n = static_cast<size_t>(w) * h;
    const size_t sample_bytes = maxval > 255 ? 2 : 1;
    if (bytes.size() - pos < n * sample_bytes)
        throw FormatError("truncated PGM payload: " + path.string());
    Frame frame(w, h);
    for (size_t i = 0; i < n; ++i) {
        unsigned value;
        if (sample_bytes == 1) {
            value = static_cast<unsigned char>(bytes[pos + i]);
        } else {  // 16-bit samples are big-endian per the PNM spec
            value = static_cast<unsigned>(static_cast<unsigned char>(bytes[pos + 2 * i])) << 8 |
                    static_cast<unsigned>(static_cast<unsigned char>(bytes[pos + 2 * i + 1]));
        }
        frame.values[i] = static_cast<double>(value) / maxval;
    }
    return frame;
}

// ---------------------------------------------------------------------------
// PNG

/// Reads a PNG as grayscale in [0, 1]; RGB inputs are converted with ITU-R
/// 601 luma weights (0.299, 0.587, 0.114).
inline Frame read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw FormatError("cannot read PNG: " + path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("cannot decode PNG: " + path.string() + ": " + msg);
    }
    Frame frame(static_cast<int>(image.width), static_cast<int>(image.height));
    for (size_t i = 0; i < frame.size(); ++i) {
        const unsigned r = buffer[3 * i], g = buffer[3 * i + 1], b = buffer[3 * i + 2];
        frame.values[i] = static_cast<double>(299u * r + 587u * g + 114u * b) / (1000.0 * 255.0);
    }
    return frame;
}

/// Writes an 8-bit RGB PNG from interleaved row-major bytes.
inline void write_png_rgb(const std::filesystem::path& path, int width, int height,
                          std::span<const unsigned char> rgb) {
    if (rgb.size() != static_cast<size_t>(width) * height * 3)
        throw InvalidInputError("write_png_rgb: buffer size mismatch");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, rgb.data(), 0, nullptr))
        throw IoError("cannot write PNG: " + path.string() + ": " + image.message);
}

// ---------------------------------------------------------------------------
// Frame sequences

/// Grayscale image loader dispatching on extension (.pgm / .png).
inline Frame read_image(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw FormatError("unsupported image format: " + path.string());
}

/// Loads a lexicographically ordered image directory, keeping every
/// round(fps_source/fps_target)-th file. Kept frames are re-indexed 0..n-1.
inline std::vector<Frame> load_frames(const std::filesystem::path& dir, double fps_target,
                                      double fps_source) {
    if (!std::isfinite(fps_target) || fps_target <= 0.0 || !std::isfinite(fps_source) ||
        fps_source <= 0.0)
        throw InvalidParameterError("frame rates must be finite and > 0");
    if (!std::filesystem::is_directory(dir))
        throw IoError("not a directory: " + dir.string());

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    const long stride = std::max(1L, std::lround(fps_source / fps_target));
    std::vector<Frame> frames;
    for (size_t i = 0; i < files.size(); i += static_cast<size_t>(stride)) {
        Frame f = read_image(files[i]);
        f.index = static_cast<int>(frames.size());
        if (!frames.empty() && !f.same_size(frames.front()))
            throw InvalidInputError("inconsistent frame dimensions in sequence: " +
                                    files[i].string());
        frames.push_back(std::move(f));
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Middlebury .flo

inline void write_flo(const FlowField& flow, const std::filesystem::path& path) {
    std::vector<char> bytes;
    bytes.reserve(12 + flow.u.size() * 8);
    bytes.insert(bytes.end(), {'P', 'I', 'E', 'H'});
    detail::put_u32_le(bytes, static_cast<uint32_t>(flow.width()));
    detail::put_u32_le(bytes, static_cast<uint32_t>(flow.height()));
    for (size_t i = 0; i < flow.u.size(); ++i) {
        detail::put_f32_le(bytes, static_cast<float>(flow.u.values[i]));
        detail::put_f32_le(bytes, static_cast<float>(flow.v.values[i]));
    }
    detail::write_file_bytes(path, bytes.data(), bytes.size());
}

inline FlowField read_flo(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "PIEH", 4) != 0)
        throw FormatError("bad .flo magic: " + path.string());
    const uint32_t w = detail::get_u32_le(bytes.data() + 4);
    const uint32_t h = detail::get_u32_le(bytes.data() + 8);
    if (w == 0 || h == 0 || w > 1u << 20 || h > 1u << 20)
        throw FormatError("bad .flo dimensions: " + path.string());
    const size_t n = static_cast<size_t>(w) * h;
    if (bytes.size() != 12 + n * 8)
        throw FormatError("truncated .flo payload: " + path.string());
    FlowField flow(static_cast<int>(w), static_cast<int>(h));
    for (size_t i = 0; i < n; ++i) {
        flow.u.values[i] = detail::get_f32_le(bytes.data() + 12 + 8 * i);
        flow.v.values[i] = detail::get_f32_le(bytes.data() + 16 + 8 * i);
    }
    return flow;
}

// ---------------------------------------------------------------------------
// PFM heatmaps

inline void write_heatmap(const Heatmap& map, const std::filesystem::path& path) {
    std::string header = "Pf\n" + std::to_string(map.width) + " " +
                         std::to_string(map.height) + "\n-1.0\n";
    std::vector<char> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + map.size() * 4);
    for (int y = map.height - 1; y >= 0; --y)  // bottom-up raster
        for (int x = 0; x < map.width; ++x)
            detail::put_f32_le(bytes, static_cast<float>(map.at(x, y)));
    detail::write_file_bytes(path, bytes.data(), bytes.size());
}

inline Heatmap read_heatmap(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    size_t pos = 0;
    const std::string magic = detail::pnm_token(bytes, pos, path);
    if (magic == "PF") throw FormatError("color PFM unsupported: " + path.string());
    if (magic != "Pf") throw FormatError("not a grayscale PFM: " + path.string());
    const int w = std::stoi(detail::pnm_token(bytes, pos, path));
    const int h = std::stoi(detail::pnm_token(bytes, pos, path));
    const double scale = std::stod(detail::pnm_token(bytes, pos, path));
    if (w < 1 || h < 1 || scale == 0.0)
        throw FormatError("bad PFM header: " + path.string());
    ++pos;  // single whitespace after the scale field
    const size_t n = static_cast<size_t>(w) * h;
    if (bytes.size() - pos < n * 4)
        throw FormatError("truncated PFM payload: " + path.string());
    const bool little_endian = scale < 0.0;
    Heatmap map(w, h);
    size_t i = 0;
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x, ++i) {
            const char* p = bytes.data() + pos + 4 * i;
            if (little_endian) {
                map.at(x, y) = detail::get_f32_le(p);
            } else {
                const char swapped[4] = {p[3], p[2], p[1], p[0]};
                map.at(x, y) = detail::get_f32_le(swapped);
            }
        }
    }
    return map;
}

// ---------------------------------------------------------------------------
// Annotations CSV

inline const std::string& annotations_header() {
    static const std::string header = "frame_index,class,x,y,w,h,sounding,confidence";
    return header;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double_field(const std::string& s, const char* what, int line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError(std::string("bad ") + what + " value '" + s + "'", line);
    return v;
}

inline int parse_int_field(const std::string& s, const char* what, int line) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError(std::string("bad ") + what + " value '" + s + "'", line);
    return v;
}

}  // namespace detail

/// Parses the annotation CSV into per-frame box sets ordered by frame index.
/// When a frame range [first, last] is supplied, every frame in the range is
/// present in the output (empty when unannotated).
inline std::vector<BoxSet> read_annotations(
    const std::filesystem::path& path,
    std::optional<std::pair<int, int>> frame_range = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());

    std::map<int, BoxSet> by_frame;
    if (frame_range) {
        if (frame_range->second < frame_range->first)
            throw InvalidParameterError("empty annotation frame range");
        for (int f = frame_range->first; f <= frame_range->second; ++f)
            by_frame[f].frame_index = f;
    }

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            // header row; tolerate trailing \r
            continue;
        }
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < 6 || fields.size() > 8)
            throw ParseError("expected 6-8 fields, got " + std::to_string(fields.size()),
                             line_no);
        BBox box;
        box.frame_index = detail::parse_int_field(fields[0], "frame_index", line_no);
        box.class_label = fields[1];
        box.x = detail::parse_double_field(fields[2], "x", line_no);
        box.y = detail::parse_double_field(fields[3], "y", line_no);
        box.w = detail::parse_double_field(fields[4], "w", line_no);
        box.h = detail::parse_double_field(fields[5], "h", line_no);
        if (box.w < 0.0 || box.h < 0.0)
            throw InvalidInputError("negative box extents at line " + std::to_string(line_no) +
                                    ": " + path.string());
        if (fields.size() >= 7 && !fields[6].empty())
            box.sounding = detail::parse_int_field(fields[6], "sounding", line_no) != 0;
        if (fields.size() >= 8 && !fields[7].empty())
            box.confidence = detail::parse_double_field(fields[7], "confidence", line_no);
        auto& set = by_frame[box.frame_index];
        set.frame_index = box.frame_index;
        set.boxes.push_back(std::move(box));
    }

    std::vector<BoxSet> out;
    out.reserve(by_frame.size());
    for (auto& [idx, set] : by_frame) out.push_back(std::move(set));
    return out;
}

inline void write_annotations(std::span<const BoxSet> sets, const std::filesystem::path& path) {
    std::string text = annotations_header() + "\n";
    for (const BoxSet& set : sets) {
        for (const BBox& b : set.boxes) {
            text += std::to_string(set.frame_index) + "," + b.class_label + "," +
                    detail::format_double(b.x) + "," + detail::format_double(b.y) + "," +
                    detail::format_double(b.w) + "," + detail::format_double(b.h) + ",";
            if (b.sounding) text += *b.sounding ? "1" : "0";
            text += ",";
            if (b.confidence) text += detail::format_double(*b.confidence);
            text += "\n";
        }
    }
    detail::write_file_bytes(path, text.data(), text.size());
}

// ---------------------------------------------------------------------------
// Evaluation reports

enum class ReportFormat { Json, Csv };

inline void write_report(const EvalReport& report, const std::filesystem::path& path,
                         ReportFormat format = ReportFormat::Json) {
    if (format == ReportFormat::Csv) {
        std::string text = "frame_index,iou\n";
        for (const FrameScore& fs : report.per_frame)
            text += std::to_string(fs.frame_index) + "," + detail::format_double(fs.iou) + "\n";
        detail::write_file_bytes(path, text.data(), text.size());
        return;
    }
    nlohmann::ordered_json j;
    j["ciou"] = report.ciou;
    j["auc"] = report.auc;
    j["n_frames"] = report.n_frames;
    j["config"] = {{"tau", report.config.tau},
                   {"aggregate", aggregate_name(report.config.aggregate)},
                   {"success_cutoff", report.config.success_cutoff},
                   {"auc_taus", report.config.auc_taus}};
    j["per_frame"] = nlohmann::ordered_json::array();
    for (const FrameScore& fs : report.per_frame)
        j["per_frame"].push_back({{"frame_index", fs.frame_index}, {"iou", fs.iou}});
    const std::string text = j.dump(2) + "\n";
    detail::write_file_bytes(path, text.data(), text.size());
}

inline EvalReport read_report_json(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("bad report JSON: " + path.string() + ": " + e.what());
    }
    EvalReport report;
    report.ciou = j.at("ciou").get<double>();
    report.auc = j.at("auc").get<double>();
    report.n_frames = j.at("n_frames").get<int>();
    const auto& cfg = j.at("config");
    report.config.tau = cfg.at("tau").get<double>();
    report.config.aggregate = cfg.at("aggregate").get<std::string>() == "success-ratio"
                                  ? Aggregate::SuccessRatio
                                  : Aggregate::MeanIou;
    report.config.success_cutoff = cfg.at("success_cutoff").get<double>();
    report.config.auc_taus = cfg.at("auc_taus").get<std::vector<double>>();
    for (const auto& fs : j.at("per_frame"))
        report.per_frame.push_back(
            {fs.at("frame_index").get<int>(), fs.at("iou").get<double>()});
    return report;
}

}  // namespace flowgrad
