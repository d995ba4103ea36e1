#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ino/metrics/mask_raster.hpp"
#include "ino/views/image.hpp"

// On-disk layout: one directory per video holding frame_%05d.ppm (P6) and,
// for evaluation videos only, mask_%05d.pgm (P5, pixel = object id). An
// index file videos.txt lists the video directories, one per line, relative
// to the index file's directory.

namespace ino {

struct Video {
    std::string id;
    std::vector<Image> frames;
    std::vector<MaskRaster> masks;  // empty for training videos
};

inline std::string numbered_name(const char* stem, std::size_t i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05zu.%s", stem, i, ext);
    return buf;
}

inline std::string frame_file_name(std::size_t i) { return numbered_name("frame", i, "ppm"); }
inline std::string mask_file_name(std::size_t i) { return numbered_name("mask", i, "pgm"); }

inline void write_video(const std::filesystem::path& dir, const Video& v) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < v.frames.size(); ++i) write_ppm(dir / frame_file_name(i), v.frames[i]);
    for (std::size_t i = 0; i < v.masks.size(); ++i) write_pgm(dir / mask_file_name(i), v.masks[i]);
}

inline bool has_mask_files(const std::filesystem::path& dir) { return std::filesystem::exists(dir / mask_file_name(0)); }

inline Video load_video(const std::filesystem::path& dir, bool with_masks) {
    if (!std::filesystem::is_directory(dir)) throw IoError("video directory not found: " + dir.string());
    Video v;
    v.id = dir.filename().string();
    for (std::size_t i = 0; std::filesystem::exists(dir / frame_file_name(i)); ++i) v.frames.push_back(read_ppm(dir / frame_file_name(i)));
    if (v.frames.empty()) throw IoError("no frames in " + dir.string());
    if (with_masks) {
        for (std::size_t i = 0; i < v.frames.size() && std::filesystem::exists(dir / mask_file_name(i)); ++i) {
            v.masks.push_back(read_pgm(dir / mask_file_name(i)));
        }
        if (v.masks.empty()) throw IoError("missing first-frame mask in " + dir.string());
    }
    return v;
}

inline std::vector<std::filesystem::path> read_index(const std::filesystem::path& index) {
    std::ifstream is(index);
    if (!is) throw IoError("cannot open index " + index.string());
    std::vector<std::filesystem::path> dirs;
    std::string line;
    while (std::getline(is, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        dirs.push_back(index.parent_path() / line);
    }
    return dirs;
}

inline void write_index(const std::filesystem::path& index, const std::vector<std::string>& entries) {
    std::ofstream os(index);
    if (!os) throw IoError("cannot open " + index.string() + " for writing");
    for (const auto& e : entries) os << e << '\n';
}

/// Loads every video of a training index. Training never sees masks: an
/// index entry carrying mask files is rejected.
inline std::vector<Video> load_training_videos(const std::filesystem::path& index) {
    std::vector<Video> out;
    for (const auto& dir : read_index(index)) {
        if (has_mask_files(dir)) throw IoError("training video carries mask files: " + dir.string());
        out.push_back(load_video(dir, false));
    }
    return out;
}

inline std::vector<Video> load_evaluation_videos(const std::filesystem::path& index) {
    std::vector<Video> out;
    for (const auto& dir : read_index(index)) out.push_back(load_video(dir, true));
    return out;
}

}  // namespace ino
