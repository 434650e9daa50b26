#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/tensor.hpp"
#include "tradenet/core/text.hpp"

namespace tradenet {

/// Checkpoint = text manifest + flat binary blob.
///
/// Manifest (`<stem>.manifest`), one record per line:
///   format tradenet-checkpoint-v1
///   blob <file name of the blob, relative to the manifest>
///   meta <key> <value...>
///   tensor <name> <d0,d1,...> <byte offset> <element count>
/// Blob (`<stem>.bin`): the tensors back to back as little-endian IEEE-754
/// binary64, in manifest order.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& tensor(const std::string& name) const {
        for (const auto& [n, t] : tensors) {
            if (n == name) return t;
        }
        fail(ErrorKind::data, "checkpoint has no tensor named '" + name + "'");
    }

    const std::string& get(const std::string& key) const {
        auto it = meta.find(key);
        if (it == meta.end()) fail(ErrorKind::data, "checkpoint has no meta key '" + key + "'");
        return it->second;
    }
};

inline constexpr std::string_view kCheckpointFormat = "tradenet-checkpoint-v1";

namespace detail {
inline void put_le64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}
inline double get_le64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}
}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt) {
    const auto manifest_path = std::filesystem::path(stem.string() + ".manifest");
    const auto blob_path = std::filesystem::path(stem.string() + ".bin");
    std::ostringstream manifest;
    manifest << "format " << kCheckpointFormat << '\n';
    manifest << "blob " << blob_path.filename().string() << '\n';
    for (const auto& [k, v] : ckpt.meta) {
        if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
            fail(ErrorKind::value, "checkpoint meta key/value not representable: '" + k + "'");
        }
        manifest << "meta " << k << ' ' << v << '\n';
    }
    std::string blob;
    std::size_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        std::string dims;
        for (std::size_t i = 0; i < t.rank(); ++i) dims += (i ? "," : "") + std::to_string(t.dim(i));
        manifest << "tensor " << name << ' ' << dims << ' ' << offset << ' ' << t.size() << '\n';
        for (double v : t.data()) detail::put_le64(blob, v);
        offset += t.size() * 8;
    }
    std::ofstream m(manifest_path, std::ios::binary);
    std::ofstream b(blob_path, std::ios::binary);
    if (!m || !b) fail(ErrorKind::io, "cannot write checkpoint at " + stem.string());
    m << manifest.str();
    b.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!m || !b) fail(ErrorKind::io, "failed writing checkpoint at " + stem.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& stem) {
    auto manifest_path = std::filesystem::path(stem.string() + ".manifest");
    if (stem.extension() == ".manifest") manifest_path = stem;
    std::ifstream m(manifest_path);
    if (!m) fail(ErrorKind::io, "cannot open checkpoint manifest " + manifest_path.string());
    Checkpoint ckpt;
    std::string blob_name;
    struct Entry {
        std::string name;
        Shape shape;
        std::size_t offset, count;
    };
    std::vector<Entry> entries;
    std::string line;
    std::size_t lineno = 0;
    bool format_ok = false;
    while (std::getline(m, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        const auto where = manifest_path.string() + ":" + std::to_string(lineno);
        if (tag == "format") {
            std::string f;
            is >> f;
            if (f != kCheckpointFormat) fail(ErrorKind::parse, where + ": unsupported checkpoint format '" + f + "'");
            format_ok = true;
        } else if (tag == "blob") {
            is >> blob_name;
        } else if (tag == "meta") {
            std::string key;
            is >> key;
            std::string value;
            std::getline(is, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ckpt.meta[key] = value;
        } else if (tag == "tensor") {
            Entry e;
            std::string dims;
            if (!(is >> e.name >> dims >> e.offset >> e.count)) fail(ErrorKind::parse, where + ": malformed tensor record");
            for (auto d : text::split(dims, ',')) e.shape.push_back(text::to_int<std::size_t>(d, "tensor dimension"));
            if (shape_numel(e.shape) != e.count) fail(ErrorKind::parse, where + ": shape and count disagree");
            entries.push_back(std::move(e));
        } else {
            fail(ErrorKind::parse, where + ": unknown record '" + tag + "'");
        }
    }
    if (!format_ok) fail(ErrorKind::parse, manifest_path.string() + ": missing format line");
    if (blob_name.empty()) fail(ErrorKind::parse, manifest_path.string() + ": missing blob line");
    const auto blob_path = manifest_path.parent_path() / blob_name;
    std::ifstream b(blob_path, std::ios::binary);
    if (!b) fail(ErrorKind::io, "cannot open checkpoint blob " + blob_path.string());
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    for (auto& e : entries) {
        if (e.offset + e.count * 8 > blob.size()) {
            fail(ErrorKind::data, "checkpoint tensor '" + e.name + "' extends past end of blob");
        }
        std::vector<double> values(e.count);
        for (std::size_t i = 0; i < e.count; ++i) values[i] = detail::get_le64(blob.data() + e.offset + 8 * i);
        ckpt.tensors.emplace_back(e.name, Tensor(e.shape, std::move(values)));
    }
    return ckpt;
}

}  // namespace tradenet
