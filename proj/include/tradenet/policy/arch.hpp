#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/ops.hpp"
#include "tradenet/core/text.hpp"

namespace tradenet::policy {

enum class ArchKind { mlp, cnn_v1, grcnn };

inline std::string to_string(ArchKind k) {
    switch (k) {
        case ArchKind::mlp: return "mlp";
        case ArchKind::cnn_v1: return "cnn_v1";
        case ArchKind::grcnn: return "grcnn";
    }
    return "?";
}

inline ArchKind parse_arch_kind(const std::string& s) {
    if (s == "mlp") return ArchKind::mlp;
    if (s == "cnn_v1") return ArchKind::cnn_v1;
    if (s == "grcnn") return ArchKind::grcnn;
    fail(ErrorKind::config, "unknown architecture kind '" + s + "' (expected mlp, cnn_v1 or grcnn)");
}

struct ConvSpec {
    std::size_t filters;
    std::size_t kernel;
    std::size_t stride;
};

/// Network description. The conv stack applies to cnn_v1 and grcnn, the
/// hidden widths to mlp.
///
///   mlp    : [colnorm] flatten -> (dense + relu) per hidden width -> heads
///   cnn_v1 : [colnorm] (conv + relu + dropout) per conv -> flatten -> dense + relu -> heads
///   grcnn  : colnorm -> conv + bn + relu + maxpool(2x2) -> (conv + bn + relu) per remaining conv
///            -> flatten -> dense + relu -> heads
///
/// Kernels of every conv after the first shrink to the incoming spatial
/// extent when it is smaller; the first conv and the pool never adapt and
/// fail with a shape error instead.
struct ArchSpec {
    ArchKind kind = ArchKind::mlp;
    std::vector<ConvSpec> convs;
    std::vector<std::size_t> hidden;
    std::size_t dense_width = 512;
    double dropout_p = kDefaultDropout;
    bool use_input_norm = false;

    static ArchSpec mlp() { return {ArchKind::mlp, {}, {64, 64}, 0, 0.0, false}; }
    static ArchSpec cnn_v1() { return {ArchKind::cnn_v1, {{32, 8, 4}, {64, 4, 2}}, {}, 512, kDefaultDropout, false}; }
    static ArchSpec grcnn() {
        return {ArchKind::grcnn, {{32, 8, 4}, {64, 4, 2}, {128, 3, 1}, {256, 3, 1}}, {}, 512, 0.0, true};
    }

    static ArchSpec defaults(ArchKind kind) {
        switch (kind) {
            case ArchKind::mlp: return mlp();
            case ArchKind::cnn_v1: return cnn_v1();
            case ArchKind::grcnn: return grcnn();
        }
        return mlp();
    }

    void validate() const {
        if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail(ErrorKind::config, "arch.dropout_p must be in [0,1)");
        if (kind == ArchKind::mlp) {
            if (hidden.empty()) fail(ErrorKind::config, "mlp needs at least one hidden layer");
            for (auto h : hidden) {
                if (h == 0) fail(ErrorKind::config, "mlp hidden widths must be positive");
            }
            return;
        }
        if (convs.empty()) fail(ErrorKind::config, to_string(kind) + " needs at least one conv layer");
        for (const auto& c : convs) {
            if (c.filters == 0 || c.kernel == 0 || c.stride == 0) {
                fail(ErrorKind::config, "conv filters, kernel and stride must be positive");
            }
        }
        if (dense_width == 0) fail(ErrorKind::config, "arch.dense_width must be positive");
        if (kind == ArchKind::grcnn) {
            if (!use_input_norm) fail(ErrorKind::config, "grcnn always normalizes its input columns");
            for (std::size_t i = 1; i < convs.size(); ++i) {
                if (convs[i].filters <= convs[i - 1].filters) {
                    fail(ErrorKind::config, "grcnn filter counts must grow layer by layer");
                }
            }
        }
    }

    /// key/value form used in checkpoints and resolved configs.
    std::map<std::string, std::string> to_map() const {
        std::map<std::string, std::string> m;
        m["arch.kind"] = to_string(kind);
        std::string convs_s, hidden_s;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            convs_s += (i ? ";" : "") + std::to_string(convs[i].filters) + "x" + std::to_string(convs[i].kernel) +
                       "s" + std::to_string(convs[i].stride);
        }
        for (std::size_t i = 0; i < hidden.size(); ++i) hidden_s += (i ? "," : "") + std::to_string(hidden[i]);
        m["arch.convs"] = convs_s;
        m["arch.hidden"] = hidden_s;
        m["arch.dense_width"] = std::to_string(dense_width);
        m["arch.dropout_p"] = text::format_double(dropout_p);
        m["arch.use_input_norm"] = use_input_norm ? "true" : "false";
        return m;
    }

    /// Parses `filters x kernel s stride` triples separated by ';', e.g. "32x8s4;64x4s2".
    static std::vector<ConvSpec> parse_convs(const std::string& s) {
        std::vector<ConvSpec> out;
        if (text::trim(s).empty()) return out;
        for (auto part : text::split(s, ';')) {
            part = text::trim(part);
            const auto x = part.find('x');
            const auto st = part.find('s');
            if (x == std::string_view::npos || st == std::string_view::npos || st < x) {
                fail(ErrorKind::config, "bad conv spec '" + std::string(part) + "' (expected FxKsS)");
            }
            out.push_back({text::to_int<std::size_t>(part.substr(0, x), "conv filters"),
                           text::to_int<std::size_t>(part.substr(x + 1, st - x - 1), "conv kernel"),
                           text::to_int<std::size_t>(part.substr(st + 1), "conv stride")});
        }
        return out;
    }

    static std::vector<std::size_t> parse_widths(const std::string& s) {
        std::vector<std::size_t> out;
        if (text::trim(s).empty()) return out;
        for (auto part : text::split(s, ',')) out.push_back(text::to_int<std::size_t>(part, "hidden width"));
        return out;
    }

    static bool parse_bool(const std::string& s) {
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        fail(ErrorKind::config, "expected true/false, got '" + s + "'");
    }

    static ArchSpec from_map(const std::map<std::string, std::string>& m) {
        auto get = [&](const std::string& k) -> const std::string& {
            auto it = m.find(k);
            if (it == m.end()) fail(ErrorKind::config, "missing architecture key '" + k + "'");
            return it->second;
        };
        ArchSpec a = defaults(parse_arch_kind(get("arch.kind")));
        a.convs = parse_convs(get("arch.convs"));
        a.hidden = parse_widths(get("arch.hidden"));
        a.dense_width = text::to_int<std::size_t>(get("arch.dense_width"), "arch.dense_width");
        a.dropout_p = text::to_double(get("arch.dropout_p"), "arch.dropout_p");
        a.use_input_norm = parse_bool(get("arch.use_input_norm"));
        a.validate();
        return a;
    }

    friend bool operator==(const ArchSpec& a, const ArchSpec& b) { return a.to_map() == b.to_map(); }
};

}  // namespace tradenet::policy
