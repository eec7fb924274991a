#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "atl/error.hpp"
#include "atl/nn.hpp"

namespace atl {

// Model container, format "ATL1": a human-readable header (shapes,
// activations, optional config echo), a little-endian binary weight payload
// and a trailing FNV-1a checksum of the payload. Round-trips are bit-exact.

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

namespace detail {

inline std::uint64_t fnv1a_bytes(const char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

inline void save_model(const Network& net, const std::string& path,
                       const std::vector<std::string>& config_echo = {}) {
    net.validate();
    std::ostringstream header;
    header << "ATL1\n";
    header << "layers " << net.layers.size() << "\n";
    for (const auto& layer : net.layers)
        header << "layer " << layer.W.rows << " " << layer.W.cols << " " << layer.act.name()
               << "\n";
    header << "config " << config_echo.size() << "\n";
    for (const auto& line : config_echo) header << line << "\n";
    header << "end\n";

    std::string payload;
    for (const auto& layer : net.layers) {
        const std::size_t bytes = layer.W.a.size() * sizeof(double);
        const std::size_t off = payload.size();
        payload.resize(off + bytes);
        std::memcpy(payload.data() + off, layer.W.a.data(), bytes);
    }
    const std::uint64_t checksum = detail::fnv1a_bytes(payload.data(), payload.size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_model: cannot write " + path);
    out << header.str();
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw DataError("save_model: write failed for " + path);
}

struct LoadedModel {
    Network net;
    std::vector<std::string> config_echo;
};

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_model: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string blob = ss.str();

    std::istringstream hs(blob);
    std::string line;
    if (!std::getline(hs, line)) throw TruncationError("load_model: empty file " + path);
    if (line != "ATL1") throw VersionError("load_model: unsupported container version '" + line + "'");

    LoadedModel m;
    std::size_t layer_count = 0;
    if (!(hs >> line >> layer_count) || line != "layers")
        throw TruncationError("load_model: malformed header in " + path);
    std::getline(hs, line);
    for (std::size_t i = 0; i < layer_count; ++i) {
        std::size_t rows = 0, cols = 0;
        std::string tag, act;
        if (!(hs >> tag >> rows >> cols >> act) || tag != "layer")
            throw TruncationError("load_model: truncated layer table in " + path);
        std::getline(hs, line);
        m.net.layers.push_back({Matrix(rows, cols), Activation::parse(act)});
    }
    std::size_t echo_count = 0;
    std::string tag;
    if (!(hs >> tag >> echo_count) || tag != "config")
        throw TruncationError("load_model: truncated config block in " + path);
    std::getline(hs, line);
    for (std::size_t i = 0; i < echo_count; ++i) {
        if (!std::getline(hs, line)) throw TruncationError("load_model: truncated config echo");
        m.config_echo.push_back(line);
    }
    if (!std::getline(hs, line) || line != "end")
        throw TruncationError("load_model: missing header terminator in " + path);

    const std::size_t payload_off = static_cast<std::size_t>(hs.tellg());
    std::size_t payload_len = 0;
    for (const auto& layer : m.net.layers) payload_len += layer.W.a.size() * sizeof(double);
    if (blob.size() < payload_off + payload_len + sizeof(std::uint64_t))
        throw TruncationError("load_model: file shorter than declared payload in " + path);

    const char* p = blob.data() + payload_off;
    const std::uint64_t checksum = detail::fnv1a_bytes(p, payload_len);
    std::uint64_t stored = 0;
    std::memcpy(&stored, blob.data() + payload_off + payload_len, sizeof(stored));
    if (stored != checksum) throw ChecksumError("load_model: checksum mismatch in " + path);

    for (auto& layer : m.net.layers) {
        const std::size_t bytes = layer.W.a.size() * sizeof(double);
        std::memcpy(layer.W.a.data(), p, bytes);
        p += bytes;
    }
    m.net.validate();
    return m;
}

} // namespace atl
