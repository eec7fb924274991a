#pragma once

#include <concepts>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "atl/error.hpp"

namespace atl {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Flat key=value document, one entry per line, insertion-ordered. Used for
// experiment reports, capacity reports and resolved run configs so runs are
// diffable with standard tools.
class KvDoc {
  public:
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = value;
                return;
            }
        entries_.push_back({key, value});
    }
    void set(const std::string& key, double value) { set(key, format_double(value)); }
    template <typename T>
        requires std::integral<T> && (!std::same_as<T, bool>)
    void set(const std::string& key, T value) {
        set(key, std::to_string(value));
    }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "1" : "0")); }

    bool has(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return true;
        return false;
    }

    const std::string& get(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return v;
        throw DataError("missing key: " + key);
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? get(key) : fallback;
    }

    double get_double(const std::string& key) const { return std::stod(get(key)); }
    long get_long(const std::string& key) const { return std::stol(get(key)); }
    std::uint64_t get_u64(const std::string& key) const { return std::stoull(get(key)); }

    std::string to_string() const {
        std::string out;
        for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        out << to_string();
    }

    static KvDoc parse(const std::string& text) {
        KvDoc doc;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw DataError("bad key=value line: " + line);
            doc.entries_.push_back({line.substr(0, eq), line.substr(eq + 1)});
        }
        return doc;
    }

    static KvDoc load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot read " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace atl
