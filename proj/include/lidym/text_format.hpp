#pragma once

// Sectioned key-value text used by configs, robot descriptions, identified
// models and checkpoints:
//
//   # comment
//   [section]
//   key = value tokens ...
//
// Sections and keys may repeat; order is preserved.

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lidym/errors.hpp"

namespace lidym {

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, end);
}

inline double parse_double(std::string_view token) {
    if (token == "nan") {
        return std::nan("");
    }
    if (token == "inf") {
        return INFINITY;
    }
    if (token == "-inf") {
        return -INFINITY;
    }
    double value = 0.0;
    const char* first = token.data();
    if (!token.empty() && token.front() == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw IoError("not a number: '" + std::string(token) + "'");
    }
    return value;
}

inline std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

inline std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream stream{std::string(text)};
    std::string token;
    while (stream >> token) {
        out.push_back(token);
    }
    return out;
}

inline std::vector<double> parse_doubles(std::string_view text) {
    std::vector<double> out;
    for (const auto& token : split_whitespace(text)) {
        out.push_back(parse_double(token));
    }
    return out;
}

template <typename Derived>
std::string join_doubles(const Eigen::DenseBase<Derived>& values) {
    std::string out;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += format_double(values.derived()(i));
    }
    return out;
}

inline std::string join_doubles(const std::vector<double>& values) {
    return join_doubles(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

struct TextSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(std::string_view key) const {
        for (const auto& [k, v] : entries) {
            if (k == key) {
                return true;
            }
        }
        return false;
    }

    /// Value of the last entry named `key`.
    std::optional<std::string> find(std::string_view key) const {
        std::optional<std::string> out;
        for (const auto& [k, v] : entries) {
            if (k == key) {
                out = v;
            }
        }
        return out;
    }

    std::string get(std::string_view key) const {
        auto value = find(key);
        if (!value) {
            throw IoError("section [" + name + "] is missing key '" + std::string(key) + "'");
        }
        return *value;
    }

    std::vector<std::string> get_all(std::string_view key) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : entries) {
            if (k == key) {
                out.push_back(v);
            }
        }
        return out;
    }

    double get_double(std::string_view key) const { return parse_double(trim(get(key))); }

    double get_double(std::string_view key, double fallback) const {
        auto value = find(key);
        return value ? parse_double(trim(*value)) : fallback;
    }

    long long get_int(std::string_view key, long long fallback) const {
        auto value = find(key);
        if (!value) {
            return fallback;
        }
        const double parsed = parse_double(trim(*value));
        if (parsed != std::floor(parsed)) {
            throw IoError("key '" + std::string(key) + "' in [" + name + "] must be an integer");
        }
        return static_cast<long long>(parsed);
    }

    bool get_bool(std::string_view key, bool fallback) const {
        auto value = find(key);
        if (!value) {
            return fallback;
        }
        const std::string v = trim(*value);
        if (v == "1" || v == "true" || v == "yes" || v == "on") {
            return true;
        }
        if (v == "0" || v == "false" || v == "no" || v == "off") {
            return false;
        }
        throw IoError("key '" + std::string(key) + "' in [" + name + "] is not a boolean: " + v);
    }

    std::vector<double> get_doubles(std::string_view key) const { return parse_doubles(get(key)); }

    void set(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
};

class TextDocument {
public:
    std::vector<TextSection> sections;

    static TextDocument parse(std::string_view text, const std::string& origin = "<text>") {
        TextDocument doc;
        std::istringstream stream{std::string(text)};
        std::string line;
        int line_no = 0;
        while (std::getline(stream, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line.erase(hash);
            }
            const std::string content = trim(line);
            if (content.empty()) {
                continue;
            }
            if (content.front() == '[') {
                if (content.back() != ']') {
                    throw IoError(origin + ":" + std::to_string(line_no) + ": malformed section header");
                }
                doc.sections.push_back(TextSection{trim(content.substr(1, content.size() - 2)), {}});
                continue;
            }
            const auto eq = content.find('=');
            if (eq == std::string::npos) {
                throw IoError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
            }
            if (doc.sections.empty()) {
                doc.sections.push_back(TextSection{"", {}});
            }
            doc.sections.back().set(trim(content.substr(0, eq)), trim(content.substr(eq + 1)));
        }
        return doc;
    }

    static TextDocument load(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw IoError("cannot open '" + path + "'");
        }
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse(buffer.str(), path);
    }

    std::string serialize() const {
        std::string out;
        for (const auto& section : sections) {
            if (!section.name.empty()) {
                if (!out.empty()) {
                    out += '\n';
                }
                out += "[" + section.name + "]\n";
            }
            for (const auto& [k, v] : section.entries) {
                out += k + " = " + v + "\n";
            }
        }
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) {
            throw IoError("cannot write '" + path + "'");
        }
        out << serialize();
        if (!out) {
            throw IoError("write failed for '" + path + "'");
        }
    }

    const TextSection* find(std::string_view name) const {
        for (const auto& section : sections) {
            if (section.name == name) {
                return &section;
            }
        }
        return nullptr;
    }

    /// The named section, or an empty one when absent (all keys then fall back to defaults).
    TextSection section_or_empty(std::string_view name) const {
        const TextSection* s = find(name);
        return s ? *s : TextSection{std::string(name), {}};
    }

    std::vector<const TextSection*> find_all(std::string_view name) const {
        std::vector<const TextSection*> out;
        for (const auto& section : sections) {
            if (section.name == name) {
                out.push_back(&section);
            }
        }
        return out;
    }

    TextSection& add(std::string name) {
        sections.push_back(TextSection{std::move(name), {}});
        return sections.back();
    }
};

}  // namespace lidym
