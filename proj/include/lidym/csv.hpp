#pragma once

/**
 * @file csv.hpp
 * @brief Minimal CSV reading and writing used by every file format of the
 *        toolkit. Lines starting with '#' before the header are metadata
 *        comments; fields may be double-quoted.
 */

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lidym/errors.hpp"
#include "lidym/text_format.hpp"

namespace lidym {

struct CsvTable {
    std::vector<std::string> comments;   ///< metadata lines without the leading '#'
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string origin = "<csv>";

    int rows_count() const { return static_cast<int>(rows.size()); }

    int column_index(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    }

    int require_column(std::string_view name) const {
        const int index = column_index(name);
        if (index < 0) {
            throw IoError(origin + ": missing column '" + std::string(name) + "'");
        }
        return index;
    }

    Eigen::VectorXd numeric_column(std::string_view name) const {
        const int c = require_column(name);
        Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            try {
                out(static_cast<Eigen::Index>(r)) = parse_double(rows[r][static_cast<std::size_t>(c)]);
            } catch (const IoError& e) {
                throw IoError(origin + ": row " + std::to_string(r + 1) + ", column '" + std::string(name) +
                              "': " + e.what());
            }
        }
        return out;
    }

    /// Value of a `# key = value` metadata comment, empty when absent.
    std::string metadata(std::string_view key) const {
        for (const auto& line : comments) {
            const auto eq = line.find('=');
            if (eq != std::string::npos && trim(line.substr(0, eq)) == key) {
                return trim(line.substr(eq + 1));
            }
        }
        return {};
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(current);
            current.clear();
        } else if (ch != '\r') {
            current += ch;
        }
    }
    fields.push_back(current);
    return fields;
}

}  // namespace detail

inline CsvTable parse_csv(std::string_view text, const std::string& origin = "<csv>") {
    CsvTable table;
    table.origin = origin;
    std::istringstream stream{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (table.header.empty() && line.front() == '#') {
            table.comments.push_back(trim(line.substr(1)));
            continue;
        }
        auto fields = detail::split_csv_line(line);
        if (table.header.empty()) {
            for (auto& f : fields) {
                f = trim(f);
            }
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw IoError(origin + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) {
        throw IoError(origin + ": missing CSV header");
    }
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), path);
}

/// Quotes a field when it contains a comma, quote or leading/trailing space.
inline std::string csv_field(std::string_view value) {
    const bool needs_quotes = value.find_first_of(",\"") != std::string_view::npos ||
                              (!value.empty() && (value.front() == ' ' || value.back() == ' '));
    if (!needs_quotes) {
        return std::string(value);
    }
    std::string out = "\"";
    for (char ch : value) {
        if (ch == '"') {
            out += '"';
        }
        out += ch;
    }
    return out + "\"";
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    out << content;
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

}  // namespace lidym
