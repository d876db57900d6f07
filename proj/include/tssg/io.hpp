#pragma once

// Output tables. A table is written as CSV whose first line is
// "# manifest <hash>", then a header row, then data rows; the JSON mirror
// holds the same hash, column names and rows. Numbers use the shortest
// representation that reads back to the same double.

#include "tssg/config.hpp"
#include "tssg/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tssg {

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) {
            throw InvalidArgument("table: row width does not match the header");
        }
        rows.push_back(std::move(row));
    }
};

enum class OutputFormat { Csv, Json, Both };

inline std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline std::string format_cell(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) {
        return std::to_string(*i);
    }
    if (const auto* d = std::get_if<double>(&c)) {
        return format_number(*d);
    }
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char ch : s) {
        q += ch;
        if (ch == '"') {
            q += '"';
        }
    }
    return q + "\"";
}

/// Integer if the whole field is one, else a double if it parses as one,
/// else the text itself.
inline Cell parse_cell(std::string_view s) {
    std::int64_t i = 0;
    const char* end = s.data() + s.size();
    if (auto r = std::from_chars(s.data(), end, i); r.ec == std::errc() && r.ptr == end && !s.empty()) {
        return i;
    }
    double d = 0.0;
    if (auto r = std::from_chars(s.data(), end, d); r.ec == std::errc() && r.ptr == end && !s.empty()) {
        return d;
    }
    return std::string(s);
}

inline double cell_number(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) {
        return static_cast<double>(*i);
    }
    if (const auto* d = std::get_if<double>(&c)) {
        return *d;
    }
    throw InvalidArgument("table: cell is not numeric");
}

inline std::string to_csv(const Table& t, const std::string& manifest) {
    std::string out = "# manifest " + manifest + "\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        out += (c ? "," : "") + t.columns[c];
    }
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += (c ? "," : "") + format_cell(row[c]);
        }
        out += "\n";
    }
    return out;
}

struct ParsedTable {
    std::string manifest;
    Table table;
};

inline ParsedTable parse_csv(std::string_view text) {
    // Split into records of fields, honoring quoted fields.
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(fields));
            fields.clear();
            any = false;
        } else if (c != '\r') {
            field += c;
            any = true;
        }
    }
    if (any || !field.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
    }
    if (quoted) {
        throw InvalidArgument("csv: unterminated quoted field");
    }
    if (records.size() < 2 || records[0].size() != 1 || records[0][0].rfind("# manifest ", 0) != 0) {
        throw InvalidArgument("csv: missing manifest line or header");
    }
    ParsedTable out;
    out.manifest = records[0][0].substr(11);
    out.table.columns = records[1];
    for (std::size_t r = 2; r < records.size(); ++r) {
        std::vector<Cell> row;
        for (const auto& f : records[r]) {
            row.push_back(parse_cell(f));
        }
        if (row.size() != out.table.columns.size()) {
            throw InvalidArgument("csv: row " + std::to_string(r - 1) + " has " +
                                  std::to_string(row.size()) + " fields, expected " +
                                  std::to_string(out.table.columns.size()));
        }
        out.table.rows.push_back(std::move(row));
    }
    return out;
}

/// {"manifest": ..., "columns": [...], "rows": [{column: value}, ...]};
/// non-finite numbers become null.
inline Json to_json(const Table& t, const std::string& manifest) {
    Json rows = Json::array();
    for (const auto& row : t.rows) {
        Json r = Json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            const Cell& v = row[c];
            if (const auto* i = std::get_if<std::int64_t>(&v)) {
                r[t.columns[c]] = *i;
            } else if (const auto* d = std::get_if<double>(&v)) {
                r[t.columns[c]] = std::isfinite(*d) ? Json(*d) : Json(nullptr);
            } else {
                r[t.columns[c]] = std::get<std::string>(v);
            }
        }
        rows.push_back(std::move(r));
    }
    Json out;
    out["manifest"] = manifest;
    out["columns"] = t.columns;
    out["rows"] = std::move(rows);
    return out;
}

inline ParsedTable parse_json_table(std::string_view text) {
    const Json j = Json::parse(text.begin(), text.end());
    ParsedTable out;
    out.manifest = j.at("manifest").get<std::string>();
    out.table.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
        std::vector<Cell> row;
        for (const auto& c : out.table.columns) {
            const Json& v = r.at(c);
            if (v.is_null()) {
                row.emplace_back(std::numeric_limits<double>::quiet_NaN());
            } else if (v.is_number_integer()) {
                row.emplace_back(v.get<std::int64_t>());
            } else if (v.is_number()) {
                row.emplace_back(v.get<double>());
            } else {
                row.emplace_back(v.get<std::string>());
            }
        }
        out.table.rows.push_back(std::move(row));
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw InvalidArgument("failed writing '" + path.string() + "'");
    }
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot read '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes `<dir>/<stem>.csv` and/or `<dir>/<stem>.json`; returns the file names.
inline std::vector<std::string> write_table(const std::filesystem::path& dir, const std::string& stem,
                                            const Table& t, const std::string& manifest,
                                            OutputFormat format) {
    std::vector<std::string> names;
    if (format != OutputFormat::Json) {
        write_text(dir / (stem + ".csv"), to_csv(t, manifest));
        names.push_back(stem + ".csv");
    }
    if (format != OutputFormat::Csv) {
        write_text(dir / (stem + ".json"), to_json(t, manifest).dump(1) + "\n");
        names.push_back(stem + ".json");
    }
    return names;
}

}  // namespace tssg
