#include "sdebridge/csvio.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace sdebridge {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.parent_path() /
                         (target.filename().string() + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename " + tmp.string() + " to " + path + ": " +
                                 ec.message());
    }
}

namespace {

// Quote a field per RFC 4180 when it contains a delimiter, quote or newline.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string to_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t k = 0; k < table.header.size(); ++k) {
        if (k) out += ',';
        out += csv_field(table.header[k]);
    }
    out += "\r\n";
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += format_double(row[k]);
        }
        out += "\r\n";
    }
    return out;
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (t.header.empty()) {
            t.header = fields;
            continue;
        }
        if (fields.size() != t.header.size())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(t.header.size()) + " fields, got " +
                                     std::to_string(fields.size()));
        std::vector<double> row(fields.size());
        for (std::size_t k = 0; k < fields.size(); ++k) {
            const std::string& f = fields[k];
            double v = 0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": not a number: '" + f + "'");
            row[k] = v;
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw std::runtime_error(origin + ": empty file");
    return t;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

void write_csv_atomic(const std::string& path, const CsvTable& table) {
    write_text_atomic(path, to_csv(table));
}

CsvTable observations_to_table(const Observations& obs) {
    CsvTable t;
    const int d = obs.x.empty() ? 0 : static_cast<int>(obs.x[0].size());
    t.header.push_back("t");
    for (int k = 1; k <= d; ++k) t.header.push_back("x" + std::to_string(k));
    for (std::size_t i = 0; i < obs.t.size(); ++i) {
        std::vector<double> row;
        row.reserve(d + 1);
        row.push_back(obs.t[i]);
        for (int k = 0; k < d; ++k) row.push_back(obs.x[i](k));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Observations table_to_observations(const CsvTable& table, const std::string& origin) {
    if (table.header.empty() || table.header[0] != "t")
        throw std::runtime_error(origin + ": first column must be 't'");
    for (std::size_t k = 1; k < table.header.size(); ++k)
        if (table.header[k] != "x" + std::to_string(k))
            throw std::runtime_error(origin + ": column " + std::to_string(k + 1) +
                                     " must be named x" + std::to_string(k));
    Observations obs;
    const int d = static_cast<int>(table.header.size()) - 1;
    if (d < 1) throw std::runtime_error(origin + ": no state columns");
    for (const auto& row : table.rows) {
        obs.t.push_back(row[0]);
        Vec x(d);
        for (int k = 0; k < d; ++k) x(k) = row[k + 1];
        obs.x.push_back(x);
    }
    return obs;
}

}  // namespace sdebridge
