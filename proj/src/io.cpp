#include "polyvmt/io.hpp"

#include "polyvmt/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace polyvmt {

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::column(std::string_view name) const {
    if (auto idx = find_column(name))
        return *idx;
    throw DataError("missing column '" + std::string(name) + "'");
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(sep, start);
        const std::size_t end = pos == std::string_view::npos ? text.size() : pos;
        out.push_back(trim(text.substr(start, end - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot read '" + path.string() + "'");
    CsvTable table;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty())
            continue;
        auto fields = split_list(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
    }
    if (!have_header)
        throw DataError("'" + path.string() + "' has no header row");
    return table;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
    row(std::move(header));
}

CsvWriter& CsvWriter::row(std::vector<std::string> fields) {
    if (fields.size() != width_)
        throw std::logic_error("CsvWriter: row width mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            buffer_ += ',';
        buffer_ += fields[i];
    }
    buffer_ += '\n';
    return *this;
}

std::string CsvWriter::str() const { return buffer_; }

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, buffer_); }

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int(long long v) { return std::to_string(v); }

bool is_missing(std::string_view field) {
    const std::string f = trim(field);
    if (f.empty())
        return true;
    std::string lower(f);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "na" || lower == "nan";
}

std::optional<double> parse_double(std::string_view field) {
    const std::string f = trim(field);
    if (is_missing(f))
        return std::nullopt;
    double v = 0.0;
    const char* first = f.data();
    if (*first == '+')
        ++first;
    const auto res = std::from_chars(first, f.data() + f.size(), v);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw DataError("not a number: '" + f + "'");
    return v;
}

std::optional<long long> parse_int(std::string_view field) {
    const auto v = parse_double(field);
    if (!v)
        return std::nullopt;
    if (*v != std::floor(*v))
        throw DataError("not an integer: '" + trim(field) + "'");
    return static_cast<long long>(*v);
}

KeyValues parse_key_values(std::string_view text) {
    KeyValues kv;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const std::string t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        kv[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv)
        out += k + " = " + v + "\n";
    return out;
}

void write_text(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

} // namespace polyvmt
