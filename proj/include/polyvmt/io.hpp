#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace polyvmt {

/// Header-row delimited text, comma separated, no quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Throws DataError naming the column when absent.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    CsvWriter& row(std::vector<std::string> fields);
    std::string str() const;
    void save(const std::filesystem::path& path) const;

private:
    std::size_t width_;
    std::string buffer_;
};

/// Shortest round-trip decimal representation.
std::string format_double(double v);
std::string format_int(long long v);

/// Empty, "NA", "NaN" (any case) count as missing.
bool is_missing(std::string_view field);
std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

/// Flat `key = value` text; '#' starts a comment; later keys override earlier ones.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const std::filesystem::path& path);
KeyValues parse_key_values(std::string_view text);
std::string format_key_values(const KeyValues& kv);

std::vector<std::string> split_list(std::string_view text, char sep = ',');
std::string trim(std::string_view s);

void write_text(const std::filesystem::path& path, std::string_view contents);

} // namespace polyvmt
