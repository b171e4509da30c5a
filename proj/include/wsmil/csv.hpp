#pragma once

// Minimal comma-separated tables: header row, no quoting. Every file the
// pipeline writes uses plain identifiers and numbers, so fields never embed
// commas; the writer enforces that.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace wsmil {

class CsvTable {
public:
    CsvTable() = default;
    explicit CsvTable(std::vector<std::string> header);

    static CsvTable read(const std::filesystem::path& path);

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::size_t rows() const noexcept { return rows_.size(); }
    bool has_column(std::string_view name) const;
    std::size_t column(std::string_view name) const;  // throws naming the file and column

    const std::string& at(std::size_t row, std::string_view name) const;
    const std::vector<std::string>& row(std::size_t r) const { return rows_[r]; }
    // 1-based line number in the source file, for error messages.
    std::size_t line_of(std::size_t row) const noexcept { return row + 2; }

    void add_row(std::vector<std::string> fields);
    void write(const std::filesystem::path& path) const;
    std::string to_string() const;

    const std::string& source() const noexcept { return source_; }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::string source_;
};

// Shortest round-trip representation of a double.
std::string format_double(double v);
double parse_double(std::string_view text, std::string_view what);
int parse_int(std::string_view text, std::string_view what);

} // namespace wsmil
