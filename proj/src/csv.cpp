#include "wsmil/csv.hpp"

#include "wsmil/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wsmil {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    for (std::size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = i;
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("io", "cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw Error("csv", path.string() + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    CsvTable table(split(line));
    table.source_ = path.string();
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != table.header_.size())
            throw Error("csv", path.string() + ":" + std::to_string(lineno) + ": expected " +
                                   std::to_string(table.header_.size()) + " fields, found " + std::to_string(fields.size()));
        table.rows_.push_back(std::move(fields));
    }
    return table;
}

bool CsvTable::has_column(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t CsvTable::column(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw Error("csv", (source_.empty() ? std::string("table") : source_) + ": missing column '" + std::string(name) + "'");
    return it->second;
}

const std::string& CsvTable::at(std::size_t row, std::string_view name) const { return rows_[row][column(name)]; }

void CsvTable::add_row(std::vector<std::string> fields) {
    if (fields.size() != header_.size()) throw Error("csv", "row width does not match header");
    for (const auto& f : fields)
        if (f.find_first_of(",\n\r") != std::string::npos) throw Error("csv", "field contains a separator: '" + f + "'");
    rows_.push_back(std::move(fields));
}

std::string CsvTable::to_string() const {
    std::ostringstream os;
    auto put = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i];
        os << '\n';
    };
    put(header_);
    for (const auto& r : rows_) put(r);
    return os.str();
}

void CsvTable::write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("io", "cannot write " + path.string());
    os << to_string();
    if (!os) throw Error("io", "failed writing " + path.string());
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw Error("csv", "cannot format value");
    return std::string(buf, ptr);
}

double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error("csv", "cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
    return v;
}

int parse_int(std::string_view text, std::string_view what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error("csv", "cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
    return v;
}

} // namespace wsmil
