#include "rfr/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rfr/errors.hpp"

namespace rfr::io {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k)
            c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[i] = c;
    }
    return table;
}

} // namespace

std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed) {
    static const auto table = make_crc_table();
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < size; ++i)
        c = table[(c ^ p[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for checksum: " + path.string());
    std::uint32_t crc = 0;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::streamsize got = in.gcount();
        if (got > 0) crc = crc32(buf.data(), static_cast<std::size_t>(got), crc);
    }
    return crc;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{})
        throw IoError("not a number: '" + text + "'");
    return v;
}

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());

    Table table;
    std::string line;
    if (!std::getline(in, line)) throw CorruptFile("empty csv: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    }
    const auto cols = table.columns.size();
    if (cols == 0) throw CorruptFile("csv header has no columns: " + path.string());

    std::vector<double> flat;
    long rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t got = 0;
        while (std::getline(ss, cell, ',')) {
            flat.push_back(parse_double(cell));
            ++got;
        }
        if (got != cols)
            throw CorruptFile(path.string() + ": row " + std::to_string(rows + 1) +
                              " has " + std::to_string(got) + " cells, expected " +
                              std::to_string(cols));
        ++rows;
    }

    table.data.resize(rows, static_cast<long>(cols));
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < static_cast<long>(cols); ++c)
            table.data(r, c) = flat[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)];
    return table;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& columns,
               const Eigen::MatrixXd& data) {
    if (static_cast<long>(columns.size()) != data.cols())
        throw ValidationError("write_csv: header/data column mismatch");
    std::ofstream out(path, std::ios::binary);  // binary: one newline style everywhere
    if (!out) throw IoError("cannot write: " + path.string());

    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c) out << ',';
        out << columns[c];
    }
    out << '\n';
    for (long r = 0; r < data.rows(); ++r) {
        for (long c = 0; c < data.cols(); ++c) {
            if (c) out << ',';
            out << format_double(data(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_meta(const std::filesystem::path& path, const MetaMap& meta) {
    nlohmann::json j(meta);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

MetaMap read_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFile(path.string() + ": " + e.what());
    }
    MetaMap meta;
    for (auto& [key, value] : j.items()) {
        if (value.is_string()) meta[key] = value.get<std::string>();
        else meta[key] = value.dump();
    }
    return meta;
}

} // namespace rfr::io
