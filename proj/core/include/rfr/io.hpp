#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rfr::io {

// CRC-32 (IEEE 802.3 polynomial, reflected). Used for model file trailers
// and artifact checksums in run manifests.
std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed = 0);
std::uint32_t crc32_file(const std::filesystem::path& path);

struct Table {
    std::vector<std::string> columns;
    Eigen::MatrixXd data;
};

// Comma-separated numeric table with one header row. Values are written
// with round-trip precision ("%.17g") so re-reading reproduces the doubles
// bit for bit.
Table read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& columns,
               const Eigen::MatrixXd& data);

// Flat string map serialized as a JSON object, written next to data files
// as "<name>.meta.json".
using MetaMap = std::map<std::string, std::string>;
void write_meta(const std::filesystem::path& path, const MetaMap& meta);
MetaMap read_meta(const std::filesystem::path& path);

std::string format_double(double v);   // shortest round-trip decimal
double parse_double(const std::string& text);

} // namespace rfr::io
