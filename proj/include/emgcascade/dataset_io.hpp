#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgcascade/signal_model.hpp"

namespace emgcascade {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    out.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error(where + ": cannot parse number '" + s + "'");
  return v;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads one recording CSV (header `ch1,...,chL`, one row per sample).
inline Matrix read_channels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = detail::split_csv_line(line);
  const std::size_t width = header.size();
  for (std::size_t c = 0; c < width; ++c)
    if (header[c] != "ch" + std::to_string(c + 1))
      throw std::runtime_error(path.string() + ": header column " + std::to_string(c + 1) +
                               " should be ch" + std::to_string(c + 1));
  std::vector<std::vector<double>> cols(width);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(row);
    if (cells.size() != width) throw std::runtime_error(where + ": wrong column count");
    for (std::size_t c = 0; c < width; ++c) cols[c].push_back(detail::parse_double(cells[c], where));
  }
  const std::size_t n = cols.empty() ? 0 : cols.front().size();
  Matrix m(width, n);
  for (std::size_t c = 0; c < width; ++c) std::copy(cols[c].begin(), cols[c].end(), m.row(c).begin());
  return m;
}

inline void write_channels_csv(const std::filesystem::path& path, const Matrix& channels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t c = 0; c < channels.rows(); ++c) out << (c ? "," : "") << "ch" << c + 1;
  out << '\n';
  for (std::size_t s = 0; s < channels.cols(); ++s) {
    for (std::size_t c = 0; c < channels.rows(); ++c)
      out << (c ? "," : "") << detail::format_double(channels(c, s));
    out << '\n';
  }
}

/// Loads all recordings listed in a manifest. The manifest is a JSON object
/// mapping a CSV path (relative to the manifest) to
/// {class_label, subject_id, sample_rate_hz}. Entries are returned in key
/// order, so loading is deterministic.
inline std::vector<Recording> load_recordings(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object()) throw std::runtime_error(manifest_path.string() + ": expected object");
  const auto base = manifest_path.parent_path();
  std::vector<Recording> out;
  for (const auto& [file, meta] : manifest.items()) {
    try {
      Recording rec(read_channels_csv(base / file), meta.at("sample_rate_hz").get<double>(),
                    meta.at("class_label").get<int>(), meta.value("subject_id", std::string{}));
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(manifest_path.string() + " entry '" + file + "': " + e.what());
    }
  }
  return out;
}

struct ManifestEntry {
  std::string file;
  Recording recording;
};

inline void write_recordings(const std::filesystem::path& dir,
                             const std::vector<ManifestEntry>& entries,
                             const std::string& manifest_name = "manifest.json") {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::object();
  for (const auto& e : entries) {
    write_channels_csv(dir / e.file, e.recording.channels);
    manifest[e.file] = {{"class_label", e.recording.class_label},
                        {"subject_id", e.recording.subject_id},
                        {"sample_rate_hz", e.recording.sample_rate_hz}};
  }
  std::ofstream out(dir / manifest_name);
  out << manifest.dump(2) << '\n';
}

}  // namespace emgcascade
