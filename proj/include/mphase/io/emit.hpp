#pragma once

// Tabular datasets and their CSV / JSON serialisation. Numbers are written
// with 17 significant digits and no locale, so every value reads back
// exactly.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mphase::io {

enum class OutputFormat { csv, json };

inline std::string to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }
inline std::string extension(OutputFormat f) { return f == OutputFormat::csv ? ".csv" : ".json"; }

/// Column-named rows of doubles plus free-form metadata.
struct Dataset {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  Dataset() = default;
  explicit Dataset(std::vector<std::string> cols) : columns(std::move(cols)) {}

  void add_row(std::vector<double> row) {
    if (row.size() != columns.size()) {
      throw std::invalid_argument("dataset row has " + std::to_string(row.size()) + " values for " +
                                  std::to_string(columns.size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
};

/// Shortest form with 17 significant digits; nan and +-inf spelled out.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string render_csv(const Dataset& d) {
  std::string out;
  for (const auto& [key, value] : d.metadata) out += "# " + key + ": " + value + "\n";
  for (std::size_t c = 0; c < d.columns.size(); ++c) {
    if (c) out += ',';
    out += d.columns[c];
  }
  out += '\n';
  for (const auto& row : d.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_number(row[c]);
    }
    out += '\n';
  }
  return out;
}

/// {"metadata": {...}, "records": [{column: value, ...}, ...]}; non-finite
/// values become null.
inline nlohmann::ordered_json dataset_json(const Dataset& d) {
  nlohmann::ordered_json doc;
  doc["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : d.metadata) doc["metadata"][key] = value;
  doc["records"] = nlohmann::ordered_json::array();
  for (const auto& row : d.rows) {
    nlohmann::ordered_json rec = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      rec[d.columns[c]] = std::isfinite(row[c]) ? nlohmann::ordered_json(row[c]) : nlohmann::ordered_json(nullptr);
    }
    doc["records"].push_back(std::move(rec));
  }
  return doc;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.close();
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline void emit_series(const Dataset& d, OutputFormat format, const std::filesystem::path& path) {
  write_text(path, format == OutputFormat::csv ? render_csv(d) : dataset_json(d).dump(2) + "\n");
}

}  // namespace mphase::io
