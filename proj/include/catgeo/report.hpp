#pragma once

#include "catgeo/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace catgeo {

/// SHA-1 of "blob <size>\0<bytes>", as printed by `git hash-object`.
std::string git_blob_sha1(const std::string& bytes);
std::string git_blob_sha1_file(const std::string& path);

/// Shortest round-trip decimal is not needed; 10 significant digits keep the
/// CSVs readable and are stable for a fixed build.
std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  CsvTable& row(std::vector<std::string> cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

std::string cell(double v);
std::string cell(int v);
std::string cell(long v);
std::string cell(std::size_t v);
std::string cell(bool v);
std::string cell(const std::string& v);
inline std::string cell(const char* v) { return cell(std::string(v)); }

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional error band, same length as y
  std::vector<double> hi;
  bool markers = false;  // dots instead of a line
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

/// Line plot with optional error bars, as a standalone SVG document. A
/// non-finite point breaks the line.
std::string svg_line_plot(const PlotSpec& spec);

/// Items (one per column) tiled left to right into a binary PGM (1 channel)
/// or PPM (3 channels) image. Values are clamped to [0, 1].
std::string image_strip(const Matrix& items, Shape shape);

struct Artifact {
  std::string name;  // relative to the run directory
  std::string kind;  // csv, svg, json, pgm, ppm, checkpoint
  std::uint64_t bytes = 0;
  std::string sha1;
  bool partial = false;
};

/// Output directory of one run plus its manifest. Artifacts are written
/// through this class so the manifest is complete by construction.
class RunOutput {
 public:
  RunOutput(const std::filesystem::path& root, std::string run_id);

  const std::filesystem::path& dir() const { return dir_; }
  const std::string& run_id() const { return run_id_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& kind, const std::string& content);
  /// Registers a file that was written by other code (e.g. a checkpoint).
  void add_file(const std::string& name, const std::string& kind);
  void add_input(const std::string& path);
  /// Marks every registered artifact as partial (used when a run aborts).
  void mark_partial();

  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  const Json& inputs() const { return inputs_; }

 private:
  std::filesystem::path dir_;
  std::string run_id_;
  std::vector<Artifact> artifacts_;
  Json inputs_ = Json::array();
};

/// Writes config.resolved.json and report.json (resolved config, input hashes,
/// artifact manifest, results, status) into the run directory.
void write_report(RunOutput& out, const Json& resolved, const Json& results, const std::string& status,
                  const std::string& error = "");

/// Resolved config stored in a report.json (re-validated).
Json load_report_config(const std::string& report_path);

}  // namespace catgeo
