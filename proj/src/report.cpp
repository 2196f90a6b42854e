#include "catgeo/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace catgeo {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError("write failed: " + path.string());
}

std::string xml_escape(const std::string& s) {
  std::string r;
  for (char c : s) {
    switch (c) {
      case '&': r += "&amp;"; break;
      case '<': r += "&lt;"; break;
      case '>': r += "&gt;"; break;
      case '"': r += "&quot;"; break;
      default: r += c;
    }
  }
  return r;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string git_blob_sha1(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("sha1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char b = digest[i];
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

std::string git_blob_sha1_file(const std::string& path) { return git_blob_sha1(read_file(path)); }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // also folds -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string cell(double v) { return format_number(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(long v) { return std::to_string(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "true" : "false"; }
std::string cell(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string r = "\"";
  for (char c : v) r += c == '"' ? std::string("\"\"") : std::string(1, c);
  return r + "\"";
}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size())
    throw std::logic_error("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(columns_.size()));
  rows_.push_back(std::move(cells));
  return *this;
}

std::string CsvTable::str() const {
  std::string s;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    s += '\n';
  };
  line(columns_);
  for (const auto& r : rows_) line(r);
  return s;
}

std::string svg_line_plot(const PlotSpec& spec) {
  const double W = 640, H = 420, left = 70, right = 160, top = 40, bottom = 55;
  const double pw = W - left - right, ph = H - top - bottom;

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto take = [](double v, double& lo, double& hi) {
    if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  };
  for (const auto& s : spec.series) {
    for (double v : s.x) take(v, x0, x1);
    for (double v : s.y) take(v, y0, y1);
    for (double v : s.lo) take(v, y0, y1);
    for (double v : s.hi) take(v, y0, y1);
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(spec.title)
    << "</text>\n"
    << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    o << "<text x=\"" << fixed(px(xv)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << format_number(std::round(xv * 1000) / 1000) << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << fixed(py(yv) + 4) << "\" text-anchor=\"end\">"
      << format_number(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << xml_escape(spec.x_label) << "</text>\n"
    << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(spec.y_label) << "</text>\n";

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const char* c = colors[k % 10];
    const bool bars = s.lo.size() == s.y.size() && s.hi.size() == s.y.size();
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.y.size() && i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      if (s.markers)
        o << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i])) << "\" r=\"1.5\" fill=\"" << c
          << "\"/>\n";
      else
        pts += fixed(px(s.x[i])) + "," + fixed(py(s.y[i])) + " ";
      if (bars && std::isfinite(s.lo[i]) && std::isfinite(s.hi[i]))
        o << "<line x1=\"" << fixed(px(s.x[i])) << "\" x2=\"" << fixed(px(s.x[i])) << "\" y1=\""
          << fixed(py(s.lo[i])) << "\" y2=\"" << fixed(py(s.hi[i])) << "\" stroke=\"" << c
          << "\" stroke-opacity=\"0.5\"/>\n";
    }
    flush();
    const double ly = top + 14 + 16.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 30 << "\" y1=\"" << ly - 4 << "\" y2=\""
      << ly - 4 << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly << "\">" << xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string image_strip(const Matrix& items, Shape shape) {
  if (shape.size() != items.rows()) throw ConfigError("image_strip: item size does not match shape");
  if (shape.c != 1 && shape.c != 3) throw ConfigError("image_strip: 1 or 3 channels expected");
  const Index n = items.cols();
  const int h = shape.h, w = shape.w, c = shape.c;
  std::string out = (c == 1 ? "P5\n" : "P6\n") + std::to_string(w * n) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(h * w * c * n));
  for (int y = 0; y < h; ++y)
    for (Index i = 0; i < n; ++i)
      for (int x = 0; x < w; ++x)
        for (int ch = 0; ch < c; ++ch) {
          const double v = std::clamp(items((y * w + x) * c + ch, i), 0.0, 1.0);
          out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
        }
  return out;
}

RunOutput::RunOutput(const fs::path& root, std::string run_id) : dir_(root / run_id), run_id_(std::move(run_id)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void RunOutput::write(const std::string& name, const std::string& kind, const std::string& content) {
  write_file(dir_ / name, content);
  Artifact a{name, kind, content.size(), git_blob_sha1(content), false};
  auto it = std::find_if(artifacts_.begin(), artifacts_.end(), [&](const Artifact& x) { return x.name == name; });
  if (it != artifacts_.end())
    *it = a;
  else
    artifacts_.push_back(a);
}

void RunOutput::add_file(const std::string& name, const std::string& kind) {
  const std::string bytes = read_file((dir_ / name).string());
  artifacts_.push_back({name, kind, bytes.size(), git_blob_sha1(bytes), false});
}

void RunOutput::add_input(const std::string& path) {
  for (const auto& i : inputs_)
    if (i["path"] == path) return;
  const std::string bytes = read_file(path);
  inputs_.push_back({{"path", path}, {"bytes", bytes.size()}, {"sha1", git_blob_sha1(bytes)}});
}

void RunOutput::mark_partial() {
  for (auto& a : artifacts_) a.partial = true;
}

void write_report(RunOutput& out, const Json& resolved, const Json& results, const std::string& status,
                  const std::string& error) {
  const std::string config_text = resolved.dump(2) + "\n";
  out.write("config.resolved.json", "json", config_text);

  Json manifest = Json::array();
  for (const auto& a : out.artifacts())
    manifest.push_back(
        {{"name", a.name}, {"kind", a.kind}, {"bytes", a.bytes}, {"sha1", a.sha1}, {"partial", a.partial}});
  Json report{{"run_id", out.run_id()},
              {"experiment", resolved.value("experiment", "")},
              {"seed", resolved.value("seed", 0)},
              {"status", status},
              {"config", resolved},
              {"config_sha1", git_blob_sha1(config_text)},
              {"inputs", out.inputs()},
              {"normalization", "image bytes divided by 255"},
              {"artifacts", manifest},
              {"results", results}};
  if (!error.empty()) report["error"] = error;
  write_file(out.path("report.json"), report.dump(2) + "\n");
}

Json load_report_config(const std::string& report_path) {
  const Json report = load_json_file(report_path);
  if (!report.contains("config")) throw ConfigError(report_path + ": no config in report");
  return resolve_config(report["config"]);
}

}  // namespace catgeo
