#pragma once

// On-disk artifacts: CSV tables (17 significant digits, NaN written as an
// empty cell), the MANIFEST, and parameter blobs with a JSON sidecar.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tangent_kit/net.hpp"
#include "tangent_kit/optim.hpp"

namespace tangent_kit {

namespace fs = std::filesystem;

inline std::string format_real(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  explicit Table(std::vector<std::string> h = {}) : header(std::move(h)) {}

  template <class... Cells>
  void add(const Cells&... cells) {
    std::vector<std::string> r;
    r.reserve(sizeof...(cells));
    (r.push_back(cell(cells)), ...);
    if (r.size() != header.size()) throw std::logic_error("table row width differs from header");
    rows.push_back(std::move(r));
  }

  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format_real(v); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }
};

inline std::string to_csv(const Table& t) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline void write_csv(const fs::path& path, const Table& t) { write_text(path, to_csv(t)); }

/// Parsed CSV: header plus string cells.
inline Table read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t c = s.find(',', start);
      cells.push_back(s.substr(start, c == std::string::npos ? std::string::npos : c - start));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    return cells;
  };
  Table t;
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path.string() + ": empty file");
  t.header = split(line);
  while (std::getline(f, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

/// Column of a table as doubles; empty cells become NaN.
inline std::vector<double> column(const Table& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw std::invalid_argument("no column '" + name + "'");
  const std::size_t c = static_cast<std::size_t>(it - t.header.begin());
  std::vector<double> v;
  v.reserve(t.rows.size());
  for (const auto& r : t.rows) v.push_back(r[c].empty() ? kNaN : std::stod(r[c]));
  return v;
}

inline Table train_log_table(const TrainLog& log) {
  Table t({"iter", "loss", "loss_b", "loss_r", "rel_l2", "lambda", "wall_ms"});
  for (const TrainRecord& r : log.records) t.add(r.iter, r.loss, r.loss_b, r.loss_r, r.rel_l2, r.lambda, r.wall_ms);
  return t;
}

/// Per-iteration damping trace of an LM run.
inline Table lm_trace_table(const TrainLog& log) {
  Table t({"iter", "stage", "lambda_start", "doublings", "retries", "lambda", "lambda_next", "criterion", "solve_residual",
           "accel_applied", "accel_reverted"});
  for (const TrainRecord& r : log.records) {
    t.add(r.iter, r.stage, r.lambda_start, r.doublings, r.retries, r.lambda, r.lambda_next, r.criterion, r.solve_residual,
          r.accel_applied, r.accel_reverted);
  }
  return t;
}

// ------------------------------------------------------------- parameter blobs

/// theta as little-endian float64 plus a JSON sidecar describing the network.
inline void save_params(const fs::path& bin, const MlpParams& p) {
  std::string bytes(static_cast<std::size_t>(p.theta.size()) * 8, '\0');
  for (Eigen::Index k = 0; k < p.theta.size(); ++k) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(p.theta[k]);
    for (int b = 0; b < 8; ++b) bytes[static_cast<std::size_t>(k) * 8 + b] = static_cast<char>((u >> (8 * b)) & 0xff);
  }
  write_text(bin, bytes);
  nlohmann::ordered_json j;
  j["format"] = "float64-le";
  j["count"] = p.theta.size();
  j["widths"] = p.widths;
  j["scaling"] = to_string(p.scaling);
  j["init"] = p.init;
  j["seed"] = p.seed;
  if (p.embedding) {
    j["embedding"]["sigma"] = p.embedding->sigma;
    j["embedding"]["seed"] = p.embedding->seed;
    std::vector<std::vector<double>> B(static_cast<std::size_t>(p.embedding->n_feat()));
    for (int r = 0; r < p.embedding->n_feat(); ++r) {
      for (int c = 0; c < p.embedding->d_in(); ++c) B[static_cast<std::size_t>(r)].push_back(p.embedding->B(r, c));
    }
    j["embedding"]["B"] = B;
  }
  fs::path side = bin;
  side.replace_extension(".json");
  write_text(side, j.dump(2) + "\n");
}

inline MlpParams load_params(const fs::path& bin) {
  fs::path side = bin;
  side.replace_extension(".json");
  std::ifstream js(side);
  if (!js) throw std::runtime_error("cannot read " + side.string());
  const auto j = nlohmann::json::parse(js);
  if (j.at("format") != "float64-le") throw std::runtime_error(side.string() + ": unsupported format");
  std::optional<FourierEmbedding> emb;
  if (j.contains("embedding")) {
    FourierEmbedding e;
    e.sigma = j["embedding"]["sigma"].get<double>();
    e.seed = j["embedding"]["seed"].get<std::uint64_t>();
    const auto B = j["embedding"]["B"].get<std::vector<std::vector<double>>>();
    e.B.resize(static_cast<Eigen::Index>(B.size()), B.empty() ? 0 : static_cast<Eigen::Index>(B[0].size()));
    for (std::size_t r = 0; r < B.size(); ++r) {
      for (std::size_t c = 0; c < B[r].size(); ++c) e.B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = B[r][c];
    }
    emb = std::move(e);
  }
  MlpParams p = make_params(j.at("widths").get<std::vector<int>>(), parse_scaling(j.at("scaling").get<std::string>()), emb);
  p.init = j.value("init", std::string("gaussian"));
  p.seed = j.value("seed", std::uint64_t{0});
  const auto count = j.at("count").get<std::size_t>();
  if (count != p.size()) throw std::runtime_error(side.string() + ": count does not match widths");

  std::ifstream f(bin, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + bin.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() != count * 8) throw std::runtime_error(bin.string() + ": expected " + std::to_string(count * 8) + " bytes");
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[k * 8 + b])) << (8 * b);
    p.theta[static_cast<Eigen::Index>(k)] = std::bit_cast<double>(u);
  }
  return p;
}

// ------------------------------------------------------------------- MANIFEST

/// Data rows of a CSV (lines after the header), values of a .bin, or -1.
inline long artifact_rows(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".csv") {
    std::ifstream f(p);
    std::string line;
    long n = -1;
    while (std::getline(f, line)) {
      if (!line.empty()) ++n;
    }
    return std::max(n, 0L);
  }
  if (ext == ".bin") return static_cast<long>(fs::file_size(p) / 8);
  return -1;
}

/// One "path<TAB>rows" line per file below `dir` (sorted, MANIFEST itself
/// excluded); rows is "-" when not applicable.
inline void write_manifest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "MANIFEST") files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::string text;
  for (const auto& f : files) {
    const long n = artifact_rows(dir / f);
    text += f.generic_string() + "\t" + (n < 0 ? std::string("-") : std::to_string(n)) + "\n";
  }
  write_text(dir / "MANIFEST", text);
}

/// Parsed MANIFEST: (relative path, rows or -1).
inline std::vector<std::pair<std::string, long>> read_manifest(const fs::path& dir) {
  std::ifstream f(dir / "MANIFEST");
  if (!f) throw std::runtime_error("no MANIFEST in " + dir.string());
  std::vector<std::pair<std::string, long>> out;
  std::string line;
  while (std::getline(f, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("malformed MANIFEST line: " + line);
    const std::string n = line.substr(tab + 1);
    out.emplace_back(line.substr(0, tab), n == "-" ? -1L : std::stol(n));
  }
  return out;
}

}  // namespace tangent_kit
