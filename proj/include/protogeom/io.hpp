#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "protogeom/analysis.hpp"
#include "protogeom/data.hpp"
#include "protogeom/errors.hpp"
#include "protogeom/geometry.hpp"

namespace protogeom {

/// Decimal with 9 significant digits; the one formatting used in every CSV so
/// that identical runs produce byte-identical outputs.
inline std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot open " + path.string() + " for writing");
  return out;
}

/// k rows of k comma-separated decimals, no header.
inline void write_gram_csv(const std::filesystem::path& path, const Matrix& g) {
  std::ofstream out = open_output(path);
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      if (j) out << ',';
      out << fmt9(g(i, j));
    }
    out << '\n';
  }
}

inline GramMatrix read_gram_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw error("empty Gram CSV: " + path.string());
  const int k = static_cast<int>(rows.size());
  Matrix g(k, k);
  for (int i = 0; i < k; ++i) {
    if (static_cast<int>(rows[i].size()) != k)
      throw error("Gram CSV is not square: " + path.string());
    for (int j = 0; j < k; ++j) g(i, j) = rows[i][j];
  }
  return GramMatrix(std::move(g));
}

/// First line "d,N,k"; then one line per sample: label followed by the d
/// coordinates.
inline void write_embeddings_csv(const std::filesystem::path& path,
                                 const EmbeddingSet& set) {
  std::ofstream out = open_output(path);
  out << set.dim() << ',' << set.size() << ',' << set.num_classes << '\n';
  for (int i = 0; i < set.size(); ++i) {
    out << set.labels[i];
    for (int r = 0; r < set.dim(); ++r) out << ',' << fmt9(set.vectors(r, i));
    out << '\n';
  }
}

inline EmbeddingSet read_embeddings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw error("empty embeddings CSV");
  int d = 0, n = 0, k = 0;
  {
    char comma;
    std::stringstream ss(line);
    if (!(ss >> d >> comma >> n >> comma >> k) || d < 1 || n < 1 || k < 1)
      throw error("bad embeddings CSV header: " + line);
  }
  EmbeddingSet set;
  set.num_classes = k;
  set.vectors.resize(d, n);
  set.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw error("embeddings CSV truncated");
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ',')) throw error("embeddings CSV truncated row");
    set.labels[i] = std::stoi(cell);
    for (int r = 0; r < d; ++r) {
      if (!std::getline(ss, cell, ',')) throw error("embeddings CSV short row");
      set.vectors(r, i) = std::stod(cell);
    }
  }
  return set;
}

/// Header then one row per recorded epoch.
inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricsRecord>& history) {
  std::ofstream out = open_output(path);
  out << "epoch,loss,delta,alignment,spread\n";
  for (const MetricsRecord& r : history)
    out << r.epoch << ',' << fmt9(r.mean_loss) << ',' << fmt9(r.delta) << ','
        << fmt9(r.alignment) << ',' << fmt9(r.spread) << '\n';
}

inline void write_limitgap_csv(const std::filesystem::path& path,
                               const std::vector<std::pair<int, double>>& gaps) {
  std::ofstream out = open_output(path);
  out << "n_w,gap\n";
  for (auto [n_w, gap] : gaps) out << n_w << ',' << fmt9(gap) << '\n';
}

/// Binary PGM heatmap of a square matrix: one 32x32 cell per entry, values
/// clamped to [-1, 1] and mapped linearly onto [0, 255].
inline void write_pgm(const std::filesystem::path& path, const Matrix& g,
                      int cell = 32) {
  const int k = static_cast<int>(g.rows());
  const int side_w = cell * static_cast<int>(g.cols());
  const int side_h = cell * k;
  std::ofstream out = open_output(path);
  out << "P5\n" << side_w << ' ' << side_h << "\n255\n";
  std::string row;
  row.resize(side_w);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      double v = std::min(1.0, std::max(-1.0, g(i, j)));
      const unsigned char byte =
          static_cast<unsigned char>(std::lround((v + 1.0) * 0.5 * 255.0));
      for (int px = 0; px < cell; ++px) row[j * cell + px] = static_cast<char>(byte);
    }
    for (int py = 0; py < cell; ++py) out.write(row.data(), row.size());
  }
}

}  // namespace protogeom
