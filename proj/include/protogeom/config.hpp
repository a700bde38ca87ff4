#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "protogeom/data.hpp"
#include "protogeom/errors.hpp"
#include "protogeom/geometry.hpp"
#include "protogeom/io.hpp"

namespace protogeom {

/// Full description of one experiment. Parsed from a flat key=value file;
/// every run echoes its resolved config so results can be reproduced exactly.
struct RunConfig {
  int k = 4;
  int d = 8;
  int n_maj = 50;
  int ratio = 1;       // STEP imbalance ratio R
  int batch = 0;       // batch size n; 0 means the full dataset
  int n_w = 0;
  std::string loss = "limit";  // scl | scl_proto | limit
  double tau = 0.1;
  int epochs = 500;
  double base_lr = 0.1;
  std::vector<int> anneal_epochs;
  double anneal_factor = 0.1;
  double momentum = 0.0;
  bool bind_classes = false;
  unsigned long long seed_init = 1;
  unsigned long long seed_batch = 2;
  GeometrySpec geometry;
  std::string out = "out";

  int dataset_size() const {
    const int n_min = n_maj / ratio;
    return (k / 2) * (n_maj + n_min);
  }
  int batch_size() const { return batch == 0 ? dataset_size() : batch; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("key '" + key + "': not an integer: '" + v + "'");
  }
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("key '" + key + "': not a number: '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw config_error("key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(to_int(key, trim(cell)));
  return out;
}

}  // namespace detail

/// Parse "key=value" lines; '#' starts a comment, blank lines are skipped.
/// Unknown keys are rejected so typos cannot silently fall back to defaults.
inline RunConfig parse_config_text(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));

    if (key == "k") cfg.k = detail::to_int(key, val);
    else if (key == "d") cfg.d = detail::to_int(key, val);
    else if (key == "n_maj") cfg.n_maj = detail::to_int(key, val);
    else if (key == "ratio") cfg.ratio = detail::to_int(key, val);
    else if (key == "batch") cfg.batch = detail::to_int(key, val);
    else if (key == "n_w") cfg.n_w = detail::to_int(key, val);
    else if (key == "loss") cfg.loss = val;
    else if (key == "tau") cfg.tau = detail::to_double(key, val);
    else if (key == "epochs") cfg.epochs = detail::to_int(key, val);
    else if (key == "base_lr") cfg.base_lr = detail::to_double(key, val);
    else if (key == "anneal_epochs") cfg.anneal_epochs = detail::to_int_list(key, val);
    else if (key == "anneal_factor") cfg.anneal_factor = detail::to_double(key, val);
    else if (key == "momentum") cfg.momentum = detail::to_double(key, val);
    else if (key == "bind_classes") cfg.bind_classes = detail::to_bool(key, val);
    else if (key == "seed.init") cfg.seed_init = std::stoull(val);
    else if (key == "seed.batch") cfg.seed_batch = std::stoull(val);
    else if (key == "out") cfg.out = val;
    else if (key == "geometry.kind") {
      if (val == "etf") cfg.geometry.kind = GeometrySpec::Kind::etf;
      else if (val == "gram_target") cfg.geometry.kind = GeometrySpec::Kind::gram_target;
      else if (val == "minority_angle") cfg.geometry.kind = GeometrySpec::Kind::minority_angle;
      else if (val == "majority_collapse") cfg.geometry.kind = GeometrySpec::Kind::majority_collapse;
      else throw config_error("unknown geometry.kind '" + val + "'");
    }
    else if (key == "geometry.minority") cfg.geometry.minority = detail::to_int_list(key, val);
    else if (key == "geometry.majority") cfg.geometry.majority = detail::to_int_list(key, val);
    else if (key == "geometry.cos_min_min") cfg.geometry.cos_min_min = detail::to_double(key, val);
    else if (key == "geometry.cos_rest") cfg.geometry.cos_rest = detail::to_double(key, val);
    else if (key == "geometry.gram_path") cfg.geometry.gram_path = val;
    else if (key == "geometry.seed") cfg.geometry.seed = std::stoull(val);
    else throw config_error("unknown config key '" + key + "'");
  }
  return cfg;
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path.string());
  return parse_config_text(in);
}

/// Cross-field validity rules. Field-local rules (cosine ranges, PSD-ness,
/// STEP divisibility) surface later from the builders they belong to.
inline void validate(const RunConfig& cfg) {
  if (cfg.k < 2) throw config_error("k must be >= 2");
  if (cfg.d < 1) throw config_error("d must be >= 1");
  if (cfg.n_maj < 1) throw config_error("n_maj must be >= 1");
  if (cfg.ratio < 1) throw config_error("ratio must be >= 1");
  if (!(cfg.tau > 0)) throw config_error("tau must be positive");
  if (cfg.epochs < 0) throw config_error("epochs must be >= 0");
  if (!(cfg.base_lr > 0)) throw config_error("base_lr must be positive");
  if (!(cfg.anneal_factor > 0 && cfg.anneal_factor <= 1))
    throw config_error("anneal_factor must lie in (0, 1]");
  if (!(cfg.momentum >= 0 && cfg.momentum < 1))
    throw config_error("momentum must lie in [0, 1)");
  for (std::size_t i = 0; i < cfg.anneal_epochs.size(); ++i) {
    if (cfg.anneal_epochs[i] >= cfg.epochs)
      throw config_error("anneal epochs must be smaller than epochs");
    if (i > 0 && cfg.anneal_epochs[i] <= cfg.anneal_epochs[i - 1])
      throw config_error("anneal epochs must be strictly increasing");
  }
  if (cfg.loss != "scl" && cfg.loss != "scl_proto" && cfg.loss != "limit")
    throw config_error("loss must be one of scl, scl_proto, limit");
  if (cfg.loss == "scl" && cfg.n_w != 0)
    throw config_error("loss 'scl' requires n_w = 0");
  if (cfg.loss == "scl_proto" && cfg.n_w < 1)
    throw config_error("loss 'scl_proto' requires n_w >= 1");
  if (cfg.n_w < 0) throw config_error("n_w must be >= 0");
  if (cfg.batch < 0) throw config_error("batch must be >= 0 (0 = full dataset)");
  const int n = cfg.batch_size();
  if (n > cfg.dataset_size())
    throw config_error("batch size exceeds the dataset size");
  if (cfg.bind_classes && n < cfg.k)
    throw config_error("batch binding needs batch size >= k");
}

inline LabelDistribution build_distribution(const RunConfig& cfg) {
  return step_imbalance(cfg.k, cfg.n_maj, cfg.ratio);
}

/// Realize the configured geometry, applying the optional seeded orientation.
inline PrototypeSet build_prototypes(const RunConfig& cfg) {
  PrototypeSet p;
  switch (cfg.geometry.kind) {
    case GeometrySpec::Kind::etf:
      p = make_etf(cfg.k, cfg.d);
      break;
    case GeometrySpec::Kind::gram_target: {
      if (cfg.geometry.gram_path.empty())
        throw config_error("geometry.gram_path is required for gram_target");
      GramMatrix target = read_gram_csv(cfg.geometry.gram_path);
      if (target.size() != cfg.k)
        throw config_error("gram_target size does not match k");
      p = make_from_gram(target, cfg.d);
      break;
    }
    case GeometrySpec::Kind::minority_angle:
      p = make_minority_angle(cfg.k, cfg.geometry.minority,
                              cfg.geometry.cos_min_min, cfg.geometry.cos_rest,
                              cfg.d);
      break;
    case GeometrySpec::Kind::majority_collapse:
      p = make_majority_collapse(cfg.k, cfg.geometry.majority, cfg.d);
      break;
  }
  if (cfg.geometry.seed) p = rotate_frame(p, *cfg.geometry.seed);
  return p;
}

/// Canonical echo of the resolved config. Parsing the echo reproduces the run
/// bit for bit; derived quantities ride along as comments.
inline std::string echo_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# resolved run configuration\n";
  out << "k=" << cfg.k << '\n';
  out << "d=" << cfg.d << '\n';
  out << "n_maj=" << cfg.n_maj << '\n';
  out << "ratio=" << cfg.ratio << '\n';
  out << "batch=" << cfg.batch << '\n';
  out << "n_w=" << cfg.n_w << '\n';
  out << "loss=" << cfg.loss << '\n';
  out << "tau=" << fmt9(cfg.tau) << '\n';
  out << "epochs=" << cfg.epochs << '\n';
  out << "base_lr=" << fmt9(cfg.base_lr) << '\n';
  out << "anneal_epochs=";
  for (std::size_t i = 0; i < cfg.anneal_epochs.size(); ++i)
    out << (i ? "," : "") << cfg.anneal_epochs[i];
  out << '\n';
  out << "anneal_factor=" << fmt9(cfg.anneal_factor) << '\n';
  out << "momentum=" << fmt9(cfg.momentum) << '\n';
  out << "bind_classes=" << (cfg.bind_classes ? "true" : "false") << '\n';
  out << "seed.init=" << cfg.seed_init << '\n';
  out << "seed.batch=" << cfg.seed_batch << '\n';
  switch (cfg.geometry.kind) {
    case GeometrySpec::Kind::etf: out << "geometry.kind=etf\n"; break;
    case GeometrySpec::Kind::gram_target:
      out << "geometry.kind=gram_target\n";
      out << "geometry.gram_path=" << cfg.geometry.gram_path << '\n';
      break;
    case GeometrySpec::Kind::minority_angle:
      out << "geometry.kind=minority_angle\n";
      out << "geometry.minority=";
      for (std::size_t i = 0; i < cfg.geometry.minority.size(); ++i)
        out << (i ? "," : "") << cfg.geometry.minority[i];
      out << '\n';
      out << "geometry.cos_min_min=" << fmt9(cfg.geometry.cos_min_min) << '\n';
      out << "geometry.cos_rest=" << fmt9(cfg.geometry.cos_rest) << '\n';
      break;
    case GeometrySpec::Kind::majority_collapse:
      out << "geometry.kind=majority_collapse\n";
      out << "geometry.majority=";
      for (std::size_t i = 0; i < cfg.geometry.majority.size(); ++i)
        out << (i ? "," : "") << cfg.geometry.majority[i];
      out << '\n';
      break;
  }
  if (cfg.geometry.seed) out << "geometry.seed=" << *cfg.geometry.seed << '\n';
  out << "out=" << cfg.out << '\n';
  out << "# N=" << cfg.dataset_size() << ", effective batch=" << cfg.batch_size()
      << '\n';
  if (cfg.n_maj % cfg.ratio != 0)
    out << "# note: n_maj not divisible by ratio; minority count floored to "
        << cfg.n_maj / cfg.ratio << '\n';
  const int n = cfg.batch_size();
  const int remainder = cfg.dataset_size() % n;
  if (remainder != 0)
    out << "# note: last batch of each epoch is short (" << remainder
        << " samples) and is kept\n";
  return out.str();
}

}  // namespace protogeom
