// Command-line driver: config-driven experiment runs, gradient validation,
// geometry construction, limit-gap sweeps and post-hoc analysis.

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "protogeom/protogeom.hpp"

namespace fs = std::filesystem;
using namespace protogeom;

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitNumericalAbort = 3;

void apply_thread_cap() {
  if (const char* cap = std::getenv("PROTO_GEOM_THREADS")) {
    const int threads = std::atoi(cap);
    if (threads > 0) Eigen::setNbThreads(threads);
  }
}

RunConfig load_config(const std::string& path, const std::string& out_override,
                      std::optional<unsigned long long> seed_override) {
  RunConfig cfg = parse_config_file(path);
  if (!out_override.empty()) cfg.out = out_override;
  if (seed_override) {
    cfg.seed_init = *seed_override;
    cfg.seed_batch = *seed_override + 1000003ull;  // documented in the README
  }
  validate(cfg);
  return cfg;
}

void write_run_outputs(const RunConfig& cfg, const TrainState& state) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_metrics_csv(dir / "metrics.csv", state.history);
  write_embeddings_csv(dir / "embeddings.csv", state.embeddings);
  const Matrix gm = mean_gram(state.embeddings).entries;
  write_gram_csv(dir / "final_gram.csv", gm);
  write_pgm(dir / "final_gram.pgm", gm);
  std::ofstream echo = open_output(dir / "config_echo.txt");
  echo << echo_config(cfg);
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            std::optional<unsigned long long> seed_override) {
  RunConfig cfg = load_config(config_path, out_override, seed_override);
  TrainState state;
  try {
    run(cfg, state);
  } catch (const nonfinite_error& e) {
    // Preserve whatever history exists so the failure can be inspected.
    if (!state.history.empty()) write_run_outputs(cfg, state);
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumericalAbort;
  } catch (const degenerate_error& e) {
    // A diverged run can zero out the class means mid-training; that is a
    // numerical abort as well, not a config problem.
    if (!state.history.empty()) write_run_outputs(cfg, state);
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumericalAbort;
  }
  write_run_outputs(cfg, state);
  return 0;
}

int cmd_gradcheck(const std::string& loss, int n, int k, int d, int n_w,
                  double tau, double eps, unsigned long long seed, bool corrupt) {
  if (n < 2 || k < 2 || d < k - 1)
    throw config_error("gradcheck needs n >= 2, k >= 2, d >= k-1");
  LossKind kind;
  if (loss == "scl") kind = LossKind::scl;
  else if (loss == "scl_proto") kind = LossKind::scl_proto;
  else if (loss == "limit") kind = LossKind::limit;
  else throw config_error("unknown loss '" + loss + "'");
  if (kind == LossKind::scl) n_w = 0;
  else if (n_w < 1) n_w = 1;

  rng_engine engine(seed);
  EmbeddingSet emb;
  emb.num_classes = k;
  emb.vectors = random_unit_columns(d, n, engine);
  emb.labels.resize(n);
  std::uniform_int_distribution<int> pick(0, k - 1);
  for (int i = 0; i < n; ++i) emb.labels[i] = pick(engine);
  emb.labels[0] = emb.labels[1] = 0;  // guarantee one anchor with a positive

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  const BatchPlan plan = make_batch_plan(std::move(all), n_w, emb.labels, k);
  const PrototypeSet prototypes = make_etf(k, d);
  const double err = grad_check(kind, emb, &prototypes, plan, LossParams{tau},
                                eps, seed, 20, corrupt ? 1e-2 : 0.0);
  std::cout << "max relative error = " << fmt9(err) << "\n";
  return err < 1e-4 ? 0 : 1;
}

int cmd_geometry(const RunConfig& cfg) {
  const PrototypeSet prototypes = build_prototypes(cfg);
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_gram_csv(dir / "gram.csv", gram(prototypes).entries);
  std::ofstream out = open_output(dir / "prototypes.csv");
  out << prototypes.dim() << ',' << prototypes.class_count() << '\n';
  for (int c = 0; c < prototypes.class_count(); ++c) {
    out << c;
    for (int r = 0; r < prototypes.dim(); ++r)
      out << ',' << fmt9(prototypes.vectors(r, c));
    out << '\n';
  }
  return 0;
}

int cmd_limitgap(const std::string& config_path, const std::string& out_override,
                 const std::vector<int>& sweep) {
  RunConfig cfg = load_config(config_path, out_override, std::nullopt);
  const LabelDistribution dist = build_distribution(cfg);
  const PrototypeSet prototypes = build_prototypes(cfg);
  const EmbeddingSet emb = init_embeddings(dist, cfg.d, cfg.seed_init);
  const std::vector<BatchPlan> plans = sample_batches(
      dist, cfg.batch_size(), 1, cfg.seed_batch, cfg.bind_classes);
  const auto gaps = limit_gap(emb, prototypes, plans.front(), sweep,
                              LossParams{cfg.tau});
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_limitgap_csv(dir / "limitgap.csv", gaps);
  for (auto [n_w, gap] : gaps)
    std::cout << "n_w=" << n_w << " gap=" << fmt9(gap) << "\n";
  return gaps.back().second < 1e-2 ? 0 : 1;
}

int cmd_analyze(const std::string& embeddings_path, const std::string& config_path) {
  RunConfig cfg = parse_config_file(config_path);
  validate(cfg);
  const EmbeddingSet emb = read_embeddings_csv(embeddings_path);
  if (emb.dim() != cfg.d || emb.num_classes != cfg.k)
    throw config_error("embeddings file does not match the config's k/d");
  const PrototypeSet prototypes = build_prototypes(cfg);
  const MetricsRecord rec =
      compute_metrics(emb, prototypes, gram(prototypes), 0, 0.0);
  std::cout << "delta=" << fmt9(rec.delta) << "\n"
            << "alignment=" << fmt9(rec.alignment) << "\n"
            << "spread=" << fmt9(rec.spread) << "\n"
            << "min_class_mean_norm=" << fmt9(rec.min_class_mean_norm) << "\n"
            << "max_class_mean_norm=" << fmt9(rec.max_class_mean_norm) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();

  CLI::App app{"protogeom: supervised-contrastive feature-geometry laboratory"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "execute a config-driven experiment");
  std::string run_config, run_out;
  std::optional<unsigned long long> run_seed;
  run_cmd->add_option("--config", run_config, "config file")->required();
  run_cmd->add_option("--out", run_out, "output directory override");
  run_cmd->add_option("--seed", run_seed, "override seed.init (seed.batch follows)");

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck",
                                    "compare analytical and finite-difference gradients");
  std::string gc_loss = "limit";
  int gc_n = 8, gc_k = 3, gc_d = 5, gc_nw = 3;
  double gc_tau = 0.1, gc_eps = 1e-6;
  unsigned long long gc_seed = 0;
  bool gc_corrupt = false;
  gc_cmd->add_option("--loss", gc_loss, "scl | scl_proto | limit");
  gc_cmd->add_option("--n", gc_n, "batch size");
  gc_cmd->add_option("--k", gc_k, "class count");
  gc_cmd->add_option("--d", gc_d, "embedding dimension");
  gc_cmd->add_option("--nw", gc_nw, "prototype multiplicity");
  gc_cmd->add_option("--tau", gc_tau, "temperature");
  gc_cmd->add_option("--eps", gc_eps, "finite-difference step");
  gc_cmd->add_option("--seed", gc_seed, "fixture seed");
  gc_cmd->add_flag("--corrupt", gc_corrupt,
                   "bias the analytical gradient (negative control)");

  // geometry
  auto* geo_cmd = app.add_subcommand("geometry", "construct and export a prototype set");
  std::string geo_kind = "etf", geo_gram, geo_out = "out";
  int geo_k = 4, geo_d = 8;
  std::vector<int> geo_minority, geo_majority;
  double geo_cmm = -1.0, geo_rest = 0.0;
  std::optional<unsigned long long> geo_seed;
  geo_cmd->add_option("--kind", geo_kind,
                      "etf | gram_target | minority_angle | majority_collapse");
  geo_cmd->add_option("--k", geo_k, "class count");
  geo_cmd->add_option("--d", geo_d, "embedding dimension");
  geo_cmd->add_option("--minority", geo_minority, "minority class indices");
  geo_cmd->add_option("--majority", geo_majority, "majority class indices");
  geo_cmd->add_option("--cos-min-min", geo_cmm, "minority-minority cosine");
  geo_cmd->add_option("--cos-rest", geo_rest, "cosine for all other pairs");
  geo_cmd->add_option("--gram", geo_gram, "target Gram CSV (gram_target)");
  geo_cmd->add_option("--seed", geo_seed, "random frame orientation seed");
  geo_cmd->add_option("--out", geo_out, "output directory");

  // limitgap
  auto* lg_cmd = app.add_subcommand("limitgap",
                                    "gradient gap between augmented and limit losses");
  std::string lg_config, lg_out;
  std::vector<int> lg_sweep{10, 100, 1000, 10000};
  lg_cmd->add_option("--config", lg_config, "config file")->required();
  lg_cmd->add_option("--out", lg_out, "output directory override");
  lg_cmd->add_option("--sweep", lg_sweep, "increasing n_w values");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze",
                                    "recompute metrics from an embeddings CSV");
  std::string an_emb, an_config;
  an_cmd->add_option("--embeddings", an_emb, "embeddings.csv path")->required();
  an_cmd->add_option("--config", an_config, "config file (for the geometry)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run_config, run_out, run_seed);
    if (*gc_cmd)
      return cmd_gradcheck(gc_loss, gc_n, gc_k, gc_d, gc_nw, gc_tau, gc_eps,
                           gc_seed, gc_corrupt);
    if (*geo_cmd) {
      RunConfig cfg;
      cfg.k = geo_k;
      cfg.d = geo_d;
      cfg.out = geo_out;
      if (geo_kind == "etf") cfg.geometry.kind = GeometrySpec::Kind::etf;
      else if (geo_kind == "gram_target") cfg.geometry.kind = GeometrySpec::Kind::gram_target;
      else if (geo_kind == "minority_angle") cfg.geometry.kind = GeometrySpec::Kind::minority_angle;
      else if (geo_kind == "majority_collapse") cfg.geometry.kind = GeometrySpec::Kind::majority_collapse;
      else throw config_error("unknown geometry kind '" + geo_kind + "'");
      cfg.geometry.minority = geo_minority;
      cfg.geometry.majority = geo_majority;
      cfg.geometry.cos_min_min = geo_cmm;
      cfg.geometry.cos_rest = geo_rest;
      cfg.geometry.gram_path = geo_gram;
      cfg.geometry.seed = geo_seed;
      return cmd_geometry(cfg);
    }
    if (*lg_cmd) return cmd_limitgap(lg_config, lg_out, lg_sweep);
    if (*an_cmd) return cmd_analyze(an_emb, an_config);
  } catch (const nonfinite_error& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumericalAbort;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  }
  return 0;
}
