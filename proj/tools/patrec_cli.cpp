// patrec: dataset generation, wave simulation, self-supervised training and
// evaluation for joint recovery of initial pressure and the speed law from
// boundary data.
//
// Subcommands: generate, train, eval, export-curves, simulate.
// Every run writes a manifest.json holding the fully resolved configuration;
// re-running a command with that manifest as --config reproduces its outputs
// bit for bit (timing files aside).

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <json.hpp>

#include "patrec/checkpoint.hpp"
#include "patrec/config.hpp"
#include "patrec/dataset_io.hpp"
#include "patrec/phantom.hpp"
#include "patrec/trainer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif
#include <Eigen/Core>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace patrec;

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<int> threads;
  bool dry_run = false;
};

ExperimentConfig resolve_config(const CliOptions& opt) {
  ExperimentConfig cfg;
  if (opt.profile) apply_profile(cfg, *opt.profile);
  if (!opt.config_path.empty()) cfg = load_config_file(opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.threads) cfg.threads = *opt.threads;
  cfg.validate();
  return cfg;
}

void apply_threads(const ExperimentConfig& cfg) {
#ifdef _OPENMP
  omp_set_num_threads(cfg.threads);
#endif
  Eigen::setNbThreads(cfg.threads);
}

std::string hash16(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(io::fnv1a(text)));
  return buf;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path cache_dir_for(const ExperimentConfig& cfg) {
  return fs::path(cfg.cache_dir) / hash16(dataset_manifest_json(cfg));
}

fs::path make_run_dir(const ExperimentConfig& cfg, const std::string& command) {
  const std::string stamp = timestamp_utc();
  const std::string h = hash16(config_to_json(cfg)).substr(0, 8);
  fs::path dir = fs::path(cfg.out_dir) / (command + "_" + stamp + "_" + h);
  for (int k = 1; fs::exists(dir); ++k)
    dir = fs::path(cfg.out_dir) / (command + "_" + stamp + "_" + h + "_" + std::to_string(k));
  fs::create_directories(dir);
  write_text(dir / "manifest.json", config_to_json(cfg));
  return dir;
}

// --- generate -------------------------------------------------------------

int cmd_generate(const ExperimentConfig& cfg, bool dry_run) {
  const fs::path dir = cache_dir_for(cfg);
  const std::string manifest = dataset_manifest_json(cfg);
  std::cerr << "dataset cache: " << dir.string() << "\n";
  if (dry_run) {
    std::cerr << "dry run; would generate " << cfg.phantom.n_train << "/"
              << cfg.phantom.n_val << "/" << cfg.phantom.n_test << " phantoms at m="
              << cfg.phantom.m << "\n";
    return 0;
  }
  if (fs::exists(dir / "manifest.json") && read_text(dir / "manifest.json") == manifest) {
    std::cerr << "cache hit, nothing to do\n";
    return 0;
  }
  fs::create_directories(dir);

  auto ds = phantom::build_dataset(cfg.seed, cfg.phantom.m, cfg.phantom.n_train,
                                   cfg.phantom.n_val, cfg.phantom.n_test,
                                   cfg.phantom.jitter);
  auto write_split = [&](const char* name, const std::vector<Field>& fields) {
    io::PhantomSplit split{cfg.phantom.m, cfg.seed, cfg.phantom.jitter, fields};
    io::write_phantom_split((dir / (std::string(name) + ".phsp")).string(), split);
  };
  write_split("train", ds.train);
  write_split("validation", ds.validation);
  write_split("test", ds.test);

  // value histogram across all splits, for inspecting the mapping's input range
  std::vector<Field> all = ds.train;
  all.insert(all.end(), ds.validation.begin(), ds.validation.end());
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  auto hist = io::value_histogram(all, 20);
  std::string hist_csv = "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < hist.size(); ++b) {
    char line[96];
    std::snprintf(line, sizeof line, "%.2f,%.2f,%lld\n", b * 0.05, (b + 1) * 0.05,
                  static_cast<long long>(hist[b]));
    hist_csv += line;
  }
  write_text(dir / "value_histogram.csv", hist_csv);

  if (cfg.train.precompute_boundary) {
    const auto grid = kspace::SimGrid::make(cfg.phantom.m, cfg.sim.pad);
    const auto scfg = kspace::SimConfig::make(grid, cfg.sim.c_max, cfg.sim.cfl, cfg.sim.t_min);
    kspace::Simulator sim(grid, scfg);
    const GammaCase gc = cfg.gamma();
    io::BoundaryHeader header{scfg.n_det, scfg.n_recorded(), scfg.dt, scfg.record_stride,
                              cfg.sim.pad};
    auto write_boundary = [&](const char* name, const std::vector<Field>& fields) {
      io::write_boundary_set(
          (dir / ("boundary_" + cfg.train.gamma_case + "_" + name + ".pbds")).string(),
          header, io::simulate_boundary_set(fields, gc, sim));
    };
    write_boundary("train", ds.train);
    write_boundary("validation", ds.validation);
    write_boundary("test", ds.test);
  }

  write_text(dir / "manifest.json", manifest);
  std::cerr << "generated " << (ds.train.size() + ds.validation.size() + ds.test.size())
            << " phantoms\n";
  return 0;
}

// --- shared loading -------------------------------------------------------

struct LoadedSplit {
  std::vector<Field> phantoms;
  std::vector<Field> boundary;
};

LoadedSplit load_split(const ExperimentConfig& cfg, const std::string& name) {
  const fs::path dir = cache_dir_for(cfg);
  const fs::path ph = dir / (name + ".phsp");
  const fs::path bd = dir / ("boundary_" + cfg.train.gamma_case + "_" + name + ".pbds");
  if (!fs::exists(ph) || !fs::exists(bd))
    throw std::runtime_error(
        "dataset cache incomplete under " + dir.string() +
        "; run `patrec generate --config <same config>` first");
  LoadedSplit out;
  out.phantoms = io::read_phantom_split(ph.string()).phantoms;
  out.boundary = io::read_boundary_set(bd.string()).second;
  if (out.phantoms.size() != out.boundary.size())
    throw std::runtime_error("corrupt cache: split sizes disagree in " + dir.string());
  return out;
}

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_curve_csv(const fs::path& path, const std::vector<trainer::CurveRow>& rows) {
  std::string text;
  for (const auto& r : rows)
    text += csv_double(r.v) + "," + csv_double(r.mapped) + "," + csv_double(r.truth) + "\n";
  write_text(path, text);
}

json model_manifest(const ExperimentConfig& cfg) {
  const auto [c0, c1] = gamma_endpoints(cfg.gamma());
  return json{{"variant", cfg.model.variant},
              {"m", cfg.phantom.m},
              {"unet_levels", cfg.model.unet_levels},
              {"unet_base_channels", cfg.model.unet_base_channels},
              {"eps_c", cfg.model.eps_c},
              {"c0", c0},
              {"c1", c1},
              {"dtype", cfg.dtype}};
}

// --- train ----------------------------------------------------------------

template <class S>
int run_training(const ExperimentConfig& cfg, const fs::path& run_dir) {
  auto train_split = load_split(cfg, "train");
  auto val_split = load_split(cfg, "validation");

  std::ofstream metrics(run_dir / "metrics.csv", std::ios::binary);
  metrics << "iteration,loss_f,loss_W,map_sup_err\n";
  std::ofstream timing(run_dir / "timing.csv", std::ios::binary);
  timing << "iteration,seconds\n";
  std::ofstream train_log(run_dir / "train_log.csv", std::ios::binary);
  train_log << "iteration,minibatch_loss\n";

  const trainer::TrainConfig tcfg = cfg.to_train_config();
  auto result = trainer::train<S>(
      tcfg, train_split.phantoms, train_split.boundary, val_split.phantoms,
      val_split.boundary,
      [&](const trainer::MetricsRecord& r) {
        metrics << r.iteration << "," << csv_double(r.loss_f) << ","
                << csv_double(r.loss_W) << "," << csv_double(r.map_sup_err) << "\n";
        timing << r.iteration << "," << csv_double(r.seconds) << "\n";
        std::cerr << "it " << r.iteration << "  loss_f " << r.loss_f << "  loss_W "
                  << r.loss_W << "  sup_err " << r.map_sup_err << "\n";
      },
      [&](std::int64_t it, double loss) {
        train_log << it << "," << csv_double(loss) << "\n";
      });

  diff::save_checkpoint<S>((run_dir / "best.ptck").string(), result.best_state);
  models::NamedTensors<S> last;
  result.recon.collect(last);
  result.mapping.collect("mapping", last);
  diff::save_checkpoint<S>((run_dir / "last.ptck").string(), last);
  write_text(run_dir / "model_manifest.json", model_manifest(cfg).dump(2) + "\n");
  write_curve_csv(run_dir / "mapping_curve.csv",
                  trainer::export_mapping_curve(result.mapping, cfg.gamma()));

  json summary{{"initial_train_loss", result.initial_train_loss},
               {"final_train_loss", result.final_train_loss},
               {"final_map_sup_err", result.final_map_sup_err},
               {"best_iteration", result.best_iteration},
               {"best_val_loss", result.best_val_loss},
               {"iterations", tcfg.max_iterations}};
  write_text(run_dir / "train_summary.json", summary.dump(2) + "\n");
  std::cerr << "train loss " << result.initial_train_loss << " -> "
            << result.final_train_loss << ", mapping sup err "
            << result.final_map_sup_err << "\n";
  std::cerr << "run dir: " << run_dir.string() << "\n";
  return 0;
}

// --- eval -------------------------------------------------------------------

template <class S>
int run_eval(const ExperimentConfig& cfg, const std::string& checkpoint,
             const fs::path& run_dir) {
  auto test_split = load_split(cfg, "test");
  const auto grid = kspace::SimGrid::make(cfg.phantom.m, cfg.sim.pad);
  const auto scfg = kspace::SimConfig::make(grid, cfg.sim.c_max, cfg.sim.cfl, cfg.sim.t_min);
  kspace::Simulator sim(grid, scfg);

  const auto [c0, c1] = gamma_endpoints(cfg.gamma());
  Rng mlp_rng(cfg.seed, 101), net_rng(cfg.seed, 102);
  models::MappingNet<S> mapping(c0, c1, mlp_rng);
  models::ReconstructionNet<S> recon(cfg.phantom.m,
                                     models::recon_variant_from_string(cfg.model.variant),
                                     models::UNetConfig{cfg.model.unet_levels,
                                                        cfg.model.unet_base_channels},
                                     net_rng);
  if (!checkpoint.empty()) {
    auto tensors = diff::load_checkpoint<S>(checkpoint);
    models::NamedTensors<S> named;
    recon.collect(named);
    mapping.collect("mapping", named);
    for (auto& [name, t] : named) {
      auto it = tensors.find(name);
      if (it == tensors.end())
        throw std::runtime_error("checkpoint is missing tensor " + name);
      if (it->second.shape() != t.shape())
        throw std::runtime_error("checkpoint shape mismatch for " + name);
      std::copy(it->second.value().begin(), it->second.value().end(), t.value().begin());
    }
  }

  auto rec = trainer::eval_metrics(recon, mapping, sim, test_split.phantoms,
                                   test_split.boundary, cfg.gamma(), cfg.model.eps_c);
  json report{{"gamma_case", cfg.train.gamma_case},
              {"m", cfg.phantom.m},
              {"n_test", test_split.phantoms.size()},
              {"loss_f", rec.loss_f},
              {"loss_W", rec.loss_W},
              {"map_sup_err", rec.map_sup_err}};
  if (auto ref = trainer::paper_reference(cfg.gamma(), cfg.phantom.m)) {
    report["published_reference"] = {{"loss_f", ref->loss_f},
                                     {"loss_W", ref->loss_W},
                                     {"iterations", 102400}};
  }
  write_text(run_dir / "eval_report.json", report.dump(2) + "\n");
  std::cerr << report.dump(2) << "\n";
  std::cerr << "run dir: " << run_dir.string() << "\n";
  return 0;
}

// --- export-curves ------------------------------------------------------------

template <class S>
int run_export_curves(const ExperimentConfig& cfg, const std::string& checkpoint,
                      const fs::path& run_dir) {
  const auto [c0, c1] = gamma_endpoints(cfg.gamma());
  Rng mlp_rng(cfg.seed, 101);
  models::MappingNet<S> mapping(c0, c1, mlp_rng);
  if (!checkpoint.empty()) {
    auto tensors = diff::load_checkpoint<S>(checkpoint);
    models::NamedTensors<S> named;
    mapping.collect("mapping", named);
    for (auto& [name, t] : named) {
      auto it = tensors.find(name);
      if (it == tensors.end())
        throw std::runtime_error("checkpoint is missing tensor " + name);
      std::copy(it->second.value().begin(), it->second.value().end(), t.value().begin());
    }
  }
  write_curve_csv(run_dir / "mapping_curve.csv",
                  trainer::export_mapping_curve(mapping, cfg.gamma()));
  std::cerr << "run dir: " << run_dir.string() << "\n";
  return 0;
}

// --- simulate -----------------------------------------------------------------

int cmd_simulate(const ExperimentConfig& cfg, const std::string& phantom_file, int index,
                 const fs::path& run_dir) {
  auto split = io::read_phantom_split(phantom_file);
  if (split.m != cfg.phantom.m)
    throw std::runtime_error("phantom file has m=" + std::to_string(split.m) +
                             " but the configuration expects m=" +
                             std::to_string(cfg.phantom.m));
  if (index < 0 || index >= static_cast<int>(split.phantoms.size()))
    throw std::runtime_error("phantom index out of range");

  const auto grid = kspace::SimGrid::make(cfg.phantom.m, cfg.sim.pad);
  const auto scfg = kspace::SimConfig::make(grid, cfg.sim.c_max, cfg.sim.cfl, cfg.sim.t_min);
  kspace::Simulator sim(grid, scfg);
  const Field& f = split.phantoms[index];
  Field boundary = sim.simulate(f, io::true_speed_field(f, cfg.gamma(), sim));
  io::BoundaryHeader header{scfg.n_det, scfg.n_recorded(), scfg.dt, scfg.record_stride,
                            cfg.sim.pad};
  io::write_boundary_record((run_dir / "boundary.pbdt").string(), header, boundary);
  std::cerr << "wrote " << (run_dir / "boundary.pbdt").string() << " (" << header.n_det
            << " x " << header.n_time << ")\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint recovery of initial pressure and speed law from boundary data"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  CliOptions opt;
  app.add_option("--config", opt.config_path, "configuration JSON file");
  app.add_option("--seed", opt.seed, "override the configured seed");
  app.add_option("--profile", opt.profile, "configuration profile: desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
  app.add_option("--threads", opt.threads, "bound on internal parallelism");
  app.add_flag("--dry-run", opt.dry_run, "validate and print the plan, compute nothing");

  auto* c_generate = app.add_subcommand("generate", "build the dataset cache");
  auto* c_train = app.add_subcommand("train", "run self-supervised training");
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto* c_curves = app.add_subcommand("export-curves", "write the mapping curve CSV");
  auto* c_simulate = app.add_subcommand("simulate", "forward-simulate one phantom");

  std::string checkpoint;
  c_eval->add_option("--checkpoint", checkpoint, "checkpoint file (.ptck)");
  c_curves->add_option("--checkpoint", checkpoint, "checkpoint file (.ptck)");

  std::string phantom_file;
  int phantom_index = 0;
  c_simulate->add_option("--phantom", phantom_file, "phantom split file (.phsp)")
      ->required();
  c_simulate->add_option("--index", phantom_index, "phantom index within the file");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve_config(opt);
    apply_threads(cfg);

    if (opt.dry_run) {
      std::cerr << "resolved configuration:\n" << config_to_json(cfg);
      if (c_generate->parsed()) return cmd_generate(cfg, true);
      std::cerr << "dry run; nothing executed\n";
      return 0;
    }

    if (c_generate->parsed()) return cmd_generate(cfg, false);

    if (c_train->parsed()) {
      const fs::path run_dir = make_run_dir(cfg, "train");
      return cfg.dtype == "f64" ? run_training<double>(cfg, run_dir)
                                : run_training<float>(cfg, run_dir);
    }
    if (c_eval->parsed()) {
      const fs::path run_dir = make_run_dir(cfg, "eval");
      return cfg.dtype == "f64" ? run_eval<double>(cfg, checkpoint, run_dir)
                                : run_eval<float>(cfg, checkpoint, run_dir);
    }
    if (c_curves->parsed()) {
      const fs::path run_dir = make_run_dir(cfg, "curves");
      return cfg.dtype == "f64" ? run_export_curves<double>(cfg, checkpoint, run_dir)
                                : run_export_curves<float>(cfg, checkpoint, run_dir);
    }
    if (c_simulate->parsed()) {
      const fs::path run_dir = make_run_dir(cfg, "simulate");
      return cmd_simulate(cfg, phantom_file, phantom_index, run_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
