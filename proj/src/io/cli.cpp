#include "nsub/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>

#include "nsub/errors.hpp"
#include "nsub/io/checkpoint.hpp"
#include "nsub/io/records.hpp"
#include "nsub/io/run_spec.hpp"
#include "nsub/io/sampling.hpp"
#include "nsub/io/web_export.hpp"
#include "nsub/modal_baseline.hpp"

namespace nsub {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

struct Context {
  const Globals& g;
  std::ostream& out;
  std::ostream& err;

  fs::path output_dir(const fs::path& fallback) const { return g.out.empty() ? fallback : fs::path(g.out); }
  std::uint64_t seed(std::uint64_t fallback) const { return g.seed.value_or(fallback); }
  std::ostream& log() const {
    static std::ostream null(nullptr);
    return g.quiet ? null : out;
  }
};

RunSpec load_spec(const Context& ctx, const std::string& path) {
  RunSpec spec = parse_run_spec(path);
  if (ctx.g.seed) spec.train.rng_seed = *ctx.g.seed;
  spec.output_dir = ctx.output_dir(spec.output_dir);
  return spec;
}

// Model and spec must describe the same system.
void check_pairing(const Context& ctx, const SubspaceModel& model, const SystemDef& system, const RunSpec& spec) {
  if (model.config_dim() != system.n) {
    throw ConfigError("model has n = " + std::to_string(model.config_dim()) + " but the system has n = " +
                      std::to_string(system.n));
  }
  if (model.m != system.condition_dim()) {
    throw ConfigError("model takes " + std::to_string(model.m) + " conditions but the system declares " +
                      std::to_string(system.condition_dim()));
  }
  if (model.fingerprint.config_hash != 0 && model.fingerprint.config_hash != config_hash(spec)) {
    ctx.log() << "note: model was trained from a different config (hash mismatch)\n";
  }
}

int run_train(const Context& ctx, const std::string& spec_path) {
  const RunSpec spec = load_spec(ctx, spec_path);
  const SystemDef system = build_system(spec);
  const fs::path dir = spec.output_dir;
  write_effective_config(spec, dir);
  const std::uint64_t hash = config_hash(spec);

  JsonLinesWriter telemetry(dir / "telemetry.jsonl");
  TrainCallbacks cb;
  cb.on_log = [&](const TelemetryRecord& r) {
    telemetry.write(telemetry_line(r));
    ctx.log() << "step " << r.step << "  loss " << r.loss << "  E " << r.potential << "  pen " << r.penalty
              << "  |log r| " << r.log_ratio_median << "  rho " << r.rho << "  lr " << r.learning_rate << "\n";
  };
  cb.on_checkpoint = [&](const SubspaceModel& m, long step) {
    SubspaceModel copy = m;
    copy.fingerprint.config_hash = hash;
    char name[64];
    std::snprintf(name, sizeof name, "step_%09ld.nsub", step);
    save_model(dir / "checkpoints" / name, copy);
  };
  ctx.log() << "training '" << system.name << "': n = " << system.n << ", d = " << spec.train.latent_dim
            << ", m = " << spec.train.condition_dim << ", " << spec.train.total_steps << " steps\n";
  TrainResult result = train(system, spec.train, cb);
  result.model.fingerprint.config_hash = hash;
  save_model(dir / "model.nsub", result.model);
  ctx.out << "wrote " << (dir / "model.nsub").string() << " and " << (dir / "telemetry.jsonl").string() << "\n";
  return kExitOk;
}

int run_modes(const Context& ctx, const std::string& spec_path, int d, double sigma) {
  RunSpec spec = load_spec(ctx, spec_path);
  if (d > 0) spec.modes.latent_dim = d;
  if (sigma > 0.0) spec.modes.sigma = sigma;
  const int dim = spec.modes.latent_dim > 0 ? spec.modes.latent_dim : spec.train.latent_dim;
  const double s = spec.modes.sigma > 0.0 ? spec.modes.sigma : spec.train.sigma;
  const SystemDef system = build_system(spec);
  if (system.condition_dim() > 0) {
    ctx.log() << "note: modes are computed at the default condition\n";
  }
  const Vec c = system.default_condition();
  const AffineSubspace modes = linear_modes(system, dim, s, system.q_seed, view(c));
  SubspaceModel model = model_from_affine(modes);
  model.fingerprint.system_name = system.name;
  // An affine map only takes latents; conditions are fixed at the default.
  write_effective_config(spec, spec.output_dir);
  save_model(spec.output_dir / "modes.nsub", model);
  const EigenPairs pairs = generalized_eigs(energy_hessian(system, modes.b, view(c)), system.mass_diag, dim);
  ctx.log() << std::setprecision(10) << "rest energy " << system.energy(modes.b, view(c)) << "\n";
  for (int k = 0; k < dim; ++k) ctx.log() << "mode " << k << "  eigenvalue " << pairs.values[k] << "\n";
  ctx.out << "wrote " << (spec.output_dir / "modes.nsub").string() << "\n";
  return kExitOk;
}

Vec parse_condition(const std::vector<double>& values, int m) {
  if (static_cast<int>(values.size()) != m) {
    throw ConfigError("model takes " + std::to_string(m) + " condition values, got " + std::to_string(values.size()));
  }
  return Eigen::Map<const Vec>(values.data(), m);
}

int run_sample(const Context& ctx, const std::string& model_path, long count, bool sinusoidal, double stddev,
               const std::vector<double>& condition) {
  const SubspaceModel model = load_model(model_path);
  const Vec c = parse_condition(condition, model.m);
  std::mt19937_64 rng(ctx.seed(0));
  const auto mode = sinusoidal ? SampleMode::Sinusoidal : SampleMode::Normal;
  const std::vector<Vec> zs = sample_latents(count, model.d, stddev, rng, mode);
  const fs::path path = ctx.output_dir("out") / "samples.jsonl";
  JsonLinesWriter w(path);
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const Vec q = model.evaluate(zs[i], view(c));
    w.write(state_line(static_cast<long>(i), zs[i], &q));
  }
  ctx.out << "wrote " << zs.size() << " samples to " << path.string() << "\n";
  return kExitOk;
}

void write_obj_frames(const fs::path& dir, const SystemDef& system, const std::vector<Vec>& qs) {
  if (system.geometry.kind != SystemGeometry::Kind::Mesh) {
    throw ConfigError("--obj-dir needs a mesh system");
  }
  fs::create_directories(dir);
  TriMesh frame = system.geometry.surface;
  const int dim = frame.dim();
  if (frame.vertex_count() * dim != system.n) throw ConfigError("--obj-dir: render mesh does not cover q");
  for (std::size_t t = 0; t < qs.size(); ++t) {
    for (int v = 0; v < frame.vertex_count(); ++v) {
      for (int k = 0; k < dim; ++k) frame.vertices(v, k) = qs[t][v * dim + k];
    }
    char name[64];
    std::snprintf(name, sizeof name, "frame_%06zu.obj", t);
    save_obj(dir / name, frame);
  }
}

int run_simulate(const Context& ctx, const std::string& model_path, const std::string& spec_path, double h,
                 long steps, const std::string& keyframes, const std::string& obj_dir) {
  const RunSpec spec = load_spec(ctx, spec_path);
  const SystemDef system = build_system(spec);
  const SubspaceModel model = load_model(model_path);
  check_pairing(ctx, model, system, spec);

  LatentSimState state;
  state.h = h > 0.0 ? h : spec.simulate.h;
  state.c = system.default_condition();
  state.z_curr = Vec::Zero(model.d);
  state.z_prev = state.z_curr;
  if (!keyframes.empty()) {
    // First line: starting latent. Optional second line: latent one step
    // later, which sets the initial velocity.
    const std::vector<Vec> kf = load_keyframes(keyframes);
    if (kf.empty() || kf.front().size() != model.d) throw ConfigError("--keyframes: expected latent vectors of size d");
    state.z_prev = kf[0];
    state.z_curr = kf.size() > 1 ? kf[1] : kf[0];
  }
  StepOptions opts;
  opts.lbfgs = spec.simulate.lbfgs;
  const long n_steps = steps >= 0 ? steps : spec.simulate.steps;
  const Trajectory traj = simulate(model, system, state, n_steps, opts);
  long unconverged = 0;
  for (const auto& r : traj.reports) unconverged += r.converged ? 0 : 1;
  const fs::path path = spec.output_dir / "trajectory.jsonl";
  write_effective_config(spec, spec.output_dir);
  write_trajectory(path, traj, spec.simulate.write_q);
  if (!obj_dir.empty()) write_obj_frames(obj_dir, system, traj.q);
  if (unconverged > 0) ctx.log() << "note: " << unconverged << " steps hit the iteration limit\n";
  ctx.out << "wrote " << traj.z.size() << " states to " << path.string() << "\n";
  return kExitOk;
}

int run_interpolate(const Context& ctx, const std::string& model_path, const std::string& keyframes, int sps,
                    bool clamped, const std::vector<double>& condition) {
  const SubspaceModel model = load_model(model_path);
  const Vec c = parse_condition(condition, model.m);
  const std::vector<Vec> kf = load_keyframes(keyframes);
  for (const Vec& k : kf) {
    if (k.size() != model.d) throw ConfigError("keyframes must have " + std::to_string(model.d) + " entries");
  }
  const std::vector<Vec> path = catmull_rom_path(kf, sps, !clamped);
  const fs::path file = ctx.output_dir("out") / "path.jsonl";
  JsonLinesWriter w(file);
  for (std::size_t i = 0; i < path.size(); ++i) {
    const Vec q = model.evaluate(path[i], view(c));
    w.write(state_line(static_cast<long>(i), path[i], &q));
  }
  ctx.out << "wrote " << path.size() << " states to " << file.string() << "\n";
  return kExitOk;
}

int run_export(const Context& ctx, const std::string& model_path, const std::string& spec_path,
               const std::string& output) {
  const RunSpec spec = load_spec(ctx, spec_path);
  const SystemDef system = build_system(spec);
  const SubspaceModel model = load_model(model_path);
  check_pairing(ctx, model, system, spec);
  const fs::path path = output.empty() ? spec.output_dir / "model.web.json" : fs::path(output);
  export_web(model, system, path);
  ctx.out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int run_diagnose(const Context& ctx, const std::string& model_path, const std::string& spec_path, long pairs) {
  const RunSpec spec = load_spec(ctx, spec_path);
  const SystemDef system = build_system(spec);
  const SubspaceModel model = load_model(model_path);
  check_pairing(ctx, model, system, spec);
  std::mt19937_64 rng(ctx.seed(spec.train.rng_seed));
  const long count = pairs > 0 ? pairs : spec.diagnose.pairs;
  const RatioSummary s = ratio_diagnostics(model, system, model.sigma, static_cast<int>(count), rng);
  ctx.out << std::setprecision(6) << "pairs " << s.pairs << "\n"
          << "ratio quantiles  5% " << s.q05 << "  25% " << s.q25 << "  50% " << s.median << "  75% " << s.q75
          << "  95% " << s.q95 << "\n"
          << "median |log ratio| " << s.median_abs_log << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural physics subspaces: fit, inspect and simulate reduced spaces", "nsub"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (overrides train.seed)");
  app.add_option("--out", g.out, "output directory");
  app.add_flag("--quiet", g.quiet, "suppress progress output");

  std::string spec, model, keyframes, output, obj_dir;
  int d = 0, sps = 30;
  double sigma = 0.0, h = 0.0, stddev = 1.0;
  long count = 100, steps = -1, pairs = 0;
  bool sinusoidal = false, clamped = false;
  std::vector<double> condition;

  auto* train_cmd = app.add_subcommand("train", "fit a subspace and write model + telemetry");
  train_cmd->add_option("spec", spec, "run spec")->required();

  auto* modes_cmd = app.add_subcommand("modes", "linear modal baseline");
  modes_cmd->add_option("spec", spec, "run spec")->required();
  modes_cmd->add_option("-d,--latent-dim", d, "number of modes");
  modes_cmd->add_option("-s,--sigma", sigma, "mode scale");

  auto* sample_cmd = app.add_subcommand("sample", "sample configurations from a model");
  sample_cmd->add_option("model", model, "model file")->required();
  sample_cmd->add_option("-n,--count", count, "number of samples");
  sample_cmd->add_option("--stddev", stddev, "latent standard deviation");
  sample_cmd->add_flag("--sinusoidal", sinusoidal, "random sinusoidal latent path");
  sample_cmd->add_option("--condition", condition, "condition values")->delimiter(',');

  auto* sim_cmd = app.add_subcommand("simulate", "time-step in the subspace");
  sim_cmd->set_help_flag("--help", "print this help message and exit");
  sim_cmd->add_option("model", model, "model file")->required();
  sim_cmd->add_option("spec", spec, "run spec")->required();
  sim_cmd->add_option("--h", h, "timestep");
  sim_cmd->add_option("--steps", steps, "number of steps");
  sim_cmd->add_option("--keyframes", keyframes, "initial latent state (one or two lines)");
  sim_cmd->add_option("--obj-dir", obj_dir, "also write one OBJ per frame");

  auto* interp_cmd = app.add_subcommand("interpolate", "Catmull-Rom path through latent keyframes");
  interp_cmd->add_option("model", model, "model file")->required();
  interp_cmd->add_option("keyframes", keyframes, "keyframe file")->required();
  interp_cmd->add_option("--samples-per-segment", sps, "samples per segment");
  interp_cmd->add_flag("--clamped", clamped, "open path with clamped ends instead of a loop");
  interp_cmd->add_option("--condition", condition, "condition values")->delimiter(',');

  auto* export_cmd = app.add_subcommand("export-web", "write the browser JSON");
  export_cmd->add_option("model", model, "model file")->required();
  export_cmd->add_option("spec", spec, "run spec")->required();
  export_cmd->add_option("-o,--output", output, "output file");

  auto* diag_cmd = app.add_subcommand("diagnose", "isometry ratio statistics");
  diag_cmd->add_option("model", model, "model file")->required();
  diag_cmd->add_option("spec", spec, "run spec")->required();
  diag_cmd->add_option("--pairs", pairs, "number of latent pairs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  const Context ctx{g, out, err};
  try {
    if (*train_cmd) return run_train(ctx, spec);
    if (*modes_cmd) return run_modes(ctx, spec, d, sigma);
    if (*sample_cmd) return run_sample(ctx, model, count, sinusoidal, stddev, condition);
    if (*sim_cmd) return run_simulate(ctx, model, spec, h, steps, keyframes, obj_dir);
    if (*interp_cmd) return run_interpolate(ctx, model, keyframes, sps, clamped, condition);
    if (*export_cmd) return run_export(ctx, model, spec, output);
    if (*diag_cmd) return run_diagnose(ctx, model, spec, pairs);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const YAML::Exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace nsub
