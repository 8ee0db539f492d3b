// hsiscale: command-line front end for scene synthesis, scale correction,
// unmixing, evaluation, the optimizer ablation and the sigma sweep.
//
// Exit codes: 0 success, 1 runtime or algorithm failure, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hsiscale/hsiscale.hpp"
#include "hsiscale/json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hsiscale;

namespace {

constexpr const char* kVersion = "0.1.0";

/// Bad flag values or combinations detected after parsing; maps to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for hashing");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char s[17];
  std::snprintf(s, sizeof s, "%016llx", static_cast<unsigned long long>(v));
  return s;
}

class Manifest {
public:
  explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  json config = json::object();
  std::uint64_t seed = 0;
  json extra = json::object();

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }

  void write(const fs::path& path, const std::string& status = "ok") const {
    auto files = [](const std::vector<fs::path>& list) {
      json arr = json::array();
      for (const auto& p : list) {
        json e = {{"path", p.string()}};
        if (fs::is_regular_file(p)) {
          e["fnv1a64"] = hex64(fnv1a64(p));
          e["bytes"] = fs::file_size(p);
        }
        arr.push_back(e);
      }
      return arr;
    };
    json j = {
        {"command", command_},
        {"version", kVersion},
        {"config", config},
        {"seed", seed},
        {"threads", thread_count()},
        {"inputs", files(inputs_)},
        {"outputs", files(outputs_)},
        {"status", status},
        {"duration_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()},
    };
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  }

private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

MatrixFormat resolve_format(const std::string& flag, const fs::path& path) {
  if (flag == "csv") return MatrixFormat::csv;
  if (flag == "raw") return MatrixFormat::raw;
  return matrix_format_for(path);
}

double stddev(const Eigen::VectorXd& v) { return std::sqrt(variance(v)); }

// ---------------------------------------------------------------------------
// Shared scene flags (synth, sweep)

struct SceneFlags {
  std::string kind = "matern";
  SynthConfig config;
  double snr_db = 0.0;
};

void add_scene_flags(CLI::App* cmd, SceneFlags& f) {
  cmd->add_option("--kind", f.kind, "Abundance field covariance")->check(CLI::IsMember({"matern", "spheric"}));
  cmd->add_option("--height", f.config.height, "Grid height in pixels")->check(CLI::PositiveNumber);
  cmd->add_option("--width", f.config.width, "Grid width in pixels")->check(CLI::PositiveNumber);
  cmd->add_option("--bands", f.config.bands, "Spectral bands L")->check(CLI::PositiveNumber);
  cmd->add_option("--endmembers", f.config.endmembers, "Endmember count K");
  cmd->add_option("--corr-len", f.config.correlation_length, "Abundance field correlation length (pixels)");
  cmd->add_option("--matern-nu", f.config.matern_nu, "Matern smoothness");
  cmd->add_option("--contrast", f.config.abundance_contrast, "Std of the fields fed to the softmax");
  cmd->add_option("--scale-corr-len", f.config.scale_correlation_length,
                  "Scaling field correlation length (pixels); tiny values give i.i.d. factors");
  cmd->add_option("--snr-db", f.snr_db, "Add white noise at this SNR (dB)");
}

SynthConfig resolve_scene(const SceneFlags& f, CLI::App* cmd) {
  SynthConfig c = f.config;
  c.field_kind = parse_field_kind(f.kind);
  if (cmd->count("--snr-db")) c.snr_db = f.snr_db;
  try {
    c.validate();
  } catch (const hsiscale::ValidationError& e) {
    throw UsageError(e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Shared correction flags (correct, ablate)

struct CorrectFlags {
  std::size_t endmembers = 0;
  std::size_t candidates = 200;
  std::size_t swarm = 0;
  std::size_t pso_iters = 150;
  std::size_t gd_iters = 500;
  std::uint64_t seed = 0;
};

void add_correct_flags(CLI::App* cmd, CorrectFlags& f) {
  cmd->add_option("--endmembers,-k", f.endmembers, "Endmember count K")->required();
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--candidates", f.candidates, "Candidate normals to generate")->check(CLI::PositiveNumber);
  cmd->add_option("--swarm", f.swarm, "PSO swarm size (0: max(64, candidates))");
  cmd->add_option("--pso-iters", f.pso_iters, "PSO generations")->check(CLI::PositiveNumber);
  cmd->add_option("--gd-iters", f.gd_iters, "Gradient descent iteration limit")->check(CLI::PositiveNumber);
}

CorrectionOptions correction_options(const CorrectFlags& f) {
  CorrectionOptions o;
  o.endmembers = static_cast<Eigen::Index>(f.endmembers);
  o.candidate_count = f.candidates;
  o.seed = f.seed;
  o.pso.swarm_size = f.swarm;
  o.pso.iterations = f.pso_iters;
  o.gd.max_iters = f.gd_iters;
  return o;
}

json options_json(const CorrectionOptions& o) {
  return {
      {"endmembers", o.endmembers},
      {"candidate_count", o.candidate_count},
      {"seed", o.seed},
      {"pso",
       {{"swarm_size", o.pso.swarm_size == 0 ? std::max<std::size_t>(64, o.candidate_count) : o.pso.swarm_size},
        {"iterations", o.pso.iterations},
        {"inertia", o.pso.inertia},
        {"cognitive", o.pso.cognitive},
        {"social", o.pso.social},
        {"velocity_clamp", o.pso.velocity_clamp}}},
      {"gd",
       {{"max_iters", o.gd.max_iters},
        {"initial_step", o.gd.initial_step},
        {"backtrack_factor", o.gd.backtrack_factor},
        {"grad_tol", o.gd.grad_tol},
        {"step_tol", o.gd.step_tol}}},
      {"candidates",
       {{"max_retries", o.candidates.max_retries},
        {"separation_fraction", o.candidates.separation_fraction},
        {"distance_sample", o.candidates.distance_sample},
        {"max_condition", o.candidates.max_condition}}},
      {"stages", {{"candidates", o.stages.candidates}, {"pso", o.stages.pso}, {"gd", o.stages.gd}}},
      {"mu_floor", o.mu_floor},
  };
}

void check_k(std::size_t k, const HsiCube& cube, bool allow_degenerate) {
  const std::size_t limit = std::min(cube.bands(), cube.pixel_count());
  if (k > limit)
    throw UsageError("--endmembers " + std::to_string(k) + " exceeds min(bands, pixels) = " + std::to_string(limit));
  if (k == 0) throw UsageError("--endmembers must be positive");
  if (k == 1 && !allow_degenerate)
    throw UsageError("--endmembers 1 is a degenerate case; pass --allow-degenerate to run it anyway");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  SceneFlags scene;
  fs::path out;
};

int run_synth(CLI::App* cmd, const SynthArgs& a) {
  const SynthConfig config = resolve_scene(a.scene, cmd);
  Manifest manifest("synth");
  manifest.config = to_json(config);
  manifest.seed = config.seed;

  SynthScene scene = gen_scene(config);
  fs::create_directories(a.out);
  const fs::path clean = a.out / "clean.hsic", scaled = a.out / "scaled.hsic", em = a.out / "endmembers.csv",
                 ab = a.out / "abundances.csv", mu = a.out / "mu_true.f32", cfg = a.out / "config.json";
  write_cube(scene.clean_cube, clean);
  write_cube(scene.scaled_cube, scaled);
  write_matrix(scene.truth.endmembers, em, MatrixFormat::csv);
  write_matrix(scene.truth.abundances, ab, MatrixFormat::csv);
  write_matrix(Eigen::MatrixXd(scene.mu_true.values), mu, MatrixFormat::raw);
  write_json(to_json(config), cfg);
  for (const auto& p : {clean, scaled, em, ab, mu, cfg}) manifest.output(p);
  for (const auto& w : scene.warnings) std::cerr << "warning: " << w << "\n";
  manifest.extra["warnings"] = scene.warnings;
  manifest.write(a.out / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// correct

struct CorrectArgs {
  CorrectFlags flags;
  fs::path input, out, mu_out, report, landscape;
  std::string format = "auto";
  std::size_t landscape_res = 90;
  bool allow_degenerate = false;
};

int run_correct(const CorrectArgs& a) {
  const fs::path report_path = a.report.empty() ? fs::path(a.out.string() + ".report.json") : a.report;
  const fs::path manifest_path = a.out.string() + ".manifest.json";
  Manifest manifest("correct");
  manifest.input(a.input);
  manifest.seed = a.flags.seed;

  HsiCube cube;
  try {
    cube = read_cube(a.input);
  } catch (const hsiscale::Error& e) {
    manifest.extra["error"] = {{"kind", e.kind()}, {"message", e.what()}};
    manifest.write(manifest_path, "failed");
    throw;
  }
  check_k(a.flags.endmembers, cube, a.allow_degenerate);
  if (!a.landscape.empty() && a.flags.endmembers != 3) throw UsageError("--landscape requires --endmembers 3");
  const CorrectionOptions options = correction_options(a.flags);
  manifest.config = options_json(options);
  try {
    PsoConfig pso = options.pso;
    if (pso.swarm_size == 0) pso.swarm_size = std::max<std::size_t>(64, options.candidate_count);
    pso.validate();
    options.gd.validate();
  } catch (const hsiscale::ValidationError& e) {
    throw UsageError(e.what());
  }

  try {
    const CorrectionResult result = run_correction(cube, options);
    write_cube(result.corrected, a.out);
    write_matrix(Eigen::MatrixXd(result.report.mu_hat.values), a.mu_out, resolve_format(a.format, a.mu_out));
    const json report = to_json(result.report);
    write_json(report, report_path);
    manifest.output(a.out);
    manifest.output(a.mu_out);
    manifest.output(report_path);
    if (!a.landscape.empty()) {
      const PsiObjective objective(result.reduced.pixels, result.report.model.c_star(), options.mu_floor);
      std::ofstream out(a.landscape);
      out.precision(17);
      out << "theta,phi,psi\n";
      for (const auto& s : psi_landscape(objective, a.landscape_res + 1, 2 * a.landscape_res))
        out << s.theta << "," << s.phi << "," << s.psi << "\n";
      if (!out) throw std::runtime_error("cannot write " + a.landscape.string());
      manifest.output(a.landscape);
    }
    std::cout << report.dump(2) << "\n";
  } catch (const hsiscale::Error& e) {
    manifest.extra["error"] = {{"kind", e.kind()}, {"message", e.what()}};
    manifest.write(manifest_path, "failed");
    throw;
  }
  manifest.write(manifest_path);
  return 0;
}

// ---------------------------------------------------------------------------
// unmix

struct UnmixArgs {
  fs::path input, endmember_file, out;
  std::string extract;
  std::size_t endmembers = 0;
  std::uint64_t seed = 0;
  std::size_t sweeps = 50;
  std::size_t starts = 3;
};

int run_unmix(const UnmixArgs& a) {
  if (a.endmember_file.empty() == a.extract.empty())
    throw UsageError("give exactly one of --endmember-file and --extract nfindr");
  Manifest manifest("unmix");
  manifest.input(a.input);
  manifest.seed = a.seed;
  manifest.config = {{"endmembers", a.endmembers}, {"seed", a.seed}};

  const HsiCube cube = read_cube(a.input);
  const PixelMatrix pixels = cube.pixel_matrix();
  Eigen::MatrixXd endmembers;
  if (!a.endmember_file.empty()) {
    manifest.input(a.endmember_file);
    manifest.config["endmember_source"] = "file";
    endmembers = read_matrix(a.endmember_file);
    if (endmembers.rows() != static_cast<Eigen::Index>(cube.bands()))
      throw DimensionError("endmember file has " + std::to_string(endmembers.rows()) + " rows, cube has " +
                           std::to_string(cube.bands()) + " bands");
    if (a.endmembers != 0 && endmembers.cols() != static_cast<Eigen::Index>(a.endmembers))
      throw DimensionError("endmember file has " + std::to_string(endmembers.cols()) + " columns, expected " +
                           std::to_string(a.endmembers));
  } else {
    check_k(a.endmembers, cube, false);
    manifest.config["endmember_source"] = "nfindr";
    manifest.config["max_sweeps"] = a.sweeps;
    manifest.config["starts"] = a.starts;
    const ReducedData reduced = svd_reduce(pixels, static_cast<Eigen::Index>(a.endmembers));
    const NfindrResult nf =
        nfindr_extract(reduced, static_cast<Eigen::Index>(a.endmembers), a.seed, a.sweeps, a.starts);
    endmembers = nf.endmembers;
    manifest.extra["nfindr"] = {{"indices", std::vector<long long>(nf.indices.begin(), nf.indices.end())},
                                {"volume", nf.volume},
                                {"volume_history", nf.volume_history}};
  }
  const UnmixResult r = unmix_with(pixels, endmembers);
  fs::create_directories(a.out);
  const fs::path em = a.out / "endmembers.csv", ab = a.out / "abundances.csv", res = a.out / "residuals.csv";
  write_matrix(r.endmembers, em, MatrixFormat::csv);
  write_matrix(r.abundances, ab, MatrixFormat::csv);
  write_matrix(Eigen::MatrixXd(r.per_pixel_residual), res, MatrixFormat::csv);
  for (const auto& p : {em, ab, res}) manifest.output(p);
  manifest.write(a.out / "manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string mode;
  fs::path pred, truth, clean, csv, manifest, pred_endmembers, truth_endmembers;
  std::string format = "auto";
};

int run_eval(const EvalArgs& a) {
  const fs::path manifest_path = a.manifest.empty() ? fs::path(a.pred.string() + ".eval.manifest.json") : a.manifest;
  Manifest manifest("eval");
  manifest.input(a.pred);
  manifest.input(a.truth);
  manifest.config = {{"mode", a.mode}};

  EvalReport report;
  std::ostringstream table;
  table.precision(17);
  if (a.mode == "mu") {
    const Eigen::VectorXd pred = read_vector(a.pred, resolve_format(a.format, a.pred));
    const Eigen::VectorXd truth = read_vector(a.truth, resolve_format(a.format, a.truth));
    report.rmse_mu = rmse_mu(pred, truth);
    report.n_pixels = static_cast<std::size_t>(truth.size());
    double ratio = 1.0;
    if (!a.clean.empty()) {
      manifest.input(a.clean);
      ratio = norm_ratio(read_cube(a.clean).pixel_matrix());
    }
    report.sigma_max = report.sigma_min = stddev(truth);
    report.bound_rhs = bound_check(truth, report.n_pixels, ratio);
    manifest.config["norm_ratio"] = ratio;
    table << "metric,value\nrmse_mu," << *report.rmse_mu << "\nbound_rhs," << *report.bound_rhs << "\n";
  } else if (a.mode == "endmembers") {
    const Eigen::MatrixXd pred = read_matrix(a.pred, resolve_format(a.format, a.pred));
    const Eigen::MatrixXd truth = read_matrix(a.truth, resolve_format(a.format, a.truth));
    const SadResult sad = sad_error(truth, pred);
    report.sad_mean = sad.mean;
    report.sad_per_endmember = sad.per_endmember;
    report.permutation = sad.permutation;
    table << "endmember,matched,sad\n";
    for (Eigen::Index j = 0; j < sad.per_endmember.size(); ++j)
      table << j << "," << sad.permutation[static_cast<std::size_t>(j)] << "," << sad.per_endmember[j] << "\n";
  } else {
    const Eigen::MatrixXd pred = read_matrix(a.pred, resolve_format(a.format, a.pred));
    const Eigen::MatrixXd truth = read_matrix(a.truth, resolve_format(a.format, a.truth));
    std::optional<std::vector<Eigen::Index>> perm;
    if (!a.pred_endmembers.empty() || !a.truth_endmembers.empty()) {
      if (a.pred_endmembers.empty() || a.truth_endmembers.empty())
        throw UsageError("--pred-endmembers and --truth-endmembers go together");
      manifest.input(a.pred_endmembers);
      manifest.input(a.truth_endmembers);
      const SadResult sad = sad_error(read_matrix(a.truth_endmembers), read_matrix(a.pred_endmembers));
      report.sad_mean = sad.mean;
      report.sad_per_endmember = sad.per_endmember;
      perm = sad.permutation;
    }
    const AbundanceRmse ar = abundance_rmse(truth, pred, perm);
    report.abundance_rmse_total = ar.total;
    report.abundance_rmse_per_endmember = ar.per_endmember;
    report.permutation = ar.permutation;
    report.n_pixels = static_cast<std::size_t>(truth.cols());
    table << "endmember,matched,abundance_rmse\n";
    for (Eigen::Index j = 0; j < ar.per_endmember.size(); ++j)
      table << j << "," << ar.permutation[static_cast<std::size_t>(j)] << "," << ar.per_endmember[j] << "\n";
  }

  const json j = to_json(report);
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    out << table.str();
    if (!out) throw std::runtime_error("cannot write " + a.csv.string());
    manifest.output(a.csv);
  }
  manifest.extra["report"] = j;
  manifest.write(manifest_path);
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  CorrectFlags flags;
  fs::path input, truth_mu, out, plot_data;
};

struct Variant {
  const char* name;
  PipelineStages stages;
};

constexpr Variant kVariants[] = {
    {"gd_only", {false, false, true}},
    {"pso_random_gd", {false, true, true}},
    {"candidates_pso", {true, true, false}},
    {"full", {true, true, true}},
};

int run_ablate(const AblateArgs& a) {
  Manifest manifest("ablate");
  manifest.input(a.input);
  manifest.input(a.truth_mu);
  manifest.seed = a.flags.seed;
  const HsiCube cube = read_cube(a.input);
  check_k(a.flags.endmembers, cube, false);
  const Eigen::VectorXd truth = read_vector(a.truth_mu);
  if (truth.size() != static_cast<Eigen::Index>(cube.pixel_count()))
    throw DimensionError("truth has " + std::to_string(truth.size()) + " values, cube has " +
                         std::to_string(cube.pixel_count()) + " pixels");
  const CorrectionOptions base = correction_options(a.flags);
  manifest.config = options_json(base);

  json variants = json::array();
  std::ostringstream plot;
  plot.precision(17);
  plot << "variant,rmse_mu,psi_initial,psi_after_pso,psi_final\n";
  for (const Variant& v : kVariants) {
    CorrectionOptions o = base;
    o.stages = v.stages;
    const CorrectionResult r = run_correction(cube, o);
    const double rmse = rmse_mu(r.report.mu_hat.values, truth);
    json e = to_json(r.report);
    e["variant"] = v.name;
    e["rmse_mu"] = rmse;
    variants.push_back(e);
    plot << v.name << "," << rmse << "," << r.report.psi_initial << "," << r.report.psi_after_pso << ","
         << r.report.psi_final << "\n";
  }
  const json report = {{"variants", variants}, {"seed", a.flags.seed}};
  write_json(report, a.out);
  manifest.output(a.out);
  if (!a.plot_data.empty()) {
    std::ofstream out(a.plot_data);
    out << plot.str();
    if (!out) throw std::runtime_error("cannot write " + a.plot_data.string());
    manifest.output(a.plot_data);
  }
  manifest.write(a.out.string() + ".manifest.json");
  std::cout << report.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  SceneFlags scene;
  CorrectFlags flags;
  std::string stds;
  std::size_t seeds = 3;
  fs::path out, plot_data;
};

std::vector<double> parse_stds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("--stds entry '" + item + "' is not a number");
    }
    if (used != item.size()) throw UsageError("--stds entry '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--stds must list at least one value");
  return out;
}

int run_sweep(CLI::App* cmd, const SweepArgs& a) {
  const std::vector<double> stds = parse_stds(a.stds);
  if (a.seeds == 0) throw UsageError("--seeds must be positive");
  SynthConfig scene = resolve_scene(a.scene, cmd);
  for (double s : stds) {
    SynthConfig probe = scene;
    probe.scale_std = s;
    try {
      probe.validate();
    } catch (const hsiscale::ValidationError& e) {
      throw UsageError(e.what());
    }
  }
  Manifest manifest("sweep");
  manifest.seed = a.flags.seed;
  CorrectionOptions base = correction_options(a.flags);
  base.endmembers = static_cast<Eigen::Index>(scene.endmembers);
  manifest.config = {{"scene", to_json(scene)}, {"correction", options_json(base)}, {"stds", stds},
                     {"seeds", a.seeds}};

  std::ostringstream table, plot;
  table.precision(17);
  plot.precision(17);
  table << "std,mean_rmse_mu,std_rmse_mu\n";
  plot << "std,seed,rmse_mu\n";
  for (double s : stds) {
    Eigen::VectorXd values(static_cast<Eigen::Index>(a.seeds));
    for (std::size_t i = 0; i < a.seeds; ++i) {
      SynthConfig c = scene;
      c.scale_std = s;
      c.seed = a.flags.seed + i;
      const SynthScene sc = gen_scene(c);
      CorrectionOptions o = base;
      o.seed = c.seed;
      const CorrectionResult r = run_correction(sc.scaled_cube, o);
      values[static_cast<Eigen::Index>(i)] = rmse_mu(r.report.mu_hat, sc.mu_true);
      plot << s << "," << c.seed << "," << values[static_cast<Eigen::Index>(i)] << "\n";
    }
    table << s << "," << values.mean() << "," << stddev(values) << "\n";
  }
  {
    std::ofstream out(a.out);
    out << table.str();
    if (!out) throw std::runtime_error("cannot write " + a.out.string());
  }
  manifest.output(a.out);
  if (!a.plot_data.empty()) {
    std::ofstream out(a.plot_data);
    out << plot.str();
    if (!out) throw std::runtime_error("cannot write " + a.plot_data.string());
    manifest.output(a.plot_data);
  }
  manifest.write(a.out.string() + ".manifest.json");
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-pixel scaling correction for hyperspectral images", "hsiscale"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (default: HSI_SCALE_THREADS, then all cores)")
      ->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scaled scene");
  add_scene_flags(synth_cmd, synth.scene);
  synth_cmd->add_option("--scale-std", synth.scene.config.scale_std, "Std of the scaling field");
  synth_cmd->add_option("--seed", synth.scene.config.seed, "Scene seed");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  CorrectArgs correct;
  auto* correct_cmd = app.add_subcommand("correct", "Estimate and remove per-pixel scaling");
  correct_cmd->add_option("--input", correct.input, "Input HSIC cube")->required()->check(CLI::ExistingFile);
  add_correct_flags(correct_cmd, correct.flags);
  correct_cmd->add_option("--out", correct.out, "Corrected HSIC cube")->required();
  correct_cmd->add_option("--mu-out", correct.mu_out, "Estimated scaling factors")->required();
  correct_cmd->add_option("--report", correct.report, "Report JSON path (default <out>.report.json)");
  correct_cmd->add_option("--matrix-format", correct.format, "Format of --mu-out")
      ->check(CLI::IsMember({"auto", "csv", "raw"}));
  correct_cmd->add_option("--landscape", correct.landscape, "Write (theta, phi, psi) samples for K = 3");
  correct_cmd->add_option("--landscape-res", correct.landscape_res, "Polar grid resolution")
      ->check(CLI::PositiveNumber);
  correct_cmd->add_flag("--allow-degenerate", correct.allow_degenerate, "Permit K = 1");

  UnmixArgs unmix;
  auto* unmix_cmd = app.add_subcommand("unmix", "Extract endmembers and estimate abundances with FCLS");
  unmix_cmd->add_option("--input", unmix.input, "Input HSIC cube")->required()->check(CLI::ExistingFile);
  unmix_cmd->add_option("--endmembers,-k", unmix.endmembers, "Endmember count K");
  unmix_cmd->add_option("--endmember-file", unmix.endmember_file, "Known L x K endmember matrix")
      ->check(CLI::ExistingFile);
  unmix_cmd->add_option("--extract", unmix.extract, "Extraction method")->check(CLI::IsMember({"nfindr"}));
  unmix_cmd->add_option("--seed", unmix.seed, "N-FINDR seed");
  unmix_cmd->add_option("--sweeps", unmix.sweeps, "N-FINDR sweep limit")->check(CLI::PositiveNumber);
  unmix_cmd->add_option("--starts", unmix.starts, "N-FINDR random starts")->check(CLI::PositiveNumber);
  unmix_cmd->add_option("--out", unmix.out, "Output directory")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compare estimates against ground truth");
  eval_cmd->add_option("mode", eval.mode, "mu | abundance | endmembers")
      ->required()
      ->check(CLI::IsMember({"mu", "abundance", "endmembers"}));
  eval_cmd->add_option("--pred", eval.pred, "Estimate")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth", eval.truth, "Ground truth")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--clean", eval.clean, "Unscaled cube for the bound's norm ratio (mu mode)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred-endmembers", eval.pred_endmembers, "Match abundance rows by endmember SAD")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth-endmembers", eval.truth_endmembers, "Reference endmembers for matching")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--csv", eval.csv, "Per-endmember table");
  eval_cmd->add_option("--manifest", eval.manifest, "Manifest path (default <pred>.eval.manifest.json)");
  eval_cmd->add_option("--matrix-format", eval.format, "Format of --pred/--truth")
      ->check(CLI::IsMember({"auto", "csv", "raw"}));

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare optimizer stage combinations");
  ablate_cmd->add_option("--input", ablate.input, "Scaled HSIC cube")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--truth-mu", ablate.truth_mu, "True scaling factors")->required()->check(CLI::ExistingFile);
  add_correct_flags(ablate_cmd, ablate.flags);
  ablate_cmd->add_option("--out", ablate.out, "Report JSON")->required();
  ablate_cmd->add_option("--plot-data", ablate.plot_data, "CSV for external plotting");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "RMSE of the scaling estimate versus its std");
  add_scene_flags(sweep_cmd, sweep.scene);
  sweep_cmd->add_option("--stds", sweep.stds, "Comma-separated scaling stds")->required();
  sweep_cmd->add_option("--seeds", sweep.seeds, "Scenes per std");
  sweep_cmd->add_option("--seed", sweep.flags.seed, "First scene seed");
  sweep_cmd->add_option("--candidates", sweep.flags.candidates, "Candidate normals")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--pso-iters", sweep.flags.pso_iters, "PSO generations")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--gd-iters", sweep.flags.gd_iters, "Gradient descent iteration limit")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep.out, "Output CSV")->required();
  sweep_cmd->add_option("--plot-data", sweep.plot_data, "Per-seed CSV for external plotting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (threads > 0) set_thread_count(threads);

  try {
    if (synth_cmd->parsed()) return run_synth(synth_cmd, synth);
    if (correct_cmd->parsed()) return run_correct(correct);
    if (unmix_cmd->parsed()) return run_unmix(unmix);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (ablate_cmd->parsed()) return run_ablate(ablate);
    if (sweep_cmd->parsed()) return run_sweep(sweep_cmd, sweep);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const hsiscale::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
