#pragma once

// Scenario runner: run configuration, scene construction, scenario data and
// reconstructions, and the file-level commands behind the command-line tool.

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cst/basis.hpp"
#include "cst/core.hpp"
#include "cst/forward.hpp"
#include "cst/geometry.hpp"
#include "cst/io.hpp"
#include "cst/metrics.hpp"
#include "cst/montecarlo.hpp"
#include "cst/phantom.hpp"
#include "cst/solvers.hpp"
#include "cst/uncertainty.hpp"

namespace cst {

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

inline const std::vector<std::string> scenario_names = {"i", "ii", "iii", "iv"};
inline const std::vector<std::string> method_names = {"landweber", "tv", "resesop", "resesop_tv"};

struct RunConfig {
  std::size_t n = 64;
  double extent = 30.0;
  double radius = 30.0;
  std::size_t n_s = 10;
  std::size_t n_d = 10;
  double arc_fraction = 0.8;
  std::size_t p = 40;
  double e0 = 1173.0;
  std::uint64_t i0 = 10'000'000;
  std::size_t oversample = 4;
  double contrast_scale = 1.0;
  double prior_interior = 0.67;
  double tau = 1.01;
  std::string rho = "auto";
  double rho_factor = 1.1;
  double eta_margin = 0.0;
  double noise_level = 0.024;
  double lambda_tv = 12.0;
  double beta_tv = 1e-4;
  std::size_t tv_every = 100;
  std::size_t tv_steps = 10;
  std::size_t tv_iterations = 500;
  std::size_t max_sweeps = 2000;
  std::size_t landweber_steps = 2000;
  double landweber_step = 0.0;
  std::uint64_t seed = 1;
  std::string scenario = "i";
  std::string method = "resesop";
  std::string which = "prior";
  unsigned threads = 0;
  std::string workdir = ".";

  static RunConfig desk() { return {}; }
  static RunConfig full() {
    RunConfig c;
    c.n = 100;
    c.n_d = 20;
    c.p = 80;
    c.i0 = 800'000'000;
    return c;
  }

  double resolved_rho(std::span<const double> truth_coefficients) const {
    if (rho == "auto") return rho_factor * norm(truth_coefficients);
    return parse_double("rho", rho);
  }

  void validate() const {
    require(n >= 1 && n_s >= 1 && n_d >= 1 && p >= 2 && i0 >= 1 && oversample >= 1, "config: counts must be >= 1");
    require(tv_every >= 1 && max_sweeps >= 1, "config: counts must be >= 1");
    require(std::find(scenario_names.begin(), scenario_names.end(), scenario) != scenario_names.end(),
            "config: scenario must be one of i, ii, iii, iv");
    require(std::find(method_names.begin(), method_names.end(), method) != method_names.end(),
            "config: method must be one of landweber, tv, resesop, resesop_tv");
    require(which == "exact" || which == "prior", "config: which must be exact or prior");
    require(tau > 1.0, "config: tau must exceed 1");
    require(rho == "auto" || parse_double("rho", rho) > 0.0, "config: rho must be positive or auto");
  }

  /// Every key with its current value, sorted by key.
  std::map<std::string, std::string> to_map() const {
    std::map<std::string, std::string> m;
    for_each_field([&](const std::string& key, auto& value) { m[key] = format_value(value); });
    return m;
  }

  void set(const std::string& key, const std::string& text) {
    bool found = false;
    for_each_field([&](const std::string& k, auto& value) {
      if (k != key) return;
      found = true;
      parse_into(key, text, value);
    });
    if (!found) throw std::invalid_argument("config: unknown key " + key);
  }

  /// Keys that determine artifact contents (workdir and threads excluded).
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : to_map())
      if (k != "workdir" && k != "threads") out += k + "=" + v + "\n";
    return out;
  }

  std::string hash() const { return sha256_string(canonical()); }

  static RunConfig from_map(const std::map<std::string, std::string>& kv) { return from_map(kv, desk()); }
  static RunConfig from_map(const std::map<std::string, std::string>& kv, RunConfig base) {
    if (auto it = kv.find("preset"); it != kv.end()) {
      if (it->second == "full") base = full();
      else if (it->second == "desk") base = desk();
      else throw std::invalid_argument("config: preset must be desk or full");
    }
    for (const auto& [k, v] : kv)
      if (k != "preset") base.set(k, v);
    return base;
  }

  static RunConfig read(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw io_error("config: cannot open " + path.string());
    return from_map(parse_key_values(is, path.string()));
  }

  void write(const fs::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    for (const auto& [k, v] : to_map()) os << k << '=' << v << '\n';
    if (!os) throw io_error("config: cannot write " + path.string());
  }

 private:
  template <class Fn>
  void for_each_field(Fn&& fn) {
    fn("n", n);
    fn("extent", extent);
    fn("radius", radius);
    fn("n_s", n_s);
    fn("n_d", n_d);
    fn("arc_fraction", arc_fraction);
    fn("p", p);
    fn("e0", e0);
    fn("i0", i0);
    fn("oversample", oversample);
    fn("contrast_scale", contrast_scale);
    fn("prior_interior", prior_interior);
    fn("tau", tau);
    fn("rho", rho);
    fn("rho_factor", rho_factor);
    fn("eta_margin", eta_margin);
    fn("noise_level", noise_level);
    fn("lambda_tv", lambda_tv);
    fn("beta_tv", beta_tv);
    fn("tv_every", tv_every);
    fn("tv_steps", tv_steps);
    fn("tv_iterations", tv_iterations);
    fn("max_sweeps", max_sweeps);
    fn("landweber_steps", landweber_steps);
    fn("landweber_step", landweber_step);
    fn("seed", seed);
    fn("scenario", scenario);
    fn("method", method);
    fn("which", which);
    fn("threads", threads);
    fn("workdir", workdir);
  }
  template <class Fn>
  void for_each_field(Fn&& fn) const {
    const_cast<RunConfig*>(this)->for_each_field(std::forward<Fn>(fn));
  }

  static double parse_double(const std::string& key, const std::string& text) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("config: " + key + " expects a number, got '" + text + "'");
  }

  static std::string format_value(const std::string& v) { return v; }
  static std::string format_value(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  }
  template <class T>
    requires std::is_integral_v<T>
  static std::string format_value(T v) {
    return std::to_string(v);
  }

  static void parse_into(const std::string&, const std::string& text, std::string& out) { out = text; }
  static void parse_into(const std::string& key, const std::string& text, double& out) {
    out = parse_double(key, text);
  }
  template <class T>
    requires std::is_integral_v<T>
  static void parse_into(const std::string& key, const std::string& text, T& out) {
    // integers also accept exponent notation such as 1e7
    const double v = parse_double(key, text);
    if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("config: " + key + " expects a nonnegative integer");
    out = static_cast<T>(v);
  }
};

//---------------------------------------------------------------------------//
// Scene
//---------------------------------------------------------------------------//

struct Scene {
  RunConfig cfg;
  RasterSpec raster;
  ScanGeometry geo;
  EnergyGrid energies;
  GaussianBasis basis;
  Discretization disc;

  explicit Scene(const RunConfig& c)
      : cfg(c), raster{c.n, c.extent}, geo(build_geometry(c.radius, c.n_s, c.n_d, c.arc_fraction)),
        energies(build_energy_grid(c.e0, c.p)), basis(c.n, c.extent), disc{raster, c.oversample} {
    c.validate();
  }

  std::size_t tuples() const { return geo.tuple_count(); }
};

inline Phantom truth_phantom(const Scene& s) { return build_shepp_logan(s.cfg.contrast_scale, s.raster); }
inline Phantom prior_phantom(const Scene& s, const Phantom& truth) { return build_prior(truth, s.cfg.prior_interior); }

/// Raster values at the reconstruction nodes (every second fine node).
inline std::vector<double> raster_on_nodes(const Grid& fine, std::size_t n) {
  require(fine.nx == 2 * n && fine.ny == 2 * n, "raster_on_nodes: raster is not 2N x 2N");
  std::vector<double> out(n * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) out[j * n + i] = fine.at(2 * i, 2 * j);
  return out;
}

inline std::vector<double> image_on_nodes(const GaussianBasis& basis, std::span<const double> c) {
  std::vector<Vec2> pts(basis.dimension());
  for (std::size_t q = 0; q < pts.size(); ++q) pts[q] = basis.node(q);
  return synthesize(basis, c, pts);
}

inline std::vector<double> truth_coefficients(const Scene& s, const Phantom& truth) {
  return project_l2([&](Vec2 x) { return truth.raster.bilinear(x); }, s.basis, 4).coefficients;
}

inline Spectrum first_order_data(const Scene& s, const Phantom& truth) {
  return apply_l1(attenuation_from(truth, "exact"), [&](Vec2 x) { return truth.raster.bilinear(x); }, s.geo,
                  s.energies, s.disc);
}

inline ForwardMatrix system_matrix(const Scene& s, const Phantom& attenuation, const std::string& id) {
  return assemble_matrix(attenuation_from(attenuation, id), s.basis, s.geo, s.energies, s.disc);
}

struct SimulatedData {
  Spectrum g1;     // deterministic
  Spectrum g1_mc;  // calibrated to g1
  Spectrum g2_mc;  // same scale as g1_mc
  double scale = 0.0;
};

inline SimulatedData simulate_data(const Scene& s, const Phantom& truth) {
  SimulatedData out;
  out.g1 = first_order_data(s, truth);
  McConfig mc;
  mc.photons_per_source = s.cfg.i0;
  mc.rng_seed = s.cfg.seed;
  auto tally = simulate(truth.raster, truth.water_density, s.geo, s.energies, mc);
  const bool vacuum = l2_norm(out.g1) == 0.0 || l2_norm(tally.g1) == 0.0;
  out.scale = vacuum ? 0.0 : calibrate_scale(tally.g1, out.g1);
  out.g1_mc = std::move(tally.g1);
  out.g2_mc = std::move(tally.g2);
  for (auto& v : out.g1_mc.values) v *= out.scale;
  for (auto& v : out.g2_mc.values) v *= out.scale;
  return out;
}

//---------------------------------------------------------------------------//
// Scenarios
//---------------------------------------------------------------------------//

/// Data and per-subproblem bounds of one scenario. Scenario iv lives on the
/// energy-differenced rows ((P - 1) K of them).
struct ScenarioData {
  std::string scenario;
  Spectrum data;
  Spectrum eta;
  Spectrum delta;
  double tau = 1.01;
  double rho = 1.0;
};

inline Spectrum add(const Spectrum& a, const Spectrum& b) {
  require(a.p == b.p && a.k == b.k, "add: shape mismatch");
  Spectrum out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += b.values[i];
  return out;
}

inline Spectrum as_spectrum(std::vector<double> v, std::size_t p, std::size_t k) {
  require(v.size() == p * k, "as_spectrum: size mismatch");
  Spectrum s(p, k);
  s.values = std::move(v);
  return s;
}

/// exact: g1 (or its noisy version for ii), g2 as calibrated second order.
inline ScenarioData scenario_data(const std::string& scenario, const Spectrum& g1, const Spectrum* noisy,
                                  const Spectrum* noise_delta, const Spectrum* g2, const ForwardMatrix& prior,
                                  std::span<const double> c_truth, double tau, double rho, double margin) {
  ScenarioData sd;
  sd.scenario = scenario;
  sd.tau = tau;
  sd.rho = rho;
  const Spectrum applied = as_spectrum(prior.apply(c_truth), g1.p, g1.k);
  if (scenario == "i") {
    sd.data = g1;
    sd.eta = estimate_eta(g1, applied, rho, margin);
    sd.delta = Spectrum(g1.p, g1.k);
  } else if (scenario == "ii") {
    require(noisy && noise_delta, "scenario ii needs noisy data");
    sd.data = *noisy;
    sd.eta = estimate_eta(g1, applied, rho, margin);
    sd.delta = *noise_delta;
  } else if (scenario == "iii") {
    require(g2, "scenario iii needs second-order data");
    sd.data = add(g1, *g2);
    sd.eta = estimate_eta(sd.data, applied, rho, margin);
    sd.delta = Spectrum(g1.p, g1.k);
  } else if (scenario == "iv") {
    require(g2, "scenario iv needs second-order data");
    sd.data = apply_p_operator(add(g1, *g2));
    sd.eta = estimate_eta(sd.data, apply_p_operator(applied), rho, margin);
    sd.delta = Spectrum(sd.data.p, sd.data.k);
  } else {
    throw std::invalid_argument("scenario must be one of i, ii, iii, iv");
  }
  return sd;
}

//---------------------------------------------------------------------------//
// Reconstruction
//---------------------------------------------------------------------------//

struct Reconstruction {
  std::vector<double> coefficients;
  std::string trace;  // text log of the solver
  std::size_t iterations = 0;
};

template <RowSystem System>
Reconstruction run_method(const std::string& method, const System& sys, const ScenarioData& sd, const RunConfig& cfg) {
  require(sd.data.size() == sys.rows() && sd.eta.size() == sys.rows() && sd.delta.size() == sys.rows(),
          "reconstruct: data does not match the system");
  Reconstruction rec;
  std::ostringstream log;
  log << std::setprecision(17);
  TvOptions tv;
  tv.lambda = cfg.lambda_tv;
  tv.beta = cfg.beta_tv;
  tv.steps = cfg.tv_steps;
  tv.nx = cfg.n;
  ResesopParams params;
  params.tau = sd.tau;
  params.rho = sd.rho;
  params.max_sweeps = cfg.max_sweeps;

  if (method == "landweber") {
    LandweberOptions opt;
    opt.step = cfg.landweber_step;
    opt.iterations = cfg.landweber_steps;
    // the classical method sees only the data error, not the model error
    opt.stop_residual = sd.tau * l2_norm(sd.delta);
    auto res = landweber(sys, sd.data.values, opt);
    log << "# iteration residual_norm\n";
    for (std::size_t i = 0; i < res.residual_norms.size(); ++i) log << i << ' ' << res.residual_norms[i] << '\n';
    log << "step " << res.step << "\nstop_residual " << opt.stop_residual << '\n';
    rec.coefficients = std::move(res.solution);
    rec.iterations = res.iterations;
  } else if (method == "tv") {
    tv.steps = cfg.tv_iterations;
    const std::vector<double> start(sys.cols(), 0.0);
    auto res = tv_reconstruct(sys, sd.data.values, start, tv);
    log << "# step objective\n";
    for (std::size_t i = 0; i < res.objective.size(); ++i) log << i << ' ' << res.objective[i] << '\n';
    rec.coefficients = std::move(res.image);
    rec.iterations = res.objective.size() - 1;
  } else if (method == "resesop" || method == "resesop_tv") {
    SolveResult res;
    if (method == "resesop") {
      res = resesop_kaczmarz(sys, sd.data.values, sd.eta.values, sd.delta.values, params);
    } else {
      HybridOptions h;
      h.tv_every = cfg.tv_every;
      h.tv = tv;
      res = resesop_tv(sys, sd.data.values, sd.eta.values, sd.delta.values, params, h);
    }
    res.trace.write(log);
    log << "tau " << params.tau << "\nrho " << params.rho << '\n';
    rec.coefficients = std::move(res.solution);
    rec.iterations = res.trace.sweeps;
  } else {
    throw std::invalid_argument("method must be one of landweber, tv, resesop, resesop_tv");
  }
  rec.trace = log.str();
  return rec;
}

inline Reconstruction reconstruct(const std::string& method, const ForwardMatrix& prior, const ScenarioData& sd,
                                  const RunConfig& cfg) {
  DenseRows rows(prior.entries, prior.rows, prior.cols);
  if (sd.scenario == "iv") {
    EnergyDifferenceRows<DenseRows> diff(rows, sd.data.k);
    return run_method(method, diff, sd, cfg);
  }
  return run_method(method, rows, sd, cfg);
}

inline std::string csv_row(const std::string& scenario, const std::string& method, const MetricReport& m) {
  std::ostringstream os;
  os << std::setprecision(10) << scenario << ',' << method << ',' << m.snr << ',' << m.psnr << ',' << m.ssim << ','
     << m.nmse;
  return os.str();
}

//---------------------------------------------------------------------------//
// File-level commands
//---------------------------------------------------------------------------//

namespace files {
inline const std::string config = "run.config";
inline const std::string ground_truth = "ground_truth.cstb";
inline const std::string prior = "prior.cstb";
inline const std::string truth_coefficients = "ground_truth_coefficients.cstb";
inline const std::string truth_nodes = "ground_truth_nodes.cstb";
inline std::string matrix(const std::string& which) { return "matrix_" + which + ".cstb"; }
inline const std::string g1 = "g1_exact.cstb";
inline const std::string g1_mc = "g1_mc.cstb";
inline const std::string g2_mc = "g2_mc.cstb";
inline const std::string noisy = "g1_noisy.cstb";
inline const std::string noise_delta = "noise_delta.cstb";
inline std::string data(const std::string& sc) { return "data_" + sc + ".cstb"; }
inline std::string eta(const std::string& sc) { return "eta_" + sc + ".cstb"; }
inline std::string delta(const std::string& sc) { return "delta_" + sc + ".cstb"; }
inline std::string stem(const std::string& sc, const std::string& m) { return "recon_" + sc + "_" + m; }
inline const std::string metrics = "metrics.csv";
}  // namespace files

class Workspace {
 public:
  explicit Workspace(RunConfig cfg) : cfg_(std::move(cfg)), dir_(cfg_.workdir) {
    cfg_.validate();
    fs::create_directories(dir_);
    if (cfg_.threads > 0) set_thread_count(cfg_.threads);
  }

  const RunConfig& config() const { return cfg_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  Manifest manifest(const std::string& command) const {
    Manifest m;
    m.set("command", command);
    m.set("config_sha256", cfg_.hash());
    m.set("seed", std::to_string(cfg_.seed));
    return m;
  }

  Manifest upstream(const std::string& command) const {
    const auto p = path(command + ".manifest");
    if (!fs::exists(p)) throw io_error("missing upstream manifest " + p.string() + "; run '" + command + "' first");
    return Manifest::read(p);
  }

  /// Checks an upstream artifact against its manifest and records it as an input.
  void use(Manifest& m, const Manifest& up, const std::string& file) const {
    check_upstream(up, file, path(file));
    m.add_input(file, path(file));
  }

  void output(Manifest& m, const std::string& file) const { m.add_output(file, path(file)); }

  void close(const Manifest& m, const std::string& name) const { m.write(path(name + ".manifest")); }

 private:
  RunConfig cfg_;
  fs::path dir_;
};

inline void cmd_phantom(const Workspace& ws) {
  Scene s(ws.config());
  const Phantom truth = truth_phantom(s);
  const Phantom prior = prior_phantom(s, truth);
  write_grid(ws.path(files::ground_truth), truth.raster);
  write_grid(ws.path(files::prior), prior.raster);
  write_vector(ws.path(files::truth_coefficients), truth_coefficients(s, truth));
  write_cstb(ws.path(files::truth_nodes), {static_cast<std::uint32_t>(s.cfg.n), static_cast<std::uint32_t>(s.cfg.n)},
             raster_on_nodes(truth.raster, s.cfg.n));
  auto m = ws.manifest("phantom");
  m.set("prior_interior", s.cfg.to_map().at("prior_interior"));
  for (const auto& f : {files::ground_truth, files::prior, files::truth_coefficients, files::truth_nodes}) ws.output(m, f);
  ws.close(m, "phantom");
}

inline Phantom load_phantom(const Workspace& ws, const Scene& s, const std::string& file) {
  Phantom ph;
  ph.spec = s.raster;
  const double lo = -0.5 * s.raster.extent;
  ph.raster = read_grid(ws.path(file), lo, lo, s.raster.fine_step());
  require(ph.raster.nx == 2 * s.cfg.n && ph.raster.ny == 2 * s.cfg.n, "phantom raster does not match the config");
  return ph;
}

inline void cmd_assemble(const Workspace& ws) {
  Scene s(ws.config());
  const std::string which = s.cfg.which;
  const auto up = ws.upstream("phantom");
  auto m = ws.manifest("assemble_" + which);
  const std::string src = which == "exact" ? files::ground_truth : files::prior;
  ws.use(m, up, src);
  const Phantom ph = load_phantom(ws, s, src);
  const auto a = system_matrix(s, ph, which);
  write_matrix(ws.path(files::matrix(which)), a);
  m.set("attenuation", which);
  m.set("rows", std::to_string(a.rows));
  m.set("cols", std::to_string(a.cols));
  ws.output(m, files::matrix(which));
  ws.close(m, "assemble_" + which);
}

inline void cmd_simulate(const Workspace& ws) {
  Scene s(ws.config());
  const auto up = ws.upstream("phantom");
  auto m = ws.manifest("simulate");
  ws.use(m, up, files::ground_truth);
  Phantom truth = load_phantom(ws, s, files::ground_truth);
  const auto sim = simulate_data(s, truth);
  write_spectrum(ws.path(files::g1), sim.g1);
  write_spectrum(ws.path(files::g1_mc), sim.g1_mc);
  write_spectrum(ws.path(files::g2_mc), sim.g2_mc);
  std::ostringstream scale;
  scale << std::setprecision(17) << sim.scale;
  m.set("i0", std::to_string(s.cfg.i0));
  m.set("mc_scale", scale.str());
  for (const auto& f : {files::g1, files::g1_mc, files::g2_mc}) ws.output(m, f);
  ws.close(m, "simulate");
}

inline void cmd_noise(const Workspace& ws) {
  const auto up = ws.upstream("simulate");
  auto m = ws.manifest("noise");
  ws.use(m, up, files::g1);
  const auto noisy = add_poisson_noise(read_spectrum(ws.path(files::g1)), ws.config().noise_level, ws.config().seed);
  write_spectrum(ws.path(files::noisy), noisy.noisy);
  write_spectrum(ws.path(files::noise_delta), noisy.delta);
  std::ostringstream c;
  c << std::setprecision(17) << noisy.count_level;
  m.set("count_level", c.str());
  for (const auto& f : {files::noisy, files::noise_delta}) ws.output(m, f);
  ws.close(m, "noise");
}

inline void cmd_uncertainty(const Workspace& ws) {
  const RunConfig& cfg = ws.config();
  const std::string sc = cfg.scenario;
  auto m = ws.manifest("uncertainty_" + sc);
  const auto ph = ws.upstream("phantom");
  const auto as = ws.upstream("assemble_prior");
  const auto sim = ws.upstream("simulate");
  ws.use(m, ph, files::truth_coefficients);
  ws.use(m, as, files::matrix("prior"));
  ws.use(m, sim, files::g1);
  const auto c = read_vector(ws.path(files::truth_coefficients));
  const auto a = read_matrix(ws.path(files::matrix("prior")));
  const auto g1 = read_spectrum(ws.path(files::g1));
  std::optional<Spectrum> noisy, delta, g2;
  if (sc == "ii") {
    const auto nz = ws.upstream("noise");
    ws.use(m, nz, files::noisy);
    ws.use(m, nz, files::noise_delta);
    noisy = read_spectrum(ws.path(files::noisy));
    delta = read_spectrum(ws.path(files::noise_delta));
  }
  if (sc == "iii" || sc == "iv") {
    ws.use(m, sim, files::g2_mc);
    g2 = read_spectrum(ws.path(files::g2_mc));
  }
  if (a.cols != c.size() || a.rows != g1.size()) throw std::invalid_argument("uncertainty: inconsistent shapes");
  const double rho = cfg.resolved_rho(c);
  const auto sd = scenario_data(sc, g1, noisy ? &*noisy : nullptr, delta ? &*delta : nullptr, g2 ? &*g2 : nullptr, a, c,
                                cfg.tau, rho, cfg.eta_margin);
  write_spectrum(ws.path(files::data(sc)), sd.data);
  write_spectrum(ws.path(files::eta(sc)), sd.eta);
  write_spectrum(ws.path(files::delta(sc)), sd.delta);
  std::ostringstream r, t;
  r << std::setprecision(17) << rho;
  t << std::setprecision(17) << cfg.tau;
  m.set("rho", r.str());
  m.set("tau", t.str());
  m.set("scenario", sc);
  for (const auto& f : {files::data(sc), files::eta(sc), files::delta(sc)}) ws.output(m, f);
  ws.close(m, "uncertainty_" + sc);
}

inline void cmd_reconstruct(const Workspace& ws) {
  const RunConfig& cfg = ws.config();
  const std::string sc = cfg.scenario, method = cfg.method;
  const std::string stem = files::stem(sc, method);
  auto m = ws.manifest("reconstruct_" + sc + "_" + method);
  const auto un = ws.upstream("uncertainty_" + sc);
  const auto as = ws.upstream("assemble_prior");
  const auto ph = ws.upstream("phantom");
  un.verify_inputs(ws.path(""));
  ws.use(m, as, files::matrix("prior"));
  ws.use(m, ph, files::truth_nodes);
  for (const auto& f : {files::data(sc), files::eta(sc), files::delta(sc)}) ws.use(m, un, f);

  ScenarioData sd;
  sd.scenario = sc;
  sd.data = read_spectrum(ws.path(files::data(sc)));
  sd.eta = read_spectrum(ws.path(files::eta(sc)));
  sd.delta = read_spectrum(ws.path(files::delta(sc)));
  sd.tau = std::stod(un.get("tau"));
  sd.rho = std::stod(un.get("rho"));
  const auto a = read_matrix(ws.path(files::matrix("prior")));
  const std::size_t rows = sc == "iv" ? a.rows - sd.data.k : a.rows;
  if (sd.data.size() != rows || sd.eta.size() != rows || sd.delta.size() != rows || a.cols != cfg.n * cfg.n)
    throw std::invalid_argument("reconstruct: inconsistent shapes between matrix, data and config");

  const auto rec = reconstruct(method, a, sd, cfg);
  const GaussianBasis basis(cfg.n, cfg.extent);
  const auto image = image_on_nodes(basis, rec.coefficients);
  const auto truth = read_cstb(ws.path(files::truth_nodes));
  const auto metrics = compute_metrics(image, truth.data, cfg.n, cfg.n);

  write_vector(ws.path(stem + "_coefficients.cstb"), rec.coefficients);
  write_cstb(ws.path(stem + ".cstb"), {static_cast<std::uint32_t>(cfg.n), static_cast<std::uint32_t>(cfg.n)}, image);
  {
    std::ofstream os(ws.path(stem + ".trace"), std::ios::trunc);
    os << rec.trace;
  }
  {
    std::ofstream os(ws.path(stem + ".csv"), std::ios::trunc);
    os << metrics_csv_header() << '\n' << csv_row(sc, method, metrics) << '\n';
  }
  m.set("iterations", std::to_string(rec.iterations));
  for (const auto& f : {stem + "_coefficients.cstb", stem + ".cstb", stem + ".trace", stem + ".csv"}) ws.output(m, f);
  ws.close(m, "reconstruct_" + sc + "_" + method);
}

/// Recomputes metrics for every reconstruction present in the workspace and
/// writes them, in scenario/method order, to metrics.csv.
inline std::vector<std::string> cmd_metrics(const Workspace& ws) {
  const RunConfig& cfg = ws.config();
  const auto truth = read_cstb(ws.path(files::truth_nodes));
  check_upstream(ws.upstream("phantom"), files::truth_nodes, ws.path(files::truth_nodes));
  std::vector<std::string> rows;
  for (const auto& sc : scenario_names)
    for (const auto& method : method_names) {
      const auto file = ws.path(files::stem(sc, method) + ".cstb");
      if (!fs::exists(file)) continue;
      const auto img = read_cstb(file);
      if (img.dims != truth.dims) throw std::invalid_argument("metrics: image shape differs from the ground truth");
      rows.push_back(csv_row(sc, method, compute_metrics(img.data, truth.data, cfg.n, cfg.n)));
    }
  std::ofstream os(ws.path(files::metrics), std::ios::trunc);
  os << metrics_csv_header() << '\n';
  for (const auto& r : rows) os << r << '\n';
  return rows;
}

}  // namespace cst
