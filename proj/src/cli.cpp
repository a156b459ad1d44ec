#include "qgraph/cli.hpp"

#include "qgraph/eigenphase.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/spectrum.hpp"
#include "qgraph/statistics.hpp"
#include "qgraph/torus.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace qgraph {

using nlohmann::json;

namespace {

const std::vector<std::string> kCommands{"spectrum", "phases", "spacings", "moments", "equivalence", "proposition", "check"};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string joined(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : " ") + p;
  return s;
}

json config_json(const ExperimentConfig& c) {
  return {{"command", c.command},
          {"graph", c.graph.string()},
          {"lambda_max", c.lambda_max},
          {"capital_lambda", c.capital_lambda},
          {"epsilons", c.epsilons},
          {"deltas", c.deltas},
          {"direction", c.direction},
          {"moment", c.moment},
          {"spacing_order", c.spacing_order},
          {"samples", c.samples},
          {"crossings", c.crossings},
          {"starts", c.starts},
          {"bond", c.bond},
          {"seed", c.seed},
          {"step", c.step},
          {"h", c.h},
          {"workers", c.workers},
          {"argv", c.argv}};
}

// Collects artifacts of one run; deletes them unless commit() is reached.
class Artifacts {
 public:
  Artifacts(const ExperimentConfig& config, std::string stamp) : config_(config), stamp_(std::move(stamp)) {
    std::filesystem::create_directories(config.out);
  }
  Artifacts(const Artifacts&) = delete;
  Artifacts& operator=(const Artifacts&) = delete;
  ~Artifacts() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) std::filesystem::remove(p, ec);
  }

  // Path for `name` in the output directory, registered for cleanup.
  std::filesystem::path csv(const std::string& name) {
    auto p = config_.out / name;
    written_.push_back(p);
    return p;
  }

  // The single timestamped line every CSV starts with.
  std::string header() const {
    std::ostringstream h;
    h << "# qgraph " << QGRAPH_VERSION << " " << stamp_ << " seed=" << config_.seed << " argv=\"" << joined(config_.argv)
      << "\"";
    return h.str();
  }

  json& meta() { return meta_; }

  void commit() {
    meta_["library_version"] = QGRAPH_VERSION;
    meta_["timestamp"] = stamp_;
    meta_["config"] = config_json(config_);
    json files = json::array();
    for (const auto& p : written_) files.push_back(p.filename().string());
    meta_["files"] = files;
    const auto path = config_.out / (config_.command + ".meta.json");
    written_.push_back(path);
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << meta_.dump(2) << '\n';
    committed_ = true;
  }

 private:
  const ExperimentConfig& config_;
  std::string stamp_;
  std::vector<std::filesystem::path> written_;
  json meta_ = json::object();
  bool committed_ = false;
};

json stat_json(const StatResult& r) {
  return {{"estimate", r.estimate}, {"stderr", r.stderr_}, {"samples", r.samples}, {"diagnostic", r.diagnostic},
          {"note", r.note}};
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

int run_check(const ExperimentConfig& c, const GraphSpec& spec, Artifacts& art, std::ostream& out) {
  const auto& g = spec.graph;
  const auto report = validate_unitary(g, spec.s0.matrix());
  out << "graph: " << g.num_vertices() << " vertices, B = " << g.num_bonds() << ", dim = " << g.dim() << '\n';
  out << "conditions: " << spec.conditions << '\n';
  out << "unitarity deviation: " << report.max_deviation << " (tol " << report.tolerance << ")\n";
  out << "mask violations: " << report.mask_violations.size() << '\n';
  out << "unitary " << (report.passed ? "OK" : "FAILED") << '\n';
  json warnings = json::array();
  for (const auto& w : g.warnings()) {
    out << "warning: " << w << '\n';
    warnings.push_back(w);
  }
  if (g.num_bonds() > 1) {
    if (const auto rel = find_integer_relation(g.lengths())) {
      std::ostringstream w;
      w << "lengths look rationally dependent: coefficients (";
      for (std::size_t k = 0; k < rel->size(); ++k) w << (k ? "," : "") << (*rel)[k];
      w << ") give sum k_b L_b = 0; the flow is not equidistributed";
      out << "warning: " << w.str() << '\n';
      warnings.push_back(w.str());
    }
  }
  art.meta()["unitarity"] = {{"max_deviation", report.max_deviation},
                             {"mask_violations", report.mask_violations.size()},
                             {"passed", report.passed}};
  art.meta()["warnings"] = warnings;
  art.meta()["fingerprint"] = graph_fingerprint(g, spec.s0);
  (void)c;
  return report.passed ? 0 : 2;
}

int run_spectrum(const ExperimentConfig& c, const GraphSpec& spec, Artifacts& art, std::ostream& out) {
  require(c.lambda_max > 0.0, "spectrum: --lambda-max is required");
  const auto& g = spec.graph;
  SolveOptions options;
  options.workers = c.workers;
  const auto sp = solve_spectrum(g, spec.s0, c.lambda_max, options);
  write_spectrum_csv(sp, art.csv("spectrum.csv"), art.header());
  if (sp.size() > 0) write_eigenvector_csv(sp, art.csv("eigenvectors.csv"), art.header());
  out << "eigenvalues: " << sp.size() << " in (0, " << c.lambda_max << "], " << sp.levels().size() << " levels\n";
  art.meta()["fingerprint"] = sp.fingerprint();
  art.meta()["count"] = sp.size();
  if (sp.size() == 0) return 0;

  const auto w = weyl_check(sp, g);
  out << "Weyl: N = " << w.count << ", L Lambda / pi = " << w.weyl_count << ", ratio = " << w.ratio
      << ", remainder = " << w.remainder << '\n';
  art.meta()["weyl"] = {{"count", w.count}, {"weyl_count", w.weyl_count}, {"ratio", w.ratio}, {"remainder", w.remainder}};

  if (c.lambda_max > 2.0 * M_PI / g.min_length()) {
    const auto wb = window_count_bounds(sp, g, 1000, c.seed);
    out << "windows: min count in 2pi/L_min windows = " << wb.min_long_count
        << ", max count in 2pi/L_max windows = " << wb.max_short_count << ", violations = "
        << wb.long_violations + wb.short_violations << '\n';
    art.meta()["windows"] = {{"trials", wb.trials},
                             {"min_long_count", wb.min_long_count},
                             {"max_short_count", wb.max_short_count},
                             {"long_violations", wb.long_violations},
                             {"short_violations", wb.short_violations},
                             {"passed", wb.passed}};
    if (!wb.passed) {
      out << "window count bounds violated\n";
      return 3;
    }
  }
  return 0;
}

int run_phases(const ExperimentConfig& c, const GraphSpec& spec, Artifacts& art, std::ostream& out) {
  require(c.lambda_max > 0.0, "phases: --lambda-max is required");
  TrackOptions options;
  options.step = c.step;
  const auto track = track_branches(spec.graph, spec.s0, 0.0, c.lambda_max, options);
  write_branch_csv(track, art.csv("branches.csv"), art.header());
  out << "tracked " << spec.graph.dim() << " branches over " << track.lambdas.size() << " nodes\n";
  art.meta()["nodes"] = track.lambdas.size();
  return 0;
}

int run_spacings(const ExperimentConfig& c, const GraphSpec& spec, Artifacts& art, std::ostream& out) {
  require(c.capital_lambda > 0.0, "spacings: --capital-lambda is required");
  const auto& g = spec.graph;
  const auto h = parse_test_function(c.h);
  h.probe();
  SolveOptions options;
  options.compute_vectors = false;
  options.workers = c.workers;
  const auto sp = solve_spectrum(g, spec.s0, c.capital_lambda, options);
  const auto pl = lambda_spacing_functional(sp, g, h, c.spacing_order);
  const auto pt = theta_spacing_functional(g, spec.s0, h, c.capital_lambda, c.step, c.workers);

  {
    std::ofstream csv(art.csv("spacings.csv"));
    csv << art.header() << '\n' << "name,estimate,stderr,diagnostic,params\n";
    const std::string params = "\"h=" + h.name() + ";r=" + std::to_string(c.spacing_order) + "\"";
    csv << "P_lambda," << num(pl.estimate) << ',' << num(pl.stderr_) << ',' << num(pl.diagnostic) << ',' << params << '\n';
    csv << "P_theta," << num(pt.estimate) << ',' << num(pt.stderr_) << ',' << num(pt.diagnostic) << ',' << params << '\n';
  }
  // spacings normalised to unit mean for plotting
  const double bins_hi = 4.0 * M_PI / static_cast<double>(g.num_bonds());
  write_histogram_csv(histogram(normalized_spacings(sp, g, c.spacing_order), 80, 0.0, bins_hi * c.spacing_order),
                      art.csv("lambda_spacings_hist.csv"), art.header());
  write_histogram_csv(histogram(theta_spacing_samples(g, spec.s0, c.capital_lambda, c.step), 80, 0.0, bins_hi),
                      art.csv("theta_spacings_hist.csv"), art.header());

  out << "P_lambda[h] = " << pl.estimate << " +- " << pl.stderr_ << " (N = " << sp.size() << ")\n";
  out << "P_theta[h]  = " << pt.estimate << " +- " << pt.stderr_ << " (step check " << pt.diagnostic << ")\n";
  art.meta()["p_lambda"] = stat_json(pl);
  art.meta()["p_theta"] = stat_json(pt);
  art.meta()["fingerprint"] = sp.fingerprint();
  return 0;
}

int run_moments(const ExperimentConfig& c, const GraphSpec& spec, Artifacts& art, std::ostream& out) {
  require(c.capital_lambda > 0.0, "moments: --capital-lambda is required");
  require(c.moment >= 0, "moments: --moment must be >= 0");
  const auto& g = spec.graph;
  require(c.bond >= 1 && c.bond <= g.num_bonds(), "moments: --bond out of range");
  const auto a = bond_projector(g, c.bond - 1);
  std::vector<int> ms;
  for (int m = 0; m <= c.moment; ++m) ms.push_back(m);

  SolveOptions options;
  options.workers = c.workers;
  const auto sp = solve_spectrum(g, spec.s0, c.capital_lambda, options);
  const auto lam = evec_moment_lambda_average(g, spec.s0, a, ms, c.capital_lambda, c.step, c.workers);
  const auto ens = evec_moment_ensemble(g, spec.s0, a, ms, c.samples, c.seed, c.workers);

  std::ofstream csv(art.csv("moments.csv"));
  csv << art.header() << '\n'
      << "m,spectral,spectral_stderr,lambda_average,lambda_stderr,ensemble,ensemble_stderr,max_sigma\n";
  json rows = json::array();
  out << "A = projector onto bond " << c.bond << ", N = " << sp.size() << ", Lambda = " << c.capital_lambda
      << ", samples = " << c.samples << '\n';
  out << "m  spectral            lambda-average      ensemble            max sigma\n";
  for (std::size_t k = 0; k < ms.size(); ++k) {
    const auto spec_r = evec_moment_spectral(sp, g, a, ms[k]);
    const double worst = std::max({sigma_distance(spec_r, lam[k]), sigma_distance(spec_r, ens[k]),
                                   sigma_distance(lam[k], ens[k])});
    csv << ms[k] << ',' << num(spec_r.estimate) << ',' << num(spec_r.stderr_) << ',' << num(lam[k].estimate) << ','
        << num(lam[k].stderr_) << ',' << num(ens[k].estimate) << ',' << num(ens[k].stderr_) << ',' << num(worst) << '\n';
    out << ms[k] << "  " << std::setw(18) << spec_r.estimate << "  " << std::setw(18) << lam[k].estimate << "  "
        << std::setw(18) << ens[k].estimate << "  " << worst << '\n';
    rows.push_back({{"m", ms[k]}, {"spectral", stat_json(spec_r)}, {"lambda_average", stat_json(lam[k])},
                    {"ensemble", stat_json(ens[k])}, {"max_sigma", worst}});
  }
  art.meta()["moments"] = rows;
  art.meta()["fingerprint"] = sp.fingerprint();
  return 0;
}

int run_equivalence(const ExperimentConfig& c, const GraphSpec& spec, Artifacts& art, std::ostream& out) {
  require(c.capital_lambda > 0.0, "equivalence: --capital-lambda is required");
  const auto& g = spec.graph;
  const auto h = parse_test_function(c.h);
  h.probe();
  const auto b = static_cast<Eigen::Index>(g.num_bonds());
  RVector u(b);
  if (c.direction.empty()) {
    for (Eigen::Index k = 0; k < b; ++k) u[k] = (static_cast<double>(k) - 0.5 * static_cast<double>(b - 1)) / static_cast<double>(b);
  } else {
    require(static_cast<Eigen::Index>(c.direction.size()) == b, "equivalence: --direction needs one entry per bond");
    for (Eigen::Index k = 0; k < b; ++k) u[k] = c.direction[static_cast<std::size_t>(k)];
  }
  const double l0 = g.mean_length();
  const auto n = static_cast<std::size_t>(std::llround(g.total_length() * c.capital_lambda / M_PI));
  const auto rows = spacing_equivalence_study(g, l0, u, c.deltas, h, n, c.step, c.workers);

  std::ofstream csv(art.csv("equivalence.csv"));
  csv << art.header() << '\n' << "delta,p_lambda,p_lambda_stderr,p_theta,p_theta_stderr,difference,difference_stderr\n";
  json jrows = json::array();
  out << "l0 = " << l0 << ", N = " << n << ", h = " << h.name() << '\n';
  out << "delta      P_lambda            P_theta             |difference|\n";
  for (const auto& r : rows) {
    csv << num(r.delta) << ',' << num(r.p_lambda.estimate) << ',' << num(r.p_lambda.stderr_) << ','
        << num(r.p_theta.estimate) << ',' << num(r.p_theta.stderr_) << ',' << num(r.difference) << ','
        << num(r.stderr_) << '\n';
    out << std::setw(9) << r.delta << "  " << std::setw(18) << r.p_lambda.estimate << "  " << std::setw(18)
        << r.p_theta.estimate << "  " << r.difference << '\n';
    jrows.push_back({{"delta", r.delta}, {"p_lambda", stat_json(r.p_lambda)}, {"p_theta", stat_json(r.p_theta)},
                     {"difference", r.difference}});
  }
  art.meta()["rows"] = jrows;
  return 0;
}

int run_proposition(const ExperimentConfig& c, const GraphSpec& spec, Artifacts& art, std::ostream& out) {
  const auto& g = spec.graph;
  const auto h = parse_test_function(c.h);
  h.probe();
  const std::vector<SurfaceFunction> phis{surface_one(g), surface_first_spacing(g), surface_phi_d(g, h)};
  const auto starts = random_torus_points(c.starts, g.num_bonds(), c.seed);
  const auto report =
      proposition_residual(phis, g, spec.s0, starts, c.epsilons, c.crossings, c.samples, c.seed, c.workers);
  write_proposition_csv(report, art.csv("proposition.csv"), art.header());

  json summary = json::array();
  for (std::size_t f = 0; f < phis.size(); ++f) {
    double worst = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      for (std::size_t j = 0; j < c.epsilons.size(); ++j) worst = std::max(worst, report.residual(f, i, j));
    }
    out << std::left << std::setw(28) << report.functions[f] << std::right << " max |ergodic - thickened| = " << worst
        << '\n';
    summary.push_back({{"function", report.functions[f]}, {"max_residual", worst}});
  }
  art.meta()["residuals"] = summary;
  return 0;
}

}  // namespace

ExperimentConfig parse_args(const std::vector<std::string>& args, std::string* help) {
  ExperimentConfig c;
  c.argv = args;
  CLI::App app{"Spectra and spectral statistics of quantum graphs", "qgraph"};
  // "--h" names the test function, so help is long-form only
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QGRAPH_VERSION));

  const auto positive = CLI::PositiveNumber;
  auto add_graph = [&](CLI::App* s) { s->add_option("--graph", c.graph, "Graph spec (JSON)")->required(); };
  auto add_out = [&](CLI::App* s) { s->add_option("--out", c.out, "Output directory"); };
  auto add_workers = [&](CLI::App* s) {
    s->add_option("--workers", c.workers, "Worker threads")->check(CLI::Range(1u, 1024u));
  };
  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", c.seed, "Random seed"); };
  auto add_step = [&](CLI::App* s) { s->add_option("--step", c.step, "Quadrature or tracking step (0 = default)")->check(CLI::NonNegativeNumber); };
  auto add_h = [&](CLI::App* s) { s->add_option("--h", c.h, "Test function name:key=val,..."); };

  auto* spectrum = app.add_subcommand("spectrum", "Lambda-spectrum CSV and Weyl report");
  add_graph(spectrum);
  spectrum->add_option("--lambda-max", c.lambda_max, "Upper end of the spectrum")->required()->check(positive);
  add_seed(spectrum);
  add_out(spectrum);
  add_workers(spectrum);

  auto* phases = app.add_subcommand("phases", "Eigenphase branch track over [0, lambda-max]");
  add_graph(phases);
  phases->add_option("--lambda-max", c.lambda_max, "End of the track")->required()->check(positive);
  add_step(phases);
  add_out(phases);

  auto* spacings = app.add_subcommand("spacings", "P_lambda[h], P_theta[h] and spacing histograms");
  add_graph(spacings);
  spacings->add_option("--capital-lambda", c.capital_lambda, "Spectral cut-off Lambda")->required()->check(positive);
  spacings->add_option("--spacing-order", c.spacing_order, "Order r of the lambda spacings")->check(CLI::Range(1, 1000000));
  add_h(spacings);
  add_step(spacings);
  add_out(spacings);
  add_workers(spacings);

  auto* moments = app.add_subcommand("moments", "Three eigenvector moment averages for m = 0..M");
  add_graph(moments);
  moments->add_option("--capital-lambda", c.capital_lambda, "Spectral cut-off Lambda")->required()->check(positive);
  moments->add_option("--moment", c.moment, "Largest moment M")->check(CLI::Range(0, 64));
  moments->add_option("--samples", c.samples, "Ensemble samples")->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 40));
  moments->add_option("--bond", c.bond, "Observable: projector onto this bond (1-based)")->check(positive);
  add_seed(moments);
  add_step(moments);
  add_out(moments);
  add_workers(moments);

  auto* equivalence = app.add_subcommand("equivalence", "Spacing functionals along lengths l0 + delta u");
  add_graph(equivalence);
  equivalence->add_option("--capital-lambda", c.capital_lambda, "Cut-off Lambda at base lengths")->required()->check(positive);
  equivalence->add_option("--deltas", c.deltas, "Comma separated deltas")->delimiter(',');
  equivalence->add_option("--direction", c.direction, "Comma separated direction u")->delimiter(',');
  add_h(equivalence);
  add_step(equivalence);
  add_out(equivalence);
  add_workers(equivalence);

  auto* proposition = app.add_subcommand("proposition", "Ergodic versus thickened surface averages");
  add_graph(proposition);
  proposition->add_option("--epsilons", c.epsilons, "Comma separated thickenings")->delimiter(',');
  proposition->add_option("--samples", c.samples, "Monte-Carlo samples per epsilon")->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 40));
  proposition->add_option("--crossings", c.crossings, "Crossings per start")->check(positive);
  proposition->add_option("--starts", c.starts, "Random starting points")->check(positive);
  add_h(proposition);
  add_seed(proposition);
  add_out(proposition);
  add_workers(proposition);

  auto* check = app.add_subcommand("check", "Validate graph and scattering matrix");
  add_graph(check);
  add_out(check);

  std::vector<const char*> argv{"qgraph"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    if (help) *help = app.help();
    c.command.clear();
    return c;
  } catch (const CLI::CallForVersion&) {
    if (help) *help = std::string(QGRAPH_VERSION) + "\n";
    c.command.clear();
    return c;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  for (const auto& name : kCommands) {
    if (app.got_subcommand(name)) c.command = name;
  }
  for (double e : c.epsilons) {
    if (!(e > 0.0)) throw UsageError("--epsilons must be positive");
  }
  for (double d : c.deltas) {
    if (!std::isfinite(d)) throw UsageError("--deltas must be finite");
  }
  return c;
}

int run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const auto spec = load_graph_spec(config.graph);
    Artifacts art(config, utc_timestamp());
    int code = 0;
    if (config.command == "check") code = run_check(config, spec, art, out);
    else if (config.command == "spectrum") code = run_spectrum(config, spec, art, out);
    else if (config.command == "phases") code = run_phases(config, spec, art, out);
    else if (config.command == "spacings") code = run_spacings(config, spec, art, out);
    else if (config.command == "moments") code = run_moments(config, spec, art, out);
    else if (config.command == "equivalence") code = run_equivalence(config, spec, art, out);
    else if (config.command == "proposition") code = run_proposition(config, spec, art, out);
    else throw UsageError("unknown command '" + config.command + "'");
    art.meta()["exit_code"] = code;
    // a failed validation still leaves its report behind
    art.commit();
    return code;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    err << config.command << ": validation failed: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << config.command << ": numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    err << config.command << ": " << e.what() << '\n';
    return 2;
  }
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  ExperimentConfig config;
  std::string help;
  try {
    config = parse_args(args, &help);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nrun 'qgraph --help' for usage\n";
    return 1;
  }
  if (config.command.empty()) {
    std::cout << help;
    return 0;
  }
  return run(config, std::cout, std::cerr);
}

}  // namespace qgraph
