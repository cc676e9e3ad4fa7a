#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bondpf/estimation.hpp"
#include "bondpf/filter.hpp"
#include "bondpf/io.hpp"
#include "bondpf/simulator.hpp"

namespace fs = std::filesystem;
using namespace bondpf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitFilter = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
  std::optional<std::string> out;
  std::optional<std::string> levels;
  std::optional<unsigned> workers;
  std::optional<std::string> units;
  std::string summary;
};

/// Raised when the filter cannot weight an event; carries the echoed record.
struct FilterFailure {
  std::string message;
};

fs::path output_dir(const CommonFlags& flags, const std::optional<fs::path>& configured) {
  if (flags.out) return *flags.out;
  if (configured) return *configured;
  if (const char* env = std::getenv("BONDPF_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Parse, "--levels: not a number: \"" + cell + "\"");
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0 && out[i] < 1.0)) throw Error(ErrorCode::Parse, "--levels: levels must lie in (0, 1)");
    if (i > 0 && !(out[i] > out[i - 1])) throw Error(ErrorCode::Parse, "--levels: levels must be strictly increasing");
  }
  if (out.empty()) throw Error(ErrorCode::Parse, "--levels: no levels given");
  return out;
}

void cmd_simulate(const CommonFlags& flags) {
  io::SimFile f = io::load_sim_config(flags.config);
  if (flags.seed) f.sim.seed = *flags.seed;
  const ValidatedModel model = validate_params(f.model.params, f.model.universe);
  const MarketTruth truth = simulate(model, f.prior, f.sim);
  const fs::path out = output_dir(flags, f.output_dir);
  io::atomic_write(out / "events.jsonl", io::events_to_string(truth.events, f.model.universe));
  io::atomic_write(out / "truth.csv", io::truth_csv(truth, f.model));
  io::atomic_write(out / "model.json", io::model_to_json(f.model).dump(2) + '\n');
  io::atomic_write(out / "prior.json", io::prior_to_json(f.prior).dump(2) + '\n');
  io::atomic_write(out / "sim.json", io::sim_config_to_json(f.sim).dump(2) + '\n');
  if (f.sim.composite) io::atomic_write(out / "composite.csv", io::composite_to_string(truth.composite));
  std::cerr << "simulated " << truth.events.size() << " events over " << f.sim.horizon << " days into "
            << out.string() << '\n';
}

void cmd_filter(const CommonFlags& flags) {
  io::RunConfig c = io::load_run_config(flags.config);
  if (flags.seed) c.seed = *flags.seed;
  if (flags.particles) {
    if (*flags.particles < 2) throw Error(ErrorCode::Parse, "--particles: at least 2 particles are required");
    c.particles = *flags.particles;
  }
  if (flags.levels) c.levels = parse_levels(*flags.levels);
  if (flags.workers) c.options.workers = *flags.workers;
  if (flags.units) c.units = io::parse_units(*flags.units);

  const ValidatedModel model = validate_params(c.model.params, c.model.universe);
  validate_prior(c.prior, model.dim());
  const auto events = io::read_events_file(c.events, c.model.universe);
  const BondUniverse& universe = c.model.universe;

  ParticleCloud cloud = init(model, c.prior, c.particles, c.seed, c.options);
  std::string summary = io::summary_header(c.levels);
  std::string diagnostics = io::diagnostics_header();
  summary += io::summary_rows(posterior(cloud, model, c.levels), universe, c.units);

  auto advance = [&](std::size_t n) {
    try {
      diagnostics += io::diagnostics_row(step(cloud, model, events[n], c.options), events[n], universe);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllWeightsZero) throw;
      throw FilterFailure{std::string(e.what()) + "\noffending event " + std::to_string(n + 1) + ": " +
                          io::event_to_line(events[n], universe)};
    }
  };

  if (c.cadence == io::Cadence::Event) {
    for (std::size_t n = 0; n < events.size(); ++n) {
      advance(n);
      summary += io::summary_rows(posterior(cloud, model, c.levels), universe, c.units);
    }
  } else {
    const double end = c.grid_end.value_or(events.empty() ? 0.0 : events.back().time);
    std::size_t next = 0;
    for (std::size_t g = 1;; ++g) {
      const double t = static_cast<double>(g) * c.grid_step;
      if (t > end * (1.0 + 1e-12)) break;
      while (next < events.size() && events[next].time <= t) advance(next++);
      summary += io::summary_rows(predict(cloud, model, t, c.levels, c.options), universe, c.units);
    }
    while (next < events.size()) advance(next++);
  }

  const fs::path out = output_dir(flags, c.output_dir);
  io::atomic_write(out / "summary.csv", summary);
  io::atomic_write(out / "diagnostics.csv", diagnostics);
  if (c.trajectory_paths > 0)
    io::atomic_write(out / "trajectories.csv",
                     io::trajectories_csv(trajectories(cloud, model), universe, c.trajectory_paths, c.units));
  std::cerr << "filtered " << events.size() << " events with " << c.particles << " particles into "
            << out.string() << '\n';
}

void cmd_estimate(const CommonFlags& flags) {
  const io::EstimateConfig c = io::load_estimate_config(flags.config);
  const CompositeSeries series = io::read_composite_file(c.composite);
  const bool has_spread = io::composite_has_spread_column(c.composite);
  const double fraction = c.sigma_eps_fraction.value_or(0.05);
  const bool needs_spread = fraction > 0.0 || c.spread_fit.mode == SpreadFitMode::Composite;
  if (needs_spread && !has_spread)
    throw Error(ErrorCode::MissingSpreads,
                c.composite.string() + ": column \"spread\" is required for spread-based calibration");

  const VolatilityEstimate vol = estimate_sigma_rho(series, c.sampling_interval);
  BondUniverse universe{series.labels};
  SpreadProxySample proxies;
  if (c.trades) proxies = spread_proxies(series, io::read_trades_file(*c.trades, universe));
  const auto fits = fit_spread_lognormal(proxies, has_spread ? &series : nullptr, c.spread_fit);

  io::ModelFile m;
  m.universe = universe;
  const auto d = static_cast<Eigen::Index>(series.size());
  m.params.sigma = vol.sigma;
  m.params.rho = vol.rho;
  m.params.psi_scale = Vector::Ones(d);
  m.params.sigma_eps = fraction > 0.0 ? derive_sigma_eps(series, fraction) : Vector::Zero(d);
  if (c.ou_rates) {
    const Vector a = c.ou_rates->size() == 1 ? Vector::Constant(d, (*c.ou_rates)[0]) : *c.ou_rates;
    m.params.spread = ou_from_stationary(fits, a);
  } else {
    IidSpread iid{Vector(d), Vector(d)};
    for (Eigen::Index i = 0; i < d; ++i) {
      iid.mean[i] = fits[static_cast<std::size_t>(i)].mean_x;
      iid.var[i] = fits[static_cast<std::size_t>(i)].var_x;
    }
    m.params.spread = iid;
  }
  validate_params(m.params, m.universe);

  const fs::path out = output_dir(flags, c.output_dir);
  io::atomic_write(out / "model.json", io::model_to_json(m).dump(2) + '\n');
  if (vol.repaired) std::cerr << "correlation matrix was not PSD and has been repaired\n";
  for (std::size_t i = 0; i < fits.size(); ++i)
    if (fits[i].used_fallback)
      std::cerr << series.labels[i] << ": too few spread proxies, used composite targets\n";
  std::cerr << "estimated " << series.size() << " bonds into " << (out / "model.json").string() << '\n';
}

/// Envelope table from a summary file: median plus paired central bands.
void cmd_report(const CommonFlags& flags) {
  std::ifstream in(flags.summary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + flags.summary);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, flags.summary + ": empty file");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const std::vector<std::pair<std::string, std::string>> bands = {
      {"q0.25", "q0.75"}, {"q0.1", "q0.9"}, {"q0.05", "q0.95"}, {"q0.01", "q0.99"}};
  for (const char* need : {"t", "bond", "quantity", "units", "q0.5"})
    if (!col.contains(need)) throw Error(ErrorCode::Parse, flags.summary + ": missing column " + need);
  for (const auto& [lo, hi] : bands)
    if (!col.contains(lo) || !col.contains(hi))
      throw Error(ErrorCode::Parse, flags.summary + ": missing column " + lo + " or " + hi);

  std::optional<io::Units> target;
  if (flags.units) target = io::parse_units(*flags.units);
  std::string out = "t,bond,quantity,units,median,lo25,hi75,lo10,hi90,lo5,hi95,lo1,hi99\n";
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::Parse, flags.summary + " line " + std::to_string(line_no) + ": wrong field count");
    const io::Units from = io::parse_units(cells[col["units"]]);
    const io::Units to = target.value_or(from);
    auto convert = [&](const std::string& cell) {
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Parse, flags.summary + " line " + std::to_string(line_no) + ": bad number");
      }
      const double bp = from == io::Units::Bp ? v : v * 100.0;
      return io::fmt6(io::to_units(bp, to));
    };
    out += cells[col["t"]] + ',' + cells[col["bond"]] + ',' + cells[col["quantity"]] + ',' + io::units_name(to);
    out += ',' + convert(cells[col["q0.5"]]);
    for (const auto& [lo, hi] : bands) out += ',' + convert(cells[col[lo]]) + ',' + convert(cells[col[hi]]);
    out += '\n';
  }
  const fs::path dir = output_dir(flags, std::nullopt);
  io::atomic_write(dir / "envelope.csv", out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-filter mid-YtB and bid-ask spread estimation for bonds"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto add_common = [&](CLI::App* sub, bool filter_flags) {
    sub->add_option("--out", flags.out, "Output directory (default: $BONDPF_OUT_DIR or .)");
    if (!filter_flags) return;
    sub->add_option("--seed", flags.seed, "Random seed override");
  };

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic market and event stream");
  sim->add_option("--config", flags.config, "Simulation config (JSON)")->required();
  add_common(sim, true);

  auto* filt = app.add_subcommand("filter", "Run the particle filter over an event stream");
  filt->add_option("--config", flags.config, "Run config (JSON)")->required();
  add_common(filt, true);
  filt->add_option("--particles", flags.particles, "Number of particles K");
  filt->add_option("--levels", flags.levels, "Comma-separated quantile levels");
  filt->add_option("--workers", flags.workers, "Worker threads (results do not depend on this)");
  filt->add_option("--units", flags.units, "Output units: bp or pct");

  auto* est = app.add_subcommand("estimate", "Calibrate model parameters from composite data");
  est->add_option("--config", flags.config, "Estimation config (JSON)")->required();
  add_common(est, false);

  auto* rep = app.add_subcommand("report", "Build a quantile-envelope table from a summary file");
  rep->add_option("--summary", flags.summary, "summary.csv written by filter")->required();
  add_common(rep, false);
  rep->add_option("--units", flags.units, "Output units: bp or pct");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*sim) cmd_simulate(flags);
    if (*filt) cmd_filter(flags);
    if (*est) cmd_estimate(flags);
    if (*rep) cmd_report(flags);
  } catch (const FilterFailure& f) {
    std::cerr << "error: " << f.message << '\n';
    return kExitFilter;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& v : e.violations()) std::cerr << "  " << v.field << ": " << v.message << '\n';
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFilter;
  }
  return kExitOk;
}
