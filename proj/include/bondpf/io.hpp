#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bondpf/estimation.hpp"
#include "bondpf/filter.hpp"
#include "bondpf/model.hpp"
#include "bondpf/simulator.hpp"

namespace bondpf::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Units { Bp, Pct };

Units parse_units(const std::string& s);
std::string units_name(Units u);
/// Converts a bp quantity for output.
double to_units(double bp, Units u) noexcept;

struct ModelFile {
  BondUniverse universe;
  ModelParams params;
};

// Structured documents. Unknown keys and a missing or wrong schema_version
// are rejected with Error(Parse).
json model_to_json(const ModelFile& model);
ModelFile model_from_json(const json& j);
json prior_to_json(const Prior& prior);
Prior prior_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);

// Event stream: one JSON object per line,
// {"t": .., "bond": label-or-index, "kind": client_buy|client_sell|away_buy|away_sell|d2d, "Y"|"Z": .., "alpha": ..}.
std::string event_to_line(const ObservationEvent& e, const BondUniverse& universe);
/// Throws Error(Parse) with a "line N" prefix.
ObservationEvent event_from_line(const std::string& line, const BondUniverse& universe, std::size_t line_no);
std::vector<ObservationEvent> read_events(std::istream& in, const BondUniverse& universe);
std::vector<ObservationEvent> read_events_file(const std::filesystem::path& path, const BondUniverse& universe);
std::string events_to_string(const std::vector<ObservationEvent>& events, const BondUniverse& universe);

// Composite series CSV: header t,bond,mid[,spread]; an empty spread cell is missing.
CompositeSeries read_composite(std::istream& in);
CompositeSeries read_composite_file(const std::filesystem::path& path);
std::string composite_to_string(const CompositeSeries& series);
/// True if the composite CSV text had a spread column.
bool composite_has_spread_column(const std::filesystem::path& path);

// Trades CSV: header t,bond,ytb.
std::vector<TradePrint> read_trades_file(const std::filesystem::path& path, const BondUniverse& universe);

/// Fixed-column summary table:
/// t,bond,quantity,units,mean,std,q<level>... with 6 significant digits.
std::string summary_header(const std::vector<double>& levels);
std::string summary_rows(const PosteriorSummary& s, const BondUniverse& universe, Units units);
std::string diagnostics_header();
std::string diagnostics_row(const FilterDiagnostics& d, const ObservationEvent& e, const BondUniverse& universe);
std::string trajectories_csv(const Trajectories& tr, const BondUniverse& universe, std::size_t max_paths,
                             Units units);
std::string truth_csv(const MarketTruth& truth, const ModelFile& model);

/// Writes via a temporary file in the same directory and renames it into place.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Formats with 6 significant digits.
std::string fmt6(double v);
/// Formats with round-trip precision.
std::string fmt17(double v);

// Run configurations. Relative paths resolve against the config file's directory.

enum class Cadence { Event, Grid };

struct RunConfig {
  ModelFile model;
  Prior prior;
  std::filesystem::path events;
  std::size_t particles = 10000;
  std::uint64_t seed = 0;
  std::vector<double> levels = default_levels();
  std::optional<std::filesystem::path> output_dir;
  Cadence cadence = Cadence::Event;
  double grid_step = 0.0;
  std::optional<double> grid_end;
  Units units = Units::Bp;
  std::size_t trajectory_paths = 0;
  FilterOptions options;
};

struct SimFile {
  ModelFile model;
  Prior prior;
  SimConfig sim;
  std::optional<std::filesystem::path> output_dir;
};

struct EstimateConfig {
  std::filesystem::path composite;
  std::optional<std::filesystem::path> trades;
  double sampling_interval = 1.0;
  SpreadFitOptions spread_fit;
  std::optional<double> sigma_eps_fraction;
  std::optional<Vector> ou_rates;  // set to emit an OU spread law instead of IID
  std::optional<std::filesystem::path> output_dir;
};

RunConfig load_run_config(const std::filesystem::path& path);
SimFile load_sim_config(const std::filesystem::path& path);
EstimateConfig load_estimate_config(const std::filesystem::path& path);

json sim_config_to_json(const SimConfig& cfg);

}  // namespace bondpf::io
