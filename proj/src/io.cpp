#include "bondpf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <unistd.h>

namespace bondpf::io {

namespace fs = std::filesystem;

namespace {

using ordered = nlohmann::ordered_json;

[[noreturn]] void parse_fail(const std::string& where, const std::string& message) {
  throw Error(ErrorCode::Parse, where + ": " + message);
}

void check_object(const json& j, const std::string& where, std::initializer_list<const char*> allowed,
                  bool versioned) {
  if (!j.is_object()) parse_fail(where, "expected an object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  if (versioned) keys.insert("schema_version");
  for (const auto& [key, value] : j.items())
    if (!keys.contains(key)) parse_fail(where, "unknown key \"" + key + "\"");
  if (!versioned) return;
  if (!j.contains("schema_version")) parse_fail(where, "missing schema_version");
  const json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
    parse_fail(where, "unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
}

const json& require(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) parse_fail(where, std::string("missing key \"") + key + "\"");
  return j.at(key);
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) parse_fail(where, "expected a number");
  return j.get<double>();
}

std::uint64_t as_count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0))
    parse_fail(where, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) parse_fail(where, "expected a string");
  return j.get<std::string>();
}

Vector as_vector(const json& j, const std::string& where) {
  if (!j.is_array()) parse_fail(where, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_number(j[i], where);
  return v;
}

/// A scalar broadcasts to every bond.
Vector as_vector_or_scalar(const json& j, const std::string& where, std::size_t d) {
  if (j.is_number()) return Vector::Constant(static_cast<Eigen::Index>(d), j.get<double>());
  return as_vector(j, where);
}

Matrix as_matrix(const json& j, const std::string& where) {
  if (!j.is_array()) parse_fail(where, "expected an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : (j[0].is_array() ? j[0].size() : 0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) parse_fail(where, "rows must be arrays of equal length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_number(j[r][c], where);
  }
  return m;
}

ordered vector_json(const Vector& v) {
  ordered out = ordered::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ordered matrix_json(const Matrix& m) {
  ordered out = ordered::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered row = ordered::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

ModelFile parse_model(const json& j, const std::string& where, bool versioned) {
  check_object(j, where, {"bonds", "sigma", "rho", "psi_scale", "sigma_eps", "spread"}, versioned);
  ModelFile m;
  const json& bonds = require(j, where, "bonds");
  if (!bonds.is_array()) parse_fail(where + ".bonds", "expected an array of labels");
  for (const auto& b : bonds) m.universe.labels.push_back(as_string(b, where + ".bonds"));
  const std::size_t d = m.universe.size();
  m.params.sigma = as_vector(require(j, where, "sigma"), where + ".sigma");
  m.params.rho = as_matrix(require(j, where, "rho"), where + ".rho");
  m.params.psi_scale = j.contains("psi_scale") ? as_vector_or_scalar(j.at("psi_scale"), where + ".psi_scale", d)
                                               : Vector::Ones(static_cast<Eigen::Index>(d));
  m.params.sigma_eps = as_vector_or_scalar(require(j, where, "sigma_eps"), where + ".sigma_eps", d);
  const json& spread = require(j, where, "spread");
  const std::string sw = where + ".spread";
  if (!spread.is_object()) parse_fail(sw, "expected an object");
  const std::string mode = as_string(require(spread, sw, "mode"), sw + ".mode");
  if (mode == "iid") {
    check_object(spread, sw, {"mode", "mean", "var"}, false);
    m.params.spread = IidSpread{as_vector_or_scalar(require(spread, sw, "mean"), sw + ".mean", d),
                                as_vector_or_scalar(require(spread, sw, "var"), sw + ".var", d)};
  } else if (mode == "ou") {
    check_object(spread, sw, {"mode", "a", "vvt"}, false);
    m.params.spread = OuSpread{as_vector_or_scalar(require(spread, sw, "a"), sw + ".a", d),
                               as_matrix(require(spread, sw, "vvt"), sw + ".vvt")};
  } else {
    parse_fail(sw + ".mode", "expected \"iid\" or \"ou\"");
  }
  return m;
}

Prior parse_prior(const json& j, const std::string& where, bool versioned) {
  check_object(j, where, {"mean_y", "cov_y", "mean_x", "cov_x"}, versioned);
  return Prior{as_vector(require(j, where, "mean_y"), where + ".mean_y"),
               as_matrix(require(j, where, "cov_y"), where + ".cov_y"),
               as_vector(require(j, where, "mean_x"), where + ".mean_x"),
               as_matrix(require(j, where, "cov_x"), where + ".cov_x")};
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() ? p : base / p; }

fs::path as_path(const json& j, const std::string& where, const fs::path& base) {
  return resolve(base, as_string(j, where));
}

/// A model or prior given as a path to its own document or inline. Inline
/// objects may omit schema_version.
template <typename T, typename Parse>
T document(const json& j, const std::string& where, const fs::path& base, Parse parse) {
  if (j.is_string()) {
    const fs::path p = resolve(base, j.get<std::string>());
    return parse(read_json_file(p), p.string(), true);
  }
  return parse(j, where, j.is_object() && j.contains("schema_version"));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    parse_fail(where, "not a number: \"" + s + "\"");
  }
  if (used != s.size()) parse_fail(where, "not a number: \"" + s + "\"");
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? header.size() : static_cast<std::size_t>(it - header.begin());
  }
};

CsvTable read_csv(std::istream& in, const std::string& where) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      parse_fail(where + " line " + std::to_string(line_no),
                 "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) parse_fail(where, "missing header line");
  return t;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

std::string level_name(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%g", p);
  return buf;
}

void append_stats(std::string& out, const QuantityStats& s, Units u) {
  out += ',' + fmt6(to_units(s.mean, u));
  out += ',' + fmt6(to_units(s.std, u));
  for (double q : s.quantiles) out += ',' + fmt6(to_units(q, u));
}

void check_levels(const std::vector<double>& levels, const std::string& where) {
  if (levels.empty()) parse_fail(where, "at least one quantile level is required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0)) parse_fail(where, "levels must lie in (0, 1)");
    if (i > 0 && !(levels[i] > levels[i - 1])) parse_fail(where, "levels must be strictly increasing");
  }
}

}  // namespace

Units parse_units(const std::string& s) {
  if (s == "bp") return Units::Bp;
  if (s == "pct" || s == "%") return Units::Pct;
  throw Error(ErrorCode::Parse, "units: expected \"bp\" or \"pct\", got \"" + s + "\"");
}

std::string units_name(Units u) { return u == Units::Bp ? "bp" : "pct"; }

double to_units(double bp, Units u) noexcept { return u == Units::Bp ? bp : bp / 100.0; }

std::string fmt6(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt17(double v) {
  if (v == 0.0) v = 0.0;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json model_to_json(const ModelFile& model) {
  const auto& p = model.params;
  ordered j;
  j["schema_version"] = kSchemaVersion;
  j["bonds"] = model.universe.labels;
  j["sigma"] = vector_json(p.sigma);
  j["rho"] = matrix_json(p.rho);
  j["psi_scale"] = vector_json(p.psi_scale);
  j["sigma_eps"] = vector_json(p.sigma_eps);
  ordered spread;
  if (const auto* ou = std::get_if<OuSpread>(&p.spread)) {
    spread["mode"] = "ou";
    spread["a"] = vector_json(ou->a);
    spread["vvt"] = matrix_json(ou->vvt);
  } else {
    const auto& iid = std::get<IidSpread>(p.spread);
    spread["mode"] = "iid";
    spread["mean"] = vector_json(iid.mean);
    spread["var"] = vector_json(iid.var);
  }
  j["spread"] = std::move(spread);
  return json::parse(j.dump());
}

ModelFile model_from_json(const json& j) { return parse_model(j, "model", true); }

json prior_to_json(const Prior& prior) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["mean_y"] = vector_json(prior.mean_y);
  j["cov_y"] = matrix_json(prior.cov_y);
  j["mean_x"] = vector_json(prior.mean_x);
  j["cov_x"] = matrix_json(prior.cov_x);
  return j;
}

Prior prior_from_json(const json& j) { return parse_prior(j, "prior", true); }

json read_json_file(const fs::path& path) {
  std::ifstream in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

std::string event_to_line(const ObservationEvent& e, const BondUniverse& universe) {
  ordered j;
  j["t"] = e.time;
  j["bond"] = e.bond < universe.size() ? ordered(universe.labels[e.bond]) : ordered(e.bond);
  j["kind"] = kind_name(e.kind);
  std::visit(
      [&j](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TradedAwayBuy> || std::is_same_v<K, TradedAwaySell>) {
          j["Z"] = k.Z;
        } else {
          j["Y"] = k.Y;
          if constexpr (std::is_same_v<K, InterDealer>) j["alpha"] = k.alpha;
        }
      },
      e.kind);
  return j.dump();
}

ObservationEvent event_from_line(const std::string& line, const BondUniverse& universe, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    parse_fail(where, std::string("malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) parse_fail(where, "expected an object");
  const std::string kind = as_string(require(j, where, "kind"), where + " kind");
  ObservationEvent e;
  e.time = as_number(require(j, where, "t"), where + " t");
  const json& bond = require(j, where, "bond");
  if (bond.is_string()) {
    e.bond = universe.find(bond.get<std::string>());
    if (e.bond >= universe.size()) parse_fail(where, "unknown bond \"" + bond.get<std::string>() + "\"");
  } else if (bond.is_number_integer()) {
    const auto idx = bond.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= universe.size())
      parse_fail(where, "bond index " + std::to_string(idx) + " out of range");
    e.bond = static_cast<std::size_t>(idx);
  } else {
    parse_fail(where, "bond must be a label or an index");
  }
  if (kind == "client_buy" || kind == "client_sell") {
    check_object(j, where, {"t", "bond", "kind", "Y"}, false);
    const double y = as_number(require(j, where, "Y"), where + " Y");
    e.kind = kind == "client_buy" ? EventKind{ClientBuy{y}} : EventKind{ClientSell{y}};
  } else if (kind == "away_buy" || kind == "away_sell") {
    check_object(j, where, {"t", "bond", "kind", "Z"}, false);
    const double z = as_number(require(j, where, "Z"), where + " Z");
    e.kind = kind == "away_buy" ? EventKind{TradedAwayBuy{z}} : EventKind{TradedAwaySell{z}};
  } else if (kind == "d2d") {
    check_object(j, where, {"t", "bond", "kind", "Y", "alpha"}, false);
    e.kind = InterDealer{as_number(require(j, where, "Y"), where + " Y"),
                         as_number(require(j, where, "alpha"), where + " alpha")};
  } else {
    parse_fail(where, "unknown kind \"" + kind + "\"");
  }
  return e;
}

std::vector<ObservationEvent> read_events(std::istream& in, const BondUniverse& universe) {
  std::vector<ObservationEvent> out;
  std::vector<std::size_t> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(event_from_line(line, universe, line_no));
    lines.push_back(line_no);
  }
  try {
    validate_events(out, universe.size());
  } catch (const Error& err) {
    // Locate the first offending record for the message.
    for (std::size_t n = 0; n < out.size(); ++n) {
      try {
        validate_events({out[n]}, universe.size());
        if (n > 0 && !(out[n].time > out[n - 1].time)) throw Error(ErrorCode::NonMonotoneTime, "time not increasing");
      } catch (const Error& inner) {
        throw Error(ErrorCode::Parse, "line " + std::to_string(lines[n]) + ": " + inner.what());
      }
    }
    throw Error(ErrorCode::Parse, err.what());
  }
  return out;
}

std::vector<ObservationEvent> read_events_file(const fs::path& path, const BondUniverse& universe) {
  std::ifstream in = open_input(path);
  try {
    return read_events(in, universe);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + " " + e.what());
  }
}

std::string events_to_string(const std::vector<ObservationEvent>& events, const BondUniverse& universe) {
  std::string out;
  for (const auto& e : events) out += event_to_line(e, universe) + '\n';
  return out;
}

CompositeSeries read_composite(std::istream& in) {
  const CsvTable t = read_csv(in, "composite");
  const std::size_t ct = t.column("t");
  const std::size_t cb = t.column("bond");
  const std::size_t cm = t.column("mid");
  const std::size_t cs = t.column("spread");
  if (ct == t.header.size() || cb == t.header.size() || cm == t.header.size())
    parse_fail("composite", "header must contain t, bond and mid");
  for (const auto& h : t.header)
    if (h != "t" && h != "bond" && h != "mid" && h != "spread") parse_fail("composite", "unknown column \"" + h + "\"");
  CompositeSeries s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = "composite line " + std::to_string(t.line_numbers[r]);
    const std::string& label = row[cb];
    if (label.empty()) parse_fail(where, "empty bond label");
    auto it = std::find(s.labels.begin(), s.labels.end(), label);
    std::size_t i = static_cast<std::size_t>(it - s.labels.begin());
    if (it == s.labels.end()) {
      s.labels.push_back(label);
      s.samples.emplace_back();
    }
    CompositeSample c{parse_double(row[ct], where), parse_double(row[cm], where), std::nullopt};
    if (cs < t.header.size() && !row[cs].empty()) c.spread = parse_double(row[cs], where);
    s.samples[i].push_back(c);
  }
  validate_series(s);
  return s;
}

CompositeSeries read_composite_file(const fs::path& path) {
  std::ifstream in = open_input(path);
  return read_composite(in);
}

bool composite_has_spread_column(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    return std::find(cells.begin(), cells.end(), "spread") != cells.end();
  }
  return false;
}

std::string composite_to_string(const CompositeSeries& series) {
  bool any_spread = false;
  for (const auto& s : series.samples)
    for (const auto& c : s) any_spread = any_spread || c.spread.has_value();
  std::string out = any_spread ? "t,bond,mid,spread\n" : "t,bond,mid\n";
  // Time-major order so the file reads like a feed.
  struct Row {
    double t;
    std::size_t bond;
    std::size_t n;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < series.size(); ++i)
    for (std::size_t n = 0; n < series.samples[i].size(); ++n) rows.push_back({series.samples[i][n].t, i, n});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  for (const Row& r : rows) {
    const auto& c = series.samples[r.bond][r.n];
    out += fmt17(c.t) + ',' + series.labels[r.bond] + ',' + fmt17(c.mid);
    if (any_spread) out += ',' + (c.spread ? fmt17(*c.spread) : std::string());
    out += '\n';
  }
  return out;
}

std::vector<TradePrint> read_trades_file(const fs::path& path, const BondUniverse& universe) {
  std::ifstream in = open_input(path);
  const CsvTable t = read_csv(in, "trades");
  const std::size_t ct = t.column("t");
  const std::size_t cb = t.column("bond");
  const std::size_t cy = t.column("ytb");
  if (ct == t.header.size() || cb == t.header.size() || cy == t.header.size() || t.header.size() != 3)
    parse_fail("trades", "header must be t,bond,ytb");
  std::vector<TradePrint> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = "trades line " + std::to_string(t.line_numbers[r]);
    const std::size_t bond = universe.find(row[cb]);
    if (bond >= universe.size()) parse_fail(where, "unknown bond \"" + row[cb] + "\"");
    out.push_back({parse_double(row[ct], where), bond, parse_double(row[cy], where)});
  }
  return out;
}

std::string summary_header(const std::vector<double>& levels) {
  std::string out = "t,bond,quantity,units,mean,std";
  for (double p : levels) out += ',' + level_name(p);
  return out + '\n';
}

std::string summary_rows(const PosteriorSummary& s, const BondUniverse& universe, Units units) {
  std::string out;
  const std::string u = units_name(units);
  for (std::size_t i = 0; i < s.bonds.size(); ++i) {
    const std::string prefix = fmt6(s.time) + ',' + universe.labels[i] + ',';
    out += prefix + "y," + u;
    append_stats(out, s.bonds[i].y, units);
    out += '\n';
    out += prefix + "psi," + u;
    append_stats(out, s.bonds[i].psi, units);
    out += '\n';
  }
  return out;
}

std::string diagnostics_header() {
  return "event,t,bond,kind,ess,min_log_w,max_log_w,zero_weights,resample_entropy\n";
}

std::string diagnostics_row(const FilterDiagnostics& d, const ObservationEvent& e, const BondUniverse& universe) {
  return std::to_string(d.event_index) + ',' + fmt6(d.time) + ',' + universe.labels[e.bond] + ',' +
         kind_name(e.kind) + ',' + fmt6(d.ess) + ',' + fmt6(d.min_log_weight) + ',' + fmt6(d.max_log_weight) + ',' +
         std::to_string(d.zero_weights) + ',' + fmt6(d.resample_entropy) + '\n';
}

std::string trajectories_csv(const Trajectories& tr, const BondUniverse& universe, std::size_t max_paths,
                             Units units) {
  std::string out = "path,t,bond,y,psi\n";
  if (tr.y.empty()) return out;
  const auto paths = std::min<std::size_t>(max_paths, static_cast<std::size_t>(tr.y.front().rows()));
  for (std::size_t k = 0; k < paths; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    for (std::size_t n = 0; n < tr.times.size(); ++n) {
      for (std::size_t i = 0; i < universe.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        out += std::to_string(k) + ',' + fmt6(tr.times[n]) + ',' + universe.labels[i] + ',' +
               fmt6(to_units(tr.y[n](r, c), units)) + ',' + fmt6(to_units(tr.psi[n](r, c), units)) + '\n';
      }
    }
  }
  return out;
}

std::string truth_csv(const MarketTruth& truth, const ModelFile& model) {
  std::string out = "point,t";
  for (const auto& l : model.universe.labels) out += ",y_" + l;
  for (const auto& l : model.universe.labels) out += ",psi_" + l;
  out += '\n';
  const Vector& scale = model.params.psi_scale;
  auto row = [&](const std::string& point, double t, const auto& y, const auto& x) {
    out += point + ',' + fmt17(t);
    for (Eigen::Index i = 0; i < y.size(); ++i) out += ',' + fmt17(y[i]);
    for (Eigen::Index i = 0; i < x.size(); ++i) out += ',' + fmt17(scale[i] * std::exp(x[i]));
    out += '\n';
  };
  row("start", 0.0, truth.y0, truth.x0);
  for (std::size_t n = 0; n < truth.events.size(); ++n) {
    const auto r = static_cast<Eigen::Index>(n);
    row("event", truth.times[n], truth.y_true.row(r), truth.x_true.row(r));
  }
  row("horizon", truth.horizon, truth.y_horizon, truth.x_horizon);
  return out;
}

void atomic_write(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename into " + path.string());
  }
}

RunConfig load_run_config(const fs::path& path) {
  const json j = read_json_file(path);
  const std::string w = path.string();
  check_object(j,
               w,
               {"model", "prior", "events", "particles", "seed", "levels", "output_dir", "report", "units",
                "trajectories", "workers", "resampling"},
               true);
  const fs::path base = path.parent_path();
  RunConfig c;
  c.model = document<ModelFile>(require(j, w, "model"), w + ".model", base, parse_model);
  c.prior = document<Prior>(require(j, w, "prior"), w + ".prior", base, parse_prior);
  c.events = as_path(require(j, w, "events"), w + ".events", base);
  if (j.contains("particles")) c.particles = as_count(j.at("particles"), w + ".particles");
  if (c.particles < 2) parse_fail(w + ".particles", "at least 2 particles are required");
  if (j.contains("seed")) c.seed = as_count(j.at("seed"), w + ".seed");
  if (j.contains("levels")) {
    const Vector v = as_vector(j.at("levels"), w + ".levels");
    c.levels.assign(v.data(), v.data() + v.size());
  }
  check_levels(c.levels, w + ".levels");
  if (j.contains("output_dir")) c.output_dir = as_path(j.at("output_dir"), w + ".output_dir", base);
  if (j.contains("report")) {
    const json& r = j.at("report");
    const std::string rw = w + ".report";
    check_object(r, rw, {"cadence", "step", "end"}, false);
    const std::string cadence = as_string(require(r, rw, "cadence"), rw + ".cadence");
    if (cadence == "event") {
      c.cadence = Cadence::Event;
    } else if (cadence == "grid") {
      c.cadence = Cadence::Grid;
      c.grid_step = as_number(require(r, rw, "step"), rw + ".step");
      if (!(c.grid_step > 0.0)) parse_fail(rw + ".step", "must be positive");
      if (r.contains("end")) c.grid_end = as_number(r.at("end"), rw + ".end");
    } else {
      parse_fail(rw + ".cadence", "expected \"event\" or \"grid\"");
    }
  }
  if (j.contains("units")) c.units = parse_units(as_string(j.at("units"), w + ".units"));
  if (j.contains("trajectories")) c.trajectory_paths = as_count(j.at("trajectories"), w + ".trajectories");
  if (j.contains("workers")) c.options.workers = static_cast<unsigned>(as_count(j.at("workers"), w + ".workers"));
  if (j.contains("resampling")) {
    const std::string r = as_string(j.at("resampling"), w + ".resampling");
    if (r == "multinomial")
      c.options.resampling = Resampling::Multinomial;
    else if (r == "systematic")
      c.options.resampling = Resampling::Systematic;
    else
      parse_fail(w + ".resampling", "expected \"multinomial\" or \"systematic\"");
  }
  c.options.record_history = c.trajectory_paths > 0;
  return c;
}

SimFile load_sim_config(const fs::path& path) {
  const json j = read_json_file(path);
  const std::string w = path.string();
  check_object(j,
               w,
               {"model", "prior", "horizon", "intensity", "mixture", "away_offset_scale", "d2d_alpha", "composite",
                "seed", "output_dir"},
               true);
  const fs::path base = path.parent_path();
  SimFile f;
  f.model = document<ModelFile>(require(j, w, "model"), w + ".model", base, parse_model);
  f.prior = document<Prior>(require(j, w, "prior"), w + ".prior", base, parse_prior);
  const std::size_t d = f.model.universe.size();
  SimConfig& s = f.sim;
  s.horizon = as_number(require(j, w, "horizon"), w + ".horizon");
  s.intensity = as_vector_or_scalar(require(j, w, "intensity"), w + ".intensity", d);
  if (j.contains("mixture")) {
    const json& m = j.at("mixture");
    const std::string mw = w + ".mixture";
    check_object(m, mw, {"client_buy", "client_sell", "away_buy", "away_sell", "d2d"}, false);
    const char* names[] = {"client_buy", "client_sell", "away_buy", "away_sell", "d2d"};
    for (std::size_t k = 0; k < s.mixture.size(); ++k)
      s.mixture[k] = m.contains(names[k]) ? as_number(m.at(names[k]), mw + "." + names[k]) : 0.0;
  }
  if (j.contains("away_offset_scale")) s.away_offset_scale = as_number(j.at("away_offset_scale"), w + ".away_offset_scale");
  s.d2d_alpha = j.contains("d2d_alpha") ? as_vector_or_scalar(j.at("d2d_alpha"), w + ".d2d_alpha", d)
                                        : Vector::Ones(static_cast<Eigen::Index>(d));
  if (j.contains("composite")) {
    const json& c = j.at("composite");
    const std::string cw = w + ".composite";
    check_object(c, cw, {"step", "spread_multiple"}, false);
    CompositeGrid g;
    if (c.contains("step")) g.step = as_number(c.at("step"), cw + ".step");
    if (c.contains("spread_multiple")) g.spread_multiple = as_number(c.at("spread_multiple"), cw + ".spread_multiple");
    s.composite = g;
  }
  if (j.contains("seed")) s.seed = as_count(j.at("seed"), w + ".seed");
  if (j.contains("output_dir")) f.output_dir = as_path(j.at("output_dir"), w + ".output_dir", base);
  return f;
}

EstimateConfig load_estimate_config(const fs::path& path) {
  const json j = read_json_file(path);
  const std::string w = path.string();
  check_object(j,
               w,
               {"composite", "trades", "sampling_interval", "spread_fit", "sigma_eps_fraction", "ou_rates",
                "output_dir"},
               true);
  const fs::path base = path.parent_path();
  EstimateConfig c;
  c.composite = as_path(require(j, w, "composite"), w + ".composite", base);
  if (j.contains("trades")) c.trades = as_path(j.at("trades"), w + ".trades", base);
  if (j.contains("sampling_interval")) c.sampling_interval = as_number(j.at("sampling_interval"), w + ".sampling_interval");
  if (j.contains("spread_fit")) {
    const json& s = j.at("spread_fit");
    const std::string sw = w + ".spread_fit";
    check_object(s, sw, {"mode", "mean_fraction", "std_fraction", "min_proxies"}, false);
    if (s.contains("mode")) {
      const std::string mode = as_string(s.at("mode"), sw + ".mode");
      if (mode == "composite")
        c.spread_fit.mode = SpreadFitMode::Composite;
      else if (mode == "data")
        c.spread_fit.mode = SpreadFitMode::Data;
      else
        parse_fail(sw + ".mode", "expected \"composite\" or \"data\"");
    }
    if (s.contains("mean_fraction")) c.spread_fit.mean_fraction = as_number(s.at("mean_fraction"), sw + ".mean_fraction");
    if (s.contains("std_fraction")) c.spread_fit.std_fraction = as_number(s.at("std_fraction"), sw + ".std_fraction");
    if (s.contains("min_proxies")) c.spread_fit.min_proxies = as_count(s.at("min_proxies"), sw + ".min_proxies");
  }
  if (j.contains("sigma_eps_fraction"))
    c.sigma_eps_fraction = as_number(j.at("sigma_eps_fraction"), w + ".sigma_eps_fraction");
  if (j.contains("ou_rates")) c.ou_rates = as_vector(j.at("ou_rates"), w + ".ou_rates");
  if (j.contains("output_dir")) c.output_dir = as_path(j.at("output_dir"), w + ".output_dir", base);
  if (c.spread_fit.mode == SpreadFitMode::Data && !c.trades)
    parse_fail(w + ".trades", "data-mode spread fitting needs a trades file");
  return c;
}

json sim_config_to_json(const SimConfig& cfg) {
  ordered j;
  j["schema_version"] = kSchemaVersion;
  j["horizon"] = cfg.horizon;
  j["intensity"] = vector_json(cfg.intensity);
  ordered m;
  const char* names[] = {"client_buy", "client_sell", "away_buy", "away_sell", "d2d"};
  for (std::size_t k = 0; k < cfg.mixture.size(); ++k) m[names[k]] = cfg.mixture[k];
  j["mixture"] = std::move(m);
  j["away_offset_scale"] = cfg.away_offset_scale;
  j["d2d_alpha"] = vector_json(cfg.d2d_alpha);
  if (cfg.composite) j["composite"] = ordered{{"step", cfg.composite->step}, {"spread_multiple", cfg.composite->spread_multiple}};
  j["seed"] = cfg.seed;
  return json::parse(j.dump());
}

}  // namespace bondpf::io
