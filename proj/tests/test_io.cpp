#include <cmath>
#include <sstream>

#include "bondpf/io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bondpf;
using namespace bondpf::testing;
namespace fs = std::filesystem;

namespace {

std::string error_text(const std::function<void()>& fn, ErrorCode expected = ErrorCode::Parse) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.code() == expected);
    return e.what();
  }
  FAIL("expected an error");
  return "";
}

std::vector<ObservationEvent> random_events(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<ObservationEvent> out;
  double t = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    t += rng.exponential() / 7.0;
    const auto bond = static_cast<std::size_t>(rng.uniform() * static_cast<double>(d));
    const double level = 1e3 * rng.normal();
    switch (k % 5) {
      case 0: out.push_back({t, bond, ClientBuy{level}}); break;
      case 1: out.push_back({t, bond, ClientSell{level}}); break;
      case 2: out.push_back({t, bond, TradedAwayBuy{level}}); break;
      case 3: out.push_back({t, bond, TradedAwaySell{level}}); break;
      default: out.push_back({t, bond, InterDealer{level, std::exp(rng.normal())}}); break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("model documents round-trip") {
  Rng rng = Rng::stream(1);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t d = 1 + static_cast<std::size_t>(rep % 4);
    const auto n = static_cast<Eigen::Index>(d);
    io::ModelFile m;
    for (std::size_t i = 0; i < d; ++i) m.universe.labels.push_back("XS" + std::to_string(1000 + rep * 10 + i));
    m.params.sigma = Vector(n);
    for (Eigen::Index i = 0; i < n; ++i) m.params.sigma[i] = std::exp(rng.normal());
    m.params.rho = random_correlation(d, rng);
    m.params.psi_scale = Vector::Constant(n, 1.0 / 3.0);
    m.params.sigma_eps = Vector::Constant(n, 0.1 + rng.uniform());
    if (rep % 2 == 0)
      m.params.spread = IidSpread{Vector::Constant(n, -0.123456789), Vector::Constant(n, std::log(2.0))};
    else
      m.params.spread = OuSpread{Vector::Constant(n, 1.7), random_correlation(d, rng)};
    const io::json j = io::json::parse(io::model_to_json(m).dump());
    const io::ModelFile back = io::model_from_json(j);
    CHECK(back.universe.labels == m.universe.labels);
    CHECK(back.params.sigma == m.params.sigma);
    CHECK(back.params.rho == m.params.rho);
    CHECK(back.params.psi_scale == m.params.psi_scale);
    CHECK(back.params.sigma_eps == m.params.sigma_eps);
    CHECK(back.params.spread.index() == m.params.spread.index());
    if (const auto* ou = std::get_if<OuSpread>(&m.params.spread)) {
      CHECK(std::get<OuSpread>(back.params.spread).a == ou->a);
      CHECK(std::get<OuSpread>(back.params.spread).vvt == ou->vvt);
    } else {
      CHECK(std::get<IidSpread>(back.params.spread).mean == std::get<IidSpread>(m.params.spread).mean);
      CHECK(std::get<IidSpread>(back.params.spread).var == std::get<IidSpread>(m.params.spread).var);
    }
  }
}

TEST_CASE("prior documents round-trip") {
  const ModelParams p = trio_params();
  const Prior prior = trio_prior(p, Vector{{101.1, 99.9, 1.0 / 7.0}});
  const Prior back = io::prior_from_json(io::json::parse(io::prior_to_json(prior).dump()));
  CHECK(back.mean_y == prior.mean_y);
  CHECK(back.cov_y == prior.cov_y);
  CHECK(back.mean_x == prior.mean_x);
  CHECK(back.cov_x == prior.cov_x);
}

TEST_CASE("documents reject unknown keys and bad schema versions") {
  io::ModelFile m{BondUniverse::numbered(1), scalar_params(0.5, 0.1)};
  io::json j = io::model_to_json(m);
  j["sigmaa"] = 1.0;
  CHECK(error_text([&] { io::model_from_json(j); }).find("sigmaa") != std::string::npos);
  j = io::model_to_json(m);
  j["schema_version"] = 2;
  CHECK(error_text([&] { io::model_from_json(j); }).find("schema_version") != std::string::npos);
  j.erase("schema_version");
  CHECK(error_text([&] { io::model_from_json(j); }).find("schema_version") != std::string::npos);
  j = io::model_to_json(m);
  j["spread"]["mode"] = "garch";
  CHECK(error_text([&] { io::model_from_json(j); }).find("spread.mode") != std::string::npos);
  j = io::model_to_json(m);
  j["spread"]["a"] = io::json::array({1.0});
  CHECK(error_text([&] { io::model_from_json(j); }).find("\"a\"") != std::string::npos);
}

TEST_CASE("event lines round-trip exactly") {
  Rng rng = Rng::stream(2);
  const BondUniverse u{{"XS1", "XS2", "FR0003"}};
  const auto events = random_events(500, 3, rng);
  std::istringstream in(io::events_to_string(events, u));
  const auto back = io::read_events(in, u);
  CHECK(back == events);
}

TEST_CASE("event lines: schema and diagnostics") {
  const BondUniverse u{{"A", "B"}};
  const auto one = [&](const std::string& line) { return io::event_from_line(line, u, 7); };
  const ObservationEvent e = one(R"({"t": 0.5, "bond": 1, "kind": "d2d", "Y": 101.5, "alpha": 0.75})");
  CHECK(e == ObservationEvent{0.5, 1, InterDealer{101.5, 0.75}});
  CHECK(one(R"({"t":1,"bond":"A","kind":"away_sell","Z":3})") == ObservationEvent{1.0, 0, TradedAwaySell{3.0}});
  CHECK(io::event_to_line({0.25, 1, TradedAwayBuy{99.5}}, u) == R"({"t":0.25,"bond":"B","kind":"away_buy","Z":99.5})");

  CHECK(error_text([&] { one(R"({"t":1,"bond":"C","kind":"client_buy","Y":3})"); }).starts_with("line 7"));
  CHECK(error_text([&] { one(R"({"t":1,"bond":"A","kind":"client_buy","Z":3})"); }).find("\"Z\"") != std::string::npos);
  CHECK(error_text([&] { one(R"({"t":1,"bond":"A","kind":"swap","Y":3})"); }).find("swap") != std::string::npos);
  CHECK(error_text([&] { one(R"({"t":1,"bond":"A","kind":"d2d","Y":3})"); }).find("alpha") != std::string::npos);
  CHECK(error_text([&] { one(R"({"t":1,"bond":"A",)"); }).starts_with("line 7"));

  std::istringstream bad("{\"t\":1,\"bond\":0,\"kind\":\"client_buy\",\"Y\":1}\n\n{\"t\":0.5,\"bond\":0,\"kind\":\"client_buy\",\"Y\":1}\n");
  CHECK(error_text([&] { io::read_events(bad, u); }).starts_with("line 3"));
  std::istringstream empty("\n\n");
  CHECK(io::read_events(empty, u).empty());
}

TEST_CASE("composite CSV round-trips, including missing spreads") {
  CompositeSeries s;
  s.labels = {"A", "B"};
  s.samples = {{{0.0, 100.0, 4.74}, {1.0, 100.123456789012, std::nullopt}, {2.5, 99.5, 4.8}},
               {{0.5, 120.0, 1.0 / 3.0}, {1.5, 120.5, 2.0}}};
  std::istringstream in(io::composite_to_string(s));
  const CompositeSeries back = io::read_composite(in);
  REQUIRE(back.labels == s.labels);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(back.samples[i].size() == s.samples[i].size());
    for (std::size_t n = 0; n < s.samples[i].size(); ++n) {
      CHECK(back.samples[i][n].t == s.samples[i][n].t);
      CHECK(back.samples[i][n].mid == s.samples[i][n].mid);
      CHECK(back.samples[i][n].spread == s.samples[i][n].spread);
    }
  }
  std::istringstream wrong("t,bond,mid,sprd\n0,A,1,2\n");
  CHECK(error_text([&] { io::read_composite(wrong); }).find("sprd") != std::string::npos);
  std::istringstream short_row("t,bond,mid\n0,A\n");
  CHECK(error_text([&] { io::read_composite(short_row); }).find("line 2") != std::string::npos);
}

TEST_CASE("summary table layout, precision and units") {
  const std::vector<double> levels{0.1, 0.5, 0.9};
  CHECK(io::summary_header(levels) == "t,bond,quantity,units,mean,std,q0.1,q0.5,q0.9\n");
  PosteriorSummary s;
  s.time = 1.0 / 3.0;
  s.levels = levels;
  s.bonds.push_back({QuantityStats{123.456789, 0.1234567, {1.0, 2.0, 3.0}}, QuantityStats{0.79, 0.0, {0.5, 0.79, 1.25}}});
  const BondUniverse u{{"A"}};
  CHECK(io::summary_rows(s, u, io::Units::Bp) ==
        "0.333333,A,y,bp,123.457,0.123457,1,2,3\n0.333333,A,psi,bp,0.79,0,0.5,0.79,1.25\n");
  CHECK(io::summary_rows(s, u, io::Units::Pct) ==
        "0.333333,A,y,pct,1.23457,0.00123457,0.01,0.02,0.03\n0.333333,A,psi,pct,0.0079,0,0.005,0.0079,0.0125\n");
  CHECK(io::fmt6(-0.0) == "0");
  CHECK(io::fmt17(0.1) == "0.10000000000000001");
}

TEST_CASE("atomic writes replace the target and leave no temporaries") {
  const fs::path dir = scratch("atomic");
  const fs::path target = dir / "nested" / "out.csv";
  io::atomic_write(target, "first\n");
  io::atomic_write(target, "second\n");
  CHECK(slurp(target) == "second\n");
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(target.parent_path())) files += entry.is_regular_file() ? 1 : 0;
  CHECK(files == 1);
}

TEST_CASE("run configuration loading") {
  const fs::path dir = scratch("runcfg");
  io::ModelFile m{BondUniverse{{"A"}}, scalar_params(0.5, 0.1)};
  spit(dir / "model.json", io::model_to_json(m).dump());
  spit(dir / "cfg.json", R"({"schema_version":1,"model":"model.json",
    "prior":{"mean_y":[100],"cov_y":[[1]],"mean_x":[0],"cov_x":[[0]]},
    "events":"ev.jsonl","particles":500,"seed":9,"levels":[0.25,0.5,0.75],
    "report":{"cadence":"grid","step":0.5},"units":"pct","trajectories":3,"workers":2,"resampling":"systematic"})");
  const io::RunConfig c = io::load_run_config(dir / "cfg.json");
  CHECK(c.model.universe.labels == std::vector<std::string>{"A"});
  CHECK(c.prior.mean_y[0] == 100.0);
  CHECK(c.events == dir / "ev.jsonl");
  CHECK(c.particles == 500);
  CHECK(c.seed == 9);
  CHECK(c.levels == std::vector<double>{0.25, 0.5, 0.75});
  CHECK(c.cadence == io::Cadence::Grid);
  CHECK(c.grid_step == 0.5);
  CHECK(c.units == io::Units::Pct);
  CHECK(c.trajectory_paths == 3);
  CHECK(c.options.record_history);
  CHECK(c.options.workers == 2);
  CHECK(c.options.resampling == Resampling::Systematic);

  spit(dir / "typo.json", R"({"schema_version":1,"model":"model.json","prior":"model.json","events":"e","particle":5})");
  CHECK(error_text([&] { io::load_run_config(dir / "typo.json"); }).find("particle") != std::string::npos);
  spit(dir / "k1.json", R"({"schema_version":1,"model":"model.json","prior":{"mean_y":[1],"cov_y":[[1]],"mean_x":[0],"cov_x":[[0]]},"events":"e","particles":1})");
  CHECK(error_text([&] { io::load_run_config(dir / "k1.json"); }).find("particles") != std::string::npos);
  spit(dir / "lv.json", R"({"schema_version":1,"model":"model.json","prior":{"mean_y":[1],"cov_y":[[1]],"mean_x":[0],"cov_x":[[0]]},"events":"e","levels":[0.5,0.5]})");
  CHECK(error_text([&] { io::load_run_config(dir / "lv.json"); }).find("levels") != std::string::npos);
}

TEST_CASE("truth table columns") {
  io::ModelFile m{BondUniverse{{"A", "B"}}, trio_params()};
  m.params.psi_scale = Vector::Constant(2, 2.0);
  MarketTruth t;
  t.y0 = Vector{{1.0, 2.0}};
  t.x0 = Vector::Zero(2);
  t.horizon = 1.0;
  t.y_horizon = Vector{{1.5, 2.5}};
  t.x_horizon = Vector::Zero(2);
  const std::string csv = io::truth_csv(t, m);
  CHECK(csv == "point,t,y_A,y_B,psi_A,psi_B\nstart,0,1,2,2,2\nhorizon,1,1.5,2.5,2,2\n");
}
