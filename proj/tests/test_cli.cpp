#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"

#include "fracheat/config.hpp"
#include "fracheat/errors.hpp"
#include "fracheat/report.hpp"
#include "fracheat/runner.hpp"
#include "json.hpp"

using namespace fracheat;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fracheat_test_cli";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST_CASE("config parse and serialize round trip") {
  const std::string text =
      "# FK second moment\n"
      "experiment = fk-moment\n"
      "seed = 7\n"
      "eps = 0.004, 0.002\n"
      "[moment]\n"
      "k = 2   # order\n"
      "H = 0.75\n"
      "[report]\n"
      "timing = false\n";
  const auto a = ExperimentConfig::parse(text);
  CHECK(a.kind() == "moment");
  CHECK(a.get("moment.k") == "2");
  CHECK(a.get("k") == "2");
  CHECK(a.real("H") == 0.75);
  CHECK(a.list("eps") == std::vector<double>{0.004, 0.002});
  CHECK(a.u64("seed") == 7);
  CHECK_FALSE(a.flag("report.timing"));
  const auto b = ExperimentConfig::parse(a.serialize());
  CHECK(a == b);
  CHECK(b.serialize() == a.serialize());
  CHECK(ExperimentConfig::parse(b.serialize()) == b);
}

TEST_CASE("config defaults and key resolution") {
  ExperimentConfig c("moment");
  CHECK(c.get("samples") == "20000");
  CHECK(c.list("eps").size() == 3);
  CHECK_FALSE(c.opt_real("beta_H").has_value());
  CHECK(c.resolve_key("t") == "moment.t");
  CHECK(c.resolve_key("timing") == "report.timing");
  CHECK_THROWS_AS(c.set("bogus", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("chaos.N", "3"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig("nope"), ConfigError);
  c.set("k", "x");
  CHECK_THROWS_AS(c.integer("k"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("experiment = chaos\n[moment]\nk = 2\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("k = 2\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("experiment = moment\nk 2\n"), ConfigError);
  ExperimentConfig m("moment");
  CHECK_THROWS_AS(m.merge_text("experiment = chaos\n"), ConfigError);
}

TEST_CASE("report JSON round trip and CSV layout") {
  Report r;
  r.experiment = "moment";
  r.config = {{"seed", "3"}, {"moment.k", "2"}};
  r.records.push_back({"E[u^2]", 1.25, 0.01, 0.004, std::nullopt, 100, 3, "fk-wick:diagonal"});
  r.records.push_back({"E[u^2]", 1.3, 0.02, 0.0, 0.02, 100, 3, "fk-wick:diagonal:richardson"});
  r.diagnostics["t0_k"] = 1.5;
  const std::string j = report_json(r);
  const Report back = parse_report_json(j);
  CHECK(report_json(back) == j);
  CHECK(back.records[1].delta == 0.02);
  CHECK_FALSE(back.records[0].delta.has_value());
  CHECK(j.find("timing") == std::string::npos);

  const std::string csv = report_csv(r);
  std::istringstream is(csv);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "experiment,quantity,epsilon,delta,n_samples,value,std_error,seed,route");
  CHECK(row == "moment,E[u^2],0.004,,100,1.25,0.01,3,fk-wick:diagonal");
  CHECK_THROWS_AS(parse_report_json("{"), DataError);
  CHECK_THROWS_AS(parse_report_json("{\"experiment\": 1}"), DataError);
}

TEST_CASE("report diff") {
  Report a;
  a.experiment = "moment";
  a.records.push_back({"E[u^2]", 1.0, 0.1, 0.004, std::nullopt, 10, 1, "r"});
  a.records.push_back({"E[u^2]", 2.0, 0.1, 0.002, std::nullopt, 10, 1, "r"});
  const auto same = report_diff(a, a);
  REQUIRE(same.size() == 2);
  for (const auto& d : same) {
    CHECK(d.z == 0.0);
    CHECK_FALSE(d.flagged);
  }
  Report b = a;
  b.records[1].value = 2.0 + 5.0 * std::sqrt(0.02);
  const auto rows = report_diff(a, b);
  CHECK(rows[1].z == doctest::Approx(-5.0));
  CHECK(rows[1].flagged);
  CHECK_FALSE(rows[0].flagged);
  Report c = a;
  c.experiment = "chaos";
  CHECK_THROWS_AS(report_diff(a, c), ConfigError);
}

TEST_CASE("k = 1 moment through the CLI is u0") {
  const auto r = cli({"fk-moment", "k=1", "H=0.5", "d=1", "t=0.25", "u0=const:1", "--samples", "200"});
  REQUIRE(r.code == 0);
  const Report rep = parse_report_json(r.out);
  CHECK(rep.experiment == "moment");
  REQUIRE_FALSE(rep.records.empty());
  for (const auto& rec : rep.records) {
    CHECK(rec.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rec.n_samples == 200);
    CHECK(rec.seed == 0);
  }
}

TEST_CASE("exit codes") {
  auto r = cli({"fk-moment", "k=2", "H=0.7", "d=1", "t=1", "product=stratonovich"});
  CHECK(r.code == 2);
  CHECK(r.err.find("H > 3/4") != std::string::npos);
  CHECK(r.out.empty());

  r = cli({"moment", "k=2", "H=0.8", "d=2", "t=5", "beta_H=1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("t < t0(k)") != std::string::npos);

  r = cli({"chaos", "H=0.75", "d=2", "t=1", "beta_H=1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("t < T0") != std::string::npos);

  r = cli({"field", "H=0.6", "p=0.5"});
  CHECK(r.code == 2);

  CHECK(cli({"moment", "bogus=1"}).code == 1);
  CHECK(cli({"moment", "--config", scratch("missing.cfg").string()}).code == 1);
  CHECK(cli({"moment", "--format", "xml"}).code == 1);
  CHECK(cli({"moment", "--samples", "1"}).code == 1);
  CHECK(cli({"nope"}).code == 1);
  CHECK(cli({"crosscheck", "other-target"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("precedence: defaults < config file < key=value < flags; env seed fallback") {
  const fs::path cfg = scratch("prec.cfg");
  spit(cfg, "experiment = moment\nseed = 11\nsamples = 300\n[moment]\nk = 1\nt = 0.5\n");
  auto rep = parse_report_json(cli({"moment", "--config", cfg.string(), "t=0.3"}).out);
  CHECK(rep.config.at("seed") == "11");
  CHECK(rep.config.at("moment.t") == "0.3");
  CHECK(rep.config.at("moment.k") == "1");
  CHECK(rep.config.at("moment.H") == "0.5");

  rep = parse_report_json(cli({"moment", "--config", cfg.string(), "seed=12", "--seed", "13"}).out);
  CHECK(rep.config.at("seed") == "13");
  CHECK(rep.records.front().seed == 13);

  ::setenv("FRACHEAT_SEED", "99", 1);
  rep = parse_report_json(cli({"moment", "k=1", "--samples", "50"}).out);
  CHECK(rep.config.at("seed") == "99");
  rep = parse_report_json(cli({"moment", "--config", cfg.string()}).out);
  CHECK(rep.config.at("seed") == "11");
  ::unsetenv("FRACHEAT_SEED");
}

TEST_CASE("reports are byte stable; threads agree") {
  const fs::path a = scratch("a.json"), b = scratch("b.json"), c = scratch("c.json");
  const std::vector<std::string> base = {"moment", "k=2", "H=0.75", "t=0.5", "--samples", "400", "--eps",
                                         "0.02,0.01", "--seed", "5"};
  auto args = base;
  args.insert(args.end(), {"--out", a.string()});
  REQUIRE(cli(args).code == 0);
  args = base;
  args.insert(args.end(), {"--out", b.string()});
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(a) == slurp(b));
  args = base;
  args.insert(args.end(), {"--out", c.string(), "--threads", "4"});
  REQUIRE(cli(args).code == 0);
  const auto ra = parse_report_json(slurp(a)), rc = parse_report_json(slurp(c));
  REQUIRE(ra.records.size() == rc.records.size());
  for (std::size_t i = 0; i < ra.records.size(); ++i)
    CHECK(std::abs(ra.records[i].value - rc.records[i].value) <= 1e-10 * std::abs(ra.records[i].value));

  const auto d = cli({"diff", a.string(), b.string()});
  CHECK(d.code == 0);
  CHECK(d.out.find("flagged 0") != std::string::npos);

  auto t = cli({"moment", "k=1", "--samples", "20", "report.timing=true"});
  CHECK(nlohmann::json::parse(t.out).contains("timing"));
}

TEST_CASE("csv and both formats") {
  const fs::path j = scratch("both.json");
  REQUIRE(cli({"moment", "k=1", "--samples", "20", "--format", "both", "--out", j.string()}).code == 0);
  CHECK(slurp(j).front() == '{');
  const std::string csv = slurp(scratch("both.csv"));
  CHECK(csv.rfind("experiment,quantity,epsilon,delta,n_samples,value,std_error,seed,route\n", 0) == 0);
  const auto r = cli({"moment", "k=1", "--samples", "20", "--format", "csv"});
  CHECK(r.out.rfind("experiment,quantity", 0) == 0);
}

TEST_CASE("diff rejects reports of different kinds") {
  const fs::path m = scratch("m.json"), c = scratch("c2.json");
  REQUIRE(cli({"moment", "k=1", "--samples", "20", "--out", m.string()}).code == 0);
  REQUIRE(cli({"chaos", "N=4", "--out", c.string()}).code == 0);
  CHECK(cli({"diff", m.string(), c.string()}).code == 1);
  CHECK(cli({"diff", m.string()}).code == 1);
}

TEST_CASE("doubling samples shrinks the standard error by about sqrt 2") {
  const std::vector<std::string> base = {"moment", "k=2", "--eps", "0.004", "--seed", "2"};
  auto a = base;
  a.insert(a.end(), {"--samples", "4000"});
  auto b = base;
  b.insert(b.end(), {"--samples", "8000"});
  const auto ra = parse_report_json(cli(a).out), rb = parse_report_json(cli(b).out);
  const double ratio = ra.records[0].std_error / rb.records[0].std_error;
  MESSAGE("SE ratio " << ratio);
  CHECK(std::abs(ratio / std::sqrt(2.0) - 1.0) < 0.2);
}

TEST_CASE("substreams differ by kind and index") {
  CHECK(experiment_stream("moment", 0) == experiment_stream("fk-moment", 0));
  CHECK(experiment_stream("moment", 0) != experiment_stream("moment", 1));
  CHECK(experiment_stream("moment", 0) != experiment_stream("chaos", 0));
}
