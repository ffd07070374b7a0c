#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "fracheat/errors.hpp"
#include "fracheat/runner.hpp"

namespace fracheat {

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long long> samples;
  std::optional<std::string> eps, delta;
  std::optional<long long> threads;
  std::optional<std::string> out, format;
  std::vector<std::string> args;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw ConfigError("write failed for '" + path.string() + "'");
}

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "config file (key = value, [section] headers)");
  sub->add_option("--seed", f.seed, "top-level seed (fallback: FRACHEAT_SEED)");
  sub->add_option("--samples", f.samples, "Monte Carlo sample count");
  sub->add_option("--eps", f.eps, "mollifier ladder, comma separated");
  sub->add_option("--delta", f.delta, "time mollifier, comma separated");
  sub->add_option("--threads", f.threads, "worker threads");
  sub->add_option("--out", f.out, "report path (stdout when absent)");
  sub->add_option("--format", f.format, "json, csv or both");
  sub->add_option("args", f.args, "key=value overrides; crosscheck takes a target");
}

ExperimentConfig build_config(const std::string& kind, const Flags& f) {
  ExperimentConfig cfg(kind);
  if (!f.config.empty()) cfg.merge_text(read_file(f.config));
  for (const auto& a : f.args) {
    const auto eq = a.find('=');
    if (eq != std::string::npos)
      cfg.set(a.substr(0, eq), a.substr(eq + 1));
    else if (cfg.kind() == "crosscheck")
      cfg.set("target", a);
    else
      throw ConfigError("expected key=value, got '" + a + "'");
  }
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (f.samples) cfg.set("samples", std::to_string(*f.samples));
  if (f.eps) cfg.set("eps", *f.eps);
  if (f.delta) cfg.set("delta", *f.delta);
  if (f.threads) cfg.set("threads", std::to_string(*f.threads));
  if (f.out) cfg.set("out", *f.out);
  if (f.format) cfg.set("format", *f.format);
  if (!cfg.has("seed"))
    if (const char* env = std::getenv("FRACHEAT_SEED")) cfg.set("seed", env);
  return cfg;
}

void emit(const ExperimentConfig& cfg, const Report& rep, std::ostream& out) {
  const std::string fmt = cfg.get("format");
  const std::string path = cfg.get("out");
  const bool json = fmt != "csv", csv = fmt != "json";
  if (path.empty()) {
    if (json) out << report_json(rep);
    if (csv) out << report_csv(rep);
    return;
  }
  std::filesystem::path p(path);
  if (json) write_file(p, report_json(rep));
  if (csv) {
    std::filesystem::path q = p;
    if (json) q.replace_extension(".csv");
    if (q == p) q += ".csv";
    write_file(q, report_csv(rep));
  }
}

int run_diff(const std::string& a, const std::string& b, const std::optional<std::string>& out_path,
             std::ostream& out) {
  const Report ra = parse_report_json(read_file(a));
  const Report rb = parse_report_json(read_file(b));
  const auto rows = report_diff(ra, rb);
  std::size_t flagged = 0;
  double max_z = 0.0;
  for (const auto& r : rows) {
    flagged += r.flagged ? 1 : 0;
    max_z = std::max(max_z, std::abs(r.z));
  }
  std::ostringstream os;
  os << diff_table(rows) << rows.size() << " matched records, max |z| = " << max_z << ", flagged "
     << flagged << "\n";
  if (out_path)
    write_file(*out_path, os.str());
  else
    out << os.str();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moments of the stochastic heat equation with fractional-in-time noise", "fracheat"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kLibraryVersion);

  Flags flags;
  const std::map<std::string, std::string> about = {
      {"localtime", "moments of mollified weighted intersection local times"},
      {"alpha", "alpha_k by quasi-Monte Carlo over the Gram-determinant density"},
      {"chaos", "second moment by the Wiener chaos series"},
      {"moment", "Feynman-Kac Monte Carlo moments E[u^k]"},
      {"field", "sample the mollified solution field on a window"},
      {"bounds", "exponential-moment, lambda0 / t0 and negative-moment bounds"},
      {"crosscheck", "second-moment or stratonovich-factor cross-validation"},
  };
  for (const auto& kind : ExperimentConfig::kinds()) {
    CLI::App* sub = app.add_subcommand(kind, about.at(kind));
    if (kind == "moment") sub->alias("fk-moment");
    add_flags(sub, flags);
  }
  std::vector<std::string> diff_files;
  std::optional<std::string> diff_out;
  CLI::App* diff = app.add_subcommand("diff", "compare two reports record by record");
  diff->add_option("reports", diff_files, "report A and report B")->required()->expected(2);
  diff->add_option("--out", diff_out, "write the comparison table here");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == diff) return run_diff(diff_files[0], diff_files[1], diff_out, out);
    const ExperimentConfig cfg = build_config(sub->get_name(), flags);
    const Report rep = run_experiment(cfg);
    emit(cfg, rep, out);
    return 0;
  } catch (const RegimeError& e) {
    err << "fracheat: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "fracheat: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fracheat
