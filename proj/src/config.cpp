#include "fracheat/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "fracheat/errors.hpp"

namespace fracheat {

namespace {

struct KeyDef {
  const char* key;
  const char* def;
};

// global keys
const std::vector<KeyDef> kGlobal = {
    {"seed", "0"},   {"samples", ""}, {"eps", ""},           {"delta", ""},
    {"threads", "1"}, {"out", ""},    {"format", "json"},    {"report.timing", "false"},
};

const std::map<std::string, std::vector<KeyDef>> kSections = {
    {"localtime",
     {{"variant", "intersection"}, {"weight", "const:1"}, {"H", "0.5"}, {"d", "1"}, {"T", "1"},
      {"k", "1"}, {"lambda", ""}, {"mesh_factor", "4"}, {"n_steps", "0"}}},
    {"alpha",
     {{"weight", "const:1"}, {"H", "0.5"}, {"d", "1"}, {"T", "1"}, {"k", "1"},
      {"points", "16384"}, {"replicates", "16"}, {"diagonal", "false"}}},
    {"chaos",
     {{"H", "0.5"}, {"d", "1"}, {"t", "0.25"}, {"u0", "const:1"}, {"x", ""}, {"N", "12"},
      {"beta_H", ""}, {"method", "auto"}, {"points", "8192"}, {"replicates", "16"}}},
    {"moment",
     {{"k", "2"}, {"H", "0.5"}, {"d", "1"}, {"t", "0.25"}, {"x", ""}, {"u0", "const:1"},
      {"product", "wick"}, {"strat_half", "true"}, {"beta_H", ""}, {"gamma_T", ""},
      {"mesh_factor", "4"}}},
    {"field",
     {{"H", "0.5"}, {"t_max", "0.25"}, {"n_t", "4"}, {"x_lo", "0"}, {"x_hi", "0"}, {"n_x", "0"},
      {"u0", "const:1"}, {"inner_B", "64"}, {"realizations", "200"}, {"product", "wick"},
      {"p", ""}, {"time_cells", "0"}}},
    {"bounds",
     {{"lambda", "0.25,0.5,1"}, {"T", "1"}, {"weight", "const:1"}, {"H", "0.75"}, {"d", "1"},
      {"k", "2"}, {"gamma_T", ""}, {"beta_H", ""}, {"p", ""}, {"t", "0.25"}, {"u0", "const:1"}}},
    {"crosscheck",
     {{"target", "second-moment"}, {"H", "0.5"}, {"d", "1"}, {"t", "0.25"}, {"u0", "const:1"},
      {"N", "12"}, {"points", "8192"}, {"alpha_eps", "8e-4,4e-4,2e-4,1e-4"}, {"k", "2"}, {"beta_H", ""}}},
};

// kind-specific defaults of global keys
const std::map<std::string, std::map<std::string, std::string>> kGlobalDefaults = {
    {"localtime", {{"samples", "20000"}, {"eps", "0.01"}}},
    {"alpha", {{"eps", "0"}}},
    {"chaos", {}},
    {"moment", {{"samples", "20000"}, {"eps", "0.004,0.002,0.001"}}},
    {"field", {{"samples", "20000"}, {"eps", "0.001"}, {"delta", "0.02"}}},
    {"bounds", {{"samples", "2000"}, {"eps", "0.01"}}},
    {"crosscheck", {{"samples", "20000"}, {"eps", "0.004,0.002,0.001"}}},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string last_component(const std::string& k) {
  const auto p = k.rfind('.');
  return p == std::string::npos ? k : k.substr(p + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0' || errno == ERANGE)
      throw ConfigError("not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

const std::vector<std::string>& ExperimentConfig::kinds() {
  static const std::vector<std::string> k = {"localtime", "alpha",  "chaos",     "moment",
                                             "field",     "bounds", "crosscheck"};
  return k;
}

std::string ExperimentConfig::canonical_kind(const std::string& kind) {
  if (kind == "fk-moment") return "moment";
  if (kind == "localtime-moment") return "localtime";
  if (kind == "chaos-series") return "chaos";
  for (const auto& k : kinds())
    if (k == kind) return k;
  throw ConfigError("unknown experiment kind '" + kind + "'");
}

ExperimentConfig::ExperimentConfig(const std::string& kind) : kind_(canonical_kind(kind)) {}

std::vector<std::string> ExperimentConfig::known_keys() const {
  std::vector<std::string> out;
  for (const auto& g : kGlobal) out.emplace_back(g.key);
  for (const auto& s : kSections.at(kind_)) out.push_back(kind_ + "." + s.key);
  return out;
}

std::string ExperimentConfig::resolve_key(const std::string& key) const {
  const auto keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) != keys.end()) return key;
  if (key.find('.') == std::string::npos) {
    std::vector<std::string> hits;
    for (const auto& k : keys)
      if (last_component(k) == key) hits.push_back(k);
    if (hits.size() == 1) return hits[0];
    if (hits.size() > 1) throw ConfigError("ambiguous key '" + key + "'");
  }
  throw ConfigError("unknown key '" + key + "' for experiment " + kind_);
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  values_[resolve_key(trim(key))] = trim(value);
}

bool ExperimentConfig::has(const std::string& key) const {
  return values_.count(resolve_key(key)) > 0;
}

std::string ExperimentConfig::get(const std::string& key) const {
  const std::string k = resolve_key(key);
  if (auto it = values_.find(k); it != values_.end()) return it->second;
  const auto& gd = kGlobalDefaults.at(kind_);
  if (auto it = gd.find(k); it != gd.end()) return it->second;
  for (const auto& g : kGlobal)
    if (k == g.key) return g.def;
  for (const auto& s : kSections.at(kind_))
    if (k == kind_ + "." + s.key) return s.def;
  return "";
}

double ExperimentConfig::real(const std::string& key) const {
  const auto v = opt_real(key);
  if (!v) throw ConfigError("missing value for '" + resolve_key(key) + "'");
  return *v;
}

std::optional<double> ExperimentConfig::opt_real(const std::string& key) const {
  const std::string s = get(key);
  if (s.empty()) return std::nullopt;
  const auto l = parse_list(s);
  if (l.size() != 1) throw ConfigError("'" + resolve_key(key) + "' expects one number");
  return l[0];
}

long long ExperimentConfig::integer(const std::string& key) const {
  const std::string s = get(key);
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("'" + resolve_key(key) + "' expects an integer, got '" + s + "'");
  return v;
}

std::uint64_t ExperimentConfig::u64(const std::string& key) const {
  const std::string s = get(key);
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("'" + resolve_key(key) + "' expects an unsigned 64-bit integer, got '" + s + "'");
  return v;
}

bool ExperimentConfig::flag(const std::string& key) const {
  const std::string s = get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + resolve_key(key) + "' expects true/false, got '" + s + "'");
}

std::vector<double> ExperimentConfig::list(const std::string& key) const { return parse_list(get(key)); }

std::map<std::string, std::string> ExperimentConfig::effective() const {
  std::map<std::string, std::string> out;
  for (const auto& k : known_keys()) out[k] = get(k);
  return out;
}

std::string ExperimentConfig::serialize() const {
  std::string out = "experiment = " + kind_ + "\n";
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void ExperimentConfig::merge_text(const std::string& text) {
  std::stringstream ss(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("bad section header on line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      if (section == "fk-moment") section = "moment";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value on line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key on line " + std::to_string(lineno));
    if (section.empty() && key == "experiment") {
      if (canonical_kind(value) != kind_)
        throw ConfigError("config is for experiment '" + value + "', not " + kind_);
      continue;
    }
    if (!section.empty() && section != kind_ && section != "report")
      throw ConfigError("section [" + section + "] does not apply to experiment " + kind_);
    set(section.empty() ? key : section + "." + key, value);
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text,
                                         const std::optional<std::string>& kind) {
  std::optional<std::string> k = kind;
  if (!k) {
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
      if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq != std::string::npos && trim(line.substr(0, eq)) == "experiment") {
        k = trim(line.substr(eq + 1));
        break;
      }
      if (line.front() == '[') break;
    }
  }
  if (!k) throw ConfigError("config text does not name an experiment");
  ExperimentConfig c(*k);
  c.merge_text(text);
  return c;
}

}  // namespace fracheat
