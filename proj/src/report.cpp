#include "fracheat/report.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "fracheat/config.hpp"
#include "fracheat/errors.hpp"

namespace fracheat {

namespace {

using ojson = nlohmann::ordered_json;

ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson opt_num(const std::optional<double>& v) { return v ? num(*v) : ojson(nullptr); }

double get_num(const ojson& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::optional<double> get_opt(const ojson& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string csv_num(double v) {
  if (!std::isfinite(v)) return "";
  return format_double(v);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool same_opt(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || *a == *b;
}

}  // namespace

const Record* Report::find(const std::string& quantity) const {
  for (const auto& r : records)
    if (r.quantity == quantity) return &r;
  return nullptr;
}

std::string report_json(const Report& r) {
  ojson j;
  j["experiment"] = r.experiment;
  j["version"] = r.version;
  ojson cfg = ojson::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = cfg;
  ojson recs = ojson::array();
  for (const auto& rec : r.records) {
    ojson o;
    o["quantity"] = rec.quantity;
    o["value"] = num(rec.value);
    o["std_error"] = num(rec.std_error);
    o["epsilon"] = opt_num(rec.epsilon);
    o["delta"] = opt_num(rec.delta);
    o["n_samples"] = rec.n_samples;
    o["seed"] = rec.seed;
    o["route"] = rec.route;
    recs.push_back(o);
  }
  j["records"] = recs;
  ojson diag = ojson::object();
  for (const auto& [k, v] : r.diagnostics) diag[k] = num(v);
  j["diagnostics"] = diag;
  if (!r.notes.empty()) j["notes"] = r.notes;
  if (r.seconds) j["timing"] = ojson{{"seconds", *r.seconds}};
  return j.dump(2) + "\n";
}

Report parse_report_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    Report r;
    r.experiment = j.at("experiment").get<std::string>();
    r.version = j.at("version").get<std::string>();
    for (const auto& [k, v] : j.at("config").items()) r.config[k] = v.get<std::string>();
    for (const auto& o : j.at("records")) {
      Record rec;
      rec.quantity = o.at("quantity").get<std::string>();
      rec.value = get_num(o.at("value"));
      rec.std_error = get_num(o.at("std_error"));
      rec.epsilon = get_opt(o, "epsilon");
      rec.delta = get_opt(o, "delta");
      rec.n_samples = o.at("n_samples").get<std::size_t>();
      rec.seed = o.at("seed").get<std::uint64_t>();
      rec.route = o.at("route").get<std::string>();
      r.records.push_back(std::move(rec));
    }
    if (j.contains("diagnostics"))
      for (const auto& [k, v] : j.at("diagnostics").items()) r.diagnostics[k] = get_num(v);
    if (j.contains("notes")) r.notes = j.at("notes").get<std::vector<std::string>>();
    if (j.contains("timing")) r.seconds = j.at("timing").at("seconds").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string report_csv(const Report& r) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& rec : r.records) {
    out += csv_field(r.experiment) + "," + csv_field(rec.quantity) + ",";
    out += (rec.epsilon ? csv_num(*rec.epsilon) : "") + ",";
    out += (rec.delta ? csv_num(*rec.delta) : "") + ",";
    out += std::to_string(rec.n_samples) + "," + csv_num(rec.value) + "," + csv_num(rec.std_error) + ",";
    out += std::to_string(rec.seed) + "," + csv_field(rec.route) + "\n";
  }
  return out;
}

std::vector<DiffRow> report_diff(const Report& a, const Report& b) {
  if (a.experiment != b.experiment)
    throw ConfigError("cannot diff a '" + a.experiment + "' report against a '" + b.experiment + "' report");
  std::vector<DiffRow> rows;
  for (const auto& ra : a.records) {
    for (const auto& rb : b.records) {
      if (ra.quantity != rb.quantity || ra.route != rb.route || !same_opt(ra.epsilon, rb.epsilon) ||
          !same_opt(ra.delta, rb.delta))
        continue;
      DiffRow d;
      d.quantity = ra.quantity;
      d.route = ra.route;
      d.epsilon = ra.epsilon;
      d.delta = ra.delta;
      d.a = ra.value;
      d.b = rb.value;
      d.se_a = ra.std_error;
      d.se_b = rb.std_error;
      const double diff = ra.value - rb.value;
      const double se = std::hypot(ra.std_error, rb.std_error);
      if (diff == 0.0)
        d.z = 0.0;
      else
        d.z = se > 0.0 ? diff / se : std::copysign(std::numeric_limits<double>::infinity(), diff);
      d.flagged = !(std::abs(d.z) < 3.0);
      rows.push_back(d);
      break;
    }
  }
  return rows;
}

std::string diff_table(const std::vector<DiffRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "quantity" << std::setw(12) << "epsilon" << std::right
     << std::setw(16) << "a" << std::setw(16) << "b" << std::setw(10) << "z" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(28) << r.quantity << std::setw(12)
       << (r.epsilon ? csv_num(*r.epsilon) : "-") << std::right << std::setprecision(8)
       << std::setw(16) << r.a << std::setw(16) << r.b << std::setprecision(3) << std::setw(10) << r.z
       << (r.flagged ? "  *" : "") << "\n";
  }
  return os.str();
}

}  // namespace fracheat
