#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fracheat {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct Record {
  std::string quantity;
  double value = 0.0;
  double std_error = 0.0;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::string route;
};

struct Report {
  std::string experiment;
  std::string version = kLibraryVersion;
  std::map<std::string, std::string> config;
  std::vector<Record> records;
  std::map<std::string, double> diagnostics;  // T0, t0(k), lambda0, grid sizes
  std::vector<std::string> notes;
  std::optional<double> seconds;  // only when timing is requested

  const Record* find(const std::string& quantity) const;
};

std::string report_json(const Report& r);
Report parse_report_json(const std::string& text);

// Fixed column order: experiment, quantity, epsilon, delta, n_samples, value, std_error, seed, route
std::string report_csv(const Report& r);
inline constexpr const char* kCsvHeader =
    "experiment,quantity,epsilon,delta,n_samples,value,std_error,seed,route";

struct DiffRow {
  std::string quantity;
  std::string route;
  std::optional<double> epsilon;
  std::optional<double> delta;
  double a = 0.0, b = 0.0;
  double se_a = 0.0, se_b = 0.0;
  double z = 0.0;  // (a - b) / sqrt(se_a^2 + se_b^2); 0 when equal
  bool flagged = false;  // |z| >= 3
};

// Records are matched on (quantity, route, epsilon, delta); kind mismatch is a ConfigError.
std::vector<DiffRow> report_diff(const Report& a, const Report& b);
std::string diff_table(const std::vector<DiffRow>& rows);

}  // namespace fracheat
