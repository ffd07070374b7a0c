#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fracheat {

// Experiment configuration: flat key=value pairs with dotted sections
// ("moment.k"), keyed by experiment kind.
class ExperimentConfig {
 public:
  // kinds: localtime, alpha, chaos, moment (alias fk-moment), field, bounds, crosscheck
  explicit ExperimentConfig(const std::string& kind);

  static std::string canonical_kind(const std::string& kind);
  static const std::vector<std::string>& kinds();

  const std::string& kind() const { return kind_; }

  // Short names resolve to the unique known key with that last component,
  // preferring global keys; unknown keys are a ConfigError.
  std::string resolve_key(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& explicit_values() const { return values_; }

  // Explicit value or the default for this kind.
  std::string get(const std::string& key) const;
  double real(const std::string& key) const;
  std::optional<double> opt_real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  // Every key used by this kind with its effective value.
  std::map<std::string, std::string> effective() const;
  std::vector<std::string> known_keys() const;

  // "experiment = kind" followed by the explicit keys, sorted.
  std::string serialize() const;
  // Config text: "key = value" lines, "[section]" headers, '#' comments.
  static ExperimentConfig parse(const std::string& text,
                                const std::optional<std::string>& kind = std::nullopt);
  // Applies the keys of config text on top of this configuration.
  void merge_text(const std::string& text);

  bool operator==(const ExperimentConfig& o) const {
    return kind_ == o.kind_ && values_ == o.values_;
  }

 private:
  std::string kind_;
  std::map<std::string, std::string> values_;
};

std::vector<double> parse_list(const std::string& text);
std::string format_double(double v);

}  // namespace fracheat
