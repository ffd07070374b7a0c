#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fracheat/config.hpp"
#include "fracheat/report.hpp"

namespace fracheat {

// Substream id for (experiment kind, index); every random quantity of a run
// derives from the top-level seed and one of these.
std::uint64_t experiment_stream(const std::string& kind, std::uint64_t index);

// Validates the configuration against the regime rules of the target
// operation, then runs it. Throws ConfigError / RegimeError / DataError.
Report run_experiment(const ExperimentConfig& cfg);

// Command-line entry point. Returns the process exit code:
// 0 success, 1 configuration or I/O error, 2 regime violation.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fracheat
