#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "activerank/engine.hpp"

namespace activerank {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Reads "key = value" lines. Blank lines and lines starting with '#' are
/// skipped; a repeated key is an error.
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

/// Applies one setting to an EngineConfig. Returns false for keys that are
/// not engine settings; throws Error(invalid_argument) for bad values.
///
/// Keys: warm_start_m, active_steps_t, alpha, kernel, length_scale,
/// output_scale, nu, acquisition, beta, xi, ts_candidate_cap, seed,
/// include_query_in_best, scoring_mode, labels, optimize_hyperparameters,
/// normalize, hyperopt_learning_rate, hyperopt_max_steps,
/// hyperopt_grad_tolerance.
bool apply_engine_setting(EngineConfig& cfg, std::string_view key,
                          std::string_view value);

/// Every engine setting as key/value pairs; feeding them back through
/// apply_engine_setting reproduces the config.
KeyValues engine_settings(const EngineConfig& cfg);

void write_key_values(std::ostream& out, const KeyValues& kv);

// Value parsers shared with the CLI; errors name the key.
double parse_real(std::string_view key, std::string_view value);
long long parse_integer(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);

}  // namespace activerank
