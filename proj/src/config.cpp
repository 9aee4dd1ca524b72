#include "activerank/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>

namespace activerank {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

Error bad_value(std::string_view key, std::string_view value, const char* want) {
  return Error(ErrorCode::invalid_argument,
               "bad value '" + std::string(value) + "' for " + std::string(key) +
                   " (expected " + want + ")");
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double parse_real(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE ||
      !std::isfinite(v)) {
    throw bad_value(key, value, "a finite real");
  }
  return v;
}

long long parse_integer(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw bad_value(key, value, "an integer");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw bad_value(key, value, "true or false");
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::parse,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorCode::parse,
                  "config line " + std::to_string(line_no) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw Error(ErrorCode::parse, "config line " + std::to_string(line_no) +
                                        ": repeated key " + key);
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config " + path);
  return parse_key_values(in);
}

bool apply_engine_setting(EngineConfig& cfg, std::string_view key,
                          std::string_view value) {
  const auto non_negative_int = [&] {
    const auto v = parse_integer(key, value);
    if (v < 0 || v > 1'000'000'000) throw bad_value(key, value, "an integer >= 0");
    return int(v);
  };
  if (key == "warm_start_m") {
    cfg.warm_start_m = non_negative_int();
  } else if (key == "active_steps_t") {
    cfg.active_steps_t = non_negative_int();
  } else if (key == "alpha") {
    cfg.alpha = parse_real(key, value);
  } else if (key == "kernel") {
    cfg.kernel.family = parse_kernel_family(value);
  } else if (key == "length_scale") {
    cfg.kernel.length_scale = parse_real(key, value);
  } else if (key == "output_scale") {
    cfg.kernel.output_scale = parse_real(key, value);
  } else if (key == "nu") {
    cfg.kernel.nu = parse_real(key, value);
  } else if (key == "acquisition") {
    cfg.acquisition.kind = parse_acquisition_kind(value);
  } else if (key == "beta") {
    cfg.acquisition.beta = parse_real(key, value);
  } else if (key == "xi") {
    cfg.acquisition.xi = parse_real(key, value);
  } else if (key == "ts_candidate_cap") {
    cfg.acquisition.ts_candidate_cap = std::size_t(non_negative_int());
  } else if (key == "seed") {
    const std::string s(value);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s.front() == '-' || end != s.c_str() + s.size() ||
        errno == ERANGE) {
      throw bad_value(key, value, "an unsigned integer");
    }
    cfg.acquisition.rng_seed = v;
  } else if (key == "include_query_in_best") {
    cfg.acquisition.include_query_in_best = parse_bool(key, value);
  } else if (key == "scoring_mode") {
    cfg.scoring_mode = parse_scoring_mode(value);
  } else if (key == "labels") {
    cfg.labels.k = non_negative_int();
  } else if (key == "optimize_hyperparameters") {
    cfg.optimize_hyperparameters = parse_bool(key, value);
  } else if (key == "normalize") {
    cfg.normalize = parse_bool(key, value);
  } else if (key == "hyperopt_learning_rate") {
    cfg.hyperopt.learning_rate = parse_real(key, value);
  } else if (key == "hyperopt_max_steps") {
    cfg.hyperopt.max_steps = non_negative_int();
  } else if (key == "hyperopt_grad_tolerance") {
    cfg.hyperopt.grad_tolerance = parse_real(key, value);
  } else {
    return false;
  }
  return true;
}

KeyValues engine_settings(const EngineConfig& cfg) {
  return {
      {"warm_start_m", std::to_string(cfg.warm_start_m)},
      {"active_steps_t", std::to_string(cfg.active_steps_t)},
      {"alpha", real_text(cfg.alpha)},
      {"kernel", std::string(to_string(cfg.kernel.family))},
      {"length_scale", real_text(cfg.kernel.length_scale)},
      {"output_scale", real_text(cfg.kernel.output_scale)},
      {"nu", real_text(cfg.kernel.nu)},
      {"acquisition", std::string(to_string(cfg.acquisition.kind))},
      {"beta", real_text(cfg.acquisition.beta)},
      {"xi", real_text(cfg.acquisition.xi)},
      {"ts_candidate_cap", std::to_string(cfg.acquisition.ts_candidate_cap)},
      {"seed", std::to_string(cfg.acquisition.rng_seed)},
      {"include_query_in_best", cfg.acquisition.include_query_in_best ? "true" : "false"},
      {"scoring_mode", std::string(to_string(cfg.scoring_mode))},
      {"labels", std::to_string(cfg.labels.k)},
      {"optimize_hyperparameters", cfg.optimize_hyperparameters ? "true" : "false"},
      {"normalize", cfg.normalize ? "true" : "false"},
      {"hyperopt_learning_rate", real_text(cfg.hyperopt.learning_rate)},
      {"hyperopt_max_steps", std::to_string(cfg.hyperopt.max_steps)},
      {"hyperopt_grad_tolerance", real_text(cfg.hyperopt.grad_tolerance)},
  };
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

}  // namespace activerank
