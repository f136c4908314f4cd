#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace semex {

enum class Method { full, mi_only, nearest_frontier };

inline Method parse_method(const std::string& s) {
  if (s == "full") return Method::full;
  if (s == "mi-only") return Method::mi_only;
  if (s == "nearest-frontier") return Method::nearest_frontier;
  throw std::invalid_argument("unknown method '" + s + "' (full, mi-only, nearest-frontier)");
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::full: return "full";
    case Method::mi_only: return "mi-only";
    case Method::nearest_frontier: return "nearest-frontier";
  }
  return "?";
}

/// Every tunable of a run, with defaults. Round-trips losslessly through the
/// flat key=value config format.
struct RunConfig {
  std::string world;
  std::string method = "full";
  std::uint64_t seed = 0;
  int steps = 1500;
  std::string out = "out";

  int sensor_beams = 36;
  double sensor_fov = 2.0 * M_PI;
  double sensor_max_range = 4.0;
  double sensor_sigma_range = 0.02;
  double sensor_label_noise = 0.1;

  double odom_sigma_xy = 0.01;
  double odom_sigma_theta_deg = 0.5;
  double loop_sigma_xy = 0.02;
  double loop_sigma_theta_deg = 1.0;

  double hit_logodds = 1.386;
  double miss_logodds = 0.847;
  double range_discretization = 0.125;

  std::string norm_p = "2";
  double gamma_lc = 2.0;
  double node_spacing = 0.5;
  double loop_radius = 1.0;
  int loop_min_separation = 10;

  double free_threshold = 0.6;
  double occ_threshold = 0.6;
  int min_frontier_size = 3;
  int clearance_cells = 1;
  int blacklist_merge_cells = 2;
  int blacklist_expire_replans = 0;  // 0 = never within a run

  int replan_every = 40;
  double speed = 0.25;
  double mi_epsilon = 1e-9;
};

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct ConfigField {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  auto str_field = [](std::string RunConfig::*member) {
    return ConfigField{[member](const RunConfig& c) { return c.*member; },
                       [member](RunConfig& c, const std::string& v) { c.*member = v; }};
  };
  auto int_field = [](int RunConfig::*member) {
    return ConfigField{
        [member](const RunConfig& c) { return std::to_string(c.*member); },
        [member](RunConfig& c, const std::string& v) {
          std::size_t used = 0;
          c.*member = std::stoi(v, &used);
          if (used != v.size()) throw std::invalid_argument("not an integer: " + v);
        }};
  };
  auto u64_field = [](std::uint64_t RunConfig::*member) {
    return ConfigField{
        [member](const RunConfig& c) { return std::to_string(c.*member); },
        [member](RunConfig& c, const std::string& v) {
          std::size_t used = 0;
          c.*member = std::stoull(v, &used);
          if (used != v.size()) throw std::invalid_argument("not an integer: " + v);
        }};
  };
  auto dbl_field = [](double RunConfig::*member) {
    return ConfigField{
        [member](const RunConfig& c) { return format_double(c.*member); },
        [member](RunConfig& c, const std::string& v) {
          std::size_t used = 0;
          c.*member = std::stod(v, &used);
          if (used != v.size()) throw std::invalid_argument("not a number: " + v);
        }};
  };

  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      {"world", str_field(&RunConfig::world)},
      {"method", str_field(&RunConfig::method)},
      {"seed", u64_field(&RunConfig::seed)},
      {"steps", int_field(&RunConfig::steps)},
      {"out", str_field(&RunConfig::out)},
      {"sensor_beams", int_field(&RunConfig::sensor_beams)},
      {"sensor_fov", dbl_field(&RunConfig::sensor_fov)},
      {"sensor_max_range", dbl_field(&RunConfig::sensor_max_range)},
      {"sensor_sigma_range", dbl_field(&RunConfig::sensor_sigma_range)},
      {"sensor_label_noise", dbl_field(&RunConfig::sensor_label_noise)},
      {"odom_sigma_xy", dbl_field(&RunConfig::odom_sigma_xy)},
      {"odom_sigma_theta_deg", dbl_field(&RunConfig::odom_sigma_theta_deg)},
      {"loop_sigma_xy", dbl_field(&RunConfig::loop_sigma_xy)},
      {"loop_sigma_theta_deg", dbl_field(&RunConfig::loop_sigma_theta_deg)},
      {"hit_logodds", dbl_field(&RunConfig::hit_logodds)},
      {"miss_logodds", dbl_field(&RunConfig::miss_logodds)},
      {"range_discretization", dbl_field(&RunConfig::range_discretization)},
      {"norm_p", str_field(&RunConfig::norm_p)},
      {"gamma_lc", dbl_field(&RunConfig::gamma_lc)},
      {"node_spacing", dbl_field(&RunConfig::node_spacing)},
      {"loop_radius", dbl_field(&RunConfig::loop_radius)},
      {"loop_min_separation", int_field(&RunConfig::loop_min_separation)},
      {"free_threshold", dbl_field(&RunConfig::free_threshold)},
      {"occ_threshold", dbl_field(&RunConfig::occ_threshold)},
      {"min_frontier_size", int_field(&RunConfig::min_frontier_size)},
      {"clearance_cells", int_field(&RunConfig::clearance_cells)},
      {"blacklist_merge_cells", int_field(&RunConfig::blacklist_merge_cells)},
      {"blacklist_expire_replans", int_field(&RunConfig::blacklist_expire_replans)},
      {"replan_every", int_field(&RunConfig::replan_every)},
      {"speed", dbl_field(&RunConfig::speed)},
      {"mi_epsilon", dbl_field(&RunConfig::mi_epsilon)},
  };
  return fields;
}

}  // namespace detail

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : detail::config_fields()) {
    if (name == key) {
      try {
        field.set(cfg, value);
      } catch (const std::exception& e) {
        throw std::invalid_argument("config key '" + key + "': " + e.what());
      }
      return;
    }
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

inline std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  for (const auto& [name, field] : detail::config_fields())
    os << name << " = " << field.get(cfg) << "\n";
  return os.str();
}

/// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
inline void parse_config(RunConfig& cfg, std::istream& in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto strip = [](const std::string& s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    set_config_value(cfg, strip(stripped.substr(0, eq)), strip(stripped.substr(eq + 1)));
  }
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  parse_config(cfg, in);
}

}  // namespace semex
