#include "tubeox/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <type_traits>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "tubeox/errors.hpp"
#include "tubeox/io.hpp"

namespace tubeox {

namespace pt = boost::property_tree;

void DimensionalInputs::check() const {
  const std::pair<const char*, double> all[] = {{"rho", rho}, {"mu", mu}, {"l", l},  {"u", u},      {"c", c},
                                                {"D", D},     {"D0", D0}, {"k", k}, {"rho0", rho0}};
  for (const auto& [name, v] : all)
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(fmt::format("dimensional.{} must be positive (got {})", name, v));
}

Dimensionless nondimensionalize(const DimensionalInputs& d) {
  d.check();
  Dimensionless out;
  out.re = d.rho * d.l * d.u / d.mu;
  out.pe = d.l * d.u / d.D;
  out.sh1 = d.k * d.l / d.D;
  out.d_ref = d.D * d.c / (d.rho0 * d.u);
  const double sh2 = (d.l / d.D) * (d.D0 / out.d_ref);
  out.sh2_inv = 1.0 / sh2;
  return out;
}

// ---------------------------------------------------------------- checks

void SimConfig::check() const {
  sized_geometry().check();
  if (!(re > 0)) throw ConfigError(fmt::format("flow.re must be positive (got {})", re));
  kinetics.check();
  if (!(tau > 0)) throw ConfigError(fmt::format("transport.tau must be positive (got {})", tau));
  if (!(t_end >= 0)) throw ConfigError(fmt::format("transport.t_end must be non-negative (got {})", t_end));
  const double n = std::round(t_end / tau);
  if (std::abs(n * tau - t_end) > 1e-12 * std::max(1.0, t_end))
    throw ConfigError(fmt::format("transport.tau = {} does not divide t_end = {}", tau, t_end));
  for (double t : observe.snapshot_times)
    if (t < 0 || t > t_end + 1e-12) throw ConfigError(fmt::format("snapshot time {} outside [0, {}]", t, t_end));
  if (observe.series_every < 1) throw ConfigError("output.series_every must be at least 1");
  if (observe.midline_samples < 2) throw ConfigError("output.midline_samples must be at least 2");
  for (int k : observe.profile_tubes)
    if (k < 1 || k > geometry.n_tubes) throw ConfigError(fmt::format("output.profile_tubes: no tube {}", k));
  if (solver.step.implicit_startup < 0) throw ConfigError("solver.implicit_startup must be non-negative");
  if (solver.step.max_iterations < 1 || solver.flow.max_iterations < 1)
    throw ConfigError("iteration limits must be at least 1");
}

BundleGeometry SimConfig::sized_geometry() const { return grid ? with_grid_level(geometry, *grid) : geometry; }

// ---------------------------------------------------------------- ini

namespace {

double to_double(const std::string& key, const std::string& text) {
  const std::string s = [&] {
    const auto b = text.find_first_not_of(" \t");
    const auto e = text.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : text.substr(b, e - b + 1);
  }();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  return v;
}

long to_integer(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, text));
  return static_cast<long>(v);
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (item.find_first_not_of(" \t") != std::string::npos) out.push_back(to_double(key, item));
  return out;
}

using Setter = std::function<void(SimConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"geometry",
       {
           {"arrangement", [](SimConfig& c, auto&, auto& v) { c.geometry.arrangement = arrangement_from_string(v); }},
           {"n_tubes", [](SimConfig& c, auto& k, auto& v) { c.geometry.n_tubes = static_cast<int>(to_integer(k, v)); }},
           {"pitch", [](SimConfig& c, auto& k, auto& v) { c.geometry.pitch = to_double(k, v); }},
           {"strip_width", [](SimConfig& c, auto& k, auto& v) { c.geometry.strip_width = to_double(k, v); }},
           {"upstream_margin", [](SimConfig& c, auto& k, auto& v) { c.geometry.upstream_margin = to_double(k, v); }},
           {"downstream_margin",
            [](SimConfig& c, auto& k, auto& v) { c.geometry.downstream_margin = to_double(k, v); }},
           {"grid",
            [](SimConfig& c, auto&, auto& v) {
              if (v == "custom")
                c.grid.reset();
              else
                c.grid = grid_level_from_string(v);
            }},
           {"boundary_h", [](SimConfig& c, auto& k, auto& v) { c.geometry.boundary_h = to_double(k, v); }},
           {"interior_h", [](SimConfig& c, auto& k, auto& v) { c.geometry.interior_h = to_double(k, v); }},
           {"grading", [](SimConfig& c, auto& k, auto& v) { c.geometry.grading = to_double(k, v); }},
           {"max_vertices",
            [](SimConfig& c, auto& k, auto& v) { c.geometry.max_vertices = static_cast<std::size_t>(to_integer(k, v)); }},
           {"seed",
            [](SimConfig& c, auto& k, auto& v) { c.geometry.seed = static_cast<std::uint64_t>(to_integer(k, v)); }},
           {"mesh", [](SimConfig& c, auto&, auto& v) { c.mesh_path = v; }},
       }},
      {"flow",
       {
           {"re", [](SimConfig& c, auto& k, auto& v) { c.re = to_double(k, v); }},
           {"rtol", [](SimConfig& c, auto& k, auto& v) { c.solver.flow.rtol = to_double(k, v); }},
           {"atol", [](SimConfig& c, auto& k, auto& v) { c.solver.flow.atol = to_double(k, v); }},
           {"max_iterations",
            [](SimConfig& c, auto& k, auto& v) { c.solver.flow.max_iterations = static_cast<int>(to_integer(k, v)); }},
       }},
      {"transport",
       {
           {"pe", [](SimConfig& c, auto& k, auto& v) { c.kinetics.pe = to_double(k, v); }},
           {"sh1", [](SimConfig& c, auto& k, auto& v) { c.kinetics.sh1 = to_double(k, v); }},
           {"sh2_inv", [](SimConfig& c, auto& k, auto& v) { c.kinetics.sh2_inv = to_double(k, v); }},
           {"tau", [](SimConfig& c, auto& k, auto& v) { c.tau = to_double(k, v); }},
           {"t_end", [](SimConfig& c, auto& k, auto& v) { c.t_end = to_double(k, v); }},
       }},
      {"solver",
       {
           {"step_atol", [](SimConfig& c, auto& k, auto& v) { c.solver.step.atol = to_double(k, v); }},
           {"step_rtol", [](SimConfig& c, auto& k, auto& v) { c.solver.step.rtol = to_double(k, v); }},
           {"step_max_iterations",
            [](SimConfig& c, auto& k, auto& v) { c.solver.step.max_iterations = static_cast<int>(to_integer(k, v)); }},
           {"implicit_startup",
            [](SimConfig& c, auto& k, auto& v) { c.solver.step.implicit_startup = static_cast<int>(to_integer(k, v)); }},
           {"linear",
            [](SimConfig& c, auto& k, auto& v) {
              if (v == "lu")
                c.solver.step.linear = LinearMethod::Lu;
              else if (v == "gmres")
                c.solver.step.linear = LinearMethod::Gmres;
              else
                throw ConfigError(fmt::format("{}: expected 'lu' or 'gmres', got '{}'", k, v));
            }},
       }},
      {"output",
       {
           {"dir", [](SimConfig& c, auto&, auto& v) { c.output_dir = v; }},
           {"snapshot_times", [](SimConfig& c, auto& k, auto& v) { c.observe.snapshot_times = to_list(k, v); }},
           {"series_every",
            [](SimConfig& c, auto& k, auto& v) { c.observe.series_every = static_cast<int>(to_integer(k, v)); }},
           {"profile_tubes",
            [](SimConfig& c, auto& k, auto& v) {
              c.observe.profile_tubes.clear();
              for (double t : to_list(k, v)) {
                if (t != std::floor(t)) throw ConfigError(fmt::format("{}: {} is not a tube index", k, t));
                c.observe.profile_tubes.push_back(static_cast<int>(t));
              }
            }},
           {"midline_samples",
            [](SimConfig& c, auto& k, auto& v) { c.observe.midline_samples = static_cast<int>(to_integer(k, v)); }},
       }},
  };
  return table;
}

}  // namespace

SimConfig parse_config(std::istream& in, SimConfig base) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("line {}: {}", e.line(), e.message()));
  }
  SimConfig c = std::move(base);
  std::optional<DimensionalInputs> dim;
  std::set<std::string> explicit_groups;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(fmt::format("key '{}' outside a section", section));
    if (section == "dimensional") {
      dim.emplace();
      const std::map<std::string, double DimensionalInputs::*> fields = {
          {"rho", &DimensionalInputs::rho}, {"mu", &DimensionalInputs::mu}, {"l", &DimensionalInputs::l},
          {"u", &DimensionalInputs::u},     {"c", &DimensionalInputs::c},   {"D", &DimensionalInputs::D},
          {"D0", &DimensionalInputs::D0},   {"k", &DimensionalInputs::k},   {"rho0", &DimensionalInputs::rho0}};
      for (const auto& [key, val] : body) {
        auto it = fields.find(key);
        if (it == fields.end()) throw ConfigError(fmt::format("unknown key dimensional.{}", key));
        (*dim).*(it->second) = to_double("dimensional." + key, val.data());
      }
      continue;
    }
    auto sec = setters().find(section);
    if (sec == setters().end()) throw ConfigError(fmt::format("unknown section [{}]", section));
    for (const auto& [key, val] : body) {
      auto it = sec->second.find(key);
      if (it == sec->second.end()) throw ConfigError(fmt::format("unknown key {}.{}", section, key));
      const std::string full = section + "." + key;
      try {
        it->second(c, full, val.data());
      } catch (const GeometryError& e) {
        throw ConfigError(fmt::format("{}: {}", full, e.what()));
      }
      if (full == "flow.re" || full == "transport.pe" || full == "transport.sh1" || full == "transport.sh2_inv")
        explicit_groups.insert(full);
      if (full == "geometry.boundary_h" || full == "geometry.interior_h") {
        if (!body.get_optional<std::string>("grid")) c.grid.reset();
      }
    }
  }
  if (dim) {
    if (!explicit_groups.empty())
      throw ConfigError(fmt::format("[dimensional] conflicts with explicit {}", fmt::join(explicit_groups, ", ")));
    const Dimensionless g = nondimensionalize(*dim);
    c.re = g.re;
    c.kinetics.pe = g.pe;
    c.kinetics.sh1 = g.sh1;
    c.kinetics.sh2_inv = g.sh2_inv;
  }
  c.check();
  return c;
}

SimConfig load_config(const std::string& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    return parse_config(in, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_config(const SimConfig& c, std::ostream& out) {
  auto num = [](double v) { return format_number(v); };
  auto list = [&](const auto& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if constexpr (std::is_integral_v<std::decay_t<decltype(xs[i])>>)
        s += (i ? ", " : "") + std::to_string(xs[i]);
      else
        s += (i ? ", " : "") + num(xs[i]);
    }
    return s;
  };
  const BundleGeometry& g = c.geometry;
  out << "[geometry]\n";
  out << "arrangement = " << to_string(g.arrangement) << "\n";
  out << "n_tubes = " << g.n_tubes << "\n";
  out << "pitch = " << num(g.pitch) << "\n";
  out << "strip_width = " << num(g.strip_width) << "\n";
  out << "upstream_margin = " << num(g.upstream_margin) << "\n";
  out << "downstream_margin = " << num(g.downstream_margin) << "\n";
  if (c.grid) {
    out << "grid = " << to_string(*c.grid) << "\n";
  } else {
    out << "grid = custom\n";
    out << "boundary_h = " << num(g.boundary_h) << "\n";
    out << "interior_h = " << num(g.interior_h) << "\n";
  }
  out << "grading = " << num(g.grading) << "\n";
  out << "max_vertices = " << g.max_vertices << "\n";
  out << "seed = " << g.seed << "\n";
  if (!c.mesh_path.empty()) out << "mesh = " << c.mesh_path << "\n";
  out << "\n[flow]\n";
  out << "re = " << num(c.re) << "\n";
  out << "rtol = " << num(c.solver.flow.rtol) << "\n";
  out << "atol = " << num(c.solver.flow.atol) << "\n";
  out << "max_iterations = " << c.solver.flow.max_iterations << "\n";
  out << "\n[transport]\n";
  out << "pe = " << num(c.kinetics.pe) << "\n";
  out << "sh1 = " << num(c.kinetics.sh1) << "\n";
  out << "sh2_inv = " << num(c.kinetics.sh2_inv) << "\n";
  out << "tau = " << num(c.tau) << "\n";
  out << "t_end = " << num(c.t_end) << "\n";
  out << "\n[solver]\n";
  out << "step_atol = " << num(c.solver.step.atol) << "\n";
  out << "step_rtol = " << num(c.solver.step.rtol) << "\n";
  out << "step_max_iterations = " << c.solver.step.max_iterations << "\n";
  out << "implicit_startup = " << c.solver.step.implicit_startup << "\n";
  out << "linear = " << (c.solver.step.linear == LinearMethod::Lu ? "lu" : "gmres") << "\n";
  out << "\n[output]\n";
  out << "dir = " << c.output_dir << "\n";
  out << "snapshot_times = " << list(c.observe.snapshot_times) << "\n";
  out << "series_every = " << c.observe.series_every << "\n";
  out << "profile_tubes = " << list(c.observe.profile_tubes) << "\n";
  out << "midline_samples = " << c.observe.midline_samples << "\n";
}

// ---------------------------------------------------------------- flow cache

std::string mesh_checksum(const Mesh& mesh) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const Vec2& v : mesh.vertices) {
    mix(&v.x, sizeof v.x);
    mix(&v.y, sizeof v.y);
  }
  for (const auto& t : mesh.triangles) mix(t.data(), sizeof t);
  return fmt::format("{:016x}", h);
}

void save_flow(const std::string& path, const Mesh& mesh, const FlowField& flow) {
  nlohmann::json j;
  j["format"] = "tubeox-flow-1";
  j["re"] = flow.re;
  j["mesh_checksum"] = mesh_checksum(mesh);
  j["u"] = std::vector<double>(flow.u.data(), flow.u.data() + flow.u.size());
  j["p"] = std::vector<double>(flow.p.data(), flow.p.data() + flow.p.size());
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("write to '" + path + "' failed");
}

FlowField load_flow(const std::string& path, const Mesh& mesh) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open flow cache '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("'{}' is not a flow cache: {}", path, e.what()));
  }
  if (j.value("format", "") != "tubeox-flow-1") throw IoError("'" + path + "' is not a flow cache");
  if (j.value("mesh_checksum", "") != mesh_checksum(mesh))
    throw IoError("flow cache '" + path + "' was computed on a different mesh");
  const auto u = j.at("u").get<std::vector<double>>();
  const auto p = j.at("p").get<std::vector<double>>();
  FlowField f;
  f.re = j.at("re").get<double>();
  f.u = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
  f.p = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  return f;
}

}  // namespace tubeox
