#pragma once

// CSV and JSON persistence. CSV values are printed with 17 significant
// digits so that every double survives a write/read round trip.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "choquard/flow_oracle.hpp"
#include "choquard/linearization.hpp"
#include "choquard/shooting_solver.hpp"

namespace choquard {

inline constexpr int schema_version = 1;

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Short form of p for file names: 2, 2.05, 2.2.
inline std::string format_tag(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return columns[i];
    throw Error(ErrorCode::io, "CSV has no column '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << '\n';
  const std::size_t n = columns.empty() ? 0 : columns[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j)
      out << (j ? "," : "") << format_double(columns[j][i]);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, "empty CSV " + path.string());
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      t.header.push_back(cell);
    }
  }
  t.columns.resize(t.header.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= t.header.size())
        throw Error(ErrorCode::io, "too many fields on line " + std::to_string(row));
      try {
        t.columns[j].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::io, "bad number '" + cell + "' on line " +
                                       std::to_string(row));
      }
      ++j;
    }
    if (j != t.header.size())
      throw Error(ErrorCode::io, "wrong field count on line " + std::to_string(row));
  }
  return t;
}

inline void write_profile_csv(const std::filesystem::path& path,
                              const RadialProfile& q, const RadialProfile& a) {
  const auto r = q.grid().nodes();
  write_csv(path, {"r", "Q", "A"},
            {std::vector<double>(r.begin(), r.end()),
             std::vector<double>(q.values().begin(), q.values().end()),
             std::vector<double>(a.values().begin(), a.values().end())});
}

/// Reads the Q column (or the second column) of a profile CSV on its own grid.
inline RadialProfile read_profile_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  if (t.header.size() < 2) throw Error(ErrorCode::io, "profile CSV needs r and Q");
  const auto& r = t.has("r") ? t.column("r") : t.columns[0];
  const auto& q = t.has("Q") ? t.column("Q") : t.columns[1];
  auto grid = make_grid_from_nodes(r);
  return RadialProfile(grid, q);
}

inline nlohmann::json to_json(const TailFit& t) {
  return {{"c0", t.c0},
          {"d0", t.d0},
          {"decay_rate", t.decay_rate},
          {"ra_flatness", t.ra_flatness},
          {"window_lo", t.window_lo},
          {"window_hi", t.window_hi}};
}

inline nlohmann::json to_json(const ShootingKey& k) {
  return {{"a0", k.a0},
          {"q0_lo", k.q0_lo},
          {"q0_hi", k.q0_hi},
          {"p", k.p},
          {"integrator_tol", k.integrator_tol},
          {"series_order", k.series_order},
          {"series_tol", k.series_tol},
          {"classify_threshold", k.classify_threshold}};
}

inline nlohmann::json grid_json(const RadialGrid& g) {
  return {{"kind", to_string(g.kind())},
          {"nodes", g.size()},
          {"r_min", g.r_min()},
          {"r_max", g.r_max()}};
}

/// Scalars of a solution; Q and A go to the CSV.
inline nlohmann::json to_json(const GroundStateSolution& gs) {
  nlohmann::json j;
  j["schema"] = schema_version;
  j["method"] = gs.method;
  j["p"] = gs.p;
  j["q0"] = gs.q0;
  j["a0"] = gs.a0;
  j["omega"] = gs.omega;
  j["sigma"] = gs.sigma;
  j["energy"] = gs.energy;
  j["report"] = gs.report;
  j["tail"] = to_json(gs.tail);
  j["grid"] = grid_json(gs.Q.grid());
  j["dilation"] = gs.dilation;
  j["resolved_radius"] = gs.resolved_radius;
  j["potential_consistency"] = gs.potential_consistency;
  if (gs.key) j["key"] = to_json(*gs.key);
  j["diagnostics"] = gs.diagnostics;
  return j;
}

inline nlohmann::json to_json(const KernelCandidate& c, bool with_tail = false,
                              const GroundStateSolution* gs = nullptr) {
  nlohmann::json j{{"theta", c.theta},
                   {"w0", c.w0},
                   {"b0", c.b0},
                   {"terminal_amplitude", c.terminal_amplitude},
                   {"growth_score", c.growth_score},
                   {"classification", to_string(c.classification)},
                   {"b_terminal", c.b_terminal},
                   {"window_end", c.window_end},
                   {"c1", c.c1},
                   {"d1", c.d1},
                   {"refined", c.refined}};
  if (with_tail && gs) {
    const auto t = tail_constants(c, *gs, gs->p);
    j["tail_constants"] = {{"c1_integral", t.c1_integral},
                           {"c1_green", t.c1_green},
                           {"c1_fit", t.c1_fit},
                           {"d1_integral", t.d1_integral},
                           {"d1_fit", t.d1_fit},
                           {"b_inf", t.b_inf},
                           {"envelope_constant", t.envelope_constant},
                           {"last_zero", t.last_zero}};
  }
  return j;
}

inline nlohmann::json to_json(const KernelScan& s, const GroundStateSolution& gs) {
  nlohmann::json j;
  j["schema"] = schema_version;
  j["p"] = gs.p;
  j["omega"] = gs.omega;
  j["dimension_estimate"] = s.dimension_estimate;
  j["strict_kernel_count"] = s.strict_kernel_count;
  j["window_end"] = s.window_end;
  j["angles"] = nlohmann::json::array();
  for (const auto& c : s.angles) j["angles"].push_back(to_json(c));
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : s.candidates) j["candidates"].push_back(to_json(c, true, &gs));
  j["warnings"] = s.warnings.messages;
  return j;
}

inline nlohmann::json to_json(const EnergyCurve& c) {
  return {{"schema", schema_version},
          {"K0", c.K0},
          {"first_derivative", c.first_derivative},
          {"second_derivative", c.second_derivative},
          {"third_derivative", c.third_derivative},
          {"fitted_order", c.fitted_order},
          {"max_discrepancy", c.max_discrepancy},
          {"max_literal_discrepancy", c.max_literal_discrepancy},
          {"cross_term", c.cross_term},
          {"eps_max", c.eps_max},
          {"max_mass_error", c.max_mass_error},
          {"n_eps", c.eps_values.size()}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, std::string("bad JSON: ") + e.what());
  }
}

}  // namespace choquard
