#include "io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scenario.hpp"

namespace spillfree::cli {

namespace fs = std::filesystem;

const char* kTimeSeriesHeader =
    "t,xi,w,f,V,E,W,mass,norm_X,h_left,h_right,h_min,h_max,dt";

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write to '" + tmp.string() + "'");
    out << content;
  }
  fs::rename(tmp, target);
}

std::string records_to_csv(const std::vector<StepRecord>& records) {
  std::string out(kTimeSeriesHeader);
  out += '\n';
  for (const StepRecord& r : records) {
    const double cols[14] = {r.t,    r.xi,     r.w,      r.f,     r.V,     r.E,    r.W,
                             r.mass, r.norm_X, r.h_left, r.h_right, r.h_min, r.h_max, r.dt};
    for (int i = 0; i < 14; ++i) {
      if (i) out += ',';
      out += format_double(cols[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<StepRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trajectory file '" + path + "' is empty");
  if (line != kTimeSeriesHeader)
    throw ConfigError("trajectory file '" + path + "' does not carry the expected header");
  std::vector<StepRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double cols[14];
    const char* cursor = line.c_str();
    for (int i = 0; i < 14; ++i) {
      char* end = nullptr;
      cols[i] = std::strtod(cursor, &end);
      if (end == cursor)
        throw ConfigError("malformed row in '" + path + "': " + line);
      cursor = end;
      if (i < 13) {
        if (*cursor != ',')
          throw ConfigError("malformed row in '" + path + "': " + line);
        ++cursor;
      }
    }
    StepRecord r;
    r.t = cols[0];
    r.xi = cols[1];
    r.w = cols[2];
    r.f = cols[3];
    r.V = cols[4];
    r.E = cols[5];
    r.W = cols[6];
    r.mass = cols[7];
    r.norm_X = cols[8];
    r.h_left = cols[9];
    r.h_right = cols[10];
    r.h_min = cols[11];
    r.h_max = cols[12];
    r.dt = cols[13];
    records.push_back(r);
  }
  return records;
}

std::string snapshot_to_csv(const Snapshot& snap, const Grid& grid) {
  std::string out = "x,h,v\n";
  // collocated at cell centers: levels are native there, velocities averaged
  for (int i = 0; i < grid.N; ++i) {
    out += format_double(grid.cell_centers(i));
    out += ',';
    out += format_double(snap.h(i));
    out += ',';
    out += format_double(0.5 * (snap.v(i) + snap.v(i + 1)));
    out += '\n';
  }
  return out;
}

std::string snapshot_filename(double t_requested) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "snapshot_%.6g.csv", t_requested);
  return buf;
}

nlohmann::json report_to_json(const CheckReport& r) {
  return {{"name", r.name},
          {"passed", r.passed},
          {"skipped", r.skipped},
          {"worst_violation", r.worst_violation},
          {"location", r.location},
          {"tolerance_used", r.tolerance_used},
          {"detail", r.detail}};
}

nlohmann::json constants_to_json(const DerivedConstants& d) {
  return {{"c", d.c},         {"R", d.R},           {"theta", d.theta},
          {"b", d.b},         {"eps_proof", d.eps_proof}, {"x_aux", d.x_aux},
          {"phi", d.phi},     {"zeta", d.zeta},     {"gamma", d.gamma},
          {"beta", d.beta},   {"omega", d.omega},   {"Gamma_r", d.Gamma_r},
          {"G1_r", d.G1_r},   {"G2_r", d.G2_r},     {"lambda", d.lambda},
          {"M", d.M}};
}

nlohmann::json gains_to_json(const Gains& g) {
  return {{"sigma", g.sigma}, {"q", g.q}, {"k", g.k}, {"r", g.r}};
}

nlohmann::json plan_to_json(const TransferPlan& plan) {
  return {{"gains", gains_to_json(plan.gains)},
          {"constants", constants_to_json(plan.constants)},
          {"T", plan.T},
          {"epsilon", plan.epsilon},
          {"xi0", plan.xi0},
          {"k_bound_gain", plan.k_bound_gain},
          {"k_bound_settle", plan.k_bound_settle}};
}

}  // namespace spillfree::cli
