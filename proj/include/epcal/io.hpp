#pragma once

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "epcal/hmc.hpp"
#include "epcal/laplacian.hpp"
#include "epcal/likelihood.hpp"
#include "epcal/mesh.hpp"
#include "epcal/posterior.hpp"
#include "epcal/summary.hpp"
#include "epcal/surrogate.hpp"

namespace epcal {

/// FNV-1a 64-bit hash, used to stamp outputs with the config they came from.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string config_hash(const std::string& config_text) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(config_text));
  return buf;
}

namespace detail {

/// Shortest round-trip decimal representation; deterministic across runs.
inline std::string fmt(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open for reading: " + path);
  return in;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Generic CSV table writer: hash comment, header row, then rows of values
/// formatted with shortest round-trip precision.
inline void write_csv(const std::string& path, const std::string& hash,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  auto out = detail::open_out(path);
  out << "# config_hash=" << hash << "\n";
  for (size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    require(row.size() == header.size(), "CSV row width mismatch");
    for (size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << detail::fmt(row[i]);
    out << "\n";
  }
  require(out.good(), "write failed: " + path);
}

inline void write_field_csv(const std::string& path, const std::string& hash,
                            const Eigen::VectorXd& field) {
  std::vector<std::vector<double>> rows;
  rows.reserve(field.size());
  for (int v = 0; v < field.size(); ++v)
    rows.push_back({static_cast<double>(v), field[v]});
  write_csv(path, hash, {"vertex_id", "value"}, rows);
}

inline Eigen::VectorXd read_field_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::vector<std::pair<int, double>> entries;
  int max_id = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("vertex_id", 0) == 0) continue;
    const auto f = detail::split_csv_line(line);
    require(f.size() == 2, "bad field CSV row: " + line);
    const int id = std::stoi(f[0]);
    entries.emplace_back(id, std::stod(f[1]));
    max_id = std::max(max_id, id);
  }
  require(max_id >= 0, "empty field CSV: " + path);
  Eigen::VectorXd field = Eigen::VectorXd::Constant(
      max_id + 1, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [id, v] : entries) field[id] = v;
  return field;
}

inline void write_trace_csv(const std::string& path, const std::string& hash,
                            const ActionPotentialTrace& trace) {
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.time_ms.size());
  for (size_t i = 0; i < trace.time_ms.size(); ++i)
    rows.push_back({trace.time_ms[i], trace.vm[i]});
  write_csv(path, hash, {"time_ms", "vm"}, rows);
}

inline void write_training_csv(const std::string& path,
                               const std::string& hash, const ErpTable& table) {
  auto out = detail::open_out(path);
  out << "# config_hash=" << hash << "\n";
  out << "cvmax,tau_in,tau_out,tau_open,apd_max,erp_s2,erp_s3\n";
  for (const auto& r : table) {
    out << detail::fmt(r.cv_max) << ',' << detail::fmt(r.tau_in) << ','
        << detail::fmt(r.tau_out) << ',' << detail::fmt(r.tau_open) << ','
        << detail::fmt(r.apd_max) << ',';
    out << (r.erp_s2 ? detail::fmt(*r.erp_s2) : std::string("nan")) << ',';
    out << (r.erp_s3 ? detail::fmt(*r.erp_s3) : std::string("nan")) << "\n";
  }
  require(out.good(), "write failed: " + path);
}

inline ErpTable read_training_csv(const std::string& path) {
  auto in = detail::open_in(path);
  ErpTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("cvmax", 0) == 0)
      continue;
    const auto f = detail::split_csv_line(line);
    require(f.size() == 7, "bad training CSV row: " + line);
    ErpRow r;
    r.cv_max = std::stod(f[0]);
    r.tau_in = std::stod(f[1]);
    r.tau_out = std::stod(f[2]);
    r.tau_open = std::stod(f[3]);
    r.apd_max = std::stod(f[4]);
    const double e2 = std::stod(f[5]), e3 = std::stod(f[6]);
    if (std::isfinite(e2)) r.erp_s2 = e2;
    if (std::isfinite(e3)) r.erp_s3 = e3;
    table.push_back(r);
  }
  return table;
}

inline void write_observations_csv(const std::string& path,
                                   const std::string& hash,
                                   const std::vector<ERPObservation>& obs) {
  auto out = detail::open_out(path);
  out << "# config_hash=" << hash << "\n";
  out << "vertex_id,kind,interval_lo_ms,interval_hi_ms,resolution_ms\n";
  for (const auto& o : obs) {
    out << o.vertex << ','
        << (o.kind == ERPObservation::Kind::S2 ? "S2" : "S3") << ','
        << detail::fmt(o.interval_lo_ms) << ',' << detail::fmt(o.interval_hi_ms)
        << ',' << detail::fmt(o.resolution_ms) << "\n";
  }
  require(out.good(), "write failed: " + path);
}

inline std::vector<ERPObservation> read_observations_csv(
    const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<ERPObservation> obs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("vertex_id", 0) == 0)
      continue;
    const auto f = detail::split_csv_line(line);
    require(f.size() == 5, "bad observations CSV row: " + line);
    ERPObservation o;
    o.vertex = std::stoi(f[0]);
    require(f[1] == "S2" || f[1] == "S3",
            "observation kind must be S2 or S3, got: " + f[1]);
    o.kind = f[1] == "S2" ? ERPObservation::Kind::S2 : ERPObservation::Kind::S3;
    o.interval_lo_ms = std::stod(f[2]);
    o.interval_hi_ms = std::stod(f[3]);
    o.resolution_ms = std::stod(f[4]);
    obs.push_back(o);
  }
  return obs;
}

inline void write_diagnostics_csv(const std::string& path,
                                  const std::string& hash,
                                  const PosteriorSamples& samples,
                                  const std::vector<std::string>& names) {
  auto out = detail::open_out(path);
  out << "# config_hash=" << hash << "\n";
  out << "parameter,rhat\n";
  for (int i = 0; i < samples.rhat.size(); ++i) {
    const std::string name =
        i < static_cast<int>(names.size()) ? names[i]
                                           : "p" + std::to_string(i);
    out << name << ',' << detail::fmt(samples.rhat[i]) << "\n";
  }
  out << "mean_accept," << detail::fmt(samples.mean_accept) << "\n";
  out << "divergences," << samples.divergences << "\n";
  require(out.good(), "write failed: " + path);
}

inline void write_validation_csv(const std::string& path,
                                 const std::string& hash,
                                 const std::vector<ValidationRow>& rows) {
  auto out = detail::open_out(path);
  out << "# config_hash=" << hash << "\n";
  out << "lengthscale,n_observations,resolution_ms,replicate,design,"
         "rmse_s2,rmse_s3,error\n";
  for (const auto& r : rows) {
    out << detail::fmt(r.lengthscale) << ',' << r.n_observations << ','
        << detail::fmt(r.resolution_ms) << ',' << r.replicate << ','
        << r.design << ',' << detail::fmt(r.rmse_s2) << ','
        << detail::fmt(r.rmse_s3) << ',' << r.error << "\n";
  }
  require(out.good(), "write failed: " + path);
}

// ---------------------------------------------------------------------------
// VTK legacy ASCII polydata
// ---------------------------------------------------------------------------

/// Write mesh + named per-vertex scalar arrays. The header comment line
/// carries the config hash; no timestamps, so reruns are byte-identical.
inline void write_vtk(const std::string& path, const std::string& hash,
                      const TriMesh& mesh,
                      const std::vector<std::pair<std::string, Eigen::VectorXd>>&
                          scalars) {
  auto out = detail::open_out(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "config_hash=" << hash << "\n";
  out << "ASCII\nDATASET POLYDATA\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (const auto& p : mesh.vertices)
    out << detail::fmt(p[0]) << ' ' << detail::fmt(p[1]) << ' '
        << detail::fmt(p[2]) << "\n";
  out << "POLYGONS " << mesh.n_triangles() << ' ' << 4 * mesh.n_triangles()
      << "\n";
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << "\n";
  if (!scalars.empty()) {
    out << "POINT_DATA " << mesh.n_vertices() << "\n";
    for (const auto& [name, field] : scalars) {
      require(field.size() == mesh.n_vertices(),
              "scalar array size mismatch: " + name);
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int v = 0; v < field.size(); ++v)
        out << detail::fmt(field[v]) << "\n";
    }
  }
  require(out.good(), "write failed: " + path);
}

/// Minimal reader for files produced by write_vtk (and similar legacy
/// ASCII polydata): points, triangles, named point scalars.
struct VtkData {
  TriMesh mesh;
  std::map<std::string, Eigen::VectorXd> scalars;
};

inline VtkData read_vtk(const std::string& path) {
  auto in = detail::open_in(path);
  VtkData data;
  std::string tok;
  long n_points = 0;
  while (in >> tok) {
    if (tok == "POINTS") {
      std::string type;
      in >> n_points >> type;
      data.mesh.vertices.resize(n_points);
      for (long i = 0; i < n_points; ++i)
        in >> data.mesh.vertices[i][0] >> data.mesh.vertices[i][1] >>
            data.mesh.vertices[i][2];
    } else if (tok == "POLYGONS") {
      long n_poly = 0, n_ints = 0;
      in >> n_poly >> n_ints;
      data.mesh.triangles.reserve(n_poly);
      for (long i = 0; i < n_poly; ++i) {
        int k = 0;
        in >> k;
        require(k == 3, "non-triangle polygon in VTK file");
        std::array<int, 3> t{};
        in >> t[0] >> t[1] >> t[2];
        data.mesh.triangles.push_back(t);
      }
    } else if (tok == "SCALARS") {
      std::string name, type;
      in >> name >> type;
      int comps = 1;
      if (in.peek() != '\n') {
        std::string rest;
        std::getline(in, rest);
        if (!rest.empty()) {
          std::istringstream rs(rest);
          rs >> comps;
          if (rs.fail()) comps = 1;
        }
      }
      require(comps == 1, "only single-component scalars supported");
      std::string lut, lut_name;
      in >> lut >> lut_name;  // LOOKUP_TABLE default
      Eigen::VectorXd field(n_points);
      for (long i = 0; i < n_points; ++i) in >> field[i];
      data.scalars[name] = field;
    }
  }
  require(n_points > 0, "no POINTS section in VTK file: " + path);
  data.mesh.labels.assign(data.mesh.triangles.size(), 0);
  return data;
}

// ---------------------------------------------------------------------------
// Versioned artifacts
// ---------------------------------------------------------------------------

inline void save_eigenbasis(const std::string& path, const std::string& hash,
                            const Eigenbasis& basis) {
  auto out = detail::open_out(path);
  out << "epcal-eigenbasis v1\n";
  out << "config_hash=" << hash << "\n";
  out << basis.n_vertices() << ' ' << basis.K() << "\n";
  for (int k = 0; k < basis.K(); ++k)
    out << detail::fmt(basis.eigenvalues[k]) << "\n";
  for (int v = 0; v < basis.n_vertices(); ++v) {
    out << detail::fmt(basis.mass[v]);
    for (int k = 0; k < basis.K(); ++k)
      out << ' ' << detail::fmt(basis.functions(v, k));
    out << "\n";
  }
  require(out.good(), "write failed: " + path);
}

inline Eigenbasis load_eigenbasis(const std::string& path) {
  auto in = detail::open_in(path);
  std::string magic, version;
  in >> magic >> version;
  require(magic == "epcal-eigenbasis" && version == "v1",
          "unrecognized eigenbasis file: " + path);
  std::string hash_line;
  in >> hash_line;
  int n = 0, K = 0;
  in >> n >> K;
  require(n > 0 && K > 0, "corrupt eigenbasis file: " + path);
  Eigenbasis basis;
  basis.eigenvalues.resize(K);
  basis.functions.resize(n, K);
  basis.mass.resize(n);
  for (int k = 0; k < K; ++k) in >> basis.eigenvalues[k];
  for (int v = 0; v < n; ++v) {
    in >> basis.mass[v];
    for (int k = 0; k < K; ++k) in >> basis.functions(v, k);
  }
  require(!in.fail(), "corrupt eigenbasis file: " + path);
  return basis;
}

inline void save_draws(const std::string& path, const std::string& hash,
                       const PosteriorSamples& samples, int K) {
  auto out = detail::open_out(path);
  out << "epcal-draws v1\n";
  out << "config_hash=" << hash << "\n";
  out << samples.draws.size() << ' '
      << (samples.draws.empty() ? 0 : samples.draws[0].size()) << ' ' << K
      << "\n";
  for (size_t i = 0; i < samples.draws.size(); ++i) {
    out << detail::fmt(samples.log_densities[i]);
    for (int j = 0; j < samples.draws[i].size(); ++j)
      out << ' ' << detail::fmt(samples.draws[i][j]);
    out << "\n";
  }
  require(out.good(), "write failed: " + path);
}

/// Loads draws; returns K (eigenfunctions per field) via out-parameter.
inline PosteriorSamples load_draws(const std::string& path, int* K_out) {
  auto in = detail::open_in(path);
  std::string magic, version, hash_line;
  in >> magic >> version >> hash_line;
  require(magic == "epcal-draws" && version == "v1",
          "unrecognized draws file: " + path);
  long n_draws = 0, dim = 0;
  int K = 0;
  in >> n_draws >> dim >> K;
  require(n_draws > 0 && dim > 0 && K > 0, "corrupt draws file: " + path);
  PosteriorSamples s;
  s.draws.resize(n_draws);
  s.log_densities.resize(n_draws);
  for (long i = 0; i < n_draws; ++i) {
    in >> s.log_densities[i];
    s.draws[i].resize(dim);
    for (long j = 0; j < dim; ++j) in >> s.draws[i][j];
  }
  require(!in.fail(), "corrupt draws file: " + path);
  if (K_out) *K_out = K;
  return s;
}

inline void save_design(const std::string& path, const std::string& hash,
                        const DesignSites& sites) {
  std::vector<std::vector<double>> rows;
  for (int v : sites.vertices) rows.push_back({static_cast<double>(v)});
  write_csv(path, hash, {"vertex_id"}, rows);
}

inline DesignSites load_design(const std::string& path) {
  auto in = detail::open_in(path);
  DesignSites sites;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("vertex_id", 0) == 0)
      continue;
    try {
      sites.vertices.push_back(std::stoi(detail::split_csv_line(line)[0]));
    } catch (const std::exception&) {
      throw Error("malformed design line: " + line);
    }
  }
  require(!sites.vertices.empty(), "empty design file: " + path);
  return sites;
}

}  // namespace epcal
