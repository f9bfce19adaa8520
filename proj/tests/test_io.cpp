#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "epcal/io.hpp"
#include "epcal/synth.hpp"

using namespace epcal;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("config hash is deterministic and content-sensitive") {
  CHECK(config_hash("abc") == config_hash("abc"));
  CHECK(config_hash("abc") != config_hash("abd"));
  CHECK(config_hash("").size() == 16);
}

TEST_CASE("double formatting round-trips exactly") {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const double x = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform_int(20) - 10.0);
    CHECK(std::stod(detail::fmt(x)) == x);
  }
  CHECK(detail::fmt(0.1) == "0.1");
  CHECK(detail::fmt(230.0) == "230");
}

TEST_CASE("field CSV round trip with embedded hash") {
  Eigen::VectorXd f(5);
  f << 1.5, -2.0, 0.0, 3.25, 1e-7;
  const std::string path = "/tmp/epcal_io_field.csv";
  write_field_csv(path, "deadbeefdeadbeef", f);
  const std::string text = slurp(path);
  CHECK(text.find("# config_hash=deadbeefdeadbeef") == 0);
  CHECK(text.find("vertex_id,value") != std::string::npos);
  const Eigen::VectorXd back = read_field_csv(path);
  REQUIRE(back.size() == 5);
  CHECK((back - f).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("observations CSV round trip") {
  std::vector<ERPObservation> obs{
      {12, ERPObservation::Kind::S2, 230.0, 240.0, 10.0},
      {40, ERPObservation::Kind::S3, 195.0, 200.0, 5.0},
  };
  const std::string path = "/tmp/epcal_io_obs.csv";
  write_observations_csv(path, "00", obs);
  const auto back = read_observations_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].vertex == 12);
  CHECK(back[0].kind == ERPObservation::Kind::S2);
  CHECK(back[1].kind == ERPObservation::Kind::S3);
  CHECK(back[1].interval_lo_ms == 195.0);
  CHECK(back[1].resolution_ms == 5.0);
  std::remove(path.c_str());
}

TEST_CASE("training CSV round trip preserves missing values") {
  ErpTable table;
  table.push_back({0.7, 0.05, 6.0, 120.0, 180.0, 230.5, 210.25, ""});
  table.push_back({0.5, 0.05, 20.0, 120.0, 260.0, 290.0, std::nullopt,
                   "S2 beat failed"});
  const std::string path = "/tmp/epcal_io_training.csv";
  write_training_csv(path, "00", table);
  const ErpTable back = read_training_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].erp_s2);
  CHECK(*back[0].erp_s3 == 210.25);
  CHECK(back[1].erp_s2);
  CHECK_FALSE(back[1].erp_s3);
  std::remove(path.c_str());
}

TEST_CASE("VTK write/read round trip, no timestamps, hash embedded") {
  const TriMesh m = make_icosphere(1, 2.0);
  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(m.n_vertices(), 0, 1);
  Eigen::VectorXd b = a.array().square();
  const std::string path = "/tmp/epcal_io_mesh.vtk";
  write_vtk(path, "cafecafecafecafe", m, {{"act_ms", a}, {"apd90_ms", b}});
  const std::string text = slurp(path);
  CHECK(text.find("config_hash=cafecafecafecafe") != std::string::npos);

  const VtkData back = read_vtk(path);
  REQUIRE(back.mesh.n_vertices() == m.n_vertices());
  REQUIRE(back.mesh.n_triangles() == m.n_triangles());
  REQUIRE(back.scalars.count("act_ms") == 1);
  REQUIRE(back.scalars.count("apd90_ms") == 1);
  CHECK((back.scalars.at("act_ms") - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.scalars.at("apd90_ms") - b).cwiseAbs().maxCoeff() == 0.0);

  // byte-identical rerun
  const std::string path2 = "/tmp/epcal_io_mesh2.vtk";
  write_vtk(path2, "cafecafecafecafe", m, {{"act_ms", a}, {"apd90_ms", b}});
  CHECK(slurp(path2) == text);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("eigenbasis save/load round trip") {
  const TriMesh m = make_icosphere(2, 5.0);
  const Eigenbasis basis = solve_eigenbasis(m, 10);
  const std::string path = "/tmp/epcal_io_basis.txt";
  save_eigenbasis(path, "00", basis);
  const Eigenbasis back = load_eigenbasis(path);
  REQUIRE(back.K() == 10);
  REQUIRE(back.n_vertices() == m.n_vertices());
  CHECK((back.eigenvalues - basis.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.functions - basis.functions).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mass - basis.mass).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("draws save/load round trip") {
  PosteriorSamples s;
  Rng rng(21);
  for (int i = 0; i < 7; ++i) {
    Eigen::VectorXd d(4);
    for (int j = 0; j < 4; ++j) d[j] = rng.normal();
    s.draws.push_back(d);
    s.log_densities.push_back(-rng.uniform());
  }
  const std::string path = "/tmp/epcal_io_draws.txt";
  save_draws(path, "00", s, 3);
  int K = 0;
  const PosteriorSamples back = load_draws(path, &K);
  CHECK(K == 3);
  REQUIRE(back.draws.size() == 7);
  for (int i = 0; i < 7; ++i) {
    CHECK((back.draws[i] - s.draws[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.log_densities[i] == s.log_densities[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("design CSV round trip") {
  DesignSites sites;
  sites.vertices = {4, 17, 99};
  const std::string path = "/tmp/epcal_io_design.csv";
  save_design(path, "00", sites);
  const DesignSites back = load_design(path);
  CHECK(back.vertices == sites.vertices);
  std::remove(path.c_str());
}

TEST_CASE("corrupt artifacts are rejected") {
  const std::string path = "/tmp/epcal_io_bad.txt";
  {
    std::ofstream out(path);
    out << "not-an-artifact v9\n";
  }
  CHECK_THROWS_AS(load_eigenbasis(path), Error);
  int K;
  CHECK_THROWS_AS(load_draws(path, &K), Error);
  CHECK_THROWS_AS(load_design(path), Error);
  std::remove(path.c_str());
}
