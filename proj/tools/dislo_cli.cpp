// dislo: command-line front end.
//
// Exit codes: 0 success, 1 invariant failure (JSON error record on stderr),
// 2 usage error.

#include "dislo/homogenize.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace dislo;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string fixture = "constant_torsion";
  std::optional<double> tau;
  std::string archetype = "qw_iso";
  double p = 2.0, b1 = 1.0, b2 = 1.0;
  std::vector<int> n = {4, 8, 16};
  double delta = kPi / 9;
  std::optional<double> theta;
  double exclusion_factor = 1.5;
  MinimizeOptions optimizer;
  std::string out;
  bool timing = false;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

// Sections: fixture, archetype, triangulation, optimizer, output.
void load_config(const std::string& path, Settings& s) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  try {
    if (auto f = j.value("fixture", nlohmann::json::object()); !f.empty()) {
      take(f, "name", s.fixture);
      if (f.contains("tau")) s.tau = f["tau"].get<double>();
    }
    if (auto a = j.value("archetype", nlohmann::json::object()); !a.empty()) {
      take(a, "name", s.archetype);
      take(a, "p", s.p);
      take(a, "b1", s.b1);
      take(a, "b2", s.b2);
    }
    if (auto t = j.value("triangulation", nlohmann::json::object()); !t.empty()) {
      if (t.contains("n")) s.n = t["n"].is_array() ? t["n"].get<std::vector<int>>() : std::vector<int>{t["n"].get<int>()};
      take(t, "delta", s.delta);
      if (t.contains("theta") && !t["theta"].is_null()) s.theta = t["theta"].get<double>();
      take(t, "exclusion_factor", s.exclusion_factor);
    }
    if (auto o = j.value("optimizer", nlohmann::json::object()); !o.empty()) {
      take(o, "tol", s.optimizer.tol);
      take(o, "max_iter", s.optimizer.max_iter);
      take(o, "restarts", s.optimizer.restarts);
      take(o, "seed", s.optimizer.seed);
      take(o, "perturbation", s.optimizer.perturbation);
    }
    if (auto o = j.value("output", nlohmann::json::object()); !o.empty()) {
      take(o, "dir", s.out);
      take(o, "timing", s.timing);
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
}

std::string find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

FrameField fixture_of(const Settings& s) {
  std::string spec = s.fixture;
  if (s.tau) {
    if (spec != "constant_torsion") throw UsageError("--tau applies to the constant_torsion fixture only");
    std::ostringstream os;
    os.precision(17);
    os << spec << "(" << *s.tau << ")";
    spec = os.str();
  }
  try {
    return make_frame_field(spec);
  } catch (const UnknownFrameField& e) {
    throw UsageError(e.what());
  }
}

Archetype archetype_of(const std::string& name, const Settings& s) {
  std::ostringstream os;
  os.precision(17);
  if (name.find('(') != std::string::npos || name == "smooth_test")
    os << name;
  else if (name == "w_iso" || name == "qw_iso")
    os << name << "(" << s.p << ")";
  else if (name == "w_cubic" || name == "qw_cubic")
    os << name << "(" << s.b1 << "," << s.b2 << ")";
  else if (name == "composite_cubic")
    os << name << "(" << s.b1 << "," << s.b2 << "," << s.p << ")";
  else
    throw UsageError("unknown archetype '" + name + "'");
  try {
    return make_archetype(os.str());
  } catch (const UnknownArchetype& e) {
    throw UsageError(e.what());
  }
}

// --out, then DISLO_OUTPUT_DIR, then the config file, then the working directory.
fs::path output_dir(const Settings& s, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DISLO_OUTPUT_DIR"); env && *env) return env;
  if (!s.out.empty()) return s.out;
  return ".";
}

void write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  fs::create_directories(dir);
  std::ofstream out(dir / name);
  out << text;
  if (!out) throw Error("cannot write " + (dir / name).string());
}

int single_n(const Settings& s) {
  if (s.n.size() != 1) throw UsageError("exactly one value of --n is expected");
  return s.n.front();
}

ordered_json minimize_json(const MinimizeResult& r, const std::string& archetype) {
  ordered_json j;
  j["archetype"] = archetype;
  j["energy"] = r.energy;
  j["converged"] = r.converged;
  j["grad_inf"] = r.grad_inf;
  j["iterations"] = r.iterations;
  j["run_energies"] = r.run_energies;
  j["restart_spread"] = r.restart_spread;
  j["density"] = {{"min", r.density_min}, {"max", r.density_max}, {"histogram", r.density_histogram}};
  ordered_json map = ordered_json::array();
  for (const auto& x : r.map) map.push_back({x.x(), x.y()});
  j["map"] = map;
  return j;
}

DiscretePath circuit_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DiscretePath path;
  path.triangles = j.at("triangles").get<std::vector<int>>();
  if (j.contains("points")) path.points = j["points"].get<std::vector<std::array<double, 3>>>();
  path.closed = j.value("closed", true);
  return path;
}

void print(const ordered_json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  std::string config, out_flag, mesh_path, circuit_path, tri_path;
  int slit = -1, basepoint = 0;
  bool boundary = false;
  std::string cmd;

  try {
    if (auto c = find_config(argc, argv); !c.empty()) load_config(c, s);
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Dislocated bodies, Weitzenbock frames and their elastic energies"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", out_flag, "output directory (else DISLO_OUTPUT_DIR, config, .)");
  };
  auto add_fixture = [&](CLI::App* sub) {
    sub->add_option("--fixture", s.fixture, "frame field: identity, constant_torsion, bracket_demo, scaled(s), ...");
    sub->add_option("--tau", s.tau, "torsion of the constant_torsion fixture");
    sub->add_option("--delta", s.delta, "minimum triangle angle");
  };
  auto add_archetype = [&](CLI::App* sub, const char* flag) {
    sub->add_option(flag, s.archetype, "w_iso, qw_iso, w_cubic, qw_cubic, composite_cubic, smooth_test");
    sub->add_option("--p", s.p, "growth exponent");
    sub->add_option("--b1", s.b1);
    sub->add_option("--b2", s.b2);
  };
  auto add_optimizer = [&](CLI::App* sub) {
    sub->add_option("--tol", s.optimizer.tol, "gradient infinity-norm tolerance");
    sub->add_option("--max-iter", s.optimizer.max_iter);
    sub->add_option("--restarts", s.optimizer.restarts);
    sub->add_option("--seed", s.optimizer.seed);
    sub->add_option("--perturbation", s.optimizer.perturbation, "restart noise relative to the body size");
  };

  auto* triangulate_cmd = app.add_subcommand("triangulate", "geodesic triangulation of a frame field");
  add_fixture(triangulate_cmd);
  triangulate_cmd->add_option("--n", s.n, "grid resolution")->delimiter(',');
  add_out(triangulate_cmd);

  auto* build_cmd = app.add_subcommand("build", "assemble the dislocated body M_n");
  add_fixture(build_cmd);
  build_cmd->add_option("--n", s.n, "grid resolution")->delimiter(',');
  build_cmd->add_option("--theta", s.theta, "force every core angle");
  build_cmd->add_option("--triangulation", tri_path, "assemble this triangulation instead of a fixture")
      ->check(CLI::ExistingFile);
  add_out(build_cmd);

  auto* burgers_cmd = app.add_subcommand("burgers", "Burgers vector and holonomy of a closed circuit");
  burgers_cmd->add_option("--mesh", mesh_path)->required()->check(CLI::ExistingFile);
  auto* circ = burgers_cmd->add_option("--circuit", circuit_path, "{\"triangles\":[...],\"points\":[...]}")
                   ->check(CLI::ExistingFile);
  auto* around = burgers_cmd->add_option("--around-slit", slit, "circuit around core slit k");
  auto* bnd = burgers_cmd->add_flag("--boundary", boundary, "circuit along the boundary");
  circ->excludes(around)->excludes(bnd);
  around->excludes(bnd);
  burgers_cmd->add_option("--basepoint", basepoint, "circuit position whose frame expresses the result");
  add_out(burgers_cmd);

  auto* minimize_cmd = app.add_subcommand("minimize", "minimize the elastic energy on a mesh");
  minimize_cmd->add_option("--mesh", mesh_path)->required()->check(CLI::ExistingFile);
  add_archetype(minimize_cmd, "--archetype");
  add_optimizer(minimize_cmd);
  add_out(minimize_cmd);

  auto* homogenize_cmd = app.add_subcommand("homogenize", "convergence study over a ladder of n");
  add_fixture(homogenize_cmd);
  homogenize_cmd->add_option("--n", s.n, "comma-separated, strictly increasing")->delimiter(',');
  homogenize_cmd->add_option("--theta", s.theta, "force every core angle");
  homogenize_cmd->add_option("--exclusion-factor", s.exclusion_factor, "core exclusion radius in units of d");
  add_archetype(homogenize_cmd, "--archetype");
  add_optimizer(homogenize_cmd);
  homogenize_cmd->add_flag("--timing", s.timing, "include wall times in report.json");
  add_out(homogenize_cmd);

  auto* probe_cmd = app.add_subcommand("probe-archetype", "classify the symmetry group of a density");
  add_archetype(probe_cmd, "--name");
  int probe_samples = 32;
  std::uint64_t probe_seed = 17;
  probe_cmd->add_option("--samples", probe_samples);
  probe_cmd->add_option("--sample-seed", probe_seed);
  add_out(probe_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ordered_json result;
    if (triangulate_cmd->parsed()) {
      cmd = "triangulate";
      const auto field = fixture_of(s);
      const auto tri = triangulate(field, single_n(s), s.delta);
      double angle_err = 0.0, max_edge = 0.0, max_dev = 0.0;
      for (const auto& r : tri.records) angle_err = std::max(angle_err, std::abs(r.alpha + r.beta + r.gamma - kPi));
      for (const auto& e : tri.edges) max_edge = std::max(max_edge, e.length);
      for (double d : tri.angle_deviation) max_dev = std::max(max_dev, d);
      const auto dir = output_dir(s, out_flag);
      write_file(dir, "triangulation.json", triangulation_to_json(to_triangulation_data(tri), 2));
      result["fixture"] = field.name;
      result["n"] = tri.n;
      result["spacing"] = tri.spacing;
      result["retries"] = tri.retries;
      result["vertices"] = tri.vertices.size();
      result["triangles"] = tri.triangles.size();
      result["max_edge"] = max_edge;
      result["max_angle_sum_error"] = angle_err;
      result["max_angle_deviation"] = max_dev;
      write_file(dir, "triangulate.json", result.dump(2) + "\n");
    } else if (build_cmd->parsed()) {
      cmd = "build";
      TriangulationData data;
      ordered_json src;
      DislocatedTriangleOptions dopts;
      dopts.theta = s.theta;
      dopts.min_angle = s.delta;
      if (!tri_path.empty()) {
        data = triangulation_from_json(read_text(tri_path));
        src["triangulation"] = tri_path;
      } else {
        const auto field = fixture_of(s);
        data = to_triangulation_data(triangulate(field, single_n(s), s.delta));
        src["fixture"] = field.name;
        src["n"] = single_n(s);
      }
      const auto body = assemble(data, dopts);
      double max_deficit = 0.0, burgers_total = 0.0, dipole_total = 0.0;
      int dislocations = 0;
      for (int v = 0; v < data.num_vertices; ++v)
        if (!body.mesh.is_boundary_vertex(v)) max_deficit = std::max(max_deficit, std::abs(cone_deficit(body.mesh, v)));
      for (const auto& r : data.records) burgers_total += r.burgers.norm();
      for (const auto& c : body.cores)
        if (c.theta > 0.0) {
          ++dislocations;
          dipole_total += burgers_magnitude(c.d, c.theta);
        }
      const auto dir = output_dir(s, out_flag);
      write_file(dir, "mesh.json", mesh_to_json(body.mesh, 2) + "\n");
      result["source"] = src;
      result["triangles"] = data.triangles.size();
      result["mesh_vertices"] = body.mesh.num_vertices();
      result["mesh_triangles"] = body.mesh.num_triangles();
      result["dislocations"] = dislocations;
      result["singular_points"] = body.singular_points;
      result["max_vertex_deficit"] = max_deficit;
      result["burgers_total"] = burgers_total;
      result["dipole_total"] = dipole_total;
      write_file(dir, "build.json", result.dump(2) + "\n");
    } else if (burgers_cmd->parsed()) {
      cmd = "burgers";
      const auto mesh = read_mesh(mesh_path);
      DiscretePath path;
      if (!circuit_path.empty())
        path = circuit_from_json(read_text(circuit_path));
      else if (slit >= 0)
        path = ring_around_slit(mesh, slit);
      else if (boundary)
        path = boundary_circuit(mesh);
      else
        throw UsageError("one of --circuit, --around-slit, --boundary is required");
      const Vec2 b = burgers_vector(mesh, path, basepoint);
      result["burgers"] = {b.x(), b.y()};
      result["holonomy"] = transport_along(mesh, path) + 0.0;  // no -0
      if (!out_flag.empty() || std::getenv("DISLO_OUTPUT_DIR"))
        write_file(output_dir(s, out_flag), "burgers.json", result.dump(2) + "\n");
    } else if (minimize_cmd->parsed()) {
      cmd = "minimize";
      const auto mesh = read_mesh(mesh_path);
      const auto w = archetype_of(s.archetype, s);
      const auto frame = propagate_frame(mesh);
      const auto dir = output_dir(s, out_flag);
      try {
        const auto r = minimize(mesh, frame, w, s.optimizer);
        write_file(dir, "minimize.json", minimize_json(r, w.name).dump(2) + "\n");
        result = minimize_json(r, w.name);
        result.erase("map");
      } catch (const MaxIterations& e) {
        write_file(dir, "minimize.json", minimize_json(e.best, w.name).dump(2) + "\n");
        throw;
      } catch (const LineSearchFailed& e) {
        write_file(dir, "minimize.json", minimize_json(e.best, w.name).dump(2) + "\n");
        throw;
      }
    } else if (homogenize_cmd->parsed()) {
      cmd = "homogenize";
      const auto field = fixture_of(s);
      const auto w = archetype_of(s.archetype, s);
      StudyOptions opts;
      opts.sequence.delta = s.delta;
      opts.sequence.theta = s.theta;
      opts.minimize = s.optimizer;
      opts.exclusion_factor = s.exclusion_factor;
      for (std::size_t i = 0; i + 1 < s.n.size(); ++i)
        if (s.n[i + 1] <= s.n[i]) throw UsageError("--n must be strictly increasing");
      const auto rep = gamma_study(field, w, s.n, opts);
      const auto dir = output_dir(s, out_flag);
      write_file(dir, "report.json", report_to_json(rep, s.timing) + "\n");
      write_file(dir, "report.csv", report_to_csv(rep));
      result["report"] = (dir / "report.json").string();
      result["csv"] = (dir / "report.csv").string();
      result["levels"] = rep.records.size();
      result["partial"] = rep.partial;
      if (rep.partial) throw Error(rep.error.empty() ? "optimizer did not reach stationarity" : rep.error);
    } else if (probe_cmd->parsed()) {
      cmd = "probe-archetype";
      const auto w = archetype_of(s.archetype, s);
      const auto rep = symmetry_probe(w, default_angle_grid(), random_matrices(probe_samples, 3.0, probe_seed));
      result["symmetry"] = to_string(rep.kind);
      result["generators"] = ordered_json::array();
      for (double g : rep.generators) result["generators"].push_back(angle_label(g));
      if (!out_flag.empty() || std::getenv("DISLO_OUTPUT_DIR"))
        write_file(output_dir(s, out_flag), "probe.json", result.dump(2) + "\n");
    }
    if (cmd == "probe-archetype" || cmd == "burgers")
      std::cout << result.dump() << "\n";
    else
      print(result);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    ordered_json err;
    err["command"] = cmd;
    err["error"] = dynamic_cast<const dislo::Error*>(&e) ? "invariant_failure" : "runtime_error";
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
