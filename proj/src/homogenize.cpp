#include "dislo/homogenize.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>
#include <unordered_map>

namespace dislo {

BodyLevel build_level(const FrameField& field, int n, const SequenceOptions& opts) {
  BodyLevel L;
  L.n = n;
  L.tri = triangulate(field, n, opts.delta);
  DislocatedTriangleOptions dopts;
  dopts.theta = opts.theta;
  dopts.min_angle = opts.delta;
  L.body = assemble(to_triangulation_data(L.tri), dopts);
  const IntrinsicMesh& mesh = L.body.mesh;

  // seed the transported frame so that it is the identity in development coordinates
  const auto dev_frame = frame_from_development(mesh, L.body.dev);
  const Mat2& E0 = dev_frame.E[0];
  L.frame = propagate_frame(mesh, 0, std::atan2(E0(1, 0), E0(0, 0)));

  const int nt = static_cast<int>(L.tri.triangles.size());
  for (int t = 0; t < nt; ++t) {
    const auto& c = L.body.corner_dev[t];
    const auto& T = L.tri.triangles[t];
    Mat2 D, X;
    D.col(0) = c[1] - c[0];
    D.col(1) = c[2] - c[0];
    X.col(0) = L.tri.vertices[T[1]] - L.tri.vertices[T[0]];
    X.col(1) = L.tri.vertices[T[2]] - L.tri.vertices[T[0]];
    const Mat2 A = X * D.inverse();
    L.chart_linear.push_back(A);
    L.chart_shift.push_back(L.tri.vertices[T[0]] - A * c[0]);
    L.burgers_total += triangle_burgers(L.tri, t).norm();
    const auto& core = L.body.cores[t];
    if (core.theta > 0.0) {
      ++L.dislocations;
      L.max_core_d = std::max(L.max_core_d, core.d);
      L.dipole_total += burgers_magnitude(core.d, core.theta);
    }
  }
  for (const auto& e : L.tri.edges) L.max_edge = std::max(L.max_edge, e.length);

  L.vertex_chart.assign(mesh.num_vertices(), Vec2::Zero());
  std::vector<char> seen(mesh.num_vertices(), 0);
  for (int m = 0; m < mesh.num_triangles(); ++m) {
    const int T = L.body.parent[m];
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.triangle(m)[k];
      if (seen[v]) continue;
      seen[v] = 1;
      L.vertex_chart[v] = L.chart_linear[T] * L.body.dev[m][k] + L.chart_shift[T];
    }
  }
  for (const auto& s : mesh.core_slits()) {
    L.core_images.push_back(L.vertex_chart[s.plus]);
    L.core_images.push_back(L.vertex_chart[s.minus]);
  }
  return L;
}

std::vector<BodyLevel> build_sequence(const FrameField& field, const std::vector<int>& ns, const SequenceOptions& opts) {
  std::vector<BodyLevel> out;
  for (int n : ns) out.push_back(build_level(field, n, opts));
  return out;
}

namespace {

double segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((x - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (x - (a + t * ab)).norm();
}

// Bucket grid answering "is x within r of any core segment".
class NearSegments {
 public:
  NearSegments(const std::vector<Vec2>& ends, double r) : ends_(ends), r_(r) {
    if (r_ <= 0.0) return;
    double longest = 0.0;
    for (std::size_t i = 0; i + 1 < ends.size(); i += 2) longest = std::max(longest, (ends[i + 1] - ends[i]).norm());
    cell_ = r_ + longest;
    for (std::size_t i = 0; i + 1 < ends.size(); i += 2)
      cells_[key(cell(ends[i].x()), cell(ends[i].y()))].push_back(i);
  }
  bool near(const Vec2& x) const {
    if (r_ <= 0.0) return false;
    const long cx = cell(x.x()), cy = cell(x.y());
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (auto i : it->second)
          if (segment_distance(x, ends_[i], ends_[i + 1]) < r_) return true;
      }
    return false;
  }

 private:
  long cell(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static long long key(long a, long b) { return (static_cast<long long>(a) << 32) ^ (b & 0xffffffffLL); }
  const std::vector<Vec2>& ends_;
  double r_;
  double cell_ = 1.0;
  std::unordered_map<long long, std::vector<std::size_t>> cells_;
};

Mat2 edge_matrix(const std::array<Vec2, 3>& x) {
  Mat2 D;
  D.col(0) = x[1] - x[0];
  D.col(1) = x[2] - x[0];
  return D;
}

}  // namespace

FrameDeviation frame_deviation(const FrameField& field, const BodyLevel& L, double exclusion_radius, double p) {
  FrameDeviation out;
  out.exclusion_radius = exclusion_radius;
  const IntrinsicMesh& mesh = L.body.mesh;
  const NearSegments cores(L.core_images, exclusion_radius);
  constexpr double a = 2.0 / 3.0, b = 1.0 / 6.0;
  const std::array<std::array<double, 3>, 3> bary = {{{a, b, b}, {b, a, b}, {b, b, a}}};
  double integral = 0.0;
  for (int m = 0; m < mesh.num_triangles(); ++m) {
    const int T = L.body.parent[m];
    const auto& dev = L.body.dev[m];
    const auto local = mesh.local_coords(m);
    // dF_n in local coordinates: chart_linear o (local -> development)
    const Mat2 dF = L.chart_linear[T] * edge_matrix(dev) * edge_matrix(local).inverse();
    const Mat2 A = dF * L.frame.E[m];
    double mean = 0.0;
    for (const auto& w : bary) {
      const Vec2 y = w[0] * dev[0] + w[1] * dev[1] + w[2] * dev[2];
      const Vec2 x = L.chart_linear[T] * y + L.chart_shift[T];
      const double d = (A - field.frame(x)).norm();
      ++out.samples;
      out.sup_all = std::max(out.sup_all, d);
      if (cores.near(x))
        ++out.excluded;
      else
        out.sup_off_core = std::max(out.sup_off_core, d);
      mean += std::pow(d, p) / 3.0;
    }
    integral += mesh.area(m) * mean;
  }
  out.lp = std::pow(integral, 1.0 / p);
  return out;
}

ChartMesh reference_chart(const BodyLevel& L, double max_edge) {
  ChartMesh c;
  c.points = L.tri.vertices;
  c.triangles = L.tri.triangles;
  auto longest = [&]() {
    double m = 0.0;
    for (const auto& t : c.triangles)
      for (int k = 0; k < 3; ++k) m = std::max(m, (c.points[t[k]] - c.points[t[(k + 1) % 3]]).norm());
    return m;
  };
  while (longest() > max_edge) {
    ChartMesh r;
    r.points = c.points;
    std::map<EdgeKey, int> mid;
    auto midpoint = [&](int u, int v) {
      const EdgeKey e = edge_key(u, v);
      auto it = mid.find(e);
      if (it != mid.end()) return it->second;
      r.points.push_back(0.5 * (c.points[u] + c.points[v]));
      return mid[e] = static_cast<int>(r.points.size()) - 1;
    };
    for (const auto& t : c.triangles) {
      const int m0 = midpoint(t[0], t[1]), m1 = midpoint(t[1], t[2]), m2 = midpoint(t[2], t[0]);
      r.triangles.push_back({t[0], m0, m2});
      r.triangles.push_back({m0, t[1], m1});
      r.triangles.push_back({m2, m1, t[2]});
      r.triangles.push_back({m0, m1, m2});
    }
    c = std::move(r);
  }
  return c;
}

MinimizeResult minimize_smooth(const FrameField& field, const ChartMesh& chart, const Archetype& w,
                               const MinimizeOptions& opts) {
  PLEnergyProblem pr;
  pr.num_vertices = static_cast<int>(chart.points.size());
  pr.triangles = chart.triangles;
  double mean_edge = 0.0;
  for (const auto& t : chart.triangles) {
    const std::array<Vec2, 3> x = {chart.points[t[0]], chart.points[t[1]], chart.points[t[2]]};
    const Mat2 X = edge_matrix(x);
    const Mat2 E = field.frame((x[0] + x[1] + x[2]) / 3.0);
    pr.K.push_back(X.inverse() * E);
    pr.weight.push_back(0.5 * std::abs(X.determinant()) / std::abs(E.determinant()));
    mean_edge += (X.col(0).norm() + X.col(1).norm() + (x[2] - x[1]).norm()) / (3.0 * chart.triangles.size());
  }
  const Vec2 x0 = chart.points.at(0);
  const Mat2 Einv = field.frame(x0).inverse();
  PLMap start;
  for (const auto& x : chart.points) start.push_back(Einv * (x - x0));
  return minimize_problem(pr, w, start, mean_edge, opts);
}

std::vector<ProbeMap> default_probes() {
  return {
      {"identity", [](const Vec2& x) { return x; }},
      {"bend", [](const Vec2& x) { return Vec2(x.x() + 0.1 * std::sin(kPi * x.y()), x.y() + 0.1 * x.x() * x.x()); }},
      {"stretch", [](const Vec2& x) { return Vec2(1.2 * x.x() + 0.1 * x.x() * x.y(), 0.9 * x.y() + 0.05 * x.x() * x.x()); }},
  };
}

ConvergenceReport gamma_study(const FrameField& field, const Archetype& w, const std::vector<int>& ns,
                              const StudyOptions& opts) {
  ConvergenceReport rep;
  rep.fixture = field.name;
  rep.archetype = w.name;
  rep.p = w.p;
  rep.ns = ns;
  rep.options = opts;
  for (std::size_t i = 0; i + 1 < ns.size(); ++i)
    if (ns[i + 1] <= ns[i]) throw Error("gamma_study: n must be strictly increasing");
  if (ns.empty()) throw Error("gamma_study: empty n list");
  rep.reference_max_edge = 1.0 / (2.0 * ns.back());
  const auto probes = default_probes();
  for (const auto& pm : probes) rep.probes.push_back(pm.name);

  auto run_min = [](auto&& fn, bool& converged) {
    try {
      auto r = fn();
      converged = true;
      return r;
    } catch (const MaxIterations& e) {
      converged = false;
      return e.best;
    } catch (const LineSearchFailed& e) {
      converged = false;
      return e.best;
    }
  };

  // Levels are independent; each one runs on its own thread and the report is
  // assembled in n order, stopping at the first failed level.
  struct Outcome {
    LevelRecord rec;
    bool partial = false;
    std::string error;
  };
  auto run_level = [&](int n) {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      LevelRecord& rec = out.rec;
      rec.n = n;
      const BodyLevel L = build_level(field, n, opts.sequence);
      rec.dislocations = L.dislocations;
      rec.mesh_triangles = L.body.mesh.num_triangles();
      rec.max_edge = L.max_edge;
      const auto dev = frame_deviation(field, L, opts.exclusion_factor * L.max_core_d, w.p);
      rec.dev_sup_offcore = dev.sup_off_core;
      rec.dev_sup_all = dev.sup_all;
      rec.dev_lp = dev.lp;
      rec.exclusion_radius = dev.exclusion_radius;

      const auto mn = run_min([&] { return minimize(L.body.mesh, L.frame, w, opts.minimize); }, rec.converged_n);
      rec.energy_n = mn.energy;
      rec.restart_spread = mn.restart_spread;
      const ChartMesh ref = reference_chart(L, rep.reference_max_edge);
      const auto mr = run_min([&] { return minimize_smooth(field, ref, w, opts.minimize); }, rec.converged_ref);
      rec.energy_ref = mr.energy;
      rec.abs_gap = std::abs(rec.energy_n - rec.energy_ref);
      out.partial = !rec.converged_n || !rec.converged_ref;

      for (const auto& pm : probes) {
        PLMap fn, fr;
        for (const auto& x : L.vertex_chart) fn.push_back(pm.f(x));
        for (const auto& x : ref.points) fr.push_back(pm.f(x));
        rec.probe_n.push_back(energy(fn, L.body.mesh, L.frame, w));
        rec.probe_ref.push_back(smooth_energy(field, ref, fr, w));
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } catch (const Error& e) {
      out.partial = true;
      out.error = "n = " + std::to_string(n) + ": " + e.what();
    }
    return out;
  };

  std::vector<std::future<Outcome>> jobs;
  for (int n : ns) jobs.push_back(std::async(std::launch::async, run_level, n));
  for (auto& job : jobs) {
    Outcome out = job.get();
    if (!rep.error.empty()) continue;  // drain the remaining jobs
    rep.partial = rep.partial || out.partial;
    if (!out.error.empty()) {
      rep.error = out.error;
      continue;
    }
    rep.records.push_back(std::move(out.rec));
  }
  return rep;
}

std::string report_to_json(const ConvergenceReport& rep, bool timing, int indent) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["fixture"] = rep.fixture;
  j["archetype"] = rep.archetype;
  j["p"] = rep.p;
  j["n"] = rep.ns;
  j["correspondence"] = "per-triangle affine map matching triangle vertices";
  j["delta"] = rep.options.sequence.delta;
  if (rep.options.sequence.theta) j["theta"] = *rep.options.sequence.theta;
  j["optimizer"] = {{"tol", rep.options.minimize.tol},
                    {"max_iter", rep.options.minimize.max_iter},
                    {"restarts", rep.options.minimize.restarts},
                    {"seed", rep.options.minimize.seed},
                    {"perturbation", rep.options.minimize.perturbation}};
  j["exclusion_factor"] = rep.options.exclusion_factor;
  j["reference_max_edge"] = rep.reference_max_edge;
  j["probes"] = rep.probes;
  j["partial"] = rep.partial;
  if (!rep.error.empty()) j["error"] = rep.error;
  ordered_json recs = ordered_json::array();
  for (const auto& r : rep.records) {
    ordered_json o;
    o["n"] = r.n;
    o["dislocations"] = r.dislocations;
    o["mesh_triangles"] = r.mesh_triangles;
    o["max_edge"] = r.max_edge;
    o["dev_sup_offcore"] = r.dev_sup_offcore;
    o["dev_sup_all"] = r.dev_sup_all;
    o["dev_lp"] = r.dev_lp;
    o["exclusion_radius"] = r.exclusion_radius;
    o["energy_n"] = r.energy_n;
    o["energy_ref"] = r.energy_ref;
    o["abs_gap"] = r.abs_gap;
    o["converged_n"] = r.converged_n;
    o["converged_ref"] = r.converged_ref;
    o["restart_spread"] = r.restart_spread;
    o["probe_n"] = r.probe_n;
    o["probe_ref"] = r.probe_ref;
    if (timing) o["seconds"] = r.seconds;
    recs.push_back(std::move(o));
  }
  j["records"] = std::move(recs);
  return j.dump(indent);
}

std::string report_to_csv(const ConvergenceReport& rep) {
  std::ostringstream os;
  os.precision(17);
  os << "n,dislocations,max_edge,dev_sup_offcore,dev_lp,energy_n,energy_ref,abs_gap,seconds\n";
  for (const auto& r : rep.records)
    os << r.n << ',' << r.dislocations << ',' << r.max_edge << ',' << r.dev_sup_offcore << ',' << r.dev_lp << ','
       << r.energy_n << ',' << r.energy_ref << ',' << r.abs_gap << ',' << r.seconds << '\n';
  return os.str();
}

}  // namespace dislo
