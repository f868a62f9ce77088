// Acceptance run: one PASS/FAIL line per criterion 1-10.
//
// Exit status is 0 when the set of failing criteria equals --expect-fail (empty by
// default), so a known failure stays visible in the output without hiding a new one.

#include "dislo/homogenize.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace dislo;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

// 1. |b| of the circuit around the slit against 2 d sin(theta/2), 20 pairs.
Outcome burgers_formula() {
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double d = 0.1 + 0.04 * k;
    const double theta = 0.05 + 0.07 * ((7 * k) % 20);
    const auto m = single_dislocation_plane(2.0, theta, d);
    const double expect = 2.0 * d * std::sin(0.5 * theta);
    worst = std::max(worst, std::abs(burgers_vector(m, ring_around_slit(m, 0)).norm() - expect) / expect);
  }
  return {worst < 1e-9, "max relative error " + fmt(worst) + " (< 1e-9)"};
}

// 2. Holonomy around whole slits; Burgers of circuits around regular vertices.
Outcome dipole_neutrality() {
  double hol = 0.0, burg = 0.0;
  int enclosing = 0, empty = 0;
  std::vector<IntrinsicMesh> meshes;
  for (int k = 0; k < 5; ++k) meshes.push_back(single_dislocation_plane(2.0, 0.2 + 0.2 * k, 0.3 + 0.1 * k, k % 2));
  meshes.push_back(assemble(to_triangulation_data(triangulate(constant_torsion_field(), 4))).mesh);
  for (const auto& m : meshes) {
    for (int s = 0; s < static_cast<int>(m.core_slits().size()); ++s) {
      hol = std::max(hol, std::abs(transport_along(m, ring_around_slit(m, s))));
      ++enclosing;
    }
    hol = std::max(hol, std::abs(transport_along(m, boundary_circuit(m))));
    ++enclosing;
    for (int v = 0; v < m.num_vertices(); ++v) {
      // the ring through the centroids around a flat vertex encloses no singular point
      if (m.is_boundary_vertex(v) || m.is_slit_vertex(v) || std::abs(cone_deficit(m, v)) > 1e-12) continue;
      burg = std::max(burg, burgers_vector(m, ring_around(m, {v})).norm());
      ++empty;
    }
  }
  return {hol < 1e-10 && burg < 1e-12 && empty > 0,
          "max |holonomy| " + fmt(hol) + " over " + std::to_string(enclosing) + " enclosing circuits (< 1e-10), max |b| " +
              fmt(burg) + " over " + std::to_string(empty) + " empty circuits (< 1e-12)"};
}

// 3. Error ratios of the loop estimate at eps and eps/2, eps = 0.02 halved 4 times.
Outcome cartan_limit() {
  bool pass = true;
  std::string detail;
  struct Case {
    FrameField f;
    Vec2 p;
  };
  for (const auto& c : {Case{bracket_demo_field(), Vec2(0.4, 0.5)}, Case{constant_torsion_field(), Vec2(0.5, 0.5)}}) {
    const Vec2 X(1, 0), Y(0, 1);
    const Vec2 exact = torsion_contract(torsion_at(c.f, c.p), X, Y);
    double eps = 0.02;
    double prev = (torsion_from_loops(c.f, c.p, X, Y, eps) - exact).norm();
    std::vector<double> ratios;
    for (int k = 0; k < 4; ++k) {
      eps /= 2;
      const double err = (torsion_from_loops(c.f, c.p, X, Y, eps) - exact).norm();
      ratios.push_back(prev / err);
      pass = pass && prev / err >= 1.5 && prev / err <= 2.5;
      prev = err;
    }
    detail += (detail.empty() ? "" : ", ") + c.f.name + " ratios " + list(ratios);
  }
  return {pass, detail + " (each in [1.5, 2.5])"};
}

// 4. Angle sums of every geodesic triangle.
Outcome gauss_bonnet() {
  double worst = 0.0;
  int count = 0;
  for (int n : {4, 8, 16}) {
    const auto tri = triangulate(constant_torsion_field(), n);
    for (const auto& r : tri.records) {
      worst = std::max(worst, std::abs(r.alpha + r.beta + r.gamma - kPi));
      ++count;
    }
  }
  return {worst < 1e-6, "max |angle sum - pi| " + fmt(worst) + " over " + std::to_string(count) + " triangles (< 1e-6)"};
}

// 5. Deficits at triangulation vertices and the count of singular vertices.
Outcome assembly_cleanliness() {
  bool pass = true;
  double worst = 0.0;
  std::string counts;
  for (int n : {4, 8, 16}) {
    const auto data = to_triangulation_data(triangulate(constant_torsion_field(), n));
    const auto body = assemble(data);
    for (int v = 0; v < data.num_vertices; ++v)
      if (!body.mesh.is_boundary_vertex(v)) worst = std::max(worst, std::abs(cone_deficit(body.mesh, v)));
    int singular = 0;
    for (int v = 0; v < body.mesh.num_vertices(); ++v)
      if (!body.mesh.is_boundary_vertex(v) && std::abs(cone_deficit(body.mesh, v)) >= 1e-8) ++singular;
    const int want = 2 * static_cast<int>(data.triangles.size());
    pass = pass && singular == want;
    counts += (counts.empty() ? "" : ", ") + std::to_string(singular) + "/" + std::to_string(want);
  }
  pass = pass && worst < 1e-8;
  return {pass, "max deficit " + fmt(worst) + " (< 1e-8), singular/2#triangles " + counts};
}

// 6. Off-core sup deviation ratios and the L2 trend.
Outcome frame_convergence() {
  const auto field = constant_torsion_field();
  std::vector<double> sup, l2, ratios;
  for (const auto& L : build_sequence(field, {4, 8, 16, 32})) {
    const auto dev = frame_deviation(field, L, StudyOptions{}.exclusion_factor * L.max_core_d, 2.0);
    sup.push_back(dev.sup_off_core);
    l2.push_back(dev.lp);
  }
  bool pass = true;
  for (std::size_t i = 0; i + 1 < sup.size(); ++i) {
    ratios.push_back(sup[i] / sup[i + 1]);
    pass = pass && ratios.back() >= 1.5 && ratios.back() <= 2.5 && l2[i + 1] <= 1.2 * l2[i];
  }
  return {pass, "sup ratios " + list(ratios) + " (in [1.5, 2.5]), L2 " + list(l2) + " (each <= 1.2x previous)"};
}

// 7. Energy gaps and probe gaps along n = 4, 8, 16.
Outcome gamma_trend() {
  const auto rep = gamma_study(constant_torsion_field(), archetype_qw_iso(2.0), {4, 8, 16});
  bool pass = !rep.partial && rep.records.size() == 3;
  std::vector<double> gaps, probe_ratios;
  for (const auto& r : rep.records) gaps.push_back(r.abs_gap);
  for (std::size_t i = 0; pass && i + 1 < rep.records.size(); ++i) {
    const auto &a = rep.records[i], &b = rep.records[i + 1];
    pass = pass && b.abs_gap < 0.9 * a.abs_gap;
    for (std::size_t k = 0; k < a.probe_n.size(); ++k) {
      const double r = std::abs(b.probe_n[k] - b.probe_ref[k]) / std::abs(a.probe_n[k] - a.probe_ref[k]);
      probe_ratios.push_back(r);
      pass = pass && r < 0.9;
    }
  }
  return {pass, "|I_n - I| " + list(gaps) + " (step ratio < 0.9), probe gap step ratios " + list(probe_ratios) +
                    " (< 0.9)" + (rep.partial ? ", partial: " + rep.error : "")};
}

Mat2 fd_gradient(const Archetype& w, const Mat2& A, double h = 1e-6) {
  Mat2 G;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Mat2 P = A, Q = A;
      P(i, j) += h;
      Q(i, j) -= h;
      G(i, j) = (w.evaluate(P) - w.evaluate(Q)) / (2 * h);
    }
  return G;
}

// Distance proxy to every kink of the archetypes: mu1 + mu2 in {0, 1}, mu2 = 0 and
// column norms in {0, 1}.
double kink_margin(const Mat2& A) {
  const auto s = signed_singular_values(A);
  double m = std::min({std::abs(s.mu1 + s.mu2), std::abs(s.mu1 + s.mu2 - 1.0), std::abs(s.mu2)});
  for (int i = 0; i < 2; ++i) m = std::min({m, A.col(i).norm(), std::abs(A.col(i).norm() - 1.0)});
  return m;
}

// 8. Envelope ordering and gradient checks.
Outcome envelope_and_gradients() {
  double envelope = 0.0;
  const Vec2 b(1.0, 1.0);
  for (const Mat2& A : random_matrices(10000, 5.0, 2024)) {
    for (double p : {2.0, 3.0}) {
      const double wi = w_iso(A, p);
      envelope = std::max(envelope, (qw_iso(A, p) - wi) / std::max(1.0, wi));
    }
    envelope = std::max(envelope, qw_cubic(A, b) - w_cubic(A, b));
  }
  const std::vector<Archetype> all = {archetype_w_iso(2.0),         archetype_w_iso(3.0),
                                      archetype_qw_iso(2.0),        archetype_qw_iso(3.0),
                                      archetype_w_cubic(1.3, 0.7),  archetype_qw_cubic(1.3, 0.7),
                                      archetype_composite_cubic(1.0, 2.0, 2.0), archetype_smooth_test()};
  double grad = 0.0;
  int checked = 0;
  for (const Mat2& A : random_matrices(500, 3.0, 99)) {
    if (kink_margin(A) < 1e-3) continue;
    for (const auto& w : all) {
      const Mat2 fd = fd_gradient(w, A);
      grad = std::max(grad, (w.gradient(A) - fd).norm() / std::max(1.0, fd.norm()));
      ++checked;
    }
  }
  return {envelope <= 1e-12 && grad < 1e-6,
          "max qw - w " + fmt(envelope) + " at 10000 matrices (<= 1e-12 relative), max gradient error " + fmt(grad) +
              " over " + std::to_string(checked) + " checks (< 1e-6)"};
}

// 9. Implant transfer perturbation and seed rotations of the energy.
Outcome symmetry_dichotomy() {
  const std::vector<std::pair<int, int>> edges = {{0, 1}};
  const auto samples = random_matrices(100, 3.0, 21);
  Mat2 E0;
  E0 << 1.2, 0.3, -0.1, 0.9;
  const std::vector<Mat2> E = {E0, rotation(0.8) * E0};
  const std::vector<Mat2> bent = {E[1] * rotation(0.3) * E[0].inverse()};
  const double r_iso = w_invariance_residual(archetype_qw_iso(2.0), E, edges, bent, samples);
  const double r_cub = w_invariance_residual(archetype_composite_cubic(), E, edges, bent, samples);

  const auto body = assemble(to_triangulation_data(triangulate(constant_torsion_field(), 4)));
  const auto fr0 = propagate_frame(body.mesh, 0, 0.0);
  PLMap f = develop_mesh(body.mesh, fr0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-0.03, 0.03);
  for (auto& p : f) p += Vec2(U(rng), U(rng));
  const auto qw = archetype_qw_iso(2.0);
  const auto cc = archetype_composite_cubic(1.0, 1.0, 2.0);
  const double e_qw = energy(f, body.mesh, fr0, qw), e_cc = energy(f, body.mesh, fr0, cc);
  double iso_seed = 0.0, cub_generic = 1e300, cub_quarter = 0.0;
  for (double seed : {0.3, 1.0, -2.2}) {
    const auto fr = propagate_frame(body.mesh, 0, seed);
    iso_seed = std::max(iso_seed, std::abs(energy(f, body.mesh, fr, qw) - e_qw));
    cub_generic = std::min(cub_generic, std::abs(energy(f, body.mesh, fr, cc) - e_cc));
  }
  for (int k = 1; k < 4; ++k) {
    const auto fr = propagate_frame(body.mesh, 0, k * kPi / 2);
    iso_seed = std::max(iso_seed, std::abs(energy(f, body.mesh, fr, qw) - e_qw));
    cub_quarter = std::max(cub_quarter, std::abs(energy(f, body.mesh, fr, cc) - e_cc));
  }
  const bool pass = r_iso < 1e-10 && r_cub > 1e-6 && iso_seed < 1e-12 && cub_generic > 1e-6 && cub_quarter < 1e-12;
  return {pass, "transfer residual qw_iso " + fmt(r_iso) + " (< 1e-10), composite_cubic " + fmt(r_cub) +
                    " (> 1e-6); seed change qw_iso " + fmt(iso_seed) + " (< 1e-12), composite_cubic generic " +
                    fmt(cub_generic) + " (> 1e-6), pi/2 " + fmt(cub_quarter) + " (< 1e-12)"};
}

// 10. Torsion trace against the volume-form divergence on a 32 x 32 grid.
Outcome torsion_term() {
  const auto field = constant_torsion_field();
  const Rect box{};
  double worst = 0.0;
  for (int j = 0; j < 32; ++j)
    for (int i = 0; i < 32; ++i) {
      const Vec2 x = box.lo + Vec2((i + 0.5) / 32 * (box.hi.x() - box.lo.x()), (j + 0.5) / 32 * (box.hi.y() - box.lo.y()));
      worst = std::max(worst, (torsion_trace(torsion_at(field, x)) + frame_divergence_fd(field, x, 1e-4)).norm());
    }
  return {worst < 1e-6, "max |tr T + div E| " + fmt(worst) + " on 32x32 (< 1e-6)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-10"};
  std::vector<int> expect_fail, only;
  app.add_option("--expect-fail", expect_fail, "criteria whose failure is documented")->delimiter(',');
  app.add_option("--only", only, "run a subset")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria = {
      {1, "Burgers formula", 1, burgers_formula},
      {2, "dipole neutrality", 1, dipole_neutrality},
      {3, "Cartan limit", 10, cartan_limit},
      {4, "Gauss-Bonnet", 60, gauss_bonnet},
      {5, "assembly cleanliness", 60, assembly_cleanliness},
      {6, "frame convergence", 600, frame_convergence},
      {7, "Gamma-convergence trend", 1800, gamma_trend},
      {8, "envelope and gradients", 30, envelope_and_gradients},
      {9, "symmetry dichotomy", 30, symmetry_dichotomy},
      {10, "torsion-term cross-check", 10, torsion_term},
  };

  std::set<int> failed;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget;
    const bool pass = out.pass && in_time;
    if (!pass) failed.insert(c.id);
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << out.detail << "; "
              << fmt(secs) << " s (< " << c.budget << " s" << (in_time ? "" : ", over budget") << ")\n";
  }
  std::set<int> expected;
  for (int id : expect_fail)
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) expected.insert(id);
  std::cout << failed.size() << " failing";
  if (!expected.empty()) {
    std::cout << ", documented failures:";
    for (int id : expected) std::cout << " " << id;
  }
  std::cout << "\n";
  return failed == expected ? 0 : 1;
}
