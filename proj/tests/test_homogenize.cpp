#include "dislo/homogenize.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace dislo;

namespace {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / x.size();
    my += std::log(y[i]) / y.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

const std::vector<BodyLevel>& torsion_ladder() {
  static const auto ladder = build_sequence(constant_torsion_field(), {4, 8, 16, 32});
  return ladder;
}

}  // namespace

TEST_CASE("identity frame gives flat bodies and isometric correspondences") {
  const auto field = identity_field();
  for (const auto& L : build_sequence(field, {4, 8})) {
    CHECK(L.dislocations == 0);
    CHECK(L.body.singular_points == 0);
    for (const auto& A : L.chart_linear) CHECK((A.transpose() * A - Mat2::Identity()).norm() < 1e-12);
    const auto dev = frame_deviation(field, L, 0.0);
    CHECK(dev.sup_all < 1e-10);
    CHECK(dev.lp < 1e-10);
  }
}

TEST_CASE("constant-torsion ladder") {
  const auto& ladder = torsion_ladder();
  std::vector<double> ns, counts, sup, lp;
  double prev_theta = kPi, prev_nd = 1e300;
  for (const auto& L : ladder) {
    const int nt = static_cast<int>(L.tri.triangles.size());
    CHECK(L.dislocations == nt);
    CHECK(L.body.singular_points == 2 * nt);
    for (int v = 0; v < static_cast<int>(L.tri.vertices.size()); ++v)
      if (!L.body.mesh.is_boundary_vertex(v)) CHECK(std::abs(cone_deficit(L.body.mesh, v)) < 1e-8);
    CHECK(std::abs(L.burgers_total - L.dipole_total) <= 1e-9 * nt);
    // theta -> 0 and n d -> 0 along the ladder
    double theta = 0.0;
    for (const auto& c : L.body.cores) theta = std::max(theta, c.theta);
    CHECK(theta < prev_theta);
    CHECK(L.n * L.max_core_d < prev_nd);
    prev_theta = theta;
    prev_nd = L.n * L.max_core_d;

    const auto dev = frame_deviation(constant_torsion_field(), L, 1.5 * L.max_core_d);
    CHECK(dev.excluded < dev.samples);
    CHECK(dev.sup_off_core <= dev.sup_all);
    ns.push_back(L.n);
    counts.push_back(L.dislocations);
    sup.push_back(dev.sup_off_core);
    lp.push_back(dev.lp);
    // F_n is continuous: shared triangulation vertices land on the chart vertices
    for (int v = 0; v < static_cast<int>(L.tri.vertices.size()); ++v)
      CHECK((L.vertex_chart[v] - L.tri.vertices[v]).norm() < 1e-12);
  }
  const double slope = loglog_slope(ns, counts);
  MESSAGE("dislocation count slope " << slope);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
  for (std::size_t i = 0; i + 1 < sup.size(); ++i) {
    CHECK(sup[i] / sup[i + 1] >= 1.5);
    CHECK(sup[i] / sup[i + 1] <= 2.5);
    CHECK(lp[i + 1] < 1.2 * lp[i]);
  }
}

TEST_CASE("reference chart refinement") {
  const auto& L = torsion_ladder().front();
  const auto chart = reference_chart(L, 0.05);
  for (const auto& t : chart.triangles)
    for (int k = 0; k < 3; ++k) CHECK((chart.points[t[k]] - chart.points[t[(k + 1) % 3]]).norm() <= 0.05);
  CHECK(chart.triangles.size() == L.tri.triangles.size() * 64);
  const auto r = minimize_smooth(identity_field(), chart, archetype_qw_iso(2.0));
  CHECK(r.energy < 1e-12);
}

TEST_CASE("gamma study on the identity frame") {
  MinimizeOptions mo;
  mo.restarts = 1;
  StudyOptions opts;
  opts.minimize = mo;
  const auto rep = gamma_study(identity_field(), archetype_qw_iso(2.0), {4, 8}, opts);
  CHECK_FALSE(rep.partial);
  for (const auto& r : rep.records) {
    CHECK(r.energy_n < 1e-10);
    CHECK(r.energy_ref < 1e-10);
    CHECK(r.dislocations == 0);
  }
}

TEST_CASE("gamma study on the constant-torsion fixture") {
  const auto w = archetype_qw_iso(2.0);
  const auto rep = gamma_study(constant_torsion_field(), w, {4, 8, 16});
  REQUIRE(rep.records.size() == 3);
  CHECK_FALSE(rep.partial);
  for (std::size_t i = 0; i + 1 < rep.records.size(); ++i) {
    const auto &a = rep.records[i], &b = rep.records[i + 1];
    CHECK(b.abs_gap < 0.9 * a.abs_gap);
    for (std::size_t k = 0; k < a.probe_n.size(); ++k) {
      const double ga = std::abs(a.probe_n[k] - a.probe_ref[k]), gb = std::abs(b.probe_n[k] - b.probe_ref[k]);
      MESSAGE("probe " << rep.probes[k] << " gap ratio " << ga / gb);
      // at least first order in the edge length
      CHECK(ga / gb >= 1.5);
    }
  }
  for (const auto& r : rep.records) {
    CHECK(r.energy_n > 0.0);
    CHECK(r.restart_spread < 1e-6);
  }

  const std::string json = report_to_json(rep);
  CHECK(json == report_to_json(gamma_study(constant_torsion_field(), w, {4, 8, 16})));
  const auto parsed = nlohmann::json::parse(json);
  CHECK(parsed["schema_version"] == kReportSchemaVersion);
  CHECK_FALSE(parsed["records"][0].contains("seconds"));
  CHECK(nlohmann::json::parse(report_to_json(rep, true))["records"][0].contains("seconds"));
  const std::string csv = report_to_csv(rep);
  CHECK(csv.rfind("n,dislocations,max_edge,dev_sup_offcore,dev_lp,energy_n,energy_ref,abs_gap,seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("gamma study input checks and partial reports") {
  const auto w = archetype_qw_iso(2.0);
  CHECK_THROWS(gamma_study(identity_field(), w, {8, 4}));
  CHECK_THROWS(gamma_study(identity_field(), w, {}));
  // the strong shear fails a pi/6 angle gate at n = 4, so nothing is recorded
  StudyOptions opts;
  opts.minimize.restarts = 0;
  opts.sequence.delta = kPi / 6;
  const auto rep = gamma_study(bracket_demo_field(), w, {4}, opts);
  CHECK(rep.partial);
  CHECK(rep.records.empty());
  CHECK(rep.error.find("n = 4") == 0);
}
