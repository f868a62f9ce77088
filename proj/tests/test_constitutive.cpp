#include "dislo/constitutive.hpp"

#include <doctest.h>

#include <random>

using namespace dislo;

namespace {

Mat2 M(double a, double b, double c, double d) {
  Mat2 A;
  A << a, b, c, d;
  return A;
}

Mat2 fd_gradient(const std::function<double(const Mat2&)>& f, const Mat2& A, double h = 1e-6) {
  Mat2 G;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Mat2 P = A, Q = A;
      P(i, j) += h;
      Q(i, j) -= h;
      G(i, j) = (f(P) - f(Q)) / (2 * h);
    }
  return G;
}

double rel_err(const Mat2& a, const Mat2& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST_CASE("signed singular values") {
  auto s = signed_singular_values(Mat2::Identity());
  CHECK(s.mu1 == doctest::Approx(1.0));
  CHECK(s.mu2 == doctest::Approx(1.0));
  s = signed_singular_values(M(2, 0, 0, -1));
  CHECK(s.mu1 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.mu2 == doctest::Approx(-1.0).epsilon(1e-14));
  for (const Mat2& A : random_matrices(200, 3.0, 11)) {
    s = signed_singular_values(A);
    CHECK(std::abs(s.mu1 * s.mu2 - A.determinant()) < 1e-12 * std::max(1.0, A.squaredNorm()));
    CHECK(std::abs(s.mu1 * s.mu1 + s.mu2 * s.mu2 - A.squaredNorm()) < 1e-12 * std::max(1.0, A.squaredNorm()));
    Eigen::JacobiSVD<Mat2> svd(A);
    CHECK(s.mu1 == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
    CHECK(std::abs(s.mu2) == doctest::Approx(svd.singularValues()(1)).epsilon(1e-10));
    CHECK(s.mu1 >= std::abs(s.mu2));
  }
}

TEST_CASE("w_iso and qw_iso examples") {
  CHECK(w_iso(Mat2::Identity(), 2) == doctest::Approx(0.0));
  CHECK(std::abs(w_iso(rotation(0.7), 2)) < 1e-14);
  CHECK(w_iso(M(2, 0, 0, 2), 2) == doctest::Approx(2.0));
  CHECK(qw_iso(Mat2::Identity(), 2) == doctest::Approx(0.0));
  CHECK(qw_iso(Mat2::Zero(), 2) == doctest::Approx(1.0));
  CHECK(qw_iso(M(2, 0, 0, 2), 2) == doctest::Approx(2.0));
}

TEST_CASE("qw_iso is continuous across the branch interface") {
  // mu1 + mu2 = 1 at diag(0.7, 0.3)
  for (double eps : {1e-7, 1e-9}) {
    CHECK(std::abs(qw_iso(M(0.7 + eps, 0, 0, 0.3), 2) - qw_iso(M(0.7 - eps, 0, 0, 0.3), 2)) < 10 * eps);
  }
}

TEST_CASE("cubic archetypes") {
  const Vec2 b(1, 1);
  CHECK(w_cubic(Mat2::Identity(), b) == 0.0);
  CHECK(qw_cubic(Mat2::Identity(), b) == 0.0);
  CHECK(w_cubic(M(2, 0, 0, 1), b) == doctest::Approx(1.0));
  CHECK(qw_cubic(M(2, 0, 0, 1), b) == doctest::Approx(1.0));
  CHECK(w_cubic(M(0.5, 0, 0, 1), b) == doctest::Approx(0.25));
  CHECK(qw_cubic(M(0.5, 0, 0, 1), b) == 0.0);
  CHECK(composite_cubic(Mat2::Identity(), b, 2) == doctest::Approx(0.0));
}

TEST_CASE("composite_cubic rotation behaviour") {
  const Vec2 b(1, 1);
  const auto samples = random_matrices(100, 3.0, 5);
  double worst = 0.0, best_break = 0.0;
  for (const Mat2& A : samples) {
    worst = std::max(worst, std::abs(composite_cubic(A * rotation(kPi / 2), b, 2) - composite_cubic(A, b, 2)));
    best_break = std::max(best_break, std::abs(composite_cubic(A * rotation(0.3), b, 2) - composite_cubic(A, b, 2)));
  }
  CHECK(worst < 1e-12 * 100);
  CHECK(best_break > 1e-6);
}

TEST_CASE("envelope ordering at random matrices") {
  const Vec2 b(1, 1);
  for (const Mat2& A : random_matrices(10000, 5.0, 2024)) {
    const auto s = signed_singular_values(A);
    const double wi = w_iso(A, 2), qi = qw_iso(A, 2);
    CHECK(qi <= wi + 1e-12 * std::max(1.0, wi));
    if (s.mu1 + s.mu2 >= 1.0) CHECK(std::abs(qi - wi) <= 1e-12 * std::max(1.0, wi));
    CHECK(qw_cubic(A, b) <= w_cubic(A, b) + 1e-12);
  }
}

TEST_CASE("gradients match central differences") {
  const Vec2 b(1.3, 0.7);
  int checked = 0;
  for (const Mat2& A : random_matrices(500, 3.0, 99)) {
    const auto s = signed_singular_values(A);
    if (std::abs(s.mu1 + s.mu2 - 1.0) < 1e-3 || std::abs(s.mu2) < 1e-3 || std::abs(s.mu1 + s.mu2) < 1e-3) continue;
    if (std::abs(A.col(0).norm() - 1) < 1e-3 || std::abs(A.col(1).norm() - 1) < 1e-3) continue;
    for (double p : {2.0, 3.0}) {
      CHECK(rel_err(grad_w_iso(A, p), fd_gradient([&](const Mat2& X) { return w_iso(X, p); }, A)) < 1e-6);
      CHECK(rel_err(grad_qw_iso(A, p), fd_gradient([&](const Mat2& X) { return qw_iso(X, p); }, A)) < 1e-6);
    }
    CHECK(rel_err(grad_w_cubic(A, b), fd_gradient([&](const Mat2& X) { return w_cubic(X, b); }, A)) < 1e-6);
    CHECK(rel_err(grad_qw_cubic(A, b), fd_gradient([&](const Mat2& X) { return qw_cubic(X, b); }, A)) < 1e-6);
    CHECK(rel_err(grad_w_smooth_test(A), fd_gradient(w_smooth_test, A)) < 1e-6);
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("left frame indifference of every archetype") {
  const std::vector<Archetype> all = {archetype_w_iso(), archetype_qw_iso(), archetype_w_cubic(),
                                      archetype_qw_cubic(), archetype_composite_cubic(), archetype_smooth_test()};
  const auto samples = random_matrices(200, 3.0, 3);
  for (const auto& w : all) {
    for (const Mat2& A : samples) {
      const Mat2 R = rotation(1.234);
      const double v = w.evaluate(A);
      CHECK(std::abs(w.evaluate(R * A) - v) <= 1e-12 * std::max(1.0, v));
    }
  }
}

TEST_CASE("declared symmetries hold") {
  const std::vector<Archetype> all = {archetype_w_iso(), archetype_qw_iso(), archetype_qw_cubic(),
                                      archetype_composite_cubic()};
  const auto samples = random_matrices(200, 3.0, 8);
  for (const auto& w : all) {
    for (double g : w.generators) {
      for (const Mat2& A : samples) {
        const double v = w.evaluate(A);
        CHECK(std::abs(w.evaluate(A * rotation(g)) - v) <= 1e-12 * std::max(1.0, v));
      }
    }
  }
}

TEST_CASE("symmetry probe classification") {
  const auto grid = default_angle_grid();
  CHECK(grid.size() == 629);
  CHECK(grid[1] - grid[0] < 1e-2);
  const auto samples = random_matrices(32, 3.0, 17);
  auto iso = symmetry_probe(archetype_qw_iso(), grid, samples);
  CHECK(iso.kind == SymmetryKind::Continuous);
  auto cub = symmetry_probe(archetype_composite_cubic(), grid, samples);
  CHECK(cub.kind == SymmetryKind::Discrete);
  REQUIRE(cub.generators.size() == 1);
  CHECK(cub.generators[0] == doctest::Approx(kPi / 2).epsilon(1e-9));
  CHECK(angle_label(cub.generators[0]) == "pi/2");
  CHECK(cub.invariant_angles.size() == 4);

  Archetype sheared;
  sheared.name = "sheared";
  sheared.evaluate = [](const Mat2& A) { return A.col(0).squaredNorm(); };
  sheared.gradient = [](const Mat2& A) {
    Mat2 G = Mat2::Zero();
    G.col(0) = 2 * A.col(0);
    return G;
  };
  auto sh = symmetry_probe(sheared, grid, samples);
  // |A S e1| = |A e1| for the unimodular shear S, so the sweep flags it
  CHECK(sh.kind == SymmetryKind::NotSolid);
}

TEST_CASE("growth fits and registration") {
  for (const char* spec : {"w_iso(2)", "qw_iso(2)", "qw_cubic(1,1)", "composite_cubic(1,1,2)", "smooth_test"}) {
    const Archetype w = make_archetype(spec);
    const GrowthFit g = fit_growth(w);
    CHECK(g.alpha > 0.0);
    CHECK(g.beta >= g.alpha);
  }
  CHECK_THROWS_AS(make_archetype("banana(3)"), UnknownArchetype);
}

TEST_CASE("p-Lipschitz and rank-one convexity samples") {
  CHECK(std::isfinite(lipschitz_constant_estimate(archetype_qw_iso(), 2000, 1)));
  CHECK(lipschitz_constant_estimate(archetype_qw_iso(), 2000, 1) < 10.0);
  CHECK(rank_one_min_second_difference(archetype_qw_iso(), 2000, 4) >= -1e-8);
  CHECK(rank_one_min_second_difference(archetype_qw_cubic(), 2000, 4) >= -1e-8);
}

TEST_CASE("material connection and intrinsic metric from implants") {
  const std::vector<std::pair<int, int>> edges = {{0, 1}};
  const auto samples = random_matrices(100, 3.0, 21);
  {
    const std::vector<Mat2> E = {Mat2::Identity(), Mat2::Identity()};
    const auto Pi = material_connection_from_implants(E, edges);
    CHECK((Pi[0] - Mat2::Identity()).norm() < 1e-15);
  }
  const Mat2 E0 = M(1.2, 0.3, -0.1, 0.9);
  const std::vector<Mat2> E = {E0, rotation(0.8) * E0};
  auto Pi = material_connection_from_implants(E, edges);
  CHECK(w_invariance_residual(archetype_qw_iso(), E, edges, Pi, samples) < 1e-12);
  CHECK(w_invariance_residual(archetype_composite_cubic(), E, edges, Pi, samples) < 1e-10);
  // rotate the transfer: isotropic stays invariant, cubic does not
  std::vector<Mat2> bent = {E[1] * rotation(0.3) * E[0].inverse()};
  CHECK(w_invariance_residual(archetype_qw_iso(), E, edges, bent, samples) < 1e-10);
  CHECK(w_invariance_residual(archetype_composite_cubic(), E, edges, bent, samples) > 1e-6);

  const auto g = intrinsic_metric_from_implants({Mat2::Identity()});
  CHECK((g[0] - Mat2::Identity()).norm() < 1e-15);
  const auto g1 = intrinsic_metric_from_implants({E0});
  const auto g2 = intrinsic_metric_from_implants({E0 * rotation(2.1)});
  CHECK((g1[0] - g2[0]).norm() < 1e-14 * g1[0].norm());
  const auto g3 = intrinsic_metric_from_implants({E0 / 3.0});
  CHECK((g3[0] - 9.0 * g1[0]).norm() < 1e-13 * g3[0].norm());
}
