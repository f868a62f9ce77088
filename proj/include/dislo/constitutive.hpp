#pragma once

#include "dislo/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dislo {

struct InconclusiveSamples : Error {
  double angle;
  explicit InconclusiveSamples(double a)
      : Error("invariance holds for some samples only at angle " + std::to_string(a)), angle(a) {}
};

struct UnknownArchetype : Error {
  using Error::Error;
};

struct GrowthFitFailed : Error {
  using Error::Error;
};

// Signed singular values: mu1 = sigma1, mu2 = sgn(det A) sigma2, so mu1 >= |mu2|.
struct SignedSingularValues {
  double mu1 = 0.0;
  double mu2 = 0.0;
};

SignedSingularValues signed_singular_values(const Mat2& A);

// Rotation in SO(2) closest to A in the Frobenius norm. For mu1 + mu2 = 0 the
// identity is returned.
Mat2 closest_rotation(const Mat2& A);

double dist2_so2(const Mat2& A);

double w_iso(const Mat2& A, double p);
Mat2 grad_w_iso(const Mat2& A, double p);

double qw_iso(const Mat2& A, double p);
Mat2 grad_qw_iso(const Mat2& A, double p);

double w_cubic(const Mat2& A, const Vec2& betas);
Mat2 grad_w_cubic(const Mat2& A, const Vec2& betas);

double qw_cubic(const Mat2& A, const Vec2& betas);
Mat2 grad_qw_cubic(const Mat2& A, const Vec2& betas);

double composite_cubic(const Mat2& A, const Vec2& betas, double p);
Mat2 grad_composite_cubic(const Mat2& A, const Vec2& betas, double p);

// C-infinity density |A|^4/4 - |A|^2 + (det A - 1)^2, minimal on SO(2).
double w_smooth_test(const Mat2& A);
Mat2 grad_w_smooth_test(const Mat2& A);

enum class SymmetryKind { Continuous, Discrete, NotSolid };

std::string to_string(SymmetryKind k);

struct Archetype {
  std::string name;
  double p = 2.0;
  std::function<double(const Mat2&)> evaluate;
  std::function<Mat2(const Mat2&)> gradient;
  // False on loci where the density is not twice differentiable.
  std::function<bool(const Mat2&)> smooth_at;
  SymmetryKind declared = SymmetryKind::Continuous;
  std::vector<double> generators;  // right-rotation angles generating the declared group
};

Archetype archetype_w_iso(double p = 2.0);
Archetype archetype_qw_iso(double p = 2.0);
Archetype archetype_w_cubic(double b1 = 1.0, double b2 = 1.0);
Archetype archetype_qw_cubic(double b1 = 1.0, double b2 = 1.0);
Archetype archetype_composite_cubic(double b1 = 1.0, double b2 = 1.0, double p = 2.0);
Archetype archetype_smooth_test();

// Parses "w_iso(p)", "qw_iso(p)", "w_cubic(b1,b2)", "qw_cubic(b1,b2)",
// "composite_cubic(b1,b2,p)" or "smooth_test". Registration runs fit_growth and
// throws GrowthFitFailed when no positive lower constant exists.
Archetype make_archetype(const std::string& spec);

std::vector<Mat2> random_matrices(std::size_t count, double bound, std::uint64_t seed);

// 629 equally spaced angles on [0, 2pi); spacing below 1e-2.
std::vector<double> default_angle_grid();

struct SymmetryReport {
  SymmetryKind kind = SymmetryKind::Continuous;
  std::vector<double> invariant_angles;  // refined, in [0, 2pi)
  std::vector<double> generators;
};

constexpr double kSymmetryTolerance = 1e-9;

SymmetryReport symmetry_probe(const Archetype& w, const std::vector<double>& angle_grid,
                              const std::vector<Mat2>& samples);

// Human-readable form of an angle as a rational multiple of pi, e.g. "pi/2".
std::string angle_label(double angle);

struct GrowthFit {
  double alpha = 0.0;
  double beta = 0.0;
};

// alpha (-1 + |A|^p) <= W(A) <= beta (1 + |A|^p), fitted on spheres |A| in {0.1, 1, 10, 100}.
GrowthFit fit_growth(const Archetype& w, std::size_t samples_per_sphere = 256, std::uint64_t seed = 7);

// Sampled estimate of C in |W(A)-W(B)| <= C (1 + |A|^{p-1} + |B|^{p-1}) |A-B|.
double lipschitz_constant_estimate(const Archetype& w, std::size_t pairs, std::uint64_t seed);

// Smallest second difference of t -> W(A + t a (x) b) over random rank-one segments.
double rank_one_min_second_difference(const Archetype& w, std::size_t lines, std::uint64_t seed);

// Transfer across each (p, q) cell pair: Pi = E_q E_p^{-1}.
std::vector<Mat2> material_connection_from_implants(const std::vector<Mat2>& implants,
                                                    const std::vector<std::pair<int, int>>& edges);

// max |W(A Pi E_p) - W(A E_q)| over edges and samples.
double w_invariance_residual(const Archetype& w, const std::vector<Mat2>& implants,
                             const std::vector<std::pair<int, int>>& edges,
                             const std::vector<Mat2>& transfers, const std::vector<Mat2>& samples);

std::vector<Mat2> intrinsic_metric_from_implants(const std::vector<Mat2>& implants);

}  // namespace dislo
