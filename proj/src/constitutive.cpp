#include "dislo/constitutive.hpp"

#include <algorithm>
#include <limits>
#include <cstdio>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

namespace dislo {

namespace {

// |(a00 + a11, a10 - a01)| = mu1 + mu2 and |(a00 - a11, a01 + a10)| = mu1 - mu2.
double sum_mu(const Mat2& A) { return std::hypot(A(0, 0) + A(1, 1), A(1, 0) - A(0, 1)); }
double diff_mu(const Mat2& A) { return std::hypot(A(0, 0) - A(1, 1), A(0, 1) + A(1, 0)); }

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

SignedSingularValues signed_singular_values(const Mat2& A) {
  const double sp = sum_mu(A);
  const double sm = diff_mu(A);
  return {0.5 * (sp + sm), 0.5 * (sp - sm)};
}

Mat2 closest_rotation(const Mat2& A) {
  const double c = A(0, 0) + A(1, 1);
  const double s = A(1, 0) - A(0, 1);
  const double r = std::hypot(c, s);
  if (r == 0.0) return Mat2::Identity();
  Mat2 R;
  R << c / r, -s / r, s / r, c / r;
  return R;
}

double dist2_so2(const Mat2& A) {
  return std::max(0.0, A.squaredNorm() - 2.0 * sum_mu(A) + 2.0);
}

double w_iso(const Mat2& A, double p) { return std::pow(dist2_so2(A), 0.5 * p); }

Mat2 grad_w_iso(const Mat2& A, double p) {
  const double d2 = dist2_so2(A);
  if (d2 == 0.0) return Mat2::Zero();
  const double scale = 0.5 * p * std::pow(d2, 0.5 * p - 1.0);
  return scale * 2.0 * (A - closest_rotation(A));
}

double qw_iso(const Mat2& A, double p) {
  if (sum_mu(A) >= 1.0) return w_iso(A, p);
  return std::pow(1.0 - 2.0 * A.determinant(), 0.5 * p);
}

Mat2 grad_qw_iso(const Mat2& A, double p) {
  if (sum_mu(A) >= 1.0) return grad_w_iso(A, p);
  const double base = 1.0 - 2.0 * A.determinant();
  return -p * std::pow(base, 0.5 * p - 1.0) * cofactor(A);
}

double w_cubic(const Mat2& A, const Vec2& betas) {
  double w = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double s = A.col(i).norm() - 1.0;
    w += betas[i] * s * s;
  }
  return w;
}

Mat2 grad_w_cubic(const Mat2& A, const Vec2& betas) {
  Mat2 G = Mat2::Zero();
  for (int i = 0; i < 2; ++i) {
    const double n = A.col(i).norm();
    if (n > 0.0) G.col(i) = 2.0 * betas[i] * (n - 1.0) / n * A.col(i);
  }
  return G;
}

double qw_cubic(const Mat2& A, const Vec2& betas) {
  double w = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double s = positive_part(A.col(i).norm() - 1.0);
    w += betas[i] * s * s;
  }
  return w;
}

Mat2 grad_qw_cubic(const Mat2& A, const Vec2& betas) {
  Mat2 G = Mat2::Zero();
  for (int i = 0; i < 2; ++i) {
    const double n = A.col(i).norm();
    if (n > 1.0) G.col(i) = 2.0 * betas[i] * (n - 1.0) / n * A.col(i);
  }
  return G;
}

double composite_cubic(const Mat2& A, const Vec2& betas, double p) {
  return qw_cubic(A, betas) + qw_iso(A, p);
}

Mat2 grad_composite_cubic(const Mat2& A, const Vec2& betas, double p) {
  return grad_qw_cubic(A, betas) + grad_qw_iso(A, p);
}

double w_smooth_test(const Mat2& A) {
  const double n2 = A.squaredNorm();
  const double dd = A.determinant() - 1.0;
  return 0.25 * n2 * n2 - n2 + dd * dd;
}

Mat2 grad_w_smooth_test(const Mat2& A) {
  const double n2 = A.squaredNorm();
  return n2 * A - 2.0 * A + 2.0 * (A.determinant() - 1.0) * cofactor(A);
}

std::string to_string(SymmetryKind k) {
  switch (k) {
    case SymmetryKind::Continuous: return "continuous";
    case SymmetryKind::Discrete: return "discrete";
    case SymmetryKind::NotSolid: return "not-solid";
  }
  return "unknown";
}

Archetype archetype_w_iso(double p) {
  Archetype a;
  a.name = "w_iso(" + std::to_string(p) + ")";
  a.p = p;
  a.evaluate = [p](const Mat2& A) { return w_iso(A, p); };
  a.gradient = [p](const Mat2& A) { return grad_w_iso(A, p); };
  a.smooth_at = [](const Mat2& A) { return sum_mu(A) > 1e-9; };
  a.declared = SymmetryKind::Continuous;
  return a;
}

Archetype archetype_qw_iso(double p) {
  Archetype a;
  a.name = "qw_iso(" + std::to_string(p) + ")";
  a.p = p;
  a.evaluate = [p](const Mat2& A) { return qw_iso(A, p); };
  a.gradient = [p](const Mat2& A) { return grad_qw_iso(A, p); };
  a.smooth_at = [](const Mat2& A) { return std::abs(sum_mu(A) - 1.0) > 1e-9; };
  a.declared = SymmetryKind::Continuous;
  return a;
}

namespace {

bool columns_smooth(const Mat2& A, bool relaxed) {
  for (int i = 0; i < 2; ++i) {
    const double n = A.col(i).norm();
    if (n < 1e-9) return false;
    if (relaxed && std::abs(n - 1.0) < 1e-9) return false;
  }
  return true;
}

}  // namespace

Archetype archetype_w_cubic(double b1, double b2) {
  const Vec2 betas(b1, b2);
  Archetype a;
  a.name = "w_cubic(" + std::to_string(b1) + "," + std::to_string(b2) + ")";
  a.p = 2.0;
  a.evaluate = [betas](const Mat2& A) { return w_cubic(A, betas); };
  a.gradient = [betas](const Mat2& A) { return grad_w_cubic(A, betas); };
  a.smooth_at = [](const Mat2& A) { return columns_smooth(A, false); };
  a.declared = SymmetryKind::Discrete;
  a.generators = {0.5 * kPi};
  if (b1 != b2) a.generators = {kPi};
  return a;
}

Archetype archetype_qw_cubic(double b1, double b2) {
  const Vec2 betas(b1, b2);
  Archetype a;
  a.name = "qw_cubic(" + std::to_string(b1) + "," + std::to_string(b2) + ")";
  a.p = 2.0;
  a.evaluate = [betas](const Mat2& A) { return qw_cubic(A, betas); };
  a.gradient = [betas](const Mat2& A) { return grad_qw_cubic(A, betas); };
  a.smooth_at = [](const Mat2& A) { return columns_smooth(A, true); };
  a.declared = SymmetryKind::Discrete;
  a.generators = {0.5 * kPi};
  if (b1 != b2) a.generators = {kPi};
  return a;
}

Archetype archetype_composite_cubic(double b1, double b2, double p) {
  const Vec2 betas(b1, b2);
  Archetype a;
  a.name = "composite_cubic(" + std::to_string(b1) + "," + std::to_string(b2) + "," +
           std::to_string(p) + ")";
  a.p = p;
  a.evaluate = [betas, p](const Mat2& A) { return composite_cubic(A, betas, p); };
  a.gradient = [betas, p](const Mat2& A) { return grad_composite_cubic(A, betas, p); };
  a.smooth_at = [](const Mat2& A) {
    return columns_smooth(A, true) && std::abs(sum_mu(A) - 1.0) > 1e-9;
  };
  a.declared = SymmetryKind::Discrete;
  a.generators = {0.5 * kPi};
  if (b1 != b2) a.generators = {kPi};
  return a;
}

Archetype archetype_smooth_test() {
  Archetype a;
  a.name = "smooth_test";
  a.p = 4.0;
  a.evaluate = [](const Mat2& A) { return w_smooth_test(A); };
  a.gradient = [](const Mat2& A) { return grad_w_smooth_test(A); };
  a.smooth_at = [](const Mat2&) { return true; };
  a.declared = SymmetryKind::Continuous;
  return a;
}

Archetype make_archetype(const std::string& spec) {
  static const std::regex re(R"(^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$)");
  std::smatch m;
  if (!std::regex_match(spec, m, re)) throw UnknownArchetype("cannot parse archetype '" + spec + "'");
  const std::string name = m[1];
  std::vector<double> args;
  if (m[2].matched) {
    std::stringstream ss(m[2].str());
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        args.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw UnknownArchetype("bad archetype parameter '" + tok + "' in '" + spec + "'");
      }
    }
  }
  auto arg = [&](std::size_t i, double def) { return i < args.size() ? args[i] : def; };
  Archetype a;
  if (name == "w_iso") {
    a = archetype_w_iso(arg(0, 2.0));
  } else if (name == "qw_iso") {
    a = archetype_qw_iso(arg(0, 2.0));
  } else if (name == "w_cubic") {
    a = archetype_w_cubic(arg(0, 1.0), arg(1, 1.0));
  } else if (name == "qw_cubic") {
    a = archetype_qw_cubic(arg(0, 1.0), arg(1, 1.0));
  } else if (name == "composite_cubic") {
    a = archetype_composite_cubic(arg(0, 1.0), arg(1, 1.0), arg(2, 2.0));
  } else if (name == "smooth_test") {
    a = archetype_smooth_test();
  } else {
    throw UnknownArchetype("unknown archetype '" + name + "'");
  }
  if (a.p < 2.0) throw UnknownArchetype("growth exponent must be >= 2 in '" + spec + "'");
  const GrowthFit g = fit_growth(a);
  if (!(g.alpha > 0.0)) throw GrowthFitFailed("no positive lower growth constant for " + a.name);
  return a;
}

std::vector<Mat2> random_matrices(std::size_t count, double bound, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<Mat2> out(count);
  for (auto& A : out) A << u(rng), u(rng), u(rng), u(rng);
  return out;
}

std::vector<double> default_angle_grid() {
  constexpr int n = 629;
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = 2.0 * kPi * k / n;
  return g;
}

namespace {

double sample_residual(const Archetype& w, const Mat2& A, const Mat2& g) {
  const double base = w.evaluate(A);
  return std::abs(w.evaluate(A * g) - base) / std::max(1.0, std::abs(base));
}

double max_residual(const Archetype& w, const std::vector<Mat2>& samples, const Mat2& g) {
  double r = 0.0;
  for (const auto& A : samples) r = std::max(r, sample_residual(w, A, g));
  return r;
}

// Golden-section search for the minimum of the max residual on [a, b].
double refine_angle(const Archetype& w, const std::vector<Mat2>& samples, double a, double b) {
  const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = max_residual(w, samples, rotation(c));
  double fd = max_residual(w, samples, rotation(d));
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = max_residual(w, samples, rotation(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = max_residual(w, samples, rotation(d));
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

SymmetryReport symmetry_probe(const Archetype& w, const std::vector<double>& angle_grid,
                              const std::vector<Mat2>& samples) {
  SymmetryReport rep;
  const std::size_t n = angle_grid.size();
  std::vector<double> res(n);
  for (std::size_t k = 0; k < n; ++k) res[k] = max_residual(w, samples, rotation(angle_grid[k]));

  // Fluid-like invariance under a unimodular shear rules out a solid.
  Mat2 shear;
  shear << 1.0, 0.3, 0.0, 1.0;
  if (max_residual(w, samples, shear) < kSymmetryTolerance) {
    rep.kind = SymmetryKind::NotSolid;
    return rep;
  }

  if (std::all_of(res.begin(), res.end(), [](double r) { return r < kSymmetryTolerance; })) {
    rep.kind = SymmetryKind::Continuous;
    rep.invariant_angles = angle_grid;
    return rep;
  }

  // Invariant angles need not lie on the grid: refine every grid-local minimum.
  std::vector<double> found;
  for (std::size_t k = 0; k < n; ++k) {
    const double prev = res[(k + n - 1) % n];
    const double next = res[(k + 1) % n];
    if (!(res[k] <= prev && res[k] <= next)) continue;
    const double a = k > 0 ? angle_grid[k - 1] : angle_grid[n - 1] - 2.0 * kPi;
    const double b = k + 1 < n ? angle_grid[k + 1] : angle_grid[0] + 2.0 * kPi;
    const double phi = refine_angle(w, samples, a, b);
    std::size_t invariant = 0;
    const Mat2 g = rotation(phi);
    for (const auto& A : samples)
      if (sample_residual(w, A, g) < kSymmetryTolerance) ++invariant;
    if (invariant == samples.size()) {
      double wrapped = std::fmod(phi + 2.0 * kPi, 2.0 * kPi);
      if (wrapped > 2.0 * kPi - 1e-9) wrapped = 0.0;
      found.push_back(wrapped);
    } else if (2 * invariant >= samples.size()) {
      throw InconclusiveSamples(phi);
    }
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-7; }),
              found.end());
  rep.invariant_angles = found;
  rep.kind = SymmetryKind::Discrete;
  for (double phi : found) {
    if (phi > 1e-7) {
      rep.generators.push_back(phi);
      break;
    }
  }
  return rep;
}

std::string angle_label(double angle) {
  const double r = angle / kPi;
  for (int den = 1; den <= 24; ++den) {
    const double num = r * den;
    const long k = std::lround(num);
    if (std::abs(num - static_cast<double>(k)) < 1e-6 && k != 0) {
      const long g = std::gcd(k, static_cast<long>(den));
      const long kk = k / g;
      const long dd = den / g;
      std::string s = (kk == 1 ? std::string() : std::to_string(kk)) + "pi";
      if (dd != 1) s += "/" + std::to_string(dd);
      return s;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", angle);
  return buf;
}

GrowthFit fit_growth(const Archetype& w, std::size_t samples_per_sphere, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  GrowthFit fit;
  fit.alpha = std::numeric_limits<double>::infinity();
  for (double r : {0.1, 1.0, 10.0, 100.0}) {
    const double rp = std::pow(r, w.p);
    for (std::size_t i = 0; i < samples_per_sphere; ++i) {
      Mat2 A;
      A << nd(rng), nd(rng), nd(rng), nd(rng);
      A *= r / A.norm();
      const double W = w.evaluate(A);
      fit.beta = std::max(fit.beta, W / (1.0 + rp));
      if (rp > 1.0) fit.alpha = std::min(fit.alpha, W / (rp - 1.0));
    }
  }
  return fit;
}

double lipschitz_constant_estimate(const Archetype& w, std::size_t pairs, std::uint64_t seed) {
  const auto As = random_matrices(pairs, 5.0, seed);
  const auto Bs = random_matrices(pairs, 5.0, seed + 1);
  const auto Ds = random_matrices(pairs, 1e-2, seed + 2);
  double C = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    for (const Mat2& B : {Bs[i], Mat2(As[i] + Ds[i])}) {
      const Mat2& A = As[i];
      const double dist = (A - B).norm();
      if (dist == 0.0) continue;
      const double denom =
          (1.0 + std::pow(A.norm(), w.p - 1.0) + std::pow(B.norm(), w.p - 1.0)) * dist;
      C = std::max(C, std::abs(w.evaluate(A) - w.evaluate(B)) / denom);
    }
  }
  return C;
}

double rank_one_min_second_difference(const Archetype& w, std::size_t lines, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  double worst = std::numeric_limits<double>::infinity();
  constexpr double h = 0.05;
  for (std::size_t l = 0; l < lines; ++l) {
    Mat2 A;
    A << u(rng), u(rng), u(rng), u(rng);
    const double ta = ang(rng);
    const double tb = ang(rng);
    const Vec2 a(std::cos(ta), std::sin(ta));
    const Vec2 b(std::cos(tb), std::sin(tb));
    const Mat2 M = a * b.transpose();
    for (int k = -20; k <= 20; ++k) {
      const double t = k * h;
      const double d2 = w.evaluate(A + (t + h) * M) - 2.0 * w.evaluate(A + t * M) +
                        w.evaluate(A + (t - h) * M);
      worst = std::min(worst, d2);
    }
  }
  return worst;
}

std::vector<Mat2> material_connection_from_implants(const std::vector<Mat2>& implants,
                                                    const std::vector<std::pair<int, int>>& edges) {
  std::vector<Mat2> out;
  out.reserve(edges.size());
  for (const auto& [p, q] : edges) out.push_back(implants.at(q) * implants.at(p).inverse());
  return out;
}

double w_invariance_residual(const Archetype& w, const std::vector<Mat2>& implants,
                             const std::vector<std::pair<int, int>>& edges,
                             const std::vector<Mat2>& transfers, const std::vector<Mat2>& samples) {
  double r = 0.0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [p, q] = edges[e];
    for (const auto& A : samples) {
      const double lhs = w.evaluate(A * transfers[e] * implants[p]);
      const double rhs = w.evaluate(A * implants[q]);
      r = std::max(r, std::abs(lhs - rhs));
    }
  }
  return r;
}

std::vector<Mat2> intrinsic_metric_from_implants(const std::vector<Mat2>& implants) {
  std::vector<Mat2> out;
  out.reserve(implants.size());
  for (const auto& E : implants) out.push_back((E * E.transpose()).inverse());
  return out;
}

}  // namespace dislo
