#include "dislo/dislocation_builder.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <set>

namespace dislo {

double burgers_magnitude(double d, double theta) {
  if (!(d >= 0.0) || !(theta >= 0.0 && theta < kPi)) throw Error("burgers_magnitude: need d >= 0 and 0 <= theta < pi");
  return 2.0 * d * std::sin(0.5 * theta);
}

CoreParameters choose_core(double burgers_norm, std::optional<double> theta) {
  CoreParameters c;
  if (!(burgers_norm > 0.0)) return c;
  c.theta = theta ? *theta : std::min(std::cbrt(burgers_norm), kPi / 4);
  if (!(c.theta > 0.0 && c.theta < kPi)) throw Error("core angle must lie in (0, pi)");
  c.d = burgers_norm / (2.0 * std::sin(0.5 * c.theta));
  return c;
}

namespace {

// ---------------------------------------------------------------------------
// Polygon meshing. Vertices carry labels; equal labels are welded afterwards.

struct PolyMesh {
  std::vector<Vec2> pos;
  std::vector<int> label;
  std::vector<std::array<int, 3>> tris;  // indices into pos
};

double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

double min_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
  auto ang = [](const Vec2& x, const Vec2& y, const Vec2& z) {
    return std::abs(std::atan2(cross(y - x, z - x), (y - x).dot(z - x)));
  };
  return std::min({ang(a, b, c), ang(b, c, a), ang(c, a, b)});
}

PolyMesh ear_clip(const std::vector<Vec2>& pos, const std::vector<int>& label) {
  const int n = static_cast<int>(pos.size());
  PolyMesh out{pos, label, {}};
  double scale = 0.0;
  for (const auto& p : pos) scale = std::max(scale, (p - pos[0]).norm());
  const double tol = 1e-13 * scale * scale;

  std::set<EdgeKey> used;
  for (int i = 0; i < n; ++i) used.insert(edge_key(label[i], label[(i + 1) % n]));

  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  while (idx.size() > 3) {
    const int m = static_cast<int>(idx.size());
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const int a = idx[(i + m - 1) % m], b = idx[i], c = idx[(i + 1) % m];
      if (label[a] == label[b] || label[b] == label[c] || label[a] == label[c]) continue;
      if (orient(pos[a], pos[b], pos[c]) <= tol) continue;
      bool blocked = false;
      for (int j : idx) {
        if (j == a || j == b || j == c) continue;
        if (orient(pos[a], pos[b], pos[j]) >= -tol && orient(pos[b], pos[c], pos[j]) >= -tol &&
            orient(pos[c], pos[a], pos[j]) >= -tol) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      double score = min_angle(pos[a], pos[b], pos[c]);
      if (used.count(edge_key(label[a], label[c]))) score -= 10.0;
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    if (best < 0) throw CoreTouchesBoundary("slotted polygon admits no valid ear");
    const int a = idx[(best + m - 1) % m], b = idx[best], c = idx[(best + 1) % m];
    out.tris.push_back({a, b, c});
    used.insert(edge_key(label[a], label[c]));
    idx.erase(idx.begin() + best);
  }
  if (label[idx[0]] == label[idx[1]] || label[idx[1]] == label[idx[2]] || label[idx[0]] == label[idx[2]])
    throw CoreTouchesBoundary("slotted polygon leaves a self-welded triangle");
  out.tris.push_back({idx[0], idx[1], idx[2]});
  return out;
}

// Splits diagonals whose welded labels would coincide with another segment, so
// the only repeated label pairs left are the two sides of each weld.
void resolve_weld_conflicts(PolyMesh& pm, int boundary_count, int& next_label) {
  auto is_boundary = [&](int i, int j) {
    if (i >= boundary_count || j >= boundary_count) return false;
    return (i + 1) % boundary_count == j || (j + 1) % boundary_count == i;
  };
  for (int guard = 0; guard < 1000; ++guard) {
    std::map<EdgeKey, std::set<EdgeKey>> segs;  // label pair -> geometric segments
    std::map<EdgeKey, std::vector<int>> seg_tris;
    for (int t = 0; t < static_cast<int>(pm.tris.size()); ++t) {
      for (int k = 0; k < 3; ++k) {
        const int i = pm.tris[t][k], j = pm.tris[t][(k + 1) % 3];
        segs[edge_key(pm.label[i], pm.label[j])].insert(edge_key(i, j));
        seg_tris[edge_key(i, j)].push_back(t);
      }
    }
    bool changed = false;
    for (const auto& [key, set] : segs) {
      if (set.size() < 2) continue;
      int interior = 0;
      EdgeKey victim{-1, -1};
      for (const auto& s : set) {
        if (!is_boundary(s.first, s.second)) {
          ++interior;
          victim = s;
        }
      }
      if (interior == 0) {
        if (set.size() == 2) continue;  // the weld itself
        throw CoreTouchesBoundary("weld seams overlap");
      }
      const auto& ts = seg_tris.at(victim);
      if (ts.size() != 2) throw CoreTouchesBoundary("diagonal is not shared by two triangles");
      const int mid = static_cast<int>(pm.pos.size());
      pm.pos.push_back(0.5 * (pm.pos[victim.first] + pm.pos[victim.second]));
      pm.label.push_back(next_label++);
      std::vector<std::array<int, 3>> repl;
      for (int t : ts) {
        const auto tri = pm.tris[t];
        for (int k = 0; k < 3; ++k) {
          const int i = tri[k], j = tri[(k + 1) % 3], o = tri[(k + 2) % 3];
          if (edge_key(i, j) != victim) continue;
          repl.push_back({i, mid, o});
          repl.push_back({mid, j, o});
        }
      }
      const int t0 = std::max(ts[0], ts[1]), t1 = std::min(ts[0], ts[1]);
      pm.tris.erase(pm.tris.begin() + t0);
      pm.tris.erase(pm.tris.begin() + t1);
      pm.tris.insert(pm.tris.end(), repl.begin(), repl.end());
      changed = true;
      break;
    }
    if (!changed) return;
  }
  throw CoreTouchesBoundary("weld conflict resolution did not terminate");
}

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = orient(a, b, c), d2 = orient(a, b, d), d3 = orient(c, d, a), d4 = orient(c, d, b);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

bool polygon_is_simple(const std::vector<Vec2>& P) {
  const int n = static_cast<int>(P.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_cross(P[i], P[(i + 1) % n], P[j], P[(j + 1) % n])) return false;
    }
  double area = 0.0;
  for (int i = 0; i < n; ++i) area += cross(P[i], P[(i + 1) % n]);
  return area > 0.0;
}

double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double s = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (x - (a + s * ab)).norm();
}

Vec2 heading(double h) { return Vec2(std::cos(h), std::sin(h)); }

// ---------------------------------------------------------------------------
// Boundary development of a record.

struct Layout {
  std::array<double, 3> length;   // side j joins corner j and j+1
  std::array<double, 3> head;     // heading of side j
  std::array<double, 3> angle;    // interior angle at corner j
  Vec2 gap = Vec2::Zero();
  // Corner positions when the polyline is laid starting from corner k0;
  // corner k0 itself sits at the origin and its shifted copy at gap.
  std::array<Vec2, 4> lay(int k0) const {
    std::array<Vec2, 4> P;
    P[0] = Vec2::Zero();
    for (int i = 0; i < 3; ++i) {
      const int side = (k0 + i) % 3;
      P[i + 1] = P[i] + length[side] * heading(head[side]);
    }
    return P;
  }
};

Layout make_layout(const TriangleRecord& rec, double phi) {
  Layout L;
  L.length = {rec.c, rec.a, rec.b};
  L.angle = {rec.alpha, rec.beta, rec.gamma};
  L.head = {phi, phi + kPi - rec.beta, phi + 2.0 * kPi - rec.beta - rec.gamma};
  for (int j = 0; j < 3; ++j) L.gap += L.length[j] * heading(L.head[j]);
  return L;
}

struct Plan {
  double phi = 0.0;
  Layout layout;
  bool has_core = false;
  CoreParameters core;
  int k0 = -1;
  double s_q = 0.0;
  double shift = 0.0;  // core offset along the gap direction
};

struct CoreGeometry {
  Vec2 p, r, rp, q, qp;
};

CoreGeometry core_geometry(const Plan& plan) {
  const auto P = plan.layout.lay(plan.k0);
  const Vec2 t = plan.layout.gap;
  const Vec2 that = t.normalized();
  const Vec2 w = perp(that);
  const double a = (P[1] - P[2]).norm(), b = (P[2] - P[0]).norm(), c = (P[0] - P[1]).norm();
  const Vec2 incenter = (a * P[0] + b * P[1] + c * P[2]) / (a + b + c);
  const double h = plan.core.d * std::cos(0.5 * plan.core.theta);
  const Vec2 mid = incenter + 0.5 * h * w + plan.shift * that;
  CoreGeometry g;
  g.r = mid - 0.5 * t;
  g.rp = mid + 0.5 * t;
  g.p = mid - h * w;
  const int side = plan.k0;
  g.q = P[0] + plan.s_q * heading(plan.layout.head[side]);
  g.qp = g.q + t;
  return g;
}

// Picks the side through which the weld seam leaves the triangle.
bool place_core(Plan& plan) {
  const Vec2 t = plan.layout.gap;
  const Vec2 w = perp(t.normalized());
  double best = -1.0;
  int best_k = -1;
  double best_s = 0.0;
  for (int k0 = 0; k0 < 3; ++k0) {
    Plan trial = plan;
    trial.k0 = k0;
    trial.s_q = 0.0;
    const auto P = plan.layout.lay(k0);
    const Vec2 r = core_geometry(trial).r;
    // first side hit by the ray r + lambda w in this laying
    double lam_min = std::numeric_limits<double>::infinity();
    int hit = -1;
    double hit_s = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Vec2 A = P[i], u = P[i + 1 < 3 ? i + 1 : 0] - P[i];
      const double L = u.norm();
      const Vec2 uh = u / L;
      const double den = cross(w, uh);
      if (std::abs(den) < 1e-15) continue;
      // r + lam w = A + s uh
      const Vec2 rhs = A - r;
      const double lam = cross(rhs, uh) / den;
      const double s = cross(rhs, w) / den;
      if (lam > 0 && s >= 0 && s <= L && lam < lam_min) {
        lam_min = lam;
        hit = i;
        hit_s = s;
      }
    }
    if (hit != 0) continue;
    const double L = plan.layout.length[k0];
    const double score = std::min(hit_s, L - hit_s) / L;
    if (score > best) {
      best = score;
      best_k = k0;
      best_s = hit_s;
    }
  }
  if (best_k < 0 || best < 0.02) return false;
  plan.k0 = best_k;
  plan.s_q = best_s;

  // clearance of the removed region from the triangle sides
  const auto P = plan.layout.lay(plan.k0);
  const auto g = core_geometry(plan);
  const double a = (P[1] - P[2]).norm(), b = (P[2] - P[0]).norm(), c = (P[0] - P[1]).norm();
  const double per = a + b + c;
  const double inradius = std::abs(cross(P[1] - P[0], P[2] - P[0])) / per;
  const std::array<Vec2, 4> closed = {P[0], P[1], P[2], P[0]};
  for (const Vec2& x : {g.p, g.r, g.rp}) {
    for (int i = 0; i < 3; ++i) {
      if (orient(closed[i], closed[i + 1], x) <= 0.0) return false;
      if (point_segment_distance(x, closed[i], closed[i + 1]) < 0.02 * inradius) return false;
    }
  }
  std::vector<Vec2> poly = {g.q, P[1], P[2], P[3], g.qp, g.rp, g.p, g.r};
  return polygon_is_simple(poly);
}

Plan plan_triangle(const TriangleRecord& rec, const DislocatedTriangleOptions& opts) {
  for (double s : {rec.a, rec.b, rec.c})
    if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateTriangle("side lengths must be positive");
  for (double ang : {rec.alpha, rec.beta, rec.gamma})
    if (!(ang > opts.min_angle && ang < kPi - opts.min_angle))
      throw DegenerateTriangle("angle " + std::to_string(ang) + " outside the admissible range");
  const double sum = rec.alpha + rec.beta + rec.gamma;
  if (std::abs(sum - kPi) > 1e-10) throw AnglesDontSumToPi("angle sum misses pi by " + std::to_string(sum - kPi));

  Plan plan;
  const Vec2 gap0 = make_layout(rec, 0.0).gap;
  const double bt = rec.burgers.norm();
  if (rec.ab_direction) {
    plan.phi = *rec.ab_direction;
    plan.layout = make_layout(rec, plan.phi);
    if ((plan.layout.gap - rec.burgers).norm() > 1e-9)
      throw InconsistentClosureGap("development gap differs from the prescribed Burgers vector by " +
                                   std::to_string((plan.layout.gap - rec.burgers).norm()));
  } else {
    if (std::abs(gap0.norm() - bt) > 1e-9)
      throw InconsistentClosureGap("development gap norm " + std::to_string(gap0.norm()) + " vs prescribed " +
                                   std::to_string(bt));
    plan.phi = (bt > 0.0 && gap0.norm() > 0.0) ? angle_of(rec.burgers) - angle_of(gap0) : 0.0;
    plan.layout = make_layout(rec, plan.phi);
  }

  const double perimeter = rec.a + rec.b + rec.c;
  const double gn = plan.layout.gap.norm();
  if (gn <= 1e-12 * perimeter) return plan;

  plan.has_core = true;
  plan.core = choose_core(gn, opts.theta);
  if (place_core(plan)) return plan;
  const auto P = plan.layout.lay(0);
  const double inradius = std::abs(cross(P[1] - P[0], P[2] - P[0])) / perimeter;
  plan.shift = 0.3 * inradius;
  if (place_core(plan)) return plan;
  throw CoreTouchesBoundary("dislocation core does not fit inside the triangle");
}

// Extra points on each side, as (arclength from the side's first corner, label).
using SidePoints = std::array<std::vector<std::pair<double, int>>, 3>;

struct PatchLabels {
  std::array<int, 3> corner;
  int q = -1, p = -1, r = -1;
};

PolyMesh build_patch(const Plan& plan, SidePoints extras, const PatchLabels& lab, int& next_label) {
  for (auto& v : extras) std::sort(v.begin(), v.end());
  std::vector<Vec2> pos;
  std::vector<int> label;
  auto push = [&](const Vec2& x, int l) {
    pos.push_back(x);
    label.push_back(l);
  };
  const Layout& L = plan.layout;
  if (!plan.has_core) {
    const auto P = L.lay(0);
    for (int j = 0; j < 3; ++j) {
      // close on the true corner for the last side
      push(P[j], lab.corner[j]);
      for (const auto& [s, l] : extras[j]) push(P[j] + s * heading(L.head[j]), l);
    }
  } else {
    const int k0 = plan.k0, k1 = (k0 + 1) % 3, k2 = (k0 + 2) % 3;
    const auto P = L.lay(k0);
    const auto g = core_geometry(plan);
    const Vec2 t = L.gap;
    const Vec2 u = heading(L.head[k0]);
    push(g.q, lab.q);
    for (const auto& [s, l] : extras[k0])
      if (s > plan.s_q) push(P[0] + s * u, l);
    push(P[1], lab.corner[k1]);
    for (const auto& [s, l] : extras[k1]) push(P[1] + s * heading(L.head[k1]), l);
    push(P[2], lab.corner[k2]);
    for (const auto& [s, l] : extras[k2]) push(P[2] + s * heading(L.head[k2]), l);
    push(P[3], lab.corner[k0]);
    for (const auto& [s, l] : extras[k0])
      if (s < plan.s_q) push(P[0] + s * u + t, l);
    push(g.qp, lab.q);
    push(g.rp, lab.r);
    push(g.p, lab.p);
    push(g.r, lab.r);
    if (!polygon_is_simple(pos)) throw CoreTouchesBoundary("slotted polygon self-intersects");
  }
  const int boundary = static_cast<int>(pos.size());
  PolyMesh pm = ear_clip(pos, label);
  resolve_weld_conflicts(pm, boundary, next_label);
  return pm;
}

std::array<Vec2, 3> corner_positions(const Plan& plan) {
  std::array<Vec2, 3> out;
  const int k0 = plan.has_core ? plan.k0 : 0;
  const auto P = plan.layout.lay(k0);
  for (int i = 0; i < 3; ++i) out[(k0 + i) % 3] = P[i];
  if (plan.has_core) out[k0] = P[3];
  return out;
}

std::array<double, 3> sides_of(const PolyMesh& pm, const std::array<int, 3>& tri) {
  return {(pm.pos[tri[1]] - pm.pos[tri[0]]).norm(), (pm.pos[tri[2]] - pm.pos[tri[1]]).norm(),
          (pm.pos[tri[0]] - pm.pos[tri[2]]).norm()};
}

}  // namespace

Vec2 development_gap(const TriangleRecord& rec, double phi) { return make_layout(rec, phi).gap; }

IntrinsicMesh single_dislocation_plane(double H, double theta, double d, int refinements) {
  if (!(theta > 0.0 && theta < kPi / 2)) throw WedgeDoesNotFit("wedge angle must lie in (0, pi/2)");
  if (!(d > 0.0) || !(H > 0.0)) throw WedgeDoesNotFit("core length and halfwidth must be positive");
  if (!(d < H)) throw WedgeDoesNotFit("core length exceeds the halfwidth");
  const double c = d * std::cos(0.5 * theta), s = d * std::sin(0.5 * theta);
  // labels: q 0, square corners 1..4, r 5, p 6
  const std::vector<Vec2> pos = {Vec2(H, s),  Vec2(H, H), Vec2(-H, H), Vec2(-H, -H), Vec2(H, -H),
                                 Vec2(H, -s), Vec2(c, -s), Vec2(0, 0), Vec2(c, s)};
  const std::vector<int> label = {0, 1, 2, 3, 4, 0, 5, 6, 5};
  int next = 7;
  PolyMesh pm = ear_clip(pos, label);
  resolve_weld_conflicts(pm, static_cast<int>(pos.size()), next);
  std::vector<std::array<int, 3>> tris;
  std::vector<std::array<double, 3>> sides;
  for (const auto& tri : pm.tris) {
    tris.push_back({pm.label[tri[0]], pm.label[tri[1]], pm.label[tri[2]]});
    sides.push_back(sides_of(pm, tri));
  }
  CoreSlit slit;
  slit.plus = 6;
  slit.minus = 5;
  slit.theta = theta;
  slit.d = d;
  IntrinsicMesh mesh = build_mesh_from_sides(next, tris, sides, {slit});
  for (int i = 0; i < refinements; ++i) mesh = subdivide(mesh);
  return mesh;
}

DislocatedTriangle dislocated_triangle(const TriangleRecord& rec, const DislocatedTriangleOptions& opts) {
  const Plan plan = plan_triangle(rec, opts);
  DislocatedTriangle out;
  out.record = rec;
  out.gap = plan.layout.gap;
  out.has_core = plan.has_core;
  out.core = plan.core;
  out.exit_side = plan.k0;
  out.exit_arclength = plan.s_q;
  out.shifted_placement = plan.shift != 0.0;

  PatchLabels lab;
  lab.corner = {0, 1, 2};
  int next = 3;
  if (plan.has_core) {
    lab.q = next++;
    lab.p = next++;
    lab.r = next++;
  }
  const PolyMesh pm = build_patch(plan, {}, lab, next);
  std::vector<std::array<int, 3>> tris;
  std::vector<std::array<double, 3>> sides;
  for (const auto& tri : pm.tris) {
    tris.push_back({pm.label[tri[0]], pm.label[tri[1]], pm.label[tri[2]]});
    sides.push_back(sides_of(pm, tri));
    out.dev.push_back({pm.pos[tri[0]], pm.pos[tri[1]], pm.pos[tri[2]]});
  }
  std::vector<CoreSlit> slits;
  if (plan.has_core) {
    CoreSlit s;
    s.plus = lab.p;
    s.minus = lab.r;
    s.theta = plan.core.theta;
    s.d = plan.core.d;
    slits.push_back(s);
  }
  out.mesh = build_mesh_from_sides(next, tris, sides, std::move(slits));
  out.corner_ids = lab.corner;
  out.corner_dev = corner_positions(plan);
  return out;
}

std::string triangulation_to_json(const TriangulationData& data, int indent) {
  nlohmann::ordered_json j;
  j["vertices"] = data.num_vertices;
  nlohmann::ordered_json tris = nlohmann::ordered_json::array();
  for (const auto& r : data.records) {
    nlohmann::ordered_json t;
    t["a"] = r.a;
    t["b"] = r.b;
    t["c"] = r.c;
    t["alpha"] = r.alpha;
    t["beta"] = r.beta;
    t["gamma"] = r.gamma;
    t["burgers"] = {r.burgers.x(), r.burgers.y()};
    if (r.ab_direction) t["ab_direction"] = *r.ab_direction;
    tris.push_back(std::move(t));
  }
  j["triangles"] = std::move(tris);
  j["incidence"] = data.triangles;
  return j.dump(indent);
}

TriangulationData triangulation_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TriangulationData data;
    data.triangles = j.at("incidence").get<std::vector<std::array<int, 3>>>();
    int max_v = -1;
    for (const auto& t : data.triangles)
      for (int v : t) max_v = std::max(max_v, v);
    data.num_vertices = j.value("vertices", max_v + 1);
    for (const auto& t : j.at("triangles")) {
      TriangleRecord r;
      r.a = t.at("a").get<double>();
      r.b = t.at("b").get<double>();
      r.c = t.at("c").get<double>();
      r.alpha = t.at("alpha").get<double>();
      r.beta = t.at("beta").get<double>();
      r.gamma = t.at("gamma").get<double>();
      const auto bv = t.at("burgers").get<std::array<double, 2>>();
      r.burgers = Vec2(bv[0], bv[1]);
      if (t.contains("ab_direction")) r.ab_direction = t.at("ab_direction").get<double>();
      data.records.push_back(r);
    }
    if (data.records.size() != data.triangles.size())
      throw InvalidMesh("triangulation data: one record per incidence triple required");
    return data;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidMesh(std::string("triangulation JSON: ") + ex.what());
  }
}

AssembledBody assemble(const TriangulationData& data, const DislocatedTriangleOptions& opts) {
  const int nt = static_cast<int>(data.triangles.size());
  if (nt == 0 || static_cast<int>(data.records.size()) != nt) throw InvalidMesh("triangulation data is empty or ragged");
  auto side_length = [&](int t, int j) {
    const auto& r = data.records[t];
    return j == 0 ? r.c : (j == 1 ? r.a : r.b);
  };
  auto corner_angle_of = [&](int t, int k) {
    const auto& r = data.records[t];
    return k == 0 ? r.alpha : (k == 1 ? r.beta : r.gamma);
  };

  // shared edges and interior vertices of the abstract triangulation
  std::map<EdgeKey, std::vector<std::pair<int, int>>> edge_sides;  // (triangle, side)
  for (int t = 0; t < nt; ++t)
    for (int j = 0; j < 3; ++j) edge_sides[edge_key(data.triangles[t][j], data.triangles[t][(j + 1) % 3])].push_back({t, j});
  std::vector<char> boundary(data.num_vertices, 0);
  for (const auto& [e, uses] : edge_sides) {
    if (uses.size() == 1) boundary[e.first] = boundary[e.second] = 1;
    if (uses.size() == 2) {
      const double l1 = side_length(uses[0].first, uses[0].second), l2 = side_length(uses[1].first, uses[1].second);
      if (std::abs(l1 - l2) > kGlueTolerance)
        throw EdgeLengthMismatch("edge " + std::to_string(e.first) + "-" + std::to_string(e.second) +
                                 " carries lengths differing by " + std::to_string(std::abs(l1 - l2)));
    }
  }
  std::vector<double> angle_sums(data.num_vertices, 0.0);
  for (int t = 0; t < nt; ++t)
    for (int k = 0; k < 3; ++k) angle_sums[data.triangles[t][k]] += corner_angle_of(t, k);
  for (int v = 0; v < data.num_vertices; ++v) {
    if (boundary[v]) continue;
    const double res = angle_sums[v] - 2.0 * kPi;
    if (std::abs(res) > kVertexAngleTolerance) throw VertexAngleDefect(v, res);
  }

  // pass 1: core placement per triangle
  std::vector<Plan> plans;
  plans.reserve(nt);
  for (int t = 0; t < nt; ++t) plans.push_back(plan_triangle(data.records[t], opts));

  // weld points on the triangulation edges, keyed by arclength from the lower vertex
  int next_label = data.num_vertices;
  std::map<EdgeKey, std::vector<std::pair<double, int>>> edge_points;
  std::vector<int> q_label(nt, -1);
  for (int t = 0; t < nt; ++t) {
    if (!plans[t].has_core) continue;
    const int j = plans[t].k0;
    const int u = data.triangles[t][j], v = data.triangles[t][(j + 1) % 3];
    const double s = u < v ? plans[t].s_q : side_length(t, j) - plans[t].s_q;
    q_label[t] = next_label++;
    edge_points[edge_key(u, v)].push_back({s, q_label[t]});
  }

  AssembledBody body;
  std::vector<std::array<int, 3>> tris;
  std::vector<std::array<double, 3>> sides;
  std::vector<CoreSlit> slits;
  body.slit_of_triangle.assign(nt, -1);
  for (int t = 0; t < nt; ++t) {
    const Plan& plan = plans[t];
    SidePoints extras;
    for (int j = 0; j < 3; ++j) {
      const int u = data.triangles[t][j], v = data.triangles[t][(j + 1) % 3];
      auto it = edge_points.find(edge_key(u, v));
      if (it == edge_points.end()) continue;
      const double L = side_length(t, j);
      for (const auto& [s, l] : it->second) {
        if (l == q_label[t]) continue;
        extras[j].push_back({u < v ? s : L - s, l});
      }
    }
    PatchLabels lab;
    lab.corner = data.triangles[t];
    if (plan.has_core) {
      lab.q = q_label[t];
      lab.p = next_label++;
      lab.r = next_label++;
    }
    const PolyMesh pm = build_patch(plan, extras, lab, next_label);
    for (const auto& tri : pm.tris) {
      tris.push_back({pm.label[tri[0]], pm.label[tri[1]], pm.label[tri[2]]});
      sides.push_back(sides_of(pm, tri));
      body.dev.push_back({pm.pos[tri[0]], pm.pos[tri[1]], pm.pos[tri[2]]});
      body.parent.push_back(t);
    }
    body.corner_dev.push_back(corner_positions(plan));
    body.cores.push_back(plan.core);
    if (plan.has_core) {
      CoreSlit s;
      s.plus = lab.p;
      s.minus = lab.r;
      s.theta = plan.core.theta;
      s.d = plan.core.d;
      body.slit_of_triangle[t] = static_cast<int>(slits.size());
      slits.push_back(s);
    }
  }
  body.mesh = build_mesh_from_sides(next_label, tris, sides, std::move(slits));

  for (int v = 0; v < data.num_vertices; ++v) {
    if (body.mesh.is_boundary_vertex(v)) continue;
    const double def = cone_deficit(body.mesh, v);
    if (std::abs(def) > kVertexAngleTolerance) throw VertexAngleDefect(v, -def);
  }
  for (int v = 0; v < body.mesh.num_vertices(); ++v)
    if (!body.mesh.is_boundary_vertex(v) && std::abs(cone_deficit(body.mesh, v)) > 1e-12) ++body.singular_points;
  return body;
}

}  // namespace dislo
