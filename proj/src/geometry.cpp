#include "tubenav/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tubenav {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Chord-length cumsum + central-difference tangents from bare positions.
Centerline finalize_from_points(const std::vector<Vec3>& pts) {
    if (pts.size() < 2) throw std::invalid_argument("centerline needs >= 2 points");
    Centerline cl;
    cl.samples.resize(pts.size());
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0) {
            const double d = distance(pts[i], pts[i - 1]);
            if (d <= 0.0) throw std::invalid_argument("consecutive centerline points coincide");
            s += d;
        }
        cl.samples[i].position = pts[i];
        cl.samples[i].arclength = s;
    }
    cl.total_length = s;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 d;
        if (i == 0)
            d = pts[1] - pts[0];
        else if (i == n - 1)
            d = pts[n - 1] - pts[n - 2];
        else
            d = pts[i + 1] - pts[i - 1];
        cl.samples[i].tangent = d.normalized();
    }
    return cl;
}

// Uniform B-spline evaluated on its fully supported domain [knots[d], knots[m]].
// Every output span is the same convolution of the control polygon, so there is
// no end-span curvature anomaly like a clamped spline has.
struct BSpline {
    int degree = 3;
    std::vector<Vec3> ctrl;
    std::vector<double> knots;

    static BSpline uniform(const std::vector<Vec3>& ctrl_pts, int degree) {
        const int m = static_cast<int>(ctrl_pts.size());
        if (m < degree + 1) throw std::invalid_argument("too few control points for spline degree");
        BSpline sp;
        sp.degree = degree;
        sp.ctrl = ctrl_pts;
        sp.knots.resize(m + degree + 1);
        for (int i = 0; i < m + degree + 1; ++i) sp.knots[i] = static_cast<double>(i);
        return sp;
    }

    double u_min() const { return knots[degree]; }
    double u_max() const { return knots[ctrl.size()]; }

    int find_span(double u) const {
        const int m = static_cast<int>(ctrl.size());
        if (u >= u_max()) return m - 1;
        if (u <= u_min()) return degree;
        int lo = degree, hi = m;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (knots[mid] <= u)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    }

    Vec3 eval(double u) const {
        u = std::clamp(u, u_min(), u_max());
        const int k = find_span(u);
        std::vector<Vec3> d(degree + 1);
        for (int j = 0; j <= degree; ++j) d[j] = ctrl[k - degree + j];
        for (int r = 1; r <= degree; ++r) {
            for (int j = degree; j >= r; --j) {
                const int i = k - degree + j;
                const double denom = knots[i + degree - r + 1] - knots[i];
                const double a = denom > 0.0 ? (u - knots[i]) / denom : 0.0;
                d[j] = d[j - 1] * (1.0 - a) + d[j] * a;
            }
        }
        return d[degree];
    }

    BSpline derivative() const {
        const int m = static_cast<int>(ctrl.size());
        BSpline sp;
        sp.degree = degree - 1;
        sp.ctrl.resize(m - 1);
        for (int i = 0; i < m - 1; ++i) {
            const double denom = knots[i + degree + 1] - knots[i + 1];
            sp.ctrl[i] = (ctrl[i + 1] - ctrl[i]) * (denom > 0.0 ? degree / denom : 0.0);
        }
        sp.knots.assign(knots.begin() + 1, knots.end() - 1);
        return sp;
    }
};

std::vector<Vec3> family_points(double length, double amp_scale, double amp_ratio, double w1, double w2,
                                double ph1, double ph2, int n_points) {
    std::vector<Vec3> pts(n_points);
    for (int j = 0; j < n_points; ++j) {
        const double u = static_cast<double>(j) / (n_points - 1);
        pts[j] = Vec3{amp_scale * std::sin(2.0 * kPi * w1 * u + ph1),
                      amp_scale * amp_ratio * std::sin(2.0 * kPi * w2 * u + ph2), u * length};
    }
    return pts;
}

} // namespace

Vec3 Centerline::point_at(double s) const {
    s = std::clamp(s, 0.0, total_length);
    auto it = std::lower_bound(samples.begin(), samples.end(), s,
                               [](const CenterlineSample& a, double v) { return a.arclength < v; });
    if (it == samples.begin()) return samples.front().position;
    if (it == samples.end()) return samples.back().position;
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double span = b.arclength - a.arclength;
    const double t = span > 0.0 ? (s - a.arclength) / span : 0.0;
    return a.position + (b.position - a.position) * t;
}

Vec3 Centerline::tangent_at(double s) const {
    s = std::clamp(s, 0.0, total_length);
    auto it = std::lower_bound(samples.begin(), samples.end(), s,
                               [](const CenterlineSample& a, double v) { return a.arclength < v; });
    if (it == samples.begin()) return samples.front().tangent;
    if (it == samples.end()) return samples.back().tangent;
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double span = b.arclength - a.arclength;
    const double t = span > 0.0 ? (s - a.arclength) / span : 0.0;
    return (a.tangent + (b.tangent - a.tangent) * t).normalized();
}

void Centerline::validate() const {
    if (samples.size() < 2) throw std::invalid_argument("centerline: too few samples");
    if (samples.front().arclength != 0.0) throw std::invalid_argument("centerline: arclength must start at 0");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (std::abs(samples[i].tangent.norm() - 1.0) > 1e-9)
            throw std::invalid_argument("centerline: tangent not unit norm");
        if (i > 0) {
            if (samples[i].arclength <= samples[i - 1].arclength)
                throw std::invalid_argument("centerline: arclength not strictly increasing");
            if (angle_between(samples[i].tangent, samples[i - 1].tangent) >= kPi / 6.0)
                throw std::invalid_argument("centerline: adjacent tangent angle >= 30 deg");
        }
    }
    if (std::abs(samples.back().arclength - total_length) > 1e-9 * std::max(1.0, total_length))
        throw std::invalid_argument("centerline: total_length mismatch");
}

CurvatureBand family_band(CurveFamily family) {
    switch (family) {
        case CurveFamily::A: return {0.0, 0.02};
        case CurveFamily::B: return {0.02, 0.08};
        case CurveFamily::C: return {0.08, 0.18};
        case CurveFamily::D: return {0.15, 0.35};
    }
    throw std::invalid_argument("unknown curve family");
}

double menger_curvature(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = distance(a, b);
    const double lb = distance(b, c);
    const double lc = distance(a, c);
    const double cross_norm = cross(b - a, c - b).norm();
    const double denom = la * lb * lc;
    return denom > 0.0 ? 2.0 * cross_norm / denom : 0.0;
}

double max_menger_curvature(const std::vector<Vec3>& points) {
    double best = 0.0;
    for (std::size_t i = 1; i + 1 < points.size(); ++i)
        best = std::max(best, menger_curvature(points[i - 1], points[i], points[i + 1]));
    return best;
}

RawCurve generate_raw_curve(CurveFamily family, double length, Rng& rng, int n_points) {
    if (length <= 0.0) throw std::invalid_argument("curve length must be positive");
    if (n_points < 4) throw std::invalid_argument("raw curve needs >= 4 points");
    const int fam_idx = static_cast<int>(family);
    if (fam_idx < 0 || fam_idx > 3) throw std::invalid_argument("unknown curve family");
    const CurvatureBand band = family_band(family);

    // Draw a target max curvature from the interior of the band, then calibrate
    // the transverse amplitude by bisection so the emitted polyline hits it.
    const double target = band.lo + (0.1 + 0.8 * rng.uniform()) * (band.hi - band.lo);
    static constexpr std::array<std::array<double, 2>, 4> kFreqBand = {
        {{0.8, 2.0}, {1.0, 2.5}, {1.5, 3.0}, {1.8, 3.2}}};
    const double w1 = rng.uniform(kFreqBand[fam_idx][0], kFreqBand[fam_idx][1]);
    const double w2 = rng.uniform(kFreqBand[fam_idx][0], kFreqBand[fam_idx][1]);
    const double ph1 = rng.uniform(0.0, 2.0 * kPi);
    const double ph2 = rng.uniform(0.0, 2.0 * kPi);
    const double ratio = rng.uniform(0.3, 1.0);

    auto curvature_at = [&](double scale) {
        return max_menger_curvature(family_points(length, scale, ratio, w1, w2, ph1, ph2, n_points));
    };

    double scale = 0.0;
    if (target > 0.0) {
        double hi = 0.5;
        int guard = 0;
        while (curvature_at(hi) < target && guard++ < 60) hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (curvature_at(mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        scale = 0.5 * (lo + hi);
    }

    RawCurve raw;
    raw.family = family;
    raw.points = family_points(length, scale, ratio, w1, w2, ph1, ph2, n_points);
    return raw;
}

Centerline smooth_curve(const RawCurve& raw, int degree, double tension, int n_samples) {
    if (degree != 3 && degree != 5) throw std::invalid_argument("spline degree must be 3 or 5");
    if (n_samples < 64) throw std::invalid_argument("need >= 64 output samples");
    if (tension < 0.0 || tension > 0.5) throw std::invalid_argument("tension outside [0, 0.5]");
    if (static_cast<int>(raw.points.size()) < degree + 1)
        throw std::invalid_argument("too few control points for spline degree");

    std::vector<Vec3> ctrl = raw.points;
    for (std::size_t i = 1; i + 1 < raw.points.size(); ++i) {
        const Vec3 mid = (raw.points[i - 1] + raw.points[i + 1]) * 0.5;
        ctrl[i] = raw.points[i] * (1.0 - tension) + mid * tension;
    }

    const BSpline sp = BSpline::uniform(ctrl, degree);
    const BSpline dsp = sp.derivative();

    // Dense (u, s) table, then invert to uniform arc length.
    const int dense = std::max(4096, 8 * n_samples);
    std::vector<double> us(dense), ss(dense);
    Vec3 prev = sp.eval(sp.u_min());
    double acc = 0.0;
    for (int i = 0; i < dense; ++i) {
        const double u = sp.u_min() + (sp.u_max() - sp.u_min()) * i / (dense - 1);
        const Vec3 p = sp.eval(u);
        acc += distance(p, prev);
        us[i] = u;
        ss[i] = acc;
        prev = p;
    }
    const double total = acc;
    if (total <= 0.0) throw std::invalid_argument("degenerate raw curve");

    std::vector<Vec3> pts(n_samples);
    std::vector<Vec3> tans(n_samples);
    int cursor = 0;
    for (int k = 0; k < n_samples; ++k) {
        const double sk = total * k / (n_samples - 1);
        while (cursor + 1 < dense && ss[cursor + 1] < sk) ++cursor;
        double u;
        if (cursor + 1 >= dense) {
            u = sp.u_max();
        } else {
            const double span = ss[cursor + 1] - ss[cursor];
            const double t = span > 0.0 ? (sk - ss[cursor]) / span : 0.0;
            u = us[cursor] + (us[cursor + 1] - us[cursor]) * t;
        }
        pts[k] = sp.eval(u);
        tans[k] = dsp.eval(u).normalized();
    }

    Centerline out = finalize_from_points(pts);
    out.samples.front().tangent = tans.front();
    out.samples.back().tangent = tans.back();
    for (int k = 1; k + 1 < n_samples; ++k) out.samples[k].tangent = tans[k];
    return out;
}

Centerline resample_by_arclength(const Centerline& cl, int n_samples) {
    if (n_samples < 2) throw std::invalid_argument("resample needs >= 2 samples");
    std::vector<Vec3> pts(n_samples);
    for (int k = 0; k < n_samples; ++k) {
        const double sk = cl.total_length * k / (n_samples - 1);
        pts[k] = cl.point_at(sk);
    }
    return finalize_from_points(pts);
}

Centerline blend_curves(const Centerline& c1, const Centerline& c2, double alpha) {
    if (alpha < 0.1 || alpha > 0.9) throw std::invalid_argument("blend alpha outside [0.1, 0.9]");
    const Centerline* a = &c1;
    const Centerline* b = &c2;
    Centerline ra, rb;
    if (c1.samples.size() != c2.samples.size()) {
        const int n = static_cast<int>(std::max(c1.samples.size(), c2.samples.size()));
        ra = resample_by_arclength(c1, n);
        rb = resample_by_arclength(c2, n);
        a = &ra;
        b = &rb;
    }
    std::vector<Vec3> pts(a->samples.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        pts[i] = a->samples[i].position * (1.0 - alpha) + b->samples[i].position * alpha;
    return finalize_from_points(pts);
}

std::pair<CurveFamily, CurveFamily> level_families(int level) {
    switch (level) {
        case 0: return {CurveFamily::A, CurveFamily::B};
        case 1: return {CurveFamily::B, CurveFamily::C};
        case 2: return {CurveFamily::C, CurveFamily::D};
        default: throw std::invalid_argument("curriculum level must be 0, 1 or 2");
    }
}

double level_curvature_cap(int level) {
    const auto fams = level_families(level);
    return family_band(fams.second).hi;
}

TubeSpec sample_curriculum_tube(int level, Rng& rng, const GeometryConfig& cfg) {
    const auto fams = level_families(level);
    const double cap = level_curvature_cap(level);

    for (int attempt = 0; attempt < 8; ++attempt) {
        RawCurve raw1 = generate_raw_curve(fams.first, cfg.tube_length, rng, cfg.raw_points);
        RawCurve raw2 = generate_raw_curve(fams.second, cfg.tube_length, rng, cfg.raw_points);
        const int deg1 = rng.uniform() < 0.5 ? 3 : 5;
        const int deg2 = rng.uniform() < 0.5 ? 3 : 5;
        const double ten1 = rng.uniform(0.0, 0.5);
        const double ten2 = rng.uniform(0.0, 0.5);
        const Centerline cl1 = smooth_curve(raw1, deg1, ten1, cfg.n_samples);
        const Centerline cl2 = smooth_curve(raw2, deg2, ten2, cfg.n_samples);
        double alpha = rng.uniform(0.1, 0.9);

        // Shrink alpha toward the gentler curve until the blend respects the
        // level's curvature cap; redraw everything if even alpha=0.1 fails.
        for (int shrink = 0; shrink < 32; ++shrink) {
            Centerline blended = blend_curves(cl1, cl2, alpha);
            std::vector<Vec3> pts(blended.samples.size());
            for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = blended.samples[i].position;
            if (max_menger_curvature(pts) <= cap) {
                TubeSpec tube;
                tube.centerline = std::move(blended);
                tube.radius = cfg.radius;
                tube.level = level;
                if (tube.centerline.total_length < 10.0 * tube.radius)
                    throw std::invalid_argument("tube too short for its radius");
                return tube;
            }
            if (alpha <= 0.1) break;
            alpha = std::max(0.1, alpha * 0.8);
        }
    }
    throw std::runtime_error("could not generate a tube under the level curvature cap");
}

TubeSpec sample_curriculum_tube_seeded(int level, std::uint64_t seed, const GeometryConfig& cfg) {
    Rng rng(seed);
    TubeSpec tube = sample_curriculum_tube(level, rng, cfg);
    tube.seed = seed;
    return tube;
}

NearestPointResult nearest_point_in_range(const Centerline& cl, const Vec3& p, int seg_lo, int seg_hi) {
    const auto& s = cl.samples;
    const int n_seg = static_cast<int>(s.size()) - 1;
    seg_lo = std::clamp(seg_lo, 0, n_seg - 1);
    seg_hi = std::clamp(seg_hi, 0, n_seg - 1);

    NearestPointResult best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int i = seg_lo; i <= seg_hi; ++i) {
        const Vec3& a = s[i].position;
        const Vec3 ab = s[i + 1].position - a;
        const double len2 = ab.norm_sq();
        double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const Vec3 q = a + ab * t;
        const double d2 = (p - q).norm_sq();
        if (d2 < best_d2) { // strict: ties keep the smaller arc length
            best_d2 = d2;
            best.segment = i;
            best.point = q;
            best.s = s[i].arclength + t * (s[i + 1].arclength - s[i].arclength);
            best.tangent = (s[i].tangent + (s[i + 1].tangent - s[i].tangent) * t).normalized();
        }
    }
    best.d_perp = std::sqrt(best_d2);
    best.end_overshoot = 0.0;
    if (best.s <= 0.0 || best.s >= cl.total_length) best.end_overshoot = dot(p - best.point, best.tangent);
    return best;
}

NearestPointResult nearest_point(const Centerline& cl, const Vec3& p) {
    const auto& s = cl.samples;
    const int n_seg = static_cast<int>(s.size()) - 1;
    constexpr int kCell = 8; // segments per pruning cell

    if (n_seg <= 2 * kCell) return nearest_point_in_range(cl, p, 0, n_seg - 1);

    // Prune with anchor distances: every point of cell [j, j+kCell) lies within
    // (s_{j+kCell} - s_j) of sample j along the curve, so |p - pos_j| minus that
    // arc span lower-bounds the distance to the whole cell.
    const int n_cells = (n_seg + kCell - 1) / kCell;
    double best_ub = std::numeric_limits<double>::infinity();
    thread_local std::vector<double> anchor_d;
    anchor_d.resize(n_cells);
    for (int c = 0; c < n_cells; ++c) {
        const int j = c * kCell;
        anchor_d[c] = distance(p, s[j].position);
        best_ub = std::min(best_ub, anchor_d[c]);
    }

    NearestPointResult best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_cells; ++c) {
        const int j = c * kCell;
        const int j_end = std::min(j + kCell, n_seg);
        const double span = s[j_end].arclength - s[j].arclength;
        if (anchor_d[c] - span > std::min(best_ub, best_d) + 1e-12) continue;
        const NearestPointResult cand = nearest_point_in_range(cl, p, j, j_end - 1);
        if (cand.d_perp < best_d) { // ascending cells + strict less: ties keep smaller s
            best_d = cand.d_perp;
            best = cand;
        }
    }
    return best;
}

bool is_inside(const TubeSpec& tube, const Vec3& p) {
    const NearestPointResult np = nearest_point(tube.centerline, p);
    if (np.d_perp > tube.radius) return false;
    if (np.s <= 0.0 && np.end_overshoot < -1e-12) return false;
    if (np.s >= tube.centerline.total_length && np.end_overshoot > 1e-12) return false;
    return true;
}

std::pair<std::string, std::string> export_obj(const TubeSpec& tube, int circle_segments) {
    if (circle_segments < 8) throw std::invalid_argument("circle_segments must be >= 8");
    const auto& samples = tube.centerline.samples;
    const int n = static_cast<int>(samples.size());

    // Parallel-transported frames keep ring seams from twisting along bends.
    std::vector<Vec3> normals(n);
    {
        const Vec3 t0 = samples[0].tangent;
        Vec3 ref{0.0, 1.0, 0.0};
        if (std::abs(dot(ref, t0)) > 0.99) ref = Vec3{1.0, 0.0, 0.0};
        normals[0] = (ref - t0 * dot(ref, t0)).normalized();
        for (int i = 1; i < n; ++i) {
            const Vec3& ta = samples[i - 1].tangent;
            const Vec3& tb = samples[i].tangent;
            Vec3 nrm = normals[i - 1];
            const Vec3 axis = cross(ta, tb);
            const double axis_norm = axis.norm();
            if (axis_norm > 1e-14) {
                const Vec3 u = axis / axis_norm;
                const double ang = angle_between(ta, tb);
                const double c = std::cos(ang), sform = std::sin(ang);
                nrm = nrm * c + cross(u, nrm) * sform + u * (dot(u, nrm) * (1.0 - c));
            }
            normals[i] = (nrm - tb * dot(nrm, tb)).normalized();
        }
    }

    char buf[128];
    std::string mesh = "# tube surface\n";
    for (int i = 0; i < n; ++i) {
        const Vec3 b = cross(samples[i].tangent, normals[i]);
        for (int j = 0; j < circle_segments; ++j) {
            const double th = 2.0 * kPi * j / circle_segments;
            const Vec3 v = samples[i].position + (normals[i] * std::cos(th) + b * std::sin(th)) * tube.radius;
            std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
            mesh += buf;
        }
    }
    for (int i = 0; i + 1 < n; ++i) {
        const int base_a = i * circle_segments;
        const int base_b = (i + 1) * circle_segments;
        for (int j = 0; j < circle_segments; ++j) {
            const int jn = (j + 1) % circle_segments;
            const int a = base_a + j + 1, b2 = base_a + jn + 1;
            const int c = base_b + jn + 1, d = base_b + j + 1;
            std::snprintf(buf, sizeof(buf), "f %d %d %d\nf %d %d %d\n", a, b2, c, a, c, d);
            mesh += buf;
        }
    }

    std::string line = "# tube centerline\n";
    for (int i = 0; i < n; ++i) {
        const Vec3& p = samples[i].position;
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", p.x, p.y, p.z);
        line += buf;
    }
    line += "l";
    for (int i = 1; i <= n; ++i) {
        std::snprintf(buf, sizeof(buf), " %d", i);
        line += buf;
    }
    line += "\n";
    return {mesh, line};
}

Centerline centerline_from_points(const std::vector<Vec3>& pts) { return finalize_from_points(pts); }

TubeSpec make_straight_tube(double length, double radius, int n_samples) {
    std::vector<Vec3> pts(n_samples);
    for (int i = 0; i < n_samples; ++i)
        pts[i] = Vec3{0.0, 0.0, length * i / (n_samples - 1)};
    TubeSpec tube;
    tube.centerline = finalize_from_points(pts);
    tube.radius = radius;
    return tube;
}

} // namespace tubenav
