#include "pih/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pih::geom {

namespace {

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

void FaceCloud::validate() const {
    if (points.size() < 3) throw DegenerateCloud("face cloud needs at least 3 points");
    for (const auto& p : points) {
        if (!p.allFinite()) throw InvalidDimension("face cloud has non-finite coordinates");
    }
    auto hull = convex_hull(points);
    if (hull.size() < 3 || polygon_area(hull) <= 0.0) {
        throw DegenerateCloud("face cloud is collinear (zero hull area)");
    }
}

FaceCloud load_face_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open face cloud file: " + path);
    FaceCloud face;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream is(line);
        double x, y;
        if (is >> x >> y) face.points.emplace_back(x, y);
    }
    face.validate();
    return face;
}

void save_face_cloud(const FaceCloud& face, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write face cloud file: " + path);
    out.precision(17);
    out << "# face cloud, mm, one 'x y' pair per line\n";
    for (const auto& p : face.points) out << p.x() << " " << p.y() << "\n";
}

std::vector<Vec2> convex_hull(const std::vector<Vec2>& pts) {
    std::vector<Vec2> p = pts;
    std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    p.erase(std::unique(p.begin(), p.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            p.end());
    const int n = static_cast<int>(p.size());
    if (n < 3) return p;
    std::vector<Vec2> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    for (int i = n - 2, lower = k + 1; i >= 0; --i) {
        while (k >= lower && cross2(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0;
    const int n = static_cast<int>(poly.size());
    for (int i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * std::abs(a);
}

double support(const std::vector<Vec2>& pts, const Vec2& center, const Vec2& dir) {
    double best = -1e300;
    for (const auto& p : pts) best = std::max(best, dir.dot(p - center));
    return best;
}

FaceCloud dilate_face(const FaceCloud& face, double clearance) {
    if (clearance <= 0) throw InvalidDimension("clearance must be positive");
    face.validate();
    auto hull = convex_hull(face.points);
    const int n = static_cast<int>(hull.size());
    FaceCloud out;
    for (int i = 0; i < n; ++i) {
        const Vec2& prev = hull[(i + n - 1) % n];
        const Vec2& cur = hull[i];
        const Vec2& next = hull[(i + 1) % n];
        Vec2 e0 = (cur - prev).normalized();
        Vec2 e1 = (next - cur).normalized();
        Vec2 n0(e0.y(), -e0.x());  // outward normal for CCW polygon
        Vec2 n1(e1.y(), -e1.x());
        double a0 = std::atan2(n0.y(), n0.x());
        double a1 = std::atan2(n1.y(), n1.x());
        while (a1 < a0) a1 += 2 * M_PI;
        // arc fan across the corner keeps the dilated support exact
        const double step = 2.0 * M_PI / 180.0;
        for (double a = a0; a < a1 + 1e-12; a += step) {
            out.points.emplace_back(cur + clearance * Vec2(std::cos(a), std::sin(a)));
        }
    }
    return out;
}

void PegGeometry::validate() const {
    face.validate();
    if (height <= 0) throw InvalidDimension("peg height must be positive");
    if (grasp_height <= 0 || grasp_height > height) {
        throw InvalidDimension("grasp height must satisfy 0 < h <= height");
    }
}

HoleGeometry HoleGeometry::for_peg(const PegGeometry& peg, double clearance, const Pose& pose,
                                   double depth) {
    HoleGeometry hole;
    hole.face = dilate_face(peg.face, clearance);
    hole.clearance = clearance;
    hole.pose = pose;
    hole.depth = depth;
    return hole;
}

PrincipalAxes principal_axes(const FaceCloud& face) {
    face.validate();
    const auto& pts = face.points;
    Vec2 c = Vec2::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());

    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pts) {
        Vec2 d = p - c;
        sxx += d.x() * d.x();
        sxy += d.x() * d.y();
        syy += d.y() * d.y();
    }
    sxx /= pts.size();
    sxy /= pts.size();
    syy /= pts.size();

    // closed-form 2x2 symmetric eigendecomposition
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double l1 = 0.5 * tr + disc;
    const double l2 = 0.5 * tr - disc;
    if (l2 < 0 || l2 / std::max(l1, 1e-300) < 1e-12) {
        throw DegenerateCloud("covariance rank < 2 (collinear points)");
    }

    Vec2 pi1;
    const double iso_tol = 1e-9 * std::max(1.0, l1);
    if (disc <= iso_tol) {
        pi1 = Vec2(1, 0);  // isotropic cloud: stated tie-break
    } else if (std::abs(sxy) > 1e-14 * std::max(std::abs(sxx), std::abs(syy))) {
        pi1 = Vec2(l1 - syy, sxy).normalized();
    } else {
        pi1 = (sxx >= syy) ? Vec2(1, 0) : Vec2(0, 1);
    }

    // orient so the far extreme lies on the +pi1 side
    double pmax = -1e300, pmin = 1e300;
    for (const auto& p : pts) {
        double v = pi1.dot(p - c);
        pmax = std::max(pmax, v);
        pmin = std::min(pmin, v);
    }
    if (pmax < -pmin - 1e-12) {
        pi1 = -pi1;
    } else if (std::abs(pmax + pmin) <= 1e-12) {
        // symmetric extent: prefer +x, then +y
        if (pi1.x() < -1e-15 || (std::abs(pi1.x()) <= 1e-15 && pi1.y() < 0)) pi1 = -pi1;
    }

    PrincipalAxes out;
    out.pi1 = pi1;
    out.pi2 = Vec2(-pi1.y(), pi1.x());
    out.centroid = c;
    return out;
}

ManipulationFrame manipulation_frame(const FaceCloud& face) {
    PrincipalAxes axes = principal_axes(face);
    ManipulationFrame mf;
    mf.pi1 = axes.pi1;
    mf.pi2 = axes.pi2;
    mf.centroid = axes.centroid;

    double best = -1e300, pmin = 1e300;
    Vec2 m = face.points.front();
    for (const auto& p : face.points) {
        const double v = axes.pi1.dot(p - axes.centroid);
        pmin = std::min(pmin, v);
        if (v > best + 1e-12 || (v > best - 1e-12 && p.y() < m.y())) {
            best = v;
            m = p;
        }
    }
    mf.m = m;
    mf.d_o = best - pmin;

    const double yaw = std::atan2(axes.pi1.y(), axes.pi1.x());
    mf.T = Pose::from_axis_angle(Eigen::Vector3d::UnitZ(), yaw,
                                 Eigen::Vector3d(m.x() - axes.centroid.x(),
                                                 m.y() - axes.centroid.y(), 0.0));
    return mf;
}

double beta0(double d_o, double h) {
    if (d_o <= 0 || h <= 0) throw InvalidDimension("beta0 requires d_o > 0 and h > 0");
    return std::atan(d_o / (2.0 * h));
}

double beta_f_max(double d_o, double d_h) {
    if (d_o <= 0) throw InvalidDimension("beta_f_max requires d_o > 0");
    if (d_o > d_h) throw PegExceedsHole("peg width exceeds hole width");
    return std::acos(d_o / d_h);
}

double insertion_height(double h, double d_o, double beta0, double beta_f) {
    return h * (std::cos(beta0) + std::cos(beta_f)) +
           0.5 * d_o * (std::sin(beta0) + std::sin(beta_f));
}

double compliant_depth(double delta, double overshoot) {
    if (overshoot < 0) throw InvalidDimension("overshoot must be non-negative");
    const double dc = delta - overshoot;
    if (dc <= 0) throw InvalidDimension("compliant depth must stay positive");
    return dc;
}

}  // namespace pih::geom
