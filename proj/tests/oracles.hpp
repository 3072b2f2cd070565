#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <vector>

namespace oracles {

/// Rodrigues rotation via Eigen's AngleAxis (independent of pih::exp).
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& omega) {
    const double theta = omega.norm();
    if (theta < 1e-300) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

/// Closed-form eigendecomposition of the 2x2 covariance of a point set;
/// returns the unnormalized major-axis direction.
inline Eigen::Vector2d covariance_major_axis(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    double a = 0, b = 0, d = 0;
    for (const auto& p : pts) {
        Eigen::Vector2d q = p - c;
        a += q.x() * q.x();
        b += q.x() * q.y();
        d += q.y() * q.y();
    }
    // eigenvector of [[a,b],[b,d]] for the larger root
    const double tr = a + d;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - (a * d - b * b)));
    const double l1 = 0.5 * tr + disc;
    if (std::abs(b) > 1e-14) return Eigen::Vector2d(l1 - d, b);
    return (a >= d) ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
}

/// Brute-force antipodal width: max over point pairs of |dir . (p - q)|.
inline double pairwise_extent(const std::vector<Eigen::Vector2d>& pts,
                              const Eigen::Vector2d& dir) {
    double best = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            best = std::max(best, std::abs(dir.dot(pts[i] - pts[j])));
        }
    }
    return best;
}

/// Central finite difference of a scalar function along one coordinate.
template <typename F>
double finite_difference(F f, Eigen::VectorXd x, int i, double eps = 1e-6) {
    const double x0 = x[i];
    x[i] = x0 + eps;
    const double fp = f(x);
    x[i] = x0 - eps;
    const double fm = f(x);
    return (fp - fm) / (2 * eps);
}

/// KKT solution of the single-finger equilibrium: minimize
/// (kp qp^2 + kd qd^2)/2 subject to rp qp + rd qd = ra da (interior case).
struct FingerKkt {
    double qp, qd, energy;
};
inline FingerKkt single_finger_kkt(double kp, double kd, double rp, double rd, double ra,
                                   double da) {
    const double lambda = ra * da / (rp * rp / kp + rd * rd / kd);
    FingerKkt out;
    out.qp = lambda * rp / kp;
    out.qd = lambda * rd / kd;
    out.energy = 0.5 * (kp * out.qp * out.qp + kd * out.qd * out.qd);
    return out;
}

}  // namespace oracles
