#include "pih/posemath.hpp"

#include <cmath>
#include <sstream>

#include "pih/rng.hpp"

namespace pih {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
    Eigen::Matrix3d s;
    s << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return s;
}

}  // namespace

Eigen::Vector3d Pose::rpy() const {
    Eigen::Matrix3d r = rotation();
    double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    double roll, yaw;
    if (std::abs(std::cos(pitch)) > 1e-10) {
        roll = std::atan2(r(2, 1), r(2, 2));
        yaw = std::atan2(r(1, 0), r(0, 0));
    } else {
        // gimbal lock: fold yaw into roll
        roll = std::atan2(-r(1, 2), r(1, 1));
        yaw = 0.0;
    }
    return {roll, pitch, yaw};
}

Pose Pose::from_rpy(const Eigen::Vector3d& rpy, const Eigen::Vector3d& t) {
    Eigen::Quaterniond q = Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                           Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                           Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX());
    return Pose(q, t);
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }

Pose inverse(const Pose& p) { return p.inverse(); }

Pose exp(const Twist& xi) {
    const double theta = xi.omega.norm();
    Eigen::Matrix3d w = skew(xi.omega);
    Eigen::Matrix3d r, v;
    if (theta < 1e-10) {
        // second-order Taylor keeps exp/log roundtrips at machine precision
        r = Eigen::Matrix3d::Identity() + w + 0.5 * w * w;
        v = Eigen::Matrix3d::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
    } else {
        const double a = std::sin(theta) / theta;
        const double b = (1.0 - std::cos(theta)) / (theta * theta);
        const double c = (1.0 - a) / (theta * theta);
        r = Eigen::Matrix3d::Identity() + a * w + b * w * w;
        v = Eigen::Matrix3d::Identity() + b * w + c * w * w;
    }
    return Pose(r, v * xi.v);
}

Twist log(const Pose& p, bool* near_pi) {
    Eigen::Matrix3d r = p.rotation();
    const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (near_pi) *near_pi = (M_PI - theta) < 1e-6;

    Eigen::Vector3d omega;
    if (theta < 1e-10) {
        omega = 0.5 * Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    } else if (M_PI - theta < 1e-6) {
        // axis from the symmetric part; sign convention: largest component positive
        Eigen::Matrix3d s = 0.5 * (r + Eigen::Matrix3d::Identity());
        Eigen::Vector3d axis(std::sqrt(std::max(0.0, s(0, 0))),
                             std::sqrt(std::max(0.0, s(1, 1))),
                             std::sqrt(std::max(0.0, s(2, 2))));
        int k;
        axis.maxCoeff(&k);
        for (int i = 0; i < 3; ++i) {
            if (i != k && s(k, i) < 0) axis[i] = -axis[i];
        }
        omega = theta * axis.normalized();
    } else {
        omega = theta / (2.0 * std::sin(theta)) *
                Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    }

    Eigen::Matrix3d w = skew(omega);
    Eigen::Matrix3d v_inv;
    if (theta < 1e-10) {
        v_inv = Eigen::Matrix3d::Identity() - 0.5 * w + (1.0 / 12.0) * w * w;
    } else {
        const double half = 0.5 * theta;
        const double cot = std::cos(half) / std::sin(half);
        const double coeff = (1.0 - 0.5 * theta * cot) / (theta * theta);
        v_inv = Eigen::Matrix3d::Identity() - 0.5 * w + coeff * w * w;
    }
    Twist xi;
    xi.omega = omega;
    xi.v = v_inv * p.translation();
    return xi;
}

std::string serialize_pose(const Pose& p) {
    std::ostringstream os;
    os.precision(17);
    const auto& t = p.translation();
    const auto& q = p.quat();
    os << t.x() << " " << t.y() << " " << t.z() << " " << q.x() << " " << q.y() << " " << q.z()
       << " " << q.w();
    return os.str();
}

Pose parse_pose(const std::string& line) {
    std::istringstream is(line);
    double tx, ty, tz, qx, qy, qz, qw;
    if (!(is >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
        throw IoError("parse_pose: expected 7 numbers, got '" + line + "'");
    }
    return Pose(Eigen::Quaterniond(qw, qx, qy, qz), Eigen::Vector3d(tx, ty, tz));
}

Observation SimTracker::perturbed(const Pose& p, const std::string& id, double clock,
                                  double scale) const {
    // Hash the clock at nanosecond resolution so equal clocks hash equally.
    const auto clock_key = static_cast<std::uint64_t>(std::llround(clock * 1e9));
    std::uint64_t id_hash = 1469598103934665603ULL;
    for (char ch : id) id_hash = (id_hash ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
    Rng rng(mix_seed(cfg_.seed, clock_key, id_hash));

    const double tb = cfg_.trans_noise_mm * scale;
    const double rb = cfg_.rot_noise_deg * scale * M_PI / 180.0;
    Eigen::Vector3d dt(rng.uniform(-tb, tb), rng.uniform(-tb, tb), rng.uniform(-tb, tb));
    Eigen::Vector3d drpy(rng.uniform(-rb, rb), rng.uniform(-rb, rb), rng.uniform(-rb, rb));

    Observation obs;
    // Noise applied in the world frame: R_obs = R_noise * R_true, t_obs = t + dt.
    Pose noise = Pose::from_rpy(drpy, Eigen::Vector3d::Zero());
    obs.pose = Pose(noise.quat() * p.quat(), p.translation() + dt);
    obs.stamp = clock;
    obs.target_id = id;
    return obs;
}

}  // namespace pih
