#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "pih/errors.hpp"

namespace pih {

/// Rigid transform in SE(3). Rotation stored as a unit quaternion, translation
/// in millimetres. Orthonormality is maintained by re-normalizing the
/// quaternion on every composition, so drift stays below 1e-12 regardless of
/// chain length.
class Pose {
  public:
    Pose() : q_(Eigen::Quaterniond::Identity()), t_(Eigen::Vector3d::Zero()) {}
    Pose(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) : q_(q.normalized()), t_(t) {}
    Pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) : q_(r), t_(t) { q_.normalize(); }

    static Pose identity() { return Pose(); }
    static Pose from_translation(const Eigen::Vector3d& t) {
        return Pose(Eigen::Quaterniond::Identity(), t);
    }
    static Pose from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
        return Pose(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), t);
    }

    const Eigen::Quaterniond& quat() const { return q_; }
    Eigen::Matrix3d rotation() const { return q_.toRotationMatrix(); }
    const Eigen::Vector3d& translation() const { return t_; }
    Eigen::Vector3d& translation() { return t_; }
    void set_rotation(const Eigen::Quaterniond& q) { q_ = q.normalized(); }

    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return q_ * p + t_; }

    /// Group composition: this ∘ other.
    Pose operator*(const Pose& other) const {
        return Pose(q_ * other.q_, q_ * other.t_ + t_);
    }

    Pose inverse() const {
        Eigen::Quaterniond qi = q_.conjugate();
        return Pose(qi, qi * (-t_));
    }

    /// Roll/pitch/yaw with R = Rz(yaw) Ry(pitch) Rx(roll).
    Eigen::Vector3d rpy() const;

    static Pose from_rpy(const Eigen::Vector3d& rpy,
                         const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

  private:
    Eigen::Quaterniond q_;
    Eigen::Vector3d t_;
};

/// Element of se(3): rotational part omega (rad) and translational part v (mm).
struct Twist {
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// SE(3) exponential map. Exact for pure translations.
Pose exp(const Twist& xi);

/// SE(3) logarithm. Inverse of exp for |omega| < pi. If near_pi is non-null it
/// is set when |omega| is within 1e-6 of pi, where the branch is ambiguous.
Twist log(const Pose& p, bool* near_pi = nullptr);

/// "tx ty tz qx qy qz qw" with full double precision, one pose per line.
std::string serialize_pose(const Pose& p);
Pose parse_pose(const std::string& line);

// ---------------------------------------------------------------------------
// Simulated 6-D pose tracking.
// ---------------------------------------------------------------------------

struct TrackerConfig {
    double rate_hz = 30.0;          ///< observation rate
    double trans_noise_mm = 0.0;    ///< per-axis uniform bound
    double rot_noise_deg = 0.0;     ///< per-axis uniform Euler bound
    std::uint64_t seed = 0;
    double init_noise_scale = 2.0;  ///< multiplier for one-shot initialization
};

struct Observation {
    Pose pose;
    double stamp = 0.0;   ///< simulated time, seconds
    std::string target_id;
};

/// Stateless noisy observer standing in for the vision pipeline. Identical
/// (seed, clock, target) always produces the identical observation, so trials
/// can run in parallel without sharing generator state.
class SimTracker {
  public:
    explicit SimTracker(const TrackerConfig& cfg) : cfg_(cfg) {}

    const TrackerConfig& config() const { return cfg_; }

    Observation observe(const Pose& true_pose, const std::string& target_id,
                        double clock_s) const {
        return perturbed(true_pose, target_id, clock_s, 1.0);
    }

    /// One-shot initialization; noise bounds scaled by init_noise_scale.
    Observation initialize_track(const Pose& true_pose, const std::string& target_id,
                                 double clock_s = 0.0) const {
        return perturbed(true_pose, target_id, clock_s, cfg_.init_noise_scale);
    }

    double period_s() const { return 1.0 / cfg_.rate_hz; }

  private:
    Observation perturbed(const Pose& p, const std::string& id, double clock,
                          double scale) const;

    TrackerConfig cfg_;
};

}  // namespace pih
