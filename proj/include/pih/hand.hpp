#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pih/errors.hpp"
#include "pih/mlp.hpp"
#include "pih/posemath.hpp"

namespace pih::hand {

/// One tendon-driven 2-link finger. Stiffnesses in N·mm/rad, radii and link
/// lengths in mm.
struct FingerParams {
    double k_p = 1.0;
    double k_d = 1.5;
    double r_a = 5.0;
    double r_p = 5.0;
    double r_d = 5.0;
    double l_p = 40.0;
    double l_d = 40.0;

    void validate() const;
};

/// Joint pair (q_p, q_d), radians, limits [0, pi/2].
using JointPair = Eigen::Vector2d;

constexpr double kJointMin = 0.0;
constexpr double kJointMax = M_PI / 2.0;

/// Three identical fingers spaced 120 degrees around the palm. Finger i's
/// plane contains the palm z axis and the radial direction at azimuth
/// 120*i degrees; in-plane x extends down (-z), in-plane y extends inward.
struct HandParams {
    FingerParams finger;
    double palm_radius = 66.0;

    Pose base_pose(int i) const;
    double azimuth(int i) const { return 2.0 * M_PI / 3.0 * i; }
};

struct HandConfig {
    std::array<JointPair, 3> q{JointPair::Zero(), JointPair::Zero(), JointPair::Zero()};
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
};

struct ContactSet {
    std::array<Eigen::Vector3d, 3> p;  ///< fingertip contacts, palm frame, mm
};

struct ContactTriangle {
    double t12 = 0, t23 = 0, t31 = 0;

    Eigen::Vector3d vec() const { return {t12, t23, t31}; }
    void validate() const;  ///< strict triangle inequality
};

ContactTriangle contact_triangle(const ContactSet& contacts);

/// Object frame from contacts: origin at the centroid, x = unit(p2 - p1),
/// z = unit((p2 - p1) x (p3 - p1)), y = z x x.
Pose object_frame(const ContactSet& contacts);

/// Planar 2-link forward kinematics in the finger plane.
Eigen::Vector2d finger_fk2(const JointPair& q, const FingerParams& params);
/// Same point mapped through the finger base pose into the palm frame.
Eigen::Vector3d finger_fk(const JointPair& q, const FingerParams& params, const Pose& base);

double finger_energy(const JointPair& q, const FingerParams& params);
Eigen::Vector2d finger_energy_gradient(const JointPair& q, const FingerParams& params);

/// Velocity-form tendon residual r_a a_dot - r_p qp_dot - r_d qd_dot.
double tendon_residual(const JointPair& q_dot, double a_dot, const FingerParams& params);

struct EquilibriumOptions {
    double constraint_tol = 1e-3;  ///< mm, on contact-triangle preservation
    double gradient_tol = 1e-6;    ///< curvature-scaled projected-step norm, rad
    int max_outer = 500;
    int max_inner = 60;
};

/// Tendon anchoring: the integrated transmission constraint is expressed
/// relative to this (q, a) pair, captured when the grasp is acquired.
struct TendonRef {
    std::array<JointPair, 3> q;
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
};

/// Equilibrated joint configuration: minimizes total spring energy subject to
/// the integrated tendon constraints and, when `triangle` is given, to
/// preservation of the fingertip distances. Penalty-augmented projected
/// gradient over the tendon-feasible parametrization.
HandConfig equilibrium(const HandParams& hp, const TendonRef& ref,
                       const std::array<JointPair, 3>& q_warm, const Eigen::Vector3d& a_target,
                       const ContactTriangle* triangle, const EquilibriumOptions& opt = {},
                       Eigen::Vector3d* lambda_io = nullptr);

/// Single-finger special case used by the closed-form KKT oracle tests.
JointPair finger_equilibrium(const FingerParams& params, const JointPair& q_ref, double a_ref,
                             double a_target, const EquilibriumOptions& opt = {});

struct StepResult {
    Pose object_pose;                ///< palm frame, after the step
    Eigen::Matrix<double, 6, 1> x_dot;  ///< element-wise frame difference / dt:
                                        ///< (vx vy vz, wx wy wz) mm/s, rad/s
};

/// Stateful hand with a grasped object (contacts pinned, triangle held).
class Hand {
  public:
    Hand(const HandParams& params, const std::array<JointPair, 3>& q0,
         const Eigen::Vector3d& a0);

    /// Integrates actuators by a_dot*dt and re-solves the equilibrium holding
    /// the contact triangle fixed. Throws on infeasibility.
    StepResult step(const Eigen::Vector3d& a_dot, double dt,
                    const EquilibriumOptions& opt = {});

    const HandParams& params() const { return params_; }
    const HandConfig& config() const { return cfg_; }
    const ContactTriangle& triangle() const { return triangle_; }
    ContactSet contacts() const;
    Pose object_pose() const { return object_frame(contacts()); }

  private:
    HandParams params_;
    HandConfig cfg_;
    TendonRef ref_;
    ContactTriangle triangle_;
    Eigen::Vector3d lambda_ = Eigen::Vector3d::Zero();  ///< multiplier warm start
};

// ---------------------------------------------------------------------------
// Transition dataset and the learned inverse model.
// ---------------------------------------------------------------------------

struct TransitionRecord {
    Pose x_t;                   ///< object pose before the step, palm frame
    Eigen::Vector2d xdot_xy;    ///< rotational velocity about palm x/y, rad/s
    Eigen::Vector3d a_dot;      ///< actuator velocities, rad/s
    ContactTriangle triangle;
};

struct DatasetStats {
    int requested = 0;
    int generated = 0;
    int skipped = 0;
};

/// Samples contact triangles from random reachable joint configurations and
/// rolls random actuation transitions through the equilibrium model.
/// Deterministic for a fixed seed. Throws if more than half of the attempted
/// transitions are infeasible.
std::vector<TransitionRecord> generate_dataset(int n_triangles, int n_transitions,
                                               std::uint64_t seed,
                                               const HandParams& hp = HandParams{},
                                               DatasetStats* stats = nullptr);

/// Header: "Xdot_x Xdot_y adot_0 adot_1 adot_2 t12 t23 t31".
void save_dataset(const std::vector<TransitionRecord>& records, const std::string& path);
std::vector<TransitionRecord> load_dataset(const std::string& path);

constexpr double kActuatorVelocityLimit = 0.5;  ///< rad/s, clamp on predictions

/// Learned map (Xdot_x, Xdot_y) -> a_dot (Eq-style inverse hand model): a
/// 2-64-64-3 tanh regressor on z-scored data.
class InverseHandModel {
  public:
    struct FitOptions {
        int epochs = 120;
        int batch = 256;
        double lr = 0.02;
        std::uint64_t seed = 1;
    };

    static InverseHandModel fit(const std::vector<TransitionRecord>& buffer,
                                const FitOptions& opt);
    static InverseHandModel fit(const std::vector<TransitionRecord>& buffer) {
        return fit(buffer, FitOptions{});
    }

    /// Deterministic inference, clamped to actuator velocity limits.
    Eigen::Vector3d predict(const Eigen::Vector2d& xdot_xy) const;

    double final_loss() const { return final_loss_; }
    const std::vector<double>& loss_curve() const { return loss_curve_; }
    std::uint64_t dataset_hash() const { return dataset_hash_; }

    void save(const std::string& path) const;
    static InverseHandModel load(const std::string& path);

  private:
    Mlp net_;
    Eigen::Vector2d in_mean_ = Eigen::Vector2d::Zero();
    Eigen::Vector2d in_std_ = Eigen::Vector2d::Ones();
    Eigen::Vector3d out_mean_ = Eigen::Vector3d::Zero();
    Eigen::Vector3d out_std_ = Eigen::Vector3d::Ones();
    double final_loss_ = 0;
    std::vector<double> loss_curve_;
    std::uint64_t dataset_hash_ = 0;
};

std::uint64_t hash_dataset(const std::vector<TransitionRecord>& records);

}  // namespace pih::hand
