#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pih/geometry.hpp"
#include "pih/hand.hpp"
#include "pih/posemath.hpp"

namespace pih::world {

struct ComplianceConfig {
    bool arm_compliant = true;
    bool hand_compliant = true;
    bool hole_compliant = false;
    double k_c = 5.0;          ///< virtual spring, N/mm
    double hole_spring = 25.0; ///< wall spring when hole_compliant, N/mm
    double mu = 0.3;           ///< friction coefficient

    double k_rigid = 1000.0;        ///< N/mm for rigid elements
    double k_tilt = 2000.0;         ///< N*mm/rad when hand or arm compliant
    double k_tilt_rigid = 400000.0; ///< N*mm/rad otherwise

    void validate() const;
    bool any_compliant() const { return arm_compliant || hand_compliant || hole_compliant; }
    double linear_stiffness() const {
        return (arm_compliant || hand_compliant) ? k_c : k_rigid;
    }
    double tilt_stiffness() const {
        return (arm_compliant || hand_compliant) ? k_tilt : k_tilt_rigid;
    }
};

/// Imprecise position-controlled arm. The believed pose integrates commands
/// exactly; the executed pose carries a per-trial constant bias plus fresh
/// uniform noise on every executed command.
struct ArmModel {
    Pose believed;
    Pose actual;
    Eigen::Vector3d bias = Eigen::Vector3d::Zero();  ///< mm, |bias| <= 26
    double step_noise_mm = 0.5;
    double rot_step_noise_deg = 0.1;
    std::uint64_t seed = 0;
    int steps = 0;
    Eigen::Vector3d workspace_min{-500, -500, -60};
    Eigen::Vector3d workspace_max{500, 500, 700};

    /// Uniform in a ball of the given radius.
    static Eigen::Vector3d sample_bias(std::uint64_t seed, double radius_mm);

    void execute_delta(const Pose& world_delta);  ///< throws WorkspaceExceeded
    void execute_pose(const Pose& target);

  private:
    void refresh_actual();
};

struct Contact {
    Eigen::Vector3d point;   ///< world, mm
    Eigen::Vector3d normal;  ///< direction of the force on the peg
    double force = 0;        ///< N
    bool sticking = false;
};

struct WorldState {
    Pose peg_pose;      ///< resolved (actual) pose
    Pose peg_cmd;       ///< commanded pose from the kinematic chain
    Pose hole_pose;
    double clock = 0;   ///< s
    std::vector<Contact> contacts;
    bool jammed = false;
    double inserted_depth = 0;  ///< mm
    int wedge_ticks = 0;
};

/// Quasistatic projection of the peg out of penetration. Geometry is reduced
/// to the peg's bottom-face boundary and the hole-mouth rim; compliant
/// elements absorb commanded-vs-feasible displacement as spring deflection.
class ContactSolver {
  public:
    ContactSolver(const geom::PegGeometry& peg, const geom::HoleGeometry& hole);

    struct Result {
        Pose pose;
        std::vector<Contact> contacts;
        Eigen::Matrix<double, 5, 1> deflection = Eigen::Matrix<double, 5, 1>::Zero();
        bool blocked_down = false;   ///< commanded descent not achieved
        bool opposing_walls = false; ///< sticking contacts on opposite walls
    };

    /// Projects `cmd` to a non-penetrating pose. Rotational freedom is a tilt
    /// spring about the grasp pivot; yaw never changes. `warm_start` seeds the
    /// projection with the previous deflection so quasistatic state evolves
    /// continuously. Throws SolverFailure after 200 sweeps.
    Result resolve(const Pose& cmd, const Eigen::Vector3d& pivot_world,
                   const Pose& hole_pose, const ComplianceConfig& cfg,
                   const Eigen::Matrix<double, 5, 1>* warm_start = nullptr) const;

    double hole_depth() const { return hole_depth_; }
    const std::vector<geom::Vec2>& hole_polygon() const { return hole_poly_; }

    /// Depth of the peg bottom-face centroid below the hole mouth, clamped to
    /// [0, depth]; zero when the centroid is outside the mouth polygon.
    double inserted_depth(const Pose& peg_pose, const Pose& hole_pose) const;

  private:
    std::vector<Eigen::Vector3d> peg_bottom_;  ///< contact samples, peg frame
    std::vector<geom::Vec2> peg_poly_;         ///< full hull, peg frame
    std::vector<geom::Vec2> hole_poly_;        ///< dilated hull, hole frame
    std::vector<Eigen::Vector3d> rim_points_;  ///< contact samples, hole frame
    geom::Vec2 peg_centroid_;
    double peg_height_;
    double hole_depth_;
};

/// The plant: arm + grasped-object hand + peg/hole contact, advanced one
/// control tick at a time. All randomness is derived from the trial seed.
class World {
  public:
    World(const geom::PegGeometry& peg, const geom::HoleGeometry& hole,
          const ComplianceConfig& cfg, const ArmModel& arm, const Pose& peg_start,
          double tick_dt = 1.0 / 30.0);

    // --- plant inputs ------------------------------------------------------
    void arm_command_delta(const Pose& delta);
    void arm_command_pose(const Pose& target);
    /// Actuates the in-hand quasistatics; throws WihmWorkspaceExceeded when
    /// the equilibrium becomes infeasible at the hand workspace boundary.
    void hand_actuate(const Eigen::Vector3d& a_dot);
    void settle();  ///< re-resolve contacts without moving anything

    /// Closes the fingers around the true peg at the commanded palm pose.
    /// The fingertip contact height follows from where the palm actually is
    /// (hover_offset below the palm plane); modest approach error is absorbed
    /// by a caging pull-in before the tips settle.
    void attach_hand(const hand::HandParams& hp, double hover_offset_mm);
    bool hand_attached() const { return static_cast<bool>(hand_); }
    const hand::Hand& grasped_hand() const { return *hand_; }

    void disturb(const std::string& kind, const Eigen::Vector3d& magnitude_mm);
    /// In-grasp rotational disturbance: tilts the grasped object by the given
    /// angle about a horizontal axis at the given azimuth, through the grasp
    /// pivot.
    void tilt_object(double angle_rad, double azimuth_rad);

    void tick() { state_.clock += dt_; }
    double clock() const { return state_.clock; }
    double dt() const { return dt_; }

    // --- plant truth -------------------------------------------------------
    const WorldState& state() const { return state_; }
    const Pose& peg_pose() const { return state_.peg_pose; }
    const Pose& hole_pose() const { return state_.hole_pose; }
    const ArmModel& arm() const { return arm_; }
    const ComplianceConfig& compliance() const { return cfg_; }
    const ContactSolver& solver() const { return solver_; }
    bool inserted() const;
    std::string state_line() const;  ///< trace format: t tag peg hole depth jammed

  private:
    void resolve();
    Pose commanded_peg_pose() const;

    geom::PegGeometry peg_;
    geom::HoleGeometry hole_;
    ComplianceConfig cfg_;
    ArmModel arm_;
    ContactSolver solver_;
    WorldState state_;
    double dt_;

    Eigen::Matrix<double, 5, 1> deflection_ = Eigen::Matrix<double, 5, 1>::Zero();
    std::unique_ptr<hand::Hand> hand_;
    Pose grasp_offset_;       ///< object frame -> peg body frame, fixed at grasp
    Pose object_disturbance_; ///< accumulated in-grasp disturbances
    Eigen::Vector3d pivot_local_ = Eigen::Vector3d::Zero();  ///< peg frame
    bool grasped_ = false;
};

/// true iff inserted_depth >= 0.95 * depth and the peg axis is within 2 deg
/// of the hole axis.
bool check_inserted(const WorldState& state, const geom::HoleGeometry& hole);

}  // namespace pih::world
