#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pih/geometry.hpp"
#include "pih/hand.hpp"
#include "pih/posemath.hpp"
#include "pih/world.hpp"

namespace pih::ctrl {

enum class ControllerMode { kFull, kNaive, kOpenLoop };

std::string to_string(ControllerMode mode);
ControllerMode mode_from_string(const std::string& s);

struct SpiralParams {
    double amplitude_rad = 3.0 * M_PI / 180.0;  ///< peak tilt of the spiral
    double pitch_rad_per_rev = 0.5 * M_PI / 180.0;
    double descent_mm_per_tick = 0.2;
    int max_ticks = 800;
};

enum class FailureCause { kNone, kJam, kTimeout, kGrasp, kWorkspace };

std::string to_string(FailureCause cause);

struct TrialResult {
    bool success = false;
    int servo_ticks = 0;   ///< arm translation servo iterations
    int total_ticks = 0;
    int hand_actions = 0;  ///< within-hand actuation steps
    FailureCause failure_cause = FailureCause::kNone;
    std::uint64_t seed = 0;
};

struct ControllerConfig {
    ControllerMode mode = ControllerMode::kFull;
    double overshoot_mm = 2.0;      ///< delta_c = delta - overshoot
    double gamma_mm = 0.5;          ///< alignment tolerance
    double sigma_mm = 1.0;          ///< servo step length
    double beta_f_fraction = 0.8;   ///< beta_f = fraction * beta_f_max
    SpiralParams spiral;
    int tick_budget = 5000;
    double transport_height_mm = 25.0;
    double lift_height_mm = 60.0;
    double rot_gain = 6.0;          ///< 1/s, rotation servo proportional gain
    double max_tilt_rate = 0.35;    ///< rad/s commanded ceiling
    int rot_budget = 900;           ///< per rotation-servo phase
    int servo_budget = 2500;        ///< translation servo iterations
    int osc_flip_limit = 6;         ///< consecutive sign flips before reporting
    double yaw_step_limit_rad = 0.5 * M_PI / 180.0;
};

/// What the controller is allowed to see: tracked peg/hole observations only.
/// Tests double this interface to verify decision purity.
class ObservationSource {
  public:
    virtual ~ObservationSource() = default;
    virtual Observation peg(double clock) = 0;
    virtual Observation hole(double clock) = 0;
    virtual Observation peg_init(double clock) = 0;
    virtual Observation hole_init(double clock) = 0;
};

/// Tracker-backed observation source reading ground truth from the plant.
class WorldObservationSource : public ObservationSource {
  public:
    WorldObservationSource(const world::World& w, const TrackerConfig& cfg)
        : world_(w), tracker_(cfg) {}

    Observation peg(double clock) override {
        return tracker_.observe(world_.peg_pose(), "peg", clock);
    }
    Observation hole(double clock) override {
        return tracker_.observe(world_.hole_pose(), "hole", clock);
    }
    Observation peg_init(double clock) override {
        return tracker_.initialize_track(world_.peg_pose(), "peg", clock);
    }
    Observation hole_init(double clock) override {
        return tracker_.initialize_track(world_.hole_pose(), "hole", clock);
    }

  private:
    const world::World& world_;
    SimTracker tracker_;
};

/// Per-tick trace with controller events, replayable text format.
struct TraceLog {
    std::vector<std::string> lines;
    void event(double clock, const std::string& what) {
        lines.push_back("EV " + std::to_string(clock) + " " + what);
    }
    void state(const std::string& line) { lines.push_back("S " + line); }
    void write(const std::string& path) const;
};

/// Closed-loop vision-driven insertion (the full sequence: grasp, rotate to
/// beta0, move above, translation servo to delta_c, rotate to beta_f, spiral
/// insertion). One controller instance drives one trial.
class InsertionController {
  public:
    InsertionController(world::World& w, ObservationSource& obs,
                        const hand::InverseHandModel* model, const geom::PegGeometry& peg,
                        const geom::HoleGeometry& hole, const hand::HandParams& hand_params,
                        const ControllerConfig& cfg);

    TrialResult run();

    /// Phase entry points, exposed for focused tests. Each returns the number
    /// of ticks it consumed.
    int rotation_servo_beta0();
    int rotation_servo_beta_f();
    int translation_servo(double delta_c);
    bool spiral_insertion();
    void grasp_and_lift();
    void move_above();

    const geom::InsertionParams& params() const { return params_; }
    TraceLog* trace = nullptr;
    std::function<void(int)> on_tick;                    ///< disturbance scheduling hook
    std::function<void(const std::string&)> on_phase;    ///< phase-entry hook

    int ticks() const { return ticks_; }
    int hand_actions() const { return hand_actions_; }
    int servo_ticks() const { return servo_ticks_; }
    int oscillation_events() const { return oscillation_events_; }
    int tracker_queries() const { return tracker_queries_; }

  private:
    void spend_tick();
    Observation obs_peg();
    Observation obs_hole();
    Pose frame_m(const Pose& peg_pose) const;  ///< manipulation frame from a pose
    Eigen::Vector2d tilt_xy(const Pose& peg_obs, const Pose& hole_obs) const;
    Eigen::Vector2d pi1_dip_dir(const Pose& peg_obs, const Pose& hole_obs) const;
    void command_tilt_rate(const Eigen::Vector2d& axis_rate_hole, const Pose& hole_obs);
    void arm_step(const Eigen::Vector3d& delta_hole, const Pose& hole_obs);

    world::World& world_;
    ObservationSource& obs_;
    const hand::InverseHandModel* model_;
    geom::PegGeometry peg_;
    geom::HoleGeometry hole_;
    hand::HandParams hand_params_;
    ControllerConfig cfg_;

    geom::ManipulationFrame mf_;
    Pose t3d_;  ///< peg body frame -> manipulation frame at m on the top face
    geom::InsertionParams params_;

    int ticks_ = 0;
    int hand_actions_ = 0;
    int servo_ticks_ = 0;
    int oscillation_events_ = 0;
    int tracker_queries_ = 0;
    bool hand_exhausted_ = false;
    double cmd_palm_yaw_ = 0.0;  ///< the controller's own command integration
};

}  // namespace pih::ctrl
