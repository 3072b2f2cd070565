#include "pih/control.hpp"

#include <cmath>
#include <fstream>

namespace pih::ctrl {

namespace {

struct JamAbort {};

double wrap_pi(double a) {
    while (a > M_PI) a -= 2 * M_PI;
    while (a < -M_PI) a += 2 * M_PI;
    return a;
}

}  // namespace

std::string to_string(ControllerMode mode) {
    switch (mode) {
        case ControllerMode::kFull: return "full";
        case ControllerMode::kNaive: return "naive";
        case ControllerMode::kOpenLoop: return "open_loop";
    }
    return "full";
}

ControllerMode mode_from_string(const std::string& s) {
    if (s == "full") return ControllerMode::kFull;
    if (s == "naive") return ControllerMode::kNaive;
    if (s == "open_loop") return ControllerMode::kOpenLoop;
    throw ConfigError("unknown controller mode: " + s);
}

std::string to_string(FailureCause cause) {
    switch (cause) {
        case FailureCause::kNone: return "none";
        case FailureCause::kJam: return "jam";
        case FailureCause::kTimeout: return "timeout";
        case FailureCause::kGrasp: return "grasp";
        case FailureCause::kWorkspace: return "workspace";
    }
    return "none";
}

void TraceLog::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace file: " + path);
    for (const auto& l : lines) out << l << "\n";
}

InsertionController::InsertionController(world::World& w, ObservationSource& obs,
                                         const hand::InverseHandModel* model,
                                         const geom::PegGeometry& peg,
                                         const geom::HoleGeometry& hole,
                                         const hand::HandParams& hand_params,
                                         const ControllerConfig& cfg)
    : world_(w), obs_(obs), model_(model), peg_(peg), hole_(hole), hand_params_(hand_params),
      cfg_(cfg) {
    mf_ = geom::manipulation_frame(peg_.face);
    t3d_ = Pose(mf_.T.quat(), mf_.T.translation() + Eigen::Vector3d(0, 0, peg_.height));

    const double d_h = mf_.d_o + 2.0 * hole_.clearance;
    params_.beta0 = geom::beta0(mf_.d_o, peg_.grasp_height);
    params_.beta_f = cfg_.beta_f_fraction * geom::beta_f_max(mf_.d_o, d_h);
    params_.delta =
        geom::insertion_height(peg_.grasp_height, mf_.d_o, params_.beta0, params_.beta_f);
    params_.delta_c = geom::compliant_depth(params_.delta, cfg_.overshoot_mm);
    params_.gamma = cfg_.gamma_mm;
    params_.sigma = cfg_.sigma_mm;
}

void InsertionController::spend_tick() {
    world_.tick();
    ++ticks_;
    if (on_tick) on_tick(ticks_);
    if (trace) trace->state(world_.state_line());
    if (world_.state().jammed) throw JamAbort{};
    if (ticks_ > cfg_.tick_budget) throw TimeoutExceeded("global tick budget exhausted");
}

Observation InsertionController::obs_peg() {
    ++tracker_queries_;
    return obs_.peg(world_.clock());
}

Observation InsertionController::obs_hole() {
    ++tracker_queries_;
    return obs_.hole(world_.clock());
}

Pose InsertionController::frame_m(const Pose& peg_pose) const { return peg_pose * t3d_; }

Eigen::Vector2d InsertionController::tilt_xy(const Pose& peg_obs, const Pose& hole_obs) const {
    Eigen::Vector3d axis = hole_obs.rotation().transpose() * peg_obs.rotation().col(2);
    return {axis.x(), axis.y()};
}

Eigen::Vector2d InsertionController::pi1_dip_dir(const Pose& peg_obs,
                                                 const Pose& hole_obs) const {
    Eigen::Vector3d p1(mf_.pi1.x(), mf_.pi1.y(), 0.0);
    Eigen::Vector3d w = hole_obs.rotation().transpose() * (peg_obs.rotation() * p1);
    Eigen::Vector2d h(w.x(), w.y());
    const double n = h.norm();
    return n > 1e-9 ? Eigen::Vector2d(h / n) : Eigen::Vector2d(1, 0);
}

void InsertionController::command_tilt_rate(const Eigen::Vector2d& v_hole,
                                            const Pose& hole_obs) {
    Eigen::Vector2d v = v_hole;
    const double n = v.norm();
    if (n > cfg_.max_tilt_rate) v *= cfg_.max_tilt_rate / n;
    // axis-tip velocity v maps to angular velocity (-v_y, v_x) about x/y
    Eigen::Vector3d omega_hole(-v.y(), v.x(), 0.0);
    Eigen::Vector3d omega_world = hole_obs.rotation() * omega_hole;

    if (world_.compliance().hand_compliant && world_.hand_attached()) {
        // within-hand rotation through the learned inverse model (palm frame)
        const double c = std::cos(-cmd_palm_yaw_), s = std::sin(-cmd_palm_yaw_);
        Eigen::Vector2d xdot(c * omega_world.x() - s * omega_world.y(),
                             s * omega_world.x() + c * omega_world.y());
        Eigen::Vector3d a_dot = model_ ? model_->predict(xdot) : Eigen::Vector3d::Zero();
        world_.hand_actuate(a_dot);
        ++hand_actions_;
    } else {
        // rigid hand: the manipulator's wrist supplies the rotation
        world_.arm_command_delta(Pose::from_rpy(omega_world * world_.dt()));
    }
}

void InsertionController::arm_step(const Eigen::Vector3d& delta_hole, const Pose& hole_obs) {
    world_.arm_command_delta(Pose::from_translation(hole_obs.rotation() * delta_hole));
}

void InsertionController::grasp_and_lift() {
    Observation p0 = obs_.peg_init(world_.clock());
    ++tracker_queries_;
    if (on_phase) on_phase("grasp");
    if (trace) trace->event(world_.clock(), "phase grasp");

    // palm above the observed peg, thumb plane along +pi1
    Eigen::Vector3d pi1_w = p0.pose.rotation() * Eigen::Vector3d(mf_.pi1.x(), mf_.pi1.y(), 0.0);
    const double yaw = std::atan2(pi1_w.y(), pi1_w.x());
    const double hover = 50.0;
    Eigen::Vector3d palm_t =
        p0.pose.translation() + Eigen::Vector3d(0, 0, peg_.grasp_height + hover);
    world_.arm_command_pose(Pose::from_axis_angle(Eigen::Vector3d::UnitZ(), yaw, palm_t));
    cmd_palm_yaw_ = yaw;
    spend_tick();

    world_.attach_hand(hand_params_, hover);
    spend_tick();

    world_.arm_command_delta(Pose::from_translation({0, 0, cfg_.lift_height_mm}));
    spend_tick();
    if (trace) trace->event(world_.clock(), "grasped and lifted");
}

int InsertionController::rotation_servo_beta0() {
    if (on_phase) on_phase("rotation_beta0");
    if (trace) trace->event(world_.clock(), "phase rotation_servo beta0");
    int iterations = 0;
    for (; iterations < cfg_.rot_budget; ++iterations) {
        Observation p = obs_peg();
        Observation h = obs_hole();
        Eigen::Vector2d a = tilt_xy(p.pose, h.pose);
        Eigen::Vector2d dip = pi1_dip_dir(p.pose, h.pose);
        const double along = -a.dot(dip);
        if (along >= params_.beta0) break;
        Eigen::Vector2d target = -(params_.beta0 + 0.01) * dip;
        command_tilt_rate(cfg_.rot_gain * (target - a), h.pose);
        spend_tick();
    }
    if (iterations >= cfg_.rot_budget) {
        throw TimeoutExceeded("rotation servo (beta0) exceeded its budget");
    }
    return iterations;
}

int InsertionController::rotation_servo_beta_f() {
    if (on_phase) on_phase("rotation_beta_f");
    if (trace) trace->event(world_.clock(), "phase rotation_servo beta_f");
    int iterations = 0;
    for (; iterations < cfg_.rot_budget; ++iterations) {
        Observation p = obs_peg();
        Observation h = obs_hole();
        Eigen::Vector2d a = tilt_xy(p.pose, h.pose);
        if (std::abs(a.x()) < params_.beta_f && std::abs(a.y()) < params_.beta_f) break;
        command_tilt_rate(-cfg_.rot_gain * a, h.pose);
        spend_tick();
    }
    if (iterations >= cfg_.rot_budget) {
        throw TimeoutExceeded("rotation servo (beta_f) exceeded its budget");
    }
    return iterations;
}

void InsertionController::move_above() {
    if (on_phase) on_phase("move_above");
    if (trace) trace->event(world_.clock(), "phase move_above");
    // wrist yaw so the peg face lines up with the hole face
    Observation p = obs_peg();
    Observation h = obs_hole();
    const double yaw_err = wrap_pi(p.pose.rpy().z() - h.pose.rpy().z());
    world_.arm_command_delta(Pose::from_axis_angle(Eigen::Vector3d::UnitZ(), -yaw_err));
    cmd_palm_yaw_ = wrap_pi(cmd_palm_yaw_ - yaw_err);
    spend_tick();

    p = obs_peg();
    h = obs_hole();
    Pose m = frame_m(p.pose);
    Eigen::Vector3d target =
        h.pose.translation() +
        h.pose.rotation() * Eigen::Vector3d(0, 0, params_.delta_c + cfg_.transport_height_mm);
    world_.arm_command_delta(Pose::from_translation(target - m.translation()));
    spend_tick();
}

int InsertionController::translation_servo(double delta_c) {
    if (on_phase) on_phase("translation_servo");
    if (trace) trace->event(world_.clock(), "phase translation_servo");
    int iterations = 0;
    int flips = 0;
    Eigen::Vector2d prev_step = Eigen::Vector2d::Zero();
    for (; iterations < cfg_.servo_budget; ++iterations) {
        Observation p = obs_peg();
        Observation h = obs_hole();
        Pose m = frame_m(p.pose);
        Eigen::Vector3d e =
            h.pose.rotation().transpose() * (m.translation() - h.pose.translation());
        if (e.z() <= delta_c) break;

        if (std::abs(e.x()) <= params_.gamma && std::abs(e.y()) <= params_.gamma) {
            arm_step({0, 0, -params_.sigma}, h.pose);
            prev_step.setZero();
        } else {
            // faithful to the servo's else branch: both axes step
            Eigen::Vector2d step(-(e.x() > 0 ? 1 : -1) * params_.sigma,
                                 -(e.y() > 0 ? 1 : -1) * params_.sigma);
            if (prev_step.norm() > 0 &&
                (step.x() * prev_step.x() < 0 || step.y() * prev_step.y() < 0)) {
                ++flips;
                if (flips == cfg_.osc_flip_limit) {
                    ++oscillation_events_;
                    if (trace) trace->event(world_.clock(), "oscillation_detected");
                }
            } else if (prev_step.norm() > 0) {
                flips = 0;
            }
            arm_step({step.x(), step.y(), 0}, h.pose);
            prev_step = step;
        }
        // small wrist correction keeps sharp faces aligned in yaw
        const double yaw_err = wrap_pi(p.pose.rpy().z() - h.pose.rpy().z());
        if (std::abs(yaw_err) > 0.2 * M_PI / 180.0) {
            const double dyaw =
                std::clamp(-yaw_err, -cfg_.yaw_step_limit_rad, cfg_.yaw_step_limit_rad);
            world_.arm_command_delta(Pose::from_axis_angle(Eigen::Vector3d::UnitZ(), dyaw));
            cmd_palm_yaw_ = wrap_pi(cmd_palm_yaw_ + dyaw);
        }
        ++servo_ticks_;
        spend_tick();
    }
    if (iterations >= cfg_.servo_budget) {
        throw TimeoutExceeded("translation servo exceeded its budget");
    }
    return iterations;
}

bool InsertionController::spiral_insertion() {
    if (on_phase) on_phase("spiral");
    if (trace) trace->event(world_.clock(), "phase spiral");
    const bool rotate = cfg_.mode == ControllerMode::kFull;
    const double dpsi = 3 * 2 * M_PI / 60.0;  // one revolution per two simulated seconds
    double psi = 0;
    double commanded_descent = 0;
    double z0 = std::nan("");
    Eigen::Vector2d ref_prev = Eigen::Vector2d::Zero();
    for (int k = 0; k < cfg_.spiral.max_ticks; ++k) {
        if (world_.inserted()) return true;
        Observation p = obs_peg();
        Observation h = obs_hole();
        // nudge on the bottom-face center; the edge frame swings with tilt
        Eigen::Vector3d e =
            h.pose.rotation().transpose() * (p.pose.translation() - h.pose.translation());
        if (std::isnan(z0)) z0 = e.z();

        if (rotate && !hand_exhausted_ && k % 3 == 0) {
            // expanding-then-contracting spiral reference, followed
            // feed-forward so contact resistance cannot wind the hand up
            const double t = static_cast<double>(k) / cfg_.spiral.max_ticks;
            double env = 0.0;
            if (t < 0.25) {
                env = cfg_.spiral.amplitude_rad * (t / 0.25);
            } else if (t < 0.75) {
                env = cfg_.spiral.amplitude_rad * (1.0 - (t - 0.25) / 0.5);
            }
            psi += dpsi;
            Eigen::Vector2d ref = env * Eigen::Vector2d(std::cos(psi), std::sin(psi));
            Eigen::Vector2d a = tilt_xy(p.pose, h.pose);
            Eigen::Vector2d rate =
                (ref - ref_prev) / (3 * world_.dt()) + 1.0 * (ref - a);
            ref_prev = ref;
            if (rate.norm() > 0.2) rate *= 0.2 / rate.norm();
            try {
                command_tilt_rate(rate, h.pose);
            } catch (const WihmWorkspaceExceeded&) {
                // finger workspace exhausted: stop rotating, let the arm and
                // the compliance finish the descent
                hand_exhausted_ = true;
                if (trace) trace->event(world_.clock(), "hand workspace exhausted");
            }
        }

        // slow coordinated descent, keeping only a small downward preload:
        // never outrun the tracked object by more than a few millimetres
        Eigen::Vector3d step(0, 0, 0);
        const double achieved = z0 - e.z();
        if (commanded_descent - achieved < 3.0) {
            step.z() = -cfg_.spiral.descent_mm_per_tick;
            commanded_descent += cfg_.spiral.descent_mm_per_tick;
        }
        const double nudge = 0.3;
        if (std::abs(e.x()) > params_.gamma) step.x() = -(e.x() > 0 ? 1 : -1) * nudge;
        if (std::abs(e.y()) > params_.gamma) step.y() = -(e.y() > 0 ? 1 : -1) * nudge;
        arm_step(step, h.pose);
        spend_tick();
    }
    return world_.inserted();
}

TrialResult InsertionController::run() {
    TrialResult res;
    try {
        if (world_.inserted()) {  // degenerate start: nothing to do
            res.success = true;
            return res;
        }
        Observation h0 = obs_.hole_init(world_.clock());
        ++tracker_queries_;
        grasp_and_lift();

        if (cfg_.mode == ControllerMode::kOpenLoop) {
            // single plan from the initial estimates, no queries afterwards
            Pose believed = obs_.peg_init(world_.clock()).pose;
            ++tracker_queries_;
            believed = Pose(believed.quat(),
                            believed.translation() + Eigen::Vector3d(0, 0, cfg_.lift_height_mm));
            const double delta_plan = geom::compliant_depth(
                geom::insertion_height(peg_.grasp_height, mf_.d_o, 0, 0), cfg_.overshoot_mm);
            Pose m = believed * t3d_;
            Eigen::Vector3d target =
                h0.pose.translation() +
                h0.pose.rotation() *
                    Eigen::Vector3d(0, 0, delta_plan + cfg_.transport_height_mm);
            world_.arm_command_delta(Pose::from_translation(target - m.translation()));
            spend_tick();
            const int steps = static_cast<int>(
                (cfg_.transport_height_mm + 0.6 * hole_.depth) / params_.sigma);
            for (int i = 0; i < steps; ++i) {
                world_.arm_command_delta(Pose::from_translation({0, 0, -params_.sigma}));
                spend_tick();
            }
            res.success = world_.inserted();
        } else {
            if (cfg_.mode == ControllerMode::kFull) rotation_servo_beta0();
            move_above();
            const double target_depth =
                cfg_.mode == ControllerMode::kFull
                    ? params_.delta_c
                    : geom::compliant_depth(
                          geom::insertion_height(peg_.grasp_height, mf_.d_o, 0, 0),
                          cfg_.overshoot_mm);
            translation_servo(target_depth);
            if (cfg_.mode == ControllerMode::kFull) rotation_servo_beta_f();
            res.success = spiral_insertion();
        }
    } catch (const GraspInfeasible&) {
        res.failure_cause = FailureCause::kGrasp;
    } catch (const WihmWorkspaceExceeded&) {
        res.failure_cause = FailureCause::kWorkspace;
    } catch (const WorkspaceExceeded&) {
        res.failure_cause = FailureCause::kWorkspace;
    } catch (const TimeoutExceeded&) {
        res.failure_cause = FailureCause::kTimeout;
    } catch (const SolverFailure&) {
        res.failure_cause = FailureCause::kWorkspace;
    } catch (const JamAbort&) {
        res.failure_cause = FailureCause::kJam;
    }
    if (world_.state().jammed) {
        res.success = false;
        res.failure_cause = FailureCause::kJam;
    }
    if (res.success) res.failure_cause = FailureCause::kNone;
    res.servo_ticks = servo_ticks_;
    res.total_ticks = ticks_;
    res.hand_actions = hand_actions_;
    if (trace) {
        trace->event(world_.clock(), std::string("result ") +
                                         (res.success ? "success" : "failure") + " cause " +
                                         to_string(res.failure_cause));
    }
    return res;
}

}  // namespace pih::ctrl
