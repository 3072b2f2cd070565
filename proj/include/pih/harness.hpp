#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pih/control.hpp"
#include "pih/geometry.hpp"
#include "pih/hand.hpp"
#include "pih/world.hpp"

namespace pih::harness {

struct DisturbanceEvent {
    int tick = 0;
    std::string kind;  ///< move_hole | push_object | push_arm
    Eigen::Vector3d magnitude = Eigen::Vector3d::Zero();  ///< mm
};

struct ExperimentConfig {
    std::string object = "large_circle";  ///< builtin name or face-cloud file path
    int trials = 12;
    ctrl::ControllerMode mode = ctrl::ControllerMode::kFull;
    std::string compliance = "compliant";
    std::string noise = "none";  ///< none | n5 | n10
    std::uint64_t seed = 1;
    std::vector<DisturbanceEvent> disturbances;
    double clearance_mm = 0.25;
    double hole_depth_mm = 25.0;
    double initial_tilt_deg = 0.0;  ///< in-grasp tilt injected when the spiral starts
    std::string label;              ///< report row name; derived when empty

    void validate() const;  ///< ConfigError naming the offending field
    std::string derived_label() const;
};

/// Presets matching the ablation row groups.
world::ComplianceConfig compliance_preset(const std::string& name);
double arm_bias_radius_mm(const std::string& compliance_name);
TrackerConfig noise_preset(const std::string& level, std::uint64_t seed);

const std::vector<std::string>& builtin_object_names();
geom::PegGeometry builtin_object(const std::string& name);
/// Builtin by name, or a face cloud loaded from a file path.
geom::PegGeometry resolve_object(const std::string& name_or_path);

hand::HandParams default_hand_params();

/// Process-wide deterministic inverse model (quick desk-scale fit), shared by
/// every experiment so ablations compare like against like.
const hand::InverseHandModel& shared_inverse_model();
/// Replaces the shared model (e.g. loaded from a file). Not thread safe;
/// call before running experiments.
void set_shared_inverse_model(hand::InverseHandModel model);

/// Runs cfg.trials seeded trials (per-trial seed = seed + i). Deterministic
/// end to end for a fixed config.
std::vector<ctrl::TrialResult> run_experiment(const ExperimentConfig& cfg,
                                              ctrl::TraceLog* trace = nullptr);

struct Summary {
    ExperimentConfig cfg;
    std::vector<ctrl::TrialResult> results;
    int successes() const;
    double mean(int ctrl::TrialResult::* field) const;
    double stddev(int ctrl::TrialResult::* field) const;
};

/// CSV columns: config,object,mode,compliance,noise,trials,success,
/// servo_ticks_mean,servo_ticks_std,total_ticks_mean,total_ticks_std,
/// hand_actions_mean,hand_actions_std
std::string report(const std::vector<Summary>& summaries, const std::string& format);

/// One row per trial, for idempotent re-aggregation.
std::string trials_csv(const std::vector<Summary>& summaries);
std::vector<Summary> parse_trials_csv(const std::string& text);

/// Key-value config file with [experiment] and [disturbances] sections.
ExperimentConfig parse_config_file(const std::string& path);

/// The ablation matrix mirroring the paper's study: baseline, compliance
/// presets, naive/open-loop control, and the two noise levels.
std::vector<ExperimentConfig> ablation_matrix(const std::string& object, int trials,
                                              std::uint64_t seed);

}  // namespace pih::harness
