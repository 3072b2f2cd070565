#include "pih/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "pih/rng.hpp"

namespace pih::harness {

namespace {

geom::FaceCloud circle_face(double radius, int n = 240) {
    geom::FaceCloud f;
    for (int i = 0; i < n; ++i) {
        const double a = 2 * M_PI * i / n;
        f.points.emplace_back(radius * std::cos(a), radius * std::sin(a));
    }
    return f;
}

geom::FaceCloud polygon_face(const std::vector<geom::Vec2>& vertices, int per_edge) {
    geom::FaceCloud f;
    const int n = static_cast<int>(vertices.size());
    for (int i = 0; i < n; ++i) {
        const geom::Vec2& a = vertices[i];
        const geom::Vec2& b = vertices[(i + 1) % n];
        for (int k = 0; k < per_edge; ++k) {
            f.points.emplace_back(a + (b - a) * (static_cast<double>(k) / per_edge));
        }
    }
    return f;
}

geom::FaceCloud pear_face() {
    // convex egg: hull of two offset circles
    geom::FaceCloud f;
    for (int i = 0; i < 240; ++i) {
        const double a = 2 * M_PI * i / 240;
        f.points.emplace_back(-4 + 13 * std::cos(a), 13 * std::sin(a));
        f.points.emplace_back(8 + 9 * std::cos(a), 9 * std::sin(a));
    }
    auto hull = geom::convex_hull(f.points);
    geom::FaceCloud out;
    out.points = hull;
    return out;
}

struct ModelHolder {
    std::unique_ptr<hand::InverseHandModel> model;
};

ModelHolder& model_holder() {
    static ModelHolder holder;
    return holder;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (trials < 1) throw ConfigError("trials: must be at least 1");
    compliance_preset(compliance);              // throws naming "compliance"
    noise_preset(noise, seed);                  // throws naming "noise"
    resolve_object(object);                     // throws naming "object"
    if (clearance_mm <= 0) throw ConfigError("clearance: must be positive");
    if (hole_depth_mm <= 0) throw ConfigError("hole_depth: must be positive");
    for (const auto& d : disturbances) {
        if (d.kind != "move_hole" && d.kind != "push_object" && d.kind != "push_arm") {
            throw ConfigError("disturbances: unknown kind '" + d.kind + "'");
        }
        if (d.tick < 0) throw ConfigError("disturbances: tick must be non-negative");
    }
}

std::string ExperimentConfig::derived_label() const {
    if (!label.empty()) return label;
    return object + "-" + ctrl::to_string(mode) + "-" + compliance + "-" + noise;
}

world::ComplianceConfig compliance_preset(const std::string& name) {
    world::ComplianceConfig cfg;
    if (name == "compliant") {
        cfg.arm_compliant = true;
        cfg.hand_compliant = true;
        cfg.hole_compliant = false;
    } else if (name == "rigid_hand_compliant_arm") {
        cfg.arm_compliant = true;
        cfg.hand_compliant = false;
        cfg.hole_compliant = false;
    } else if (name == "rigid_hand_rigid_arm_compliant_hole") {
        cfg.arm_compliant = false;
        cfg.hand_compliant = false;
        cfg.hole_compliant = true;
    } else if (name == "all_rigid") {
        cfg.arm_compliant = false;
        cfg.hand_compliant = false;
        cfg.hole_compliant = false;
    } else {
        throw ConfigError("compliance: unknown preset '" + name + "'");
    }
    return cfg;
}

double arm_bias_radius_mm(const std::string& compliance_name) {
    // the low-impedance arm wanders by up to 26 mm; the rigid arm stays within 1
    return compliance_preset(compliance_name).arm_compliant ? 26.0 : 1.0;
}

TrackerConfig noise_preset(const std::string& level, std::uint64_t seed) {
    TrackerConfig cfg;
    cfg.seed = seed;
    if (level == "none") {
        cfg.trans_noise_mm = 0.0;
        cfg.rot_noise_deg = 0.0;
    } else if (level == "n5") {
        cfg.trans_noise_mm = 5.0;
        cfg.rot_noise_deg = 5.0;
    } else if (level == "n10") {
        cfg.trans_noise_mm = 10.0;
        cfg.rot_noise_deg = 10.0;
    } else {
        throw ConfigError("noise: unknown level '" + level + "'");
    }
    return cfg;
}

const std::vector<std::string>& builtin_object_names() {
    static const std::vector<std::string> names = {"small_circle", "large_circle", "pear",
                                                   "triangle", "rectangle"};
    return names;
}

geom::PegGeometry builtin_object(const std::string& name) {
    geom::PegGeometry peg;
    peg.height = 80.0;
    peg.grasp_height = 40.0;
    if (name == "small_circle") {
        peg.face = circle_face(15.0);
    } else if (name == "large_circle") {
        peg.face = circle_face(20.0);
    } else if (name == "pear") {
        peg.face = pear_face();
    } else if (name == "triangle") {
        const double r = 38.0 / std::sqrt(3.0);
        std::vector<geom::Vec2> v;
        for (int k = 0; k < 3; ++k) {
            const double a = M_PI / 2 + 2 * M_PI * k / 3;
            v.emplace_back(r * std::cos(a), r * std::sin(a));
        }
        peg.face = polygon_face(v, 80);
    } else if (name == "rectangle") {
        std::vector<geom::Vec2> v = {{22, 12}, {-22, 12}, {-22, -12}, {22, -12}};
        peg.face = polygon_face(v, 60);
    } else {
        throw UnknownObject("object: unknown builtin '" + name + "'");
    }
    peg.validate();
    return peg;
}

geom::PegGeometry resolve_object(const std::string& name_or_path) {
    for (const auto& n : builtin_object_names()) {
        if (n == name_or_path) return builtin_object(n);
    }
    if (name_or_path.find('.') != std::string::npos ||
        name_or_path.find('/') != std::string::npos) {
        geom::PegGeometry peg;
        peg.face = geom::load_face_cloud(name_or_path);
        peg.height = 80.0;
        peg.grasp_height = 40.0;
        peg.validate();
        return peg;
    }
    throw UnknownObject("object: unknown name '" + name_or_path + "'");
}

hand::HandParams default_hand_params() { return hand::HandParams{}; }

const hand::InverseHandModel& shared_inverse_model() {
    auto& holder = model_holder();
    if (!holder.model) {
        // quick deterministic desk-scale fit; heavy 20k training goes through
        // the CLI instead
        auto buffer = hand::generate_dataset(8, 4000, 0x9d15);
        hand::InverseHandModel::FitOptions opt;
        opt.epochs = 80;
        opt.seed = 0x9d15;
        holder.model =
            std::make_unique<hand::InverseHandModel>(hand::InverseHandModel::fit(buffer, opt));
    }
    return *holder.model;
}

void set_shared_inverse_model(hand::InverseHandModel model) {
    model_holder().model = std::make_unique<hand::InverseHandModel>(std::move(model));
}

std::vector<ctrl::TrialResult> run_experiment(const ExperimentConfig& cfg,
                                              ctrl::TraceLog* trace) {
    cfg.validate();
    geom::PegGeometry peg = resolve_object(cfg.object);
    world::ComplianceConfig compliance = compliance_preset(cfg.compliance);
    const bool needs_model = compliance.hand_compliant && cfg.mode == ctrl::ControllerMode::kFull;
    const hand::InverseHandModel* model = needs_model ? &shared_inverse_model() : nullptr;

    std::vector<ctrl::TrialResult> results;
    results.reserve(cfg.trials);
    for (int i = 0; i < cfg.trials; ++i) {
        const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(i);
        Rng rng(mix_seed(trial_seed, 0x7169a1));

        geom::HoleGeometry hole =
            geom::HoleGeometry::for_peg(peg, cfg.clearance_mm, Pose(), cfg.hole_depth_mm);

        // peg placed back on the support surface in no predefined pose
        const double r = rng.uniform(80.0, 130.0);
        const double theta = rng.uniform(0.0, 2 * M_PI);
        const double yaw = rng.uniform(0.0, 2 * M_PI);
        Pose peg_start = Pose::from_axis_angle(
            Eigen::Vector3d::UnitZ(), yaw,
            Eigen::Vector3d(r * std::cos(theta), r * std::sin(theta), 0.0));

        world::ArmModel arm;
        arm.bias = world::ArmModel::sample_bias(trial_seed, arm_bias_radius_mm(cfg.compliance));
        arm.seed = trial_seed;
        arm.believed = Pose::from_translation({0, 0, 250});
        arm.actual = arm.believed;

        world::World w(peg, hole, compliance, arm, peg_start);
        TrackerConfig tracker_cfg = noise_preset(cfg.noise, trial_seed);
        ctrl::WorldObservationSource obs(w, tracker_cfg);

        ctrl::ControllerConfig ctrl_cfg;
        ctrl_cfg.mode = cfg.mode;
        ctrl::InsertionController controller(w, obs, model, peg, hole, default_hand_params(),
                                             ctrl_cfg);
        controller.trace = trace;
        controller.on_tick = [&w, &cfg](int tick) {
            for (const auto& d : cfg.disturbances) {
                if (d.tick == tick) w.disturb(d.kind, d.magnitude);
            }
        };
        if (cfg.initial_tilt_deg != 0.0) {
            const double azimuth = rng.uniform(0.0, 2 * M_PI);
            const double tilt = cfg.initial_tilt_deg * M_PI / 180.0;
            controller.on_phase = [&w, tilt, azimuth](const std::string& phase) {
                if (phase == "spiral") w.tilt_object(tilt, azimuth);
            };
        }

        ctrl::TrialResult res = controller.run();
        res.seed = trial_seed;
        results.push_back(res);
    }
    return results;
}

int Summary::successes() const {
    int n = 0;
    for (const auto& r : results) n += r.success ? 1 : 0;
    return n;
}

double Summary::mean(int ctrl::TrialResult::* field) const {
    if (results.empty()) return 0;
    double acc = 0;
    for (const auto& r : results) acc += r.*field;
    return acc / results.size();
}

double Summary::stddev(int ctrl::TrialResult::* field) const {
    if (results.size() < 2) return 0;
    const double m = mean(field);
    double acc = 0;
    for (const auto& r : results) acc += (r.*field - m) * (r.*field - m);
    return std::sqrt(acc / (results.size() - 1));
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    return os.str();
}

}  // namespace

std::string report(const std::vector<Summary>& summaries, const std::string& format) {
    if (summaries.empty()) throw ConfigError("report: no results to report");
    std::ostringstream os;
    if (format == "csv") {
        os << "config,object,mode,compliance,noise,trials,success,servo_ticks_mean,"
              "servo_ticks_std,total_ticks_mean,total_ticks_std,hand_actions_mean,"
              "hand_actions_std\n";
        for (const auto& s : summaries) {
            os << s.cfg.derived_label() << "," << s.cfg.object << ","
               << ctrl::to_string(s.cfg.mode) << "," << s.cfg.compliance << "," << s.cfg.noise
               << "," << s.results.size() << "," << s.successes() << "/" << s.results.size()
               << "," << fmt(s.mean(&ctrl::TrialResult::servo_ticks)) << ","
               << fmt(s.stddev(&ctrl::TrialResult::servo_ticks)) << ","
               << fmt(s.mean(&ctrl::TrialResult::total_ticks)) << ","
               << fmt(s.stddev(&ctrl::TrialResult::total_ticks)) << ","
               << fmt(s.mean(&ctrl::TrialResult::hand_actions)) << ","
               << fmt(s.stddev(&ctrl::TrialResult::hand_actions)) << "\n";
        }
    } else if (format == "markdown") {
        os << "| Config | Obj. | Servo ticks | Total ticks | Hand actions | Success |\n";
        os << "|---|---|---|---|---|---|\n";
        for (const auto& s : summaries) {
            os << "| " << s.cfg.derived_label() << " | " << s.cfg.object << " | "
               << fmt(s.mean(&ctrl::TrialResult::servo_ticks)) << " ± "
               << fmt(s.stddev(&ctrl::TrialResult::servo_ticks)) << " | "
               << fmt(s.mean(&ctrl::TrialResult::total_ticks)) << " ± "
               << fmt(s.stddev(&ctrl::TrialResult::total_ticks)) << " | "
               << fmt(s.mean(&ctrl::TrialResult::hand_actions)) << " ± "
               << fmt(s.stddev(&ctrl::TrialResult::hand_actions)) << " | " << s.successes()
               << "/" << s.results.size() << " |\n";
        }
    } else {
        throw ConfigError("format: unknown report format '" + format + "'");
    }
    return os.str();
}

std::string trials_csv(const std::vector<Summary>& summaries) {
    std::ostringstream os;
    os << "config,object,mode,compliance,noise,trial,seed,success,servo_ticks,total_ticks,"
          "hand_actions,failure_cause\n";
    for (const auto& s : summaries) {
        for (std::size_t i = 0; i < s.results.size(); ++i) {
            const auto& r = s.results[i];
            os << s.cfg.derived_label() << "," << s.cfg.object << ","
               << ctrl::to_string(s.cfg.mode) << "," << s.cfg.compliance << "," << s.cfg.noise
               << "," << i << "," << r.seed << "," << (r.success ? 1 : 0) << ","
               << r.servo_ticks << "," << r.total_ticks << "," << r.hand_actions << ","
               << ctrl::to_string(r.failure_cause) << "\n";
        }
    }
    return os.str();
}

std::vector<Summary> parse_trials_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);  // header
    std::map<std::string, Summary> by_label;
    std::vector<std::string> order;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12) throw IoError("bad trials csv row: " + line);
        auto& summary = by_label[cells[0]];
        if (summary.results.empty()) {
            summary.cfg.label = cells[0];
            summary.cfg.object = cells[1];
            summary.cfg.mode = ctrl::mode_from_string(cells[2]);
            summary.cfg.compliance = cells[3];
            summary.cfg.noise = cells[4];
            order.push_back(cells[0]);
        }
        ctrl::TrialResult r;
        r.seed = std::stoull(cells[6]);
        r.success = cells[7] == "1";
        r.servo_ticks = std::stoi(cells[8]);
        r.total_ticks = std::stoi(cells[9]);
        r.hand_actions = std::stoi(cells[10]);
        summary.results.push_back(r);
    }
    std::vector<Summary> out;
    for (const auto& label : order) out.push_back(by_label[label]);
    return out;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file " + path);
    ExperimentConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section == "disturbances") {
            if (key != "event") throw ConfigError("disturbances: unknown key '" + key + "'");
            std::istringstream vs(value);
            DisturbanceEvent d;
            if (!(vs >> d.tick >> d.kind >> d.magnitude.x() >> d.magnitude.y() >>
                  d.magnitude.z())) {
                throw ConfigError("disturbances: event must be 'tick kind dx dy dz'");
            }
            cfg.disturbances.push_back(d);
        } else if (section.empty() || section == "experiment") {
            try {
                if (key == "object") cfg.object = value;
                else if (key == "trials") cfg.trials = std::stoi(value);
                else if (key == "mode") cfg.mode = ctrl::mode_from_string(value);
                else if (key == "compliance") cfg.compliance = value;
                else if (key == "noise") cfg.noise = value;
                else if (key == "seed") cfg.seed = std::stoull(value);
                else if (key == "clearance") cfg.clearance_mm = std::stod(value);
                else if (key == "hole_depth") cfg.hole_depth_mm = std::stod(value);
                else if (key == "initial_tilt_deg") cfg.initial_tilt_deg = std::stod(value);
                else if (key == "label") cfg.label = value;
                else throw ConfigError("experiment: unknown key '" + key + "'");
            } catch (const std::invalid_argument&) {
                throw ConfigError("config: bad value for '" + key + "': " + value);
            }
        } else {
            throw ConfigError("config: unknown section '" + section + "'");
        }
    }
    return cfg;
}

std::vector<ExperimentConfig> ablation_matrix(const std::string& object, int trials,
                                              std::uint64_t seed) {
    std::vector<ExperimentConfig> matrix;
    auto add = [&](const std::string& label, ctrl::ControllerMode mode,
                   const std::string& compliance, const std::string& noise, double tilt) {
        ExperimentConfig cfg;
        cfg.object = object;
        cfg.trials = trials;
        cfg.mode = mode;
        cfg.compliance = compliance;
        cfg.noise = noise;
        cfg.seed = seed;
        cfg.initial_tilt_deg = tilt;
        cfg.label = label;
        matrix.push_back(cfg);
    };
    add("baseline", ctrl::ControllerMode::kFull, "compliant", "none", 0);
    add("rigid_hand_compliant_arm", ctrl::ControllerMode::kFull, "rigid_hand_compliant_arm",
        "none", 1.5);
    add("rigid_hand_rigid_arm_compliant_hole", ctrl::ControllerMode::kFull,
        "rigid_hand_rigid_arm_compliant_hole", "none", 1.5);
    add("all_rigid", ctrl::ControllerMode::kFull, "all_rigid", "none", 1.5);
    add("naive", ctrl::ControllerMode::kNaive, "compliant", "none", 0);
    add("open_loop", ctrl::ControllerMode::kOpenLoop, "compliant", "none", 0);
    add("noise_5mm_5deg", ctrl::ControllerMode::kFull, "compliant", "n5", 0);
    add("noise_10mm_10deg", ctrl::ControllerMode::kFull, "compliant", "n10", 0);
    return matrix;
}

}  // namespace pih::harness
