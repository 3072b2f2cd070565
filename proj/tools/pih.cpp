#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pih/harness.hpp"

namespace fs = std::filesystem;
using namespace pih;

namespace {

void write_file(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

int cmd_gen_dataset(const std::string& out, int transitions, int triangles,
                    std::uint64_t seed) {
    hand::DatasetStats stats;
    auto buffer = hand::generate_dataset(triangles, transitions, seed, hand::HandParams{}, &stats);
    hand::save_dataset(buffer, out);
    std::cout << "wrote " << stats.generated << " transitions (" << stats.skipped
              << " skipped) from " << triangles << " triangles to " << out << "\n";
    return 0;
}

int cmd_fit_model(const std::string& data, const std::string& out, std::uint64_t seed,
                  int epochs) {
    auto buffer = hand::load_dataset(data);
    hand::InverseHandModel::FitOptions opt;
    opt.seed = seed;
    opt.epochs = epochs;
    auto model = hand::InverseHandModel::fit(buffer, opt);
    model.save(out);
    std::cout << "fit " << buffer.size() << " records, final loss " << model.final_loss()
              << ", dataset hash " << std::hex << model.dataset_hash() << std::dec << "\n";
    return 0;
}

int cmd_run(harness::ExperimentConfig cfg, const std::string& out_dir,
            const std::string& format, const std::string& model_path,
            const std::string& trace_path) {
    if (!model_path.empty()) {
        harness::set_shared_inverse_model(hand::InverseHandModel::load(model_path));
    }
    ctrl::TraceLog trace;
    harness::Summary summary;
    summary.cfg = cfg;
    summary.results = harness::run_experiment(cfg, trace_path.empty() ? nullptr : &trace);
    std::vector<harness::Summary> summaries = {summary};

    const std::string csv = harness::report(summaries, "csv");
    write_file(out_dir + "/results.csv", csv);
    write_file(out_dir + "/trials.csv", harness::trials_csv(summaries));
    if (!trace_path.empty()) trace.write(trace_path);
    std::cout << harness::report(summaries, format);
    return 0;
}

int cmd_ablate(const std::string& object, int trials, std::uint64_t seed,
               const std::string& out_dir, const std::string& format,
               const std::string& model_path) {
    if (!model_path.empty()) {
        harness::set_shared_inverse_model(hand::InverseHandModel::load(model_path));
    }
    std::vector<harness::Summary> summaries;
    for (const auto& cfg : harness::ablation_matrix(object, trials, seed)) {
        harness::Summary s;
        s.cfg = cfg;
        s.results = harness::run_experiment(cfg);
        summaries.push_back(std::move(s));
        std::cerr << "finished " << cfg.derived_label() << "\n";
    }
    write_file(out_dir + "/results.csv", harness::report(summaries, "csv"));
    write_file(out_dir + "/trials.csv", harness::trials_csv(summaries));
    std::cout << harness::report(summaries, format);
    return 0;
}

int cmd_report(const std::string& in, const std::string& format) {
    std::ifstream f(in);
    if (!f) throw IoError("cannot open " + in);
    std::stringstream buf;
    buf << f.rdbuf();
    auto summaries = harness::parse_trials_csv(buf.str());
    std::cout << harness::report(summaries, format);
    return 0;
}

int cmd_replay(const std::string& trace_path) {
    std::ifstream f(trace_path);
    if (!f) throw IoError("cannot open " + trace_path);
    std::string line;
    int states = 0, events = 0;
    double last_clock = 0, last_depth = 0;
    bool jammed = false;
    while (std::getline(f, line)) {
        if (line.rfind("EV ", 0) == 0) {
            ++events;
            std::cout << line << "\n";
        } else if (line.rfind("S ", 0) == 0) {
            ++states;
            std::istringstream is(line.substr(2));
            std::string tag;
            double clock;
            is >> clock >> tag;
            double vals[16];
            for (int i = 0; i < 14; ++i) is >> vals[i];
            double depth;
            int jam;
            is >> depth >> jam;
            last_clock = clock;
            last_depth = depth;
            jammed = jam != 0;
        }
    }
    std::cout << "replayed " << states << " ticks, " << events << " events; final t="
              << last_clock << "s depth=" << last_depth << "mm jammed=" << (jammed ? "yes" : "no")
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quasistatic peg-in-hole insertion simulator"};
    app.require_subcommand(1);

    // gen-dataset
    auto* gen = app.add_subcommand("gen-dataset", "generate hand transition data");
    std::string gen_out = "dataset.txt";
    int gen_transitions = 20000, gen_triangles = 12;
    std::uint64_t gen_seed = 7;
    gen->add_option("--out", gen_out);
    gen->add_option("--transitions", gen_transitions);
    gen->add_option("--triangles", gen_triangles);
    gen->add_option("--seed", gen_seed);

    // fit-model
    auto* fit = app.add_subcommand("fit-model", "fit the inverse hand model");
    std::string fit_data = "dataset.txt", fit_out = "model.txt";
    std::uint64_t fit_seed = 7;
    int fit_epochs = 120;
    fit->add_option("--data", fit_data);
    fit->add_option("--out", fit_out);
    fit->add_option("--seed", fit_seed);
    fit->add_option("--epochs", fit_epochs);

    // run
    auto* run = app.add_subcommand("run", "run one experiment configuration");
    std::string run_config, run_object, run_mode, run_compliance, run_noise;
    std::string run_out = "out", run_format = "csv", run_model, run_trace;
    int run_trials = -1;
    std::int64_t run_seed = -1;
    run->add_option("--config", run_config, "config file");
    run->add_option("--object", run_object);
    run->add_option("--trials", run_trials);
    run->add_option("--mode", run_mode);
    run->add_option("--compliance", run_compliance);
    run->add_option("--noise", run_noise);
    run->add_option("--seed", run_seed);
    run->add_option("--out-dir", run_out);
    run->add_option("--format", run_format);
    run->add_option("--model", run_model);
    run->add_option("--trace", run_trace);

    // ablate
    auto* abl = app.add_subcommand("ablate", "run the full ablation matrix");
    std::string abl_object = "large_circle", abl_out = "out", abl_format = "markdown", abl_model;
    int abl_trials = 12;
    std::uint64_t abl_seed = 1;
    abl->add_option("--object", abl_object);
    abl->add_option("--trials", abl_trials);
    abl->add_option("--seed", abl_seed);
    abl->add_option("--out-dir", abl_out);
    abl->add_option("--format", abl_format);
    abl->add_option("--model", abl_model);

    // report
    auto* rep = app.add_subcommand("report", "re-aggregate a raw trials CSV");
    std::string rep_in = "out/trials.csv", rep_format = "markdown";
    rep->add_option("--in", rep_in);
    rep->add_option("--format", rep_format);

    // replay
    auto* replay = app.add_subcommand("replay", "replay a trial trace log");
    std::string replay_trace;
    replay->add_option("trace", replay_trace)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_dataset(gen_out, gen_transitions, gen_triangles, gen_seed);
        if (fit->parsed()) return cmd_fit_model(fit_data, fit_out, fit_seed, fit_epochs);
        if (run->parsed()) {
            harness::ExperimentConfig cfg;
            if (!run_config.empty()) cfg = harness::parse_config_file(run_config);
            if (!run_object.empty()) cfg.object = run_object;
            if (run_trials > 0) cfg.trials = run_trials;
            if (!run_mode.empty()) cfg.mode = ctrl::mode_from_string(run_mode);
            if (!run_compliance.empty()) cfg.compliance = run_compliance;
            if (!run_noise.empty()) cfg.noise = run_noise;
            if (run_seed >= 0) cfg.seed = static_cast<std::uint64_t>(run_seed);
            return cmd_run(cfg, run_out, run_format, run_model, run_trace);
        }
        if (abl->parsed()) {
            return cmd_ablate(abl_object, abl_trials, abl_seed, abl_out, abl_format, abl_model);
        }
        if (rep->parsed()) return cmd_report(rep_in, rep_format);
        if (replay->parsed()) return cmd_replay(replay_trace);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UnknownObject& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
