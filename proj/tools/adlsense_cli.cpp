#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "adlsense/adlsense.hpp"

namespace fs = std::filesystem;
using namespace adlsense;

namespace {

// Raised for bad invocations caught before any processing starts.
struct StartupError : Error {
    using Error::Error;
};

void require_file(const std::string& what, const std::string& path) {
    if (path.empty()) throw StartupError(what + " path not given");
    if (!fs::is_regular_file(path)) throw StartupError(what + " file " + path + " does not exist");
}

void require_dir(const std::string& what, const std::string& path) {
    if (path.empty()) throw StartupError(what + " path not given");
    if (!fs::is_directory(path)) throw StartupError(what + " directory " + path + " does not exist");
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

struct ProviderOptions {
    std::string provider = "synthetic";
    std::string features_dir;

    void check() const {
        if (provider == "files") {
            require_dir("features", features_dir);
        } else if (provider != "synthetic") {
            throw StartupError("unknown provider " + provider + " (synthetic or files)");
        }
    }

    std::unique_ptr<FeatureProvider> make(const std::string& subdir = {}) const {
        if (provider == "files") {
            return std::make_unique<FileProvider>(subdir.empty() ? fs::path(features_dir)
                                                                 : fs::path(features_dir) / subdir);
        }
        return std::make_unique<SyntheticProvider>();
    }
};

void add_provider_flags(CLI::App* cmd, ProviderOptions& p) {
    cmd->add_option("--provider", p.provider, "feature provider")
        ->check(CLI::IsMember({"synthetic", "files"}))
        ->capture_default_str();
    cmd->add_option("--features-dir", p.features_dir, "exported feature bundles (provider=files)");
}

void add_sampler_flags(CLI::App* cmd, SamplerConfig& s) {
    cmd->add_option("--input-rate", s.input_rate, "source frame rate")->capture_default_str();
    cmd->add_option("--stride", s.sample_stride, "input frames per retained sample")->capture_default_str();
    cmd->add_option("--emit-every", s.emit_every, "retained samples between windows")->capture_default_str();
}

// --- weights ---------------------------------------------------------------

struct WeightsInit {
    std::uint64_t seed = 1;
    std::string out;
    std::size_t conv2d = 64, conv1d = 128, classes = kDefaultTaskClasses;

    void run() const {
        PipelineConfig cfg;
        cfg.conv2d.out_channels = conv2d;
        cfg.conv1d.out_channels = conv1d;
        cfg.num_classes = classes;
        store_weights(random_weights(seed, cfg), out);
        std::cout << "wrote " << out << " (seed " << seed << ")\n";
    }
};

void weights_show(const std::string& path) {
    require_file("weights", path);
    const auto bytes = wire::read_file(path);
    const auto w = decode_weights(bytes);
    nlohmann::json layers = nlohmann::json::object();
    std::size_t params = 0;
    const auto add = [&](const std::string& name, const Tensor<float>& t) {
        layers[name] = t.shape();
        params += t.size();
    };
    add("conv2d.weight", w.conv2d.weight);
    add("conv2d.bias", w.conv2d.bias);
    add("conv1d.weight", w.conv1d.weight);
    add("conv1d.bias", w.conv1d.bias);
    add("embed.weight", w.embed.weight);
    add("embed.bias", w.embed.bias);
    add("head.weight", w.head.weight);
    add("head.bias", w.head.bias);
    const nlohmann::json j = {{"path", path},
                              {"pipeline", to_json(w.config)},
                              {"tensors", layers},
                              {"parameters", params},
                              {"fnv1a64", fnv1a64_hex(bytes)}};
    std::cout << j.dump(2) << '\n';
}

// --- synth / features --------------------------------------------------------

struct Synth {
    std::string activity = "brushing_teeth";
    SynthesisOptions options;
    std::string out;

    void run() const {
        write_session(out, synthesize_session(activity_pattern(activity), options));
        std::cout << "wrote " << out << " (" << options.frames << " frames of " << activity << ")\n";
    }
};

struct FeaturesExport {
    std::string session;
    std::string out;
    SamplerConfig sampler;

    void run() const {
        require_file("session", session);
        const auto s = load_session(session);
        SyntheticProvider provider;
        fs::create_directories(out);
        std::size_t n = 0;
        for (const auto& w : sample_windows(s.frames, sampler)) {
            store_feature_bundle(provider.features(w), (fs::path(out) / feature_file_name(w.window_index)).string());
            ++n;
        }
        std::cout << "wrote " << n << " feature bundle(s) to " << out << '\n';
    }
};

// --- calibrate ---------------------------------------------------------------

struct Calibrate {
    std::string weights;
    std::string labels;
    std::string out_space;
    std::string out_thresholds;
    std::string user = "user";
    ProviderOptions provider;
    SamplerConfig sampler;
    CalibrationConfig gate;
    DecisionPolicy policy;
    std::optional<double> tau;
    double tau_percentile = 99.0;
    int degenerate_exit = 0;

    int run() const {
        require_file("weights", weights);
        require_file("labels", labels);
        if (out_space.empty()) throw StartupError("--out path not given");
        provider.check();
        const auto w = load_weights(weights);
        const auto base = fs::path(labels).parent_path();

        std::vector<eval::LabeledSample> samples;
        for (auto& s : eval::load_labels(labels)) {
            if (s.true_class == eval::kUnseenLabel) continue;
            if (s.path.empty()) throw ValidationError("labels: sample " + s.sample_id + " has no session path");
            if (fs::path(s.path).is_relative()) s.path = (base / s.path).string();
            require_file("session", s.path);
            samples.push_back(s);
        }
        if (samples.empty()) throw ValidationError("calibration corpus has no labeled ADL sessions");
        std::sort(samples.begin(), samples.end(),
                  [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });

        std::map<std::string, int> ids;
        for (const auto& s : samples) ids.emplace(s.true_class, 0);
        std::map<int, std::string> names;
        int next = 0;
        for (auto& [label, id] : ids) {
            id = next++;
            names[id] = label;
        }

        // Held out for tau: a class's last session when it has two or more,
        // otherwise every fifth window of its only session.
        std::map<std::string, std::string> last_session;
        std::map<std::string, std::size_t> sessions_per_class;
        for (const auto& s : samples) {
            last_session[s.true_class] = s.sample_id;
            ++sessions_per_class[s.true_class];
        }

        PipelineOptions popt;
        popt.sampler = sampler;
        std::vector<double> motion;
        std::vector<std::pair<int, AdlEmbedding>> all, fit;
        std::vector<AdlEmbedding> held_out;
        for (const auto& s : samples) {
            const auto session = load_session(s.path);
            auto prov = provider.make(s.sample_id);
            const int cls = ids.at(s.true_class);
            const bool whole = sessions_per_class[s.true_class] >= 2 && last_session[s.true_class] == s.sample_id;
            const auto windows = embed_session(session.frames, w, *prov, popt);
            if (windows.empty()) warn("session " + s.sample_id + " is shorter than one window");
            for (const auto& we : windows) {
                motion.push_back(we.motion_avg);
                all.push_back({cls, we.embedding});
                const bool hold = whole || (sessions_per_class[s.true_class] < 2 && we.window_index % 5 == 4);
                if (hold) {
                    held_out.push_back(we.embedding);
                } else {
                    fit.push_back({cls, we.embedding});
                }
            }
        }
        if (motion.empty()) throw ValidationError("calibration corpus produced no windows");

        int status = 0;
        const auto th = calibrate_thresholds(motion, gate);
        if (samples.size() < 2 || th.calibration.degenerate()) {
            warn("degenerate calibration: " + std::to_string(samples.size()) + " session(s), " +
                 std::to_string(motion.size()) + " window(s)");
            status = degenerate_exit;
        }

        DecisionPolicy p = policy;
        if (tau) {
            p.tau_unseen = *tau;
        } else if (held_out.empty()) {
            warn("no held-out windows; keeping tau_unseen = " + std::to_string(p.tau_unseen));
        } else {
            const auto partial = EmbeddingSpace::init(user, fit, th, policy, names);
            p.tau_unseen = calibrate_unseen_threshold(partial, held_out, tau_percentile);
        }
        const auto space = EmbeddingSpace::init(user, all, th, p, names);
        save_space(space, out_space);
        if (!out_thresholds.empty()) save_thresholds(th, out_thresholds);

        std::cout << "calibrated " << names.size() << " class(es) from " << samples.size() << " session(s), "
                  << motion.size() << " window(s)\n"
                  << "m_min = " << th.m_min << ", m_max = " << th.m_max << ", tau_unseen = " << p.tau_unseen
                  << " (" << held_out.size() << " held-out window(s))\n";
        return status;
    }
};

// --- run -----------------------------------------------------------------------

BehaviorTable default_behavior(const EmbeddingSpace& space) {
    BehaviorTable t;
    for (const auto& [cls, e] : space.classes()) {
        t.instructions[cls] = {e.label + ".instruction"};
        t.labels[cls] = e.label;
    }
    t.reinforcement = {"reinforcement.general"};
    return t;
}

struct Run {
    std::string weights;
    std::string space_path;
    std::string session;
    std::string behavior;
    std::string out = "out";
    std::string save_space_path;
    ProviderOptions provider;
    PipelineOptions options;
    std::optional<double> tau;
    std::optional<double> atypical_z;

    void run() {
        require_file("weights", weights);
        require_file("space", space_path);
        require_file("session", session);
        if (!behavior.empty()) require_file("behavior", behavior);
        provider.check();

        const auto w = load_weights(weights);
        auto space = load_space(space_path);
        auto pol = space.policy();
        if (tau) pol.tau_unseen = *tau;
        if (atypical_z) pol.atypical_z = *atypical_z;
        space.set_policy(pol);
        std::map<std::string, int> label_ids;
        for (const auto& [cls, e] : space.classes()) label_ids[e.label] = cls;
        auto table = behavior.empty() ? default_behavior(space) : load_behavior_table(behavior, label_ids);
        for (const auto& [cls, e] : space.classes()) {
            if (!table.instructions.count(cls)) {
                warn("behavior table has no instructions for " + e.label + "; using a generic key");
                table.instructions[cls] = {e.label + ".instruction"};
                table.labels[cls] = e.label;
            }
        }
        const auto s = load_session(session);
        auto prov = provider.make();

        Pipeline pipeline(w, space, AssistPolicy(table, options.cooldown), *prov, options);
        auto decisions = open_out(fs::path(out) / "decisions.jsonl");
        auto events = open_out(fs::path(out) / "events.jsonl");
        std::map<AdlType, std::size_t> counts;
        std::size_t n_events = 0;
        for (const auto& f : s.frames) {
            const auto r = pipeline.push(f);
            if (!r) continue;
            decisions << decision_record(*r).dump() << '\n';
            ++counts[r->decision.type];
            if (r->event.kind != EventKind::none) {
                auto ev = to_json(r->event);
                ev["window"] = r->window_index;
                events << ev.dump() << '\n';
                ++n_events;
            }
        }
        if (!decisions || !events) throw IoError("write failed under " + out);
        if (!save_space_path.empty()) save_space(space, save_space_path);

        std::cout << s.frames.size() << " frame(s):";
        for (auto t : {AdlType::non_adl, AdlType::seen, AdlType::unseen, AdlType::atypical})
            std::cout << ' ' << to_string(t) << '=' << counts[t];
        std::cout << ", " << n_events << " event(s)\n";
    }
};

// --- eval ----------------------------------------------------------------------

struct Eval {
    std::string labels;
    std::vector<std::string> predictions;
    std::string rates;
    std::string out;
    std::string table;
    bool micro = false;

    void run() const {
        std::vector<eval::LabeledSample> truth;
        if (!predictions.empty()) {
            require_file("labels", labels);
            truth = eval::load_labels(labels);
        }
        for (const auto& p : predictions) require_file("predictions", p);
        if (!rates.empty()) require_file("rates", rates);

        std::vector<eval::PredictionSet> sets;
        for (const auto& p : predictions) sets.push_back(eval::load_predictions(p));
        const auto rows = rates.empty() ? std::vector<eval::RateRow>{} : eval::load_rates(rates);
        const auto rep = eval::evaluate(truth, sets, rows, micro);
        if (!out.empty()) {
            eval::write_report(rep, out, table.empty() ? std::nullopt : std::optional<std::string>(table));
        }
        for (const auto& w : rep.warnings) warn(w);
        auto shown = rep;
        shown.warnings.clear();
        std::cout << eval::render_table(shown);
    }
};

// --- space ---------------------------------------------------------------------

void space_show(const std::string& path) {
    require_file("space", path);
    const auto space = load_space(path);
    std::cout << "user " << space.user_id() << ", " << space.classes().size() << " class(es), "
              << space.history().size() << " history entr" << (space.history().size() == 1 ? "y" : "ies") << '\n'
              << "gate (" << space.gate().m_min << ", " << space.gate().m_max << ") from "
              << space.gate().calibration.sample_count << " window(s)\n"
              << "policy " << to_json(space.policy()).dump() << '\n';
    for (const auto& [cls, e] : space.classes()) {
        std::cout << "  " << cls << ' ' << e.label << ": n=" << e.stats.count << " D=" << e.stats.mean_dist
                  << " var=" << e.stats.variance << '\n';
    }
}

void space_export(const std::string& path, const std::string& out_path) {
    require_file("space", path);
    const auto space = load_space(path);
    auto out = open_out(out_path);
    for (const auto& [cls, e] : space.classes()) {
        out << nlohmann::json{{"class_id", cls}, {"label", e.label}, {"kind", "centroid"},
                              {"embedding", e.stats.centroid}}
                   .dump()
            << '\n';
        for (const auto& m : e.members) {
            out << nlohmann::json{{"class_id", cls}, {"label", e.label}, {"kind", "member"}, {"embedding", m}}
                       .dump()
                << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + out_path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adlsense: ADL recognition and assistance pipeline"};
    app.set_config("--config", "", "TOML config file (sections per subcommand)")->envname("ADLSENSE_CONFIG");
    app.require_subcommand(1);

    std::string stage = "cli";
    int status = 0;

    auto* weights = app.add_subcommand("weights", "fusion weight files")->require_subcommand(1);
    WeightsInit winit;
    auto* w_init = weights->add_subcommand("init", "write seeded random weights");
    w_init->add_option("--seed", winit.seed, "initialisation seed")->capture_default_str();
    w_init->add_option("--out", winit.out, "output path")->required();
    w_init->add_option("--conv2d-channels", winit.conv2d)->capture_default_str();
    w_init->add_option("--conv1d-channels", winit.conv1d)->capture_default_str();
    w_init->add_option("--classes", winit.classes)->capture_default_str();
    std::string show_weights;
    auto* w_show = weights->add_subcommand("show", "print pipeline config and tensor shapes");
    w_show->add_option("--weights", show_weights)->required();

    Synth synth;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic skeleton session");
    synth_cmd->add_option("--activity", synth.activity)->capture_default_str();
    synth_cmd->add_option("--seed", synth.options.seed)->capture_default_str();
    synth_cmd->add_option("--frames", synth.options.frames)->capture_default_str();
    synth_cmd->add_option("--fps", synth.options.fps)->capture_default_str();
    synth_cmd->add_option("--jitter", synth.options.jitter)->capture_default_str();
    synth_cmd->add_option("--start-time", synth.options.start_time)->capture_default_str();
    synth_cmd->add_option("--out", synth.out)->required();

    auto* features = app.add_subcommand("features", "feature bundle files")->require_subcommand(1);
    FeaturesExport fexport;
    auto* f_export = features->add_subcommand("export", "write synthetic feature bundles for a session");
    f_export->add_option("--session", fexport.session)->required();
    f_export->add_option("--out", fexport.out, "output directory")->required();
    add_sampler_flags(f_export, fexport.sampler);

    Calibrate cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "calibrate gate thresholds, tau and the embedding space");
    cal_cmd->add_option("--weights", cal.weights);
    cal_cmd->add_option("--labels", cal.labels, "labels jsonl whose path fields name sessions");
    cal_cmd->add_option("--out", cal.out_space, "embedding space output");
    cal_cmd->add_option("--thresholds-out", cal.out_thresholds, "gate thresholds output");
    cal_cmd->add_option("--user", cal.user)->capture_default_str();
    cal_cmd->add_option("--policy-tau", cal.tau, "fixed tau_unseen instead of calibrating");
    cal_cmd->add_option("--tau-percentile", cal.tau_percentile)->capture_default_str();
    cal_cmd->add_option("--atypical-z", cal.policy.atypical_z)->capture_default_str();
    cal_cmd->add_option("--min-history", cal.policy.min_history)->capture_default_str();
    cal_cmd->add_option("--percentile-lo", cal.gate.percentile_lo)->capture_default_str();
    cal_cmd->add_option("--percentile-hi", cal.gate.percentile_hi)->capture_default_str();
    cal_cmd->add_option("--margin-lo", cal.gate.margin_lo)->capture_default_str();
    cal_cmd->add_option("--margin-hi", cal.gate.margin_hi)->capture_default_str();
    cal_cmd->add_option("--degenerate-exit", cal.degenerate_exit, "exit code for a degenerate corpus")
        ->capture_default_str();
    add_provider_flags(cal_cmd, cal.provider);
    add_sampler_flags(cal_cmd, cal.sampler);

    Run run;
    auto* run_cmd = app.add_subcommand("run", "replay a session through the pipeline");
    run_cmd->add_option("--weights", run.weights);
    run_cmd->add_option("--space", run.space_path);
    run_cmd->add_option("--session", run.session);
    run_cmd->add_option("--behavior", run.behavior, "behavior table json");
    run_cmd->add_option("--out", run.out, "directory for decisions.jsonl and events.jsonl")->capture_default_str();
    run_cmd->add_option("--save-space", run.save_space_path, "write the updated space here");
    run_cmd->add_option("--policy-tau", run.tau);
    run_cmd->add_option("--atypical-z", run.atypical_z);
    run_cmd->add_option("--cooldown", run.options.cooldown)->capture_default_str();
    run_cmd->add_flag("--update-space", run.options.update_space, "add seen embeddings to the space");
    add_provider_flags(run_cmd, run.provider);
    add_sampler_flags(run_cmd, run.options.sampler);

    Eval ev;
    auto* eval_cmd = app.add_subcommand("eval", "metrics, significance tests and success rates");
    eval_cmd->add_option("--labels", ev.labels);
    eval_cmd->add_option("--pred", ev.predictions, "prediction file (repeatable)");
    eval_cmd->add_option("--rates", ev.rates, "success-rate rows jsonl");
    eval_cmd->add_option("--out", ev.out, "report json");
    eval_cmd->add_option("--table", ev.table, "report text table");
    eval_cmd->add_flag("--micro", ev.micro, "micro instead of macro averages");

    auto* space = app.add_subcommand("space", "embedding space files")->require_subcommand(1);
    std::string space_path, export_path;
    auto* s_show = space->add_subcommand("show", "summarise a space");
    s_show->add_option("--space", space_path)->required();
    auto* s_export = space->add_subcommand("export", "write centroids and members as jsonl");
    s_export->add_option("--space", space_path)->required();
    s_export->add_option("--out", export_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*w_init) {
            winit.run();
        } else if (*w_show) {
            weights_show(show_weights);
        } else if (*synth_cmd) {
            synth.run();
        } else if (*f_export) {
            fexport.run();
        } else if (*cal_cmd) {
            stage = "calibrate";
            status = cal.run();
        } else if (*run_cmd) {
            stage = "run";
            run.run();
        } else if (*eval_cmd) {
            stage = "eval";
            ev.run();
        } else if (*s_show) {
            space_show(space_path);
        } else if (*s_export) {
            space_export(space_path, export_path);
        }
    } catch (const StartupError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error [" << stage << "]: " << e.what() << '\n';
        return 1;
    }
    return status;
}
