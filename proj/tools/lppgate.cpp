// lppgate command-line driver.
//
//   synth -> extract -> split -> train -> sweep -> evaluate [-> ablate, sensitivity]
//   generate replaces synth when traces come from a provider.
//
// Every artifact-writing command also writes <first output>.manifest.json.

#include "lppgate/lppgate.hpp"
#include "lppgate/openai_provider.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace lppgate;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

// Effective settings: defaults, then the config file, then flags.
struct Settings {
    std::uint64_t seed = kDefaultSeed;
    double c_mis = 1.0;
    double cost_ratio = 0.64;
    double tau_lo = 0.35, tau_hi = 0.70, tau_step = 0.005;
    std::string families = "all";
    std::string dataset_profile = "openai-mod";
    std::string provider = "stub";
    std::string stub;
    std::vector<double> ratios = default_sensitivity_ratios();
    unsigned threads = 0;
    unsigned concurrency = 4;
    std::size_t top_k = 5;
    bool binary_support = false;
    double target_majority_ratio = 4.0;
    std::string template_id = "text-direct";
    std::string template_dir;
    std::string concept_definition;
    DecodingConfig decoding;
    OpenAIConfig openai;
    SynthConfig synth;

    CostModel cost() const { return CostModel::from_ratio(cost_ratio, c_mis); }
    SweepConfig sweep() const { return SweepConfig{tau_lo, tau_hi, tau_step}; }

    json to_json() const {
        json j;
        j["seed"] = seed;
        j["c_mis"] = c_mis;
        j["cost_ratio"] = cost_ratio;
        j["tau_range"] = {tau_lo, tau_hi};
        j["tau_step"] = tau_step;
        j["families"] = families;
        j["dataset_profile"] = dataset_profile;
        j["provider"] = provider;
        j["stub"] = stub;
        j["sensitivity_ratios"] = ratios;
        j["top_k"] = top_k;
        j["binary_support"] = binary_support;
        j["target_majority_ratio"] = target_majority_ratio;
        j["template"] = template_id;
        j["decoding"] = lppgate::to_json(decoding);
        return j;
    }
};

void apply_config(Settings& s, const json& j) {
    auto get = [&](const char* key, auto& dst) {
        if (auto it = j.find(key); it != j.end() && !it->is_null()) dst = it->get<std::decay_t<decltype(dst)>>();
    };
    get("seed", s.seed);
    get("c_mis", s.c_mis);
    get("cost_ratio", s.cost_ratio);
    if (auto it = j.find("tau_range"); it != j.end()) {
        s.tau_lo = it->at(0).get<double>();
        s.tau_hi = it->at(1).get<double>();
    }
    get("tau_step", s.tau_step);
    get("families", s.families);
    get("dataset_profile", s.dataset_profile);
    get("provider", s.provider);
    get("stub", s.stub);
    get("sensitivity_ratios", s.ratios);
    get("threads", s.threads);
    get("concurrency", s.concurrency);
    get("top_k", s.top_k);
    get("binary_support", s.binary_support);
    get("target_majority_ratio", s.target_majority_ratio);
    get("template", s.template_id);
    get("template_dir", s.template_dir);
    get("concept_definition", s.concept_definition);
    if (auto it = j.find("decoding"); it != j.end()) {
        const auto& d = *it;
        s.decoding.temperature = d.value("temperature", s.decoding.temperature);
        s.decoding.top_p = d.value("top_p", s.decoding.top_p);
        s.decoding.n = d.value("n", s.decoding.n);
        s.decoding.max_output_tokens = d.value("max_output_tokens", s.decoding.max_output_tokens);
        s.decoding.top_logprobs = d.value("top_logprobs", s.decoding.top_logprobs);
        s.decoding.non_paper = d.value("non_paper", s.decoding.non_paper);
    }
    if (auto it = j.find("openai"); it != j.end()) {
        const auto& o = *it;
        s.openai.base_url = o.value("base_url", s.openai.base_url);
        s.openai.path = o.value("path", s.openai.path);
        s.openai.model = o.value("model", s.openai.model);
        s.openai.api_key_env = o.value("api_key_env", s.openai.api_key_env);
    }
    if (auto it = j.find("synth"); it != j.end()) {
        const auto& y = *it;
        if (y.contains("preset")) s.synth = SynthConfig::preset(y.at("preset").get<std::string>());
        s.synth.n_items = y.value("n_items", s.synth.n_items);
        s.synth.error_rate = y.value("error_rate", s.synth.error_rate);
        s.synth.abstention_rate = y.value("abstention_rate", s.synth.abstention_rate);
        s.synth.signal.topk = y.value("topk_signal", s.synth.signal.topk);
        s.synth.signal.verbalized = y.value("verbalized_signal", s.synth.signal.verbalized);
        s.synth.signal.reasoning = y.value("reasoning", s.synth.signal.reasoning);
        s.synth.signal.abstentions_confident = y.value("abstentions_confident", s.synth.signal.abstentions_confident);
    }
}

std::pair<double, double> parse_range(const std::string& text) {
    const auto sep = text.find_first_of(",:");
    if (sep == std::string::npos) throw Error(ErrorCode::InvalidArgument, "tau range must be 'lo,hi'");
    return {parse_double(trim(std::string_view(text).substr(0, sep))),
            parse_double(trim(std::string_view(text).substr(sep + 1)))};
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& t : split_csv_row(text)) out.push_back(parse_double(trim(t)));
    return out;
}

// Inputs are hashed as read; outputs are held in memory and only written,
// via temp file + rename, after the command succeeds.
class Run {
public:
    Run(std::string command, const Settings& s) : command_(std::move(command)), settings_(s), t0_(Clock::now()) {}

    std::string input(const std::string& path) {
        if (path.empty()) throw Error(ErrorCode::MissingInput, command_ + ": a required input path is empty");
        if (!fs::exists(path)) throw Error(ErrorCode::MissingInput, command_ + ": missing input " + path);
        auto text = read_file(path);
        inputs_.push_back({path, sha256_hex(text)});
        return text;
    }

    void output(const std::string& path, std::string content) {
        if (path.empty()) throw Error(ErrorCode::InvalidArgument, command_ + ": output path is empty");
        outputs_.push_back({path, std::move(content)});
    }

    json& extra() { return extra_; }

    void commit() {
        if (outputs_.empty()) return;
        json m;
        m["command"] = command_;
        m["version"] = kVersion;
        const auto cfg = settings_.to_json();
        m["config_hash"] = sha256_hex(cfg.dump());
        m["config"] = cfg;
        m["seed"] = settings_.seed;
        json ins = json::array();
        for (const auto& [p, h] : inputs_) ins.push_back({{"path", p}, {"sha256", h}});
        m["inputs"] = std::move(ins);
        json outs = json::array();
        for (const auto& [p, c] : outputs_) outs.push_back({{"path", p}, {"sha256", sha256_hex(c)}});
        m["outputs"] = std::move(outs);
        for (const auto& [k, v] : extra_.items()) m[k] = v;
        m["timing_seconds"] = std::chrono::duration<double>(Clock::now() - t0_).count();
        outputs_.push_back({outputs_.front().first + ".manifest.json", m.dump(2) + "\n"});

        std::vector<std::string> staged;
        try {
            for (const auto& [p, c] : outputs_) {
                const fs::path target(p);
                if (target.has_parent_path()) fs::create_directories(target.parent_path());
                const std::string tmp = p + ".tmp";
                write_file(tmp, c);
                staged.push_back(tmp);
            }
            for (const auto& [p, c] : outputs_) fs::rename(p + ".tmp", p);
        } catch (...) {
            for (const auto& t : staged) fs::remove(t);
            throw;
        }
    }

private:
    using Clock = std::chrono::steady_clock;
    std::string command_;
    const Settings& settings_;
    Clock::time_point t0_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> outputs_;
    json extra_ = json::object();
};

FeatureConfig feature_config(const Settings& s) { return FeatureConfig{s.top_k, s.binary_support}; }

PipelineConfig pipeline_config(const Settings& s) {
    PipelineConfig c;
    c.families = FamilySet::parse(s.families);
    c.split.test_negative_count = profile_test_negatives(s.dataset_profile);
    c.split.seed = s.seed;
    c.resample.target_majority_ratio = s.target_majority_ratio;
    c.cost = s.cost();
    c.sweep = s.sweep();
    c.sensitivity_ratios = s.ratios;
    c.seed = s.seed;
    c.threads = s.threads;
    return c;
}

json ids_json(const std::vector<std::string>& ids) { return json(ids); }

// Rebuilds train/validation/test from a split file over the joined data.
DataSplits load_splits(Run& run, const std::string& features, const std::string& labels, const std::string& split) {
    const auto m = feature_matrix_from_csv(run.input(features));
    const auto l = labels_from_csv(run.input(labels));
    const auto sj = json::parse(run.input(split));
    const auto joined = join_labels(m, l);
    DataSplits d;
    d.train = subset_by_ids(joined.set, sj.at("train").get<std::vector<std::string>>());
    d.validation = subset_by_ids(joined.set, sj.at("validation").get<std::vector<std::string>>());
    d.test = subset_by_ids(joined.set, sj.at("test").get<std::vector<std::string>>());
    d.invalid_rows = joined.invalid_rows;
    d.unlabeled_rows = joined.unlabeled_rows;
    return d;
}

std::string grid_csv(const GridResult& g) {
    std::string out = "index,alpha,tol,max_iter,class_weight,calibration,mean_f1\n";
    for (std::size_t i = 0; i < g.entries.size(); ++i) {
        const auto& e = g.entries[i];
        out += std::to_string(i) + "," + format_double(e.config.alpha) + "," + format_double(e.config.tol) + "," +
               std::to_string(e.config.max_iter) + "," + e.config.class_weight.name + "," +
               std::string(to_string(e.config.calibration)) + "," + format_double(e.mean_f1) + "\n";
    }
    return out;
}

std::vector<GatewayItem> load_items(const std::string& text, const Settings& s) {
    std::vector<GatewayItem> items;
    for (const auto& line : split_lines(text)) {
        const auto j = json::parse(line);
        GatewayItem it;
        it.item_id = j.at("item_id").get<std::string>();
        auto put = [&](const char* key, const char* field) {
            if (auto f = j.find(key); f != j.end() && f->is_string()) it.fields[field] = f->get<std::string>();
        };
        put("text", "TEXT");
        put("transcript", "TRANSCRIPT");
        put("thumbnail", "THUMBNAIL");
        put("video_frames", "VIDEO\\FRAMES");
        put("concept_definition", "CONCEPT_DEFINITION");
        if (!it.fields.contains("CONCEPT_DEFINITION") && !s.concept_definition.empty())
            it.fields["CONCEPT_DEFINITION"] = s.concept_definition;
        items.push_back(std::move(it));
    }
    return items;
}

int fail_with(const Error& e) {
    json j;
    j["error"] = std::string(to_string(e.code()));
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trust-or-escalate gate for LLM classification outputs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> cost_ratio, tau_step;
    std::string tau_range, families, profile, provider, stub;
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--cost-ratio", cost_ratio, "c_rev / c_mis");
    app.add_option("--tau-range", tau_range, "Threshold sweep range 'lo,hi'");
    app.add_option("--tau-step", tau_step, "Threshold sweep step");
    app.add_option("--families", families, "Feature families: 'all' or a comma list");
    app.add_option("--dataset-profile", profile, "openai-mod or multimodal (test negatives 150/45)");
    app.add_option("--provider", provider, "stub or openai");
    app.add_option("--stub", stub, "Stub provider fixture JSON (implies --provider stub)");

    // Per-command paths.
    std::string traces = "traces.jsonl", labels = "labels.csv", features = "features.csv", split = "split.json",
                model = "model.json", policy = "policy.json", report_dir = "report", items = "items.jsonl",
                ablation_out = "ablation.csv", report_json = "report/report.json", sens_out = "sensitivity.csv";
    std::string synth_preset;
    std::optional<std::size_t> n_items;
    std::optional<double> error_rate, abstention_rate;
    std::string template_id, template_dir, ratios;
    std::vector<std::string> drop_families;

    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic trace corpus with labels");
    c_synth->add_option("--out-traces", traces);
    c_synth->add_option("--out-labels", labels);
    c_synth->add_option("--preset", synth_preset, "none, msp-only, complementary, attribution-only");
    c_synth->add_option("--n-items", n_items);
    c_synth->add_option("--error-rate", error_rate);
    c_synth->add_option("--abstention-rate", abstention_rate);

    auto* c_generate = app.add_subcommand("generate", "Query a provider and write response traces");
    c_generate->add_option("--items", items, "JSONL with item_id, text and optional media fields")->required();
    c_generate->add_option("--out", traces);
    c_generate->add_option("--template", template_id, "text-direct, text-cot, multimodal-direct, multimodal-cot");
    c_generate->add_option("--template-dir", template_dir, "Directory with system-*.txt and user-*.txt");

    auto* c_extract = app.add_subcommand("extract", "Compute the feature matrix from traces");
    c_extract->add_option("--traces", traces);
    c_extract->add_option("--out", features);

    auto* c_split = app.add_subcommand("split", "Stratified train/validation/test split");
    c_split->add_option("--features", features);
    c_split->add_option("--labels", labels);
    c_split->add_option("--out", split);

    auto* c_train = app.add_subcommand("train", "Grid search and cross-fit the meta-model");
    c_train->add_option("--features", features);
    c_train->add_option("--labels", labels);
    c_train->add_option("--split", split);
    c_train->add_option("--out", model);

    auto* c_sweep = app.add_subcommand("sweep", "Pick the cost-minimizing threshold on validation");
    c_sweep->add_option("--model", model);
    c_sweep->add_option("--features", features);
    c_sweep->add_option("--labels", labels);
    c_sweep->add_option("--split", split);
    c_sweep->add_option("--out", policy);

    auto* c_eval = app.add_subcommand("evaluate", "Meta-model, baselines and always-trust on test");
    c_eval->add_option("--model", model);
    c_eval->add_option("--policy", policy);
    c_eval->add_option("--features", features);
    c_eval->add_option("--labels", labels);
    c_eval->add_option("--split", split);
    c_eval->add_option("--out-dir", report_dir);

    auto* c_ablate = app.add_subcommand("ablate", "Retrain with one feature family removed");
    c_ablate->add_option("--features", features);
    c_ablate->add_option("--labels", labels);
    c_ablate->add_option("--split", split);
    c_ablate->add_option("--family", drop_families, "Family to drop (repeatable; default: every family)");
    c_ablate->add_option("--out", ablation_out);

    auto* c_sens = app.add_subcommand("sensitivity", "Relative cost across c_rev/c_mis ratios");
    c_sens->add_option("--report", report_json);
    c_sens->add_option("--ratios", ratios, "Comma list, default 0.4,0.64,0.9");
    c_sens->add_option("--out", sens_out);

    CLI11_PARSE(app, argc, argv);

    try {
        Settings s;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw Error(ErrorCode::MissingInput, "missing config " + config_path);
            apply_config(s, json::parse(read_file(config_path)));
        }
        if (seed) s.seed = *seed;
        if (cost_ratio) s.cost_ratio = *cost_ratio;
        if (!tau_range.empty()) std::tie(s.tau_lo, s.tau_hi) = parse_range(tau_range);
        if (tau_step) s.tau_step = *tau_step;
        if (!families.empty()) s.families = families;
        if (!profile.empty()) s.dataset_profile = profile;
        if (!provider.empty()) s.provider = provider;
        if (!stub.empty()) {
            s.stub = stub;
            s.provider = "stub";
        }
        if (!template_id.empty()) s.template_id = template_id;
        if (!template_dir.empty()) s.template_dir = template_dir;
        if (!ratios.empty()) s.ratios = parse_list(ratios);
        if (!synth_preset.empty()) s.synth = SynthConfig::preset(synth_preset);
        if (n_items) s.synth.n_items = *n_items;
        if (error_rate) s.synth.error_rate = *error_rate;
        if (abstention_rate) s.synth.abstention_rate = *abstention_rate;
        s.synth.seed = s.seed;
        s.cost().validate();

        if (*c_synth) {
            Run run("synth", s);
            const auto corpus = generate_synthetic(s.synth);
            run.output(traces, to_jsonl(corpus.traces));
            run.output(labels, labels_to_csv(corpus.labels));
            std::size_t errors = 0, abstentions = 0;
            for (std::size_t i = 0; i < corpus.z.size(); ++i) {
                errors += corpus.z[i] == 0;
                abstentions += is_abstention(corpus.traces[i].structured.outcome);
            }
            run.extra()["synth"] = {{"n_items", s.synth.n_items},
                                    {"error_rate", s.synth.error_rate},
                                    {"abstention_rate", s.synth.abstention_rate},
                                    {"realized_errors", errors},
                                    {"realized_abstentions", abstentions}};
            run.commit();
        } else if (*c_generate) {
            Run run("generate", s);
            const auto item_list = load_items(run.input(items), s);
            const auto tpl = s.template_dir.empty() ? builtin_template(s.template_id)
                                                    : load_template(s.template_id, s.template_dir);
            GatewayConfig gc;
            gc.decoding = s.decoding;
            gc.concurrency = s.concurrency;
            std::unique_ptr<Provider> p;
            if (s.provider == "stub") {
                if (s.stub.empty()) throw Error(ErrorCode::MissingInput, "stub provider needs --stub <fixture.json>");
                p = StubProvider::from_json(nlohmann::json::parse(run.input(s.stub)));
            } else if (s.provider == "openai") {
                p = std::make_unique<OpenAIProvider>(s.openai);
            } else {
                throw Error(ErrorCode::InvalidArgument, "unknown provider '" + s.provider + "'");
            }
            auto batch = run_batch(*p, tpl, item_list, gc);
            run.output(traces, to_jsonl(batch.traces));
            run.extra()["gateway"] = batch.manifest;
            run.commit();
        } else if (*c_extract) {
            Run run("extract", s);
            const auto tr = traces_from_jsonl(run.input(traces));
            const auto fc = feature_config(s);
            const auto m = build_feature_matrix(tr, FamilySet::parse(s.families), fc);
            run.output(features, to_csv(m));
            run.output(fs::path(features).replace_extension(".families.json").string(), family_sidecar(m, fc).dump(2) + "\n");
            std::size_t invalid = 0;
            for (bool v : m.valid) invalid += !v;
            run.extra()["rows"] = m.rows();
            run.extra()["invalid_rows"] = invalid;
            run.commit();
        } else if (*c_split) {
            Run run("split", s);
            const auto m = feature_matrix_from_csv(run.input(features));
            const auto l = labels_from_csv(run.input(labels));
            const auto cfg = pipeline_config(s);
            const auto d = make_splits(m, l, cfg.split);
            json j;
            j["seed"] = s.seed;
            j["dataset_profile"] = s.dataset_profile;
            j["test_negative_count"] = cfg.split.test_negative_count;
            j["train"] = ids_json(d.train.item_ids);
            j["validation"] = ids_json(d.validation.item_ids);
            j["test"] = ids_json(d.test.item_ids);
            j["invalid_rows"] = ids_json(d.invalid_rows);
            j["unlabeled_rows"] = ids_json(d.unlabeled_rows);
            run.output(split, j.dump(1) + "\n");
            run.extra()["sizes"] = {{"train", d.train.size()}, {"validation", d.validation.size()}, {"test", d.test.size()}};
            run.commit();
        } else if (*c_train) {
            Run run("train", s);
            const auto d = load_splits(run, features, labels, split);
            const auto out = train_gate(d.train, pipeline_config(s));
            run.output(model, to_json(out.gate).dump(1) + "\n");
            run.output(fs::path(model).replace_extension(".grid.csv").string(), grid_csv(out.grid));
            run.extra()["best_config"] = to_json(out.grid.best);
            run.extra()["best_mean_f1"] = out.grid.best_f1;
            run.extra()["resampled_train_size"] = out.kept_ids.size();
            run.extra()["warnings"] = out.warnings;
            run.commit();
        } else if (*c_sweep) {
            Run run("sweep", s);
            const auto gate = gate_from_json(json::parse(run.input(model)));
            const auto d = load_splits(run, features, labels, split);
            const auto vs = score_set(gate, d.validation);
            const auto cost = s.cost();
            const auto p = sweep_threshold(vs, d.validation.z, cost, s.sweep());
            auto j = policy_report(p, always_trust_cost(d.validation.z, cost), cost, s.ratios);
            j["split"] = "validation";
            j["tau_grid"] = {{"lo", s.tau_lo}, {"hi", s.tau_hi}, {"step", s.tau_step}};
            j["model_hash"] = gate_content_hash(gate);
            run.output(policy, j.dump(1) + "\n");
            run.commit();
        } else if (*c_eval) {
            Run run("evaluate", s);
            auto gate = gate_from_json(json::parse(run.input(model)));
            const auto pj = json::parse(run.input(policy));
            if (pj.value("model_hash", "") != gate_content_hash(gate))
                throw Error(ErrorCode::InvalidArgument, "policy was swept on a different model");
            gate.tau_star = pj.at("tau_star").get<double>();
            const CostModel cost{pj.at("c_mis").get<double>(), pj.at("c_rev").get<double>()};
            const auto d = load_splits(run, features, labels, split);
            const auto rep = evaluate_methods(gate, d.validation, d.test, cost, s.sweep());
            auto rj = to_json(rep);
            rj["excluded_invalid_rows"] = d.invalid_rows.size();
            run.output(report_dir + "/report.json", rj.dump(1) + "\n");
            run.output(report_dir + "/predictive.csv", predictive_csv(rep));
            run.output(report_dir + "/cost.csv", cost_csv(rep));
            run.commit();
            std::cout << predictive_csv(rep) << "\n" << cost_csv(rep);
        } else if (*c_ablate) {
            Run run("ablate", s);
            const auto d = load_splits(run, features, labels, split);
            const auto cfg = pipeline_config(s);
            std::vector<FeatureFamily> drops;
            if (drop_families.empty()) drops = cfg.families.members();
            for (const auto& f : drop_families) drops.push_back(parse_family(f));
            const auto full = run_pipeline_on_splits(d, cfg);
            const double full_cost = meta_result(full.report).test.expected_cost;
            const auto rows = run_ablation(d, cfg, drops, full_cost);
            run.output(ablation_out, ablation_csv(rows));
            run.extra()["full_expected_cost"] = full_cost;
            run.commit();
            std::cout << ablation_csv(rows);
        } else if (*c_sens) {
            Run run("sensitivity", s);
            const auto rj = json::parse(run.input(report_json));
            const double c_mis = rj.at("c_mis").get<double>();
            std::string out = "method,r,relative_cost\n";
            json sj = json::array();
            for (const auto& m : rj.at("methods")) {
                const auto counts = counts_from_json(m.at("test").at("counts"));
                for (const auto& pt : cost_ratio_sensitivity(counts, s.ratios)) {
                    out += m.at("method").get<std::string>() + "," + format_double(pt.r) + "," +
                           format_double(pt.relative_cost) + "\n";
                    sj.push_back({{"method", m.at("method")}, {"r", pt.r}, {"relative_cost", pt.relative_cost}});
                }
            }
            run.output(sens_out, out);
            run.extra()["c_mis"] = c_mis;
            run.extra()["points"] = std::move(sj);
            run.commit();
            std::cout << out;
        }
    } catch (const Error& e) {
        return fail_with(e);
    } catch (const nlohmann::json::exception& e) {
        return fail_with(Error(ErrorCode::InvalidArgument, e.what()));
    } catch (const std::exception& e) {
        return fail_with(Error(ErrorCode::Io, e.what()));
    }
    return 0;
}
