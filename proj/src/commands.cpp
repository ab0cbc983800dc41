#include "synthctx/commands.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "synthctx/analysis.hpp"
#include "synthctx/error.hpp"
#include "synthctx/eval.hpp"
#include "synthctx/hash.hpp"
#include "synthctx/scoring.hpp"
#include "synthctx/symbolic.hpp"
#include "synthctx/trace.hpp"

namespace synthctx::cli {

namespace {

namespace fs = std::filesystem;

// Typed access to a flat config object that remembers which keys were read,
// so finish() can reject the rest.
class ConfigReader {
  public:
    ConfigReader(const json& j, std::string command) : j_(j), command_(std::move(command)) {
        if (!j_.is_object()) throw ConfigError(command_ + ": config must be a JSON object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_[key].is_null();
    }

    template <typename T>
    T get(const std::string& key) {
        if (!has(key)) throw ConfigError(command_ + ": missing required key '" + key + "'");
        return convert<T>(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        return has(key) ? convert<T>(key) : fallback;
    }

    template <typename T>
    std::optional<T> opt(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return convert<T>(key);
    }

    const json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError(command_ + ": missing required key '" + key + "'");
        return j_[key];
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) throw ConfigError(command_ + ": unknown config key '" + it.key() + "'");
        }
    }

    const std::string& command() const { return command_; }

  private:
    template <typename T>
    T convert(const std::string& key) {
        try {
            return j_[key].get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(command_ + ": bad value for '" + key + "': " + e.what());
        }
    }

    const json& j_;
    std::string command_;
    std::set<std::string> seen_;
};

std::string input_comment(const fs::path& p) { return "input " + p.string() + " sha256=" + file_sha256(p); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void set_threads(ConfigReader& r) {
    const auto threads = r.get<std::size_t>("threads", 0);
    if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
}

augment::BackendConfig backend_from_value(const json& v) {
    if (v.is_string()) {
        const std::string text = read_file(v.get<std::string>());
        try {
            return augment::backend_from_json(json::parse(text));
        } catch (const json::parse_error& e) {
            throw ConfigError("backend file '" + v.get<std::string>() + "': " + e.what());
        }
    }
    return augment::backend_from_json(v);
}

TokenizerSpec tokenizer_from_value(const json& v, const std::optional<fs::path>& vocab_path) {
    TokenizerSpec spec;
    if (v.is_string()) {
        spec.mode = parse_tokenizer_mode(v.get<std::string>());
    } else {
        try {
            spec = tokenizer_from_json(v);
        } catch (const ParseError& e) {
            throw ConfigError(std::string("gen: tokenizer: ") + e.what());
        }
    }
    if (spec.mode == TokenizerMode::external_vocab && !spec.vocab_ref) {
        if (!vocab_path) throw ConfigError("gen: external-vocab tokenizer needs vocab_path");
        spec.vocab_ref = file_sha256(*vocab_path);
    }
    check_tokenizer_spec(spec);
    return spec;
}

struct NamedMatrix {
    std::string name;
    fs::path path;
    ScoreMatrix matrix;
    std::optional<std::string> task;
    std::optional<double> f1;
};

std::vector<NamedMatrix> read_matrices(const json& list, const std::string& command) {
    if (!list.is_array() || list.empty()) throw ConfigError(command + ": 'matrices' must be a non-empty array");
    std::vector<NamedMatrix> out;
    std::set<std::string> names;
    for (const auto& item : list) {
        NamedMatrix m;
        if (item.is_string()) {
            m.path = item.get<std::string>();
        } else {
            ConfigReader r(item, command + ": matrices[]");
            m.path = r.get<std::string>("path");
            m.name = r.get<std::string>("name", "");
            m.task = r.opt<std::string>("task");
            m.f1 = r.opt<double>("f1");
            r.finish();
        }
        m.matrix = read_score_matrix(m.path);
        if (m.name.empty()) m.name = m.path.stem().string();
        if (!names.insert(m.name).second) throw ConfigError(command + ": duplicate matrix name '" + m.name + "'");
        out.push_back(std::move(m));
    }
    return out;
}

template <typename F>
std::string guarded(F&& f) {
    try {
        return fmt(f());
    } catch (const UndefinedMetricError&) {
        return "NA";
    }
}

}  // namespace

json apply_overrides(json config, const std::vector<std::string>& overrides) {
    if (config.is_null()) config = json::object();
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        const std::string key = o.substr(0, eq);
        const std::string text = o.substr(eq + 1);
        json value;
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
        config[key] = std::move(value);
    }
    return config;
}

json load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides) {
    json config = json::object();
    if (path) {
        const std::string text = read_file(*path);
        try {
            config = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("config '" + path->string() + "': " + e.what());
        }
        if (!config.is_object()) throw ConfigError("config '" + path->string() + "' must hold a JSON object");
    }
    return apply_overrides(std::move(config), overrides);
}

GenRun gen_run_from_json(const json& j) {
    ConfigReader r(j, "gen");
    GenRun run;
    GenConfig& c = run.config;
    try {
        c.task = parse_task(r.get<std::string>("task"));
        c.variant.concept_expression = parse_concept_expression(r.get<std::string>("concept_expression", "symbolic"));
        c.variant.context_diversity = parse_context_diversity(r.get<std::string>("context_diversity", "symbolic"));
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("gen: ") + e.what());
    }
    c.count = r.get<std::size_t>("count", default_count(c.task));
    c.master_seed = r.get<std::uint64_t>("master_seed", 0);
    c.token_budget = r.get<std::size_t>("token_budget", 4096);
    if (auto p = r.opt<std::string>("vocab_path")) c.vocab_path = *p;
    if (r.has("tokenizer")) c.tokenizer = tokenizer_from_value(r.raw("tokenizer"), c.vocab_path);
    c.dataset_id = r.get<std::string>("dataset_id", default_dataset_id(c.task, c.variant, c.master_seed));
    c.created_at = r.opt<std::string>("created_at");
    c.hops = r.get<std::size_t>("hops", 3);
    c.kv_pairs = r.opt<std::size_t>("kv_pairs");
    const std::string key_kind = r.get<std::string>("key_kind", "atom");
    if (key_kind == "atom") {
        c.key_kind = symbolic::KeyKind::atom;
    } else if (key_kind == "integer") {
        c.key_kind = symbolic::KeyKind::integer;
    } else {
        throw ConfigError("gen: key_kind must be 'atom' or 'integer'");
    }
    c.n_dictionaries = r.opt<std::size_t>("n_dictionaries");
    c.entries_per_dictionary = r.get<std::size_t>("entries_per_dictionary", 4);
    c.n_lists = r.get<std::size_t>("n_lists", 10);
    c.items_per_list = r.get<std::size_t>("items_per_list", 180);
    c.alphabet = r.get<std::string>("alphabet", std::string(symbolic::kDefaultAlphabet));
    c.n_documents = r.opt<std::size_t>("n_documents");
    if (auto p = r.opt<std::string>("seed_path")) c.seeds = read_seed_file(*p, c.task);
    if (auto p = r.opt<std::string>("distractor_pool")) c.distractor_pool = read_document_pool(*p);
    c.symbolize_distractors = r.get<bool>("symbolize_distractors", false);
    c.padding.units_per_document = r.get<std::size_t>("padding_units_per_document", 16);
    c.threads = r.get<std::size_t>("threads", 0);
    if (r.has("backend")) run.backend = backend_from_value(r.raw("backend"));
    run.output = r.get<std::string>("output");
    if (auto p = r.opt<std::string>("validation_output")) run.validation_output = *p;
    run.validation_fraction = r.get<double>("validation_fraction", 0.1);
    r.finish();
    if (!(run.validation_fraction > 0.0 && run.validation_fraction < 1.0)) {
        throw ConfigError("gen: validation_fraction must lie in (0, 1)");
    }
    return run;
}

CommandResult cmd_gen(const json& config) {
    GenRun run = gen_run_from_json(config);
    std::unique_ptr<augment::Augmenter> augmenter;
    if (run.backend) {
        auto cache = run.backend->cache_path ? std::make_shared<augment::ResponseCache>(*run.backend->cache_path)
                                             : std::make_shared<augment::ResponseCache>();
        augmenter = std::make_unique<augment::Augmenter>(*run.backend, cache);
    }
    Dataset ds = generate_dataset(run.config, augmenter.get());

    CommandResult res;
    if (run.validation_output) {
        const std::size_t n_val = validation_count(ds.examples.size(), run.validation_fraction);
        if (n_val == 0 || n_val >= ds.examples.size()) {
            throw ConfigError("gen: count " + std::to_string(ds.examples.size()) + " is too small to split");
        }
        const std::size_t n_train = ds.examples.size() - n_val;
        DatasetManifest train = ds.manifest;
        DatasetManifest val = ds.manifest;
        train.count = n_train;
        val.count = n_val;
        std::span<const Example> all(ds.examples);
        write_dataset(run.output, train, all.first(n_train));
        write_dataset(*run.validation_output, val, all.subspan(n_train));
        res.outputs = {run.output, *run.validation_output};
        res.message = "wrote " + std::to_string(n_train) + " training and " + std::to_string(n_val) +
                      " validation examples";
    } else {
        write_dataset(run.output, ds.manifest, ds.examples);
        res.outputs = {run.output};
        res.message = "wrote " + std::to_string(ds.examples.size()) + " examples to " + run.output.string();
    }
    if (augmenter) {
        res.message += " (" + std::to_string(augmenter->network_calls()) + " backend calls)";
    }
    return res;
}

CommandResult cmd_score(const json& config) {
    ConfigReader r(config, "score");
    const fs::path traces = r.get<std::string>("traces");
    std::optional<ScoreKind> kind;
    if (auto k = r.opt<std::string>("kind")) kind = parse_score_kind(*k);
    if (auto t = r.opt<std::string>("task")) {
        const Task task = parse_task(*t);
        const ScoreKind implied = task == Task::summhay_cite ? ScoreKind::insight : ScoreKind::retrieval;
        if (kind && *kind != implied) throw ConfigError("score: kind contradicts task");
        kind = implied;
    }
    const auto chunk = r.get<std::size_t>("chunk", 256);
    set_threads(r);
    const fs::path output = r.get<std::string>("output");
    const auto csv = r.opt<std::string>("heatmap_csv");
    r.finish();
    if (!kind) throw ConfigError("score: set 'kind' or 'task'");

    ScoreMatrix m = aggregate_file(traces, *kind, chunk);
    m.source_sha256 = file_sha256(traces);
    write_score_matrix(output, m);
    CommandResult res;
    res.outputs.push_back(output);
    if (csv) {
        std::ostringstream s;
        const std::vector<std::string> comments = {input_comment(traces)};
        emit_heatmap_csv(m, s, comments);
        write_file(*csv, s.str());
        res.outputs.push_back(*csv);
    }
    res.message = std::to_string(head_set(m).size()) + " of " + std::to_string(m.geometry.size()) +
                  " heads score above zero over " + std::to_string(m.n_examples) + " traces";
    return res;
}

CommandResult cmd_analyze(const json& config) {
    ConfigReader r(config, "analyze");
    const auto mats = read_matrices(r.raw("matrices"), "analyze");
    const std::string reference_name = r.get<std::string>("reference", mats.front().name);
    const fs::path out_dir = r.get<std::string>("output_dir");
    r.finish();

    const NamedMatrix* ref = nullptr;
    for (const auto& m : mats) {
        if (m.name == reference_name) ref = &m;
    }
    if (!ref) throw ConfigError("analyze: reference '" + reference_name + "' is not among the matrices");

    std::string header;
    for (const auto& m : mats) header += "# " + input_comment(m.path) + "\n";

    std::vector<HeadSet> sets;
    for (const auto& m : mats) sets.push_back(head_set(m.matrix));

    // recall[row][col] = |row ∩ col| / |col|
    std::string recall_csv = header + "set,n_heads";
    for (const auto& m : mats) recall_csv += "," + csv_field(m.name);
    recall_csv += "\n";
    for (std::size_t i = 0; i < mats.size(); ++i) {
        recall_csv += csv_field(mats[i].name) + "," + std::to_string(sets[i].size());
        for (std::size_t k = 0; k < mats.size(); ++k) recall_csv += "," + guarded([&] { return recall(sets[i], sets[k]); });
        recall_csv += "\n";
    }

    std::string cosine_csv = header + "matrix";
    for (const auto& m : mats) cosine_csv += "," + csv_field(m.name);
    cosine_csv += "\n";
    for (std::size_t i = 0; i < mats.size(); ++i) {
        cosine_csv += csv_field(mats[i].name);
        for (std::size_t k = 0; k < mats.size(); ++k) {
            cosine_csv += "," + guarded([&] { return cosine(mats[i].matrix, mats[k].matrix); });
        }
        cosine_csv += "\n";
    }

    const std::size_t ref_index = static_cast<std::size_t>(ref - mats.data());
    std::string summary = header + "# reference " + ref->name + "\n";
    summary += "matrix,task,n_heads,cosine_to_reference,recall_of_reference,f1\n";
    std::map<std::string, std::vector<std::size_t>> by_task;
    for (std::size_t i = 0; i < mats.size(); ++i) {
        const auto& m = mats[i];
        summary += csv_field(m.name) + "," + csv_field(m.task.value_or("")) + "," + std::to_string(sets[i].size()) +
                   "," + guarded([&] { return cosine(m.matrix, ref->matrix); }) + "," +
                   guarded([&] { return recall(sets[i], sets[ref_index]); }) + "," + (m.f1 ? fmt(*m.f1) : "") + "\n";
        if (m.f1 && i != ref_index) by_task[m.task.value_or("")].push_back(i);
    }

    std::string spear = header + "task,n,spearman_cosine_f1,spearman_recall_f1\n";
    CommandResult res;
    for (const auto& [task, idx] : by_task) {
        std::vector<double> cos, rec, f1;
        bool ok = true;
        for (std::size_t i : idx) {
            try {
                cos.push_back(cosine(mats[i].matrix, ref->matrix));
                rec.push_back(recall(sets[i], sets[ref_index]));
            } catch (const UndefinedMetricError&) {
                ok = false;
            }
            f1.push_back(*mats[i].f1);
        }
        std::string sc = "NA", sr = "NA";
        if (ok && idx.size() >= 2) {
            sc = guarded([&] { return spearman(cos, f1); });
            sr = guarded([&] { return spearman(rec, f1); });
        } else {
            res.warnings.push_back("spearman for task '" + task + "' is undefined with these inputs");
        }
        spear += csv_field(task) + "," + std::to_string(idx.size()) + "," + sc + "," + sr + "\n";
    }

    fs::create_directories(out_dir);
    write_file(out_dir / "recall.csv", recall_csv);
    write_file(out_dir / "cosine.csv", cosine_csv);
    write_file(out_dir / "summary.csv", summary);
    write_file(out_dir / "spearman.csv", spear);
    res.outputs = {out_dir / "recall.csv", out_dir / "cosine.csv", out_dir / "summary.csv", out_dir / "spearman.csv"};
    res.message = "compared " + std::to_string(mats.size()) + " score matrices against " + ref->name;
    return res;
}

CommandResult cmd_plan(const json& config) {
    ConfigReader r(config, "plan");
    const std::string mode = r.get<std::string>("mode");
    const auto seed = r.get<std::uint64_t>("seed", 0);
    const fs::path output = r.get<std::string>("output");
    std::vector<InterventionPlan> plans;
    CommandResult res;
    if (mode == "patch") {
        const fs::path real_path = r.get<std::string>("real");
        const fs::path synth_path = r.get<std::string>("synth");
        r.finish();
        const auto real = read_score_matrix(real_path);
        const auto synth = read_score_matrix(synth_path);
        auto p = plan_patch_sets(head_set(real), head_set(synth), seed, real.dataset_id, synth.dataset_id);
        plans = {p.intersection, p.complement, p.random};
        for (auto& plan : plans) plan.provenance.input_sha256 = {file_sha256(real_path), file_sha256(synth_path)};
        if (p.intersection.warning) res.warnings.push_back(*p.intersection.warning);
    } else if (mode == "mask") {
        const fs::path scores_path = r.get<std::string>("scores");
        const auto k = r.get<std::size_t>("k");
        const auto trials = r.get<std::size_t>("random_trials", 3);
        r.finish();
        const auto m = read_score_matrix(scores_path);
        plans = plan_topk_mask(m, k, seed, trials);
        for (auto& plan : plans) plan.provenance.input_sha256 = {file_sha256(scores_path)};
    } else {
        throw ConfigError("plan: mode must be 'patch' or 'mask'");
    }
    write_plans(output, plans);
    res.outputs.push_back(output);
    res.message = "wrote " + std::to_string(plans.size()) + " plans of " + std::to_string(plans.front().n_heads) +
                  " heads";
    return res;
}

CommandResult cmd_eval(const json& config) {
    ConfigReader r(config, "eval");
    const Task task = parse_task(r.get<std::string>("task"));
    const json& systems_json = r.raw("systems");
    const auto n_resamples = r.get<std::size_t>("n_resamples", kDefaultResamples);
    const auto seed = r.get<std::uint64_t>("seed", 0);
    const double alpha = r.get<double>("alpha", 0.05);
    const auto dataset = r.opt<std::string>("dataset");
    const auto scored_dir = r.opt<std::string>("scored_dir");
    set_threads(r);
    const fs::path output = r.get<std::string>("output");

    struct System {
        std::string name;
        fs::path path;
        std::vector<PredictionRecord> records;
        double f1 = 0.0;
    };
    std::vector<System> systems;
    if (!systems_json.is_array() || systems_json.empty()) throw ConfigError("eval: 'systems' must be a non-empty array");
    for (const auto& s : systems_json) {
        System sys;
        if (s.is_string()) {
            sys.path = s.get<std::string>();
        } else {
            ConfigReader sr(s, "eval: systems[]");
            sys.path = sr.get<std::string>("predictions");
            sys.name = sr.get<std::string>("name", "");
            sr.finish();
        }
        if (sys.name.empty()) sys.name = sys.path.stem().string();
        systems.push_back(std::move(sys));
    }
    const std::string baseline = r.get<std::string>("baseline", systems.front().name);
    r.finish();

    std::set<std::string> known_ids;
    if (dataset) {
        for (const auto& ex : read_dataset(*dataset).examples) known_ids.insert(ex.example_id);
    }
    const System* base = nullptr;
    for (auto& sys : systems) {
        sys.records = read_predictions(sys.path);
        if (sys.records.empty()) throw ValidationError("eval: '" + sys.path.string() + "' holds no predictions");
        std::sort(sys.records.begin(), sys.records.end(),
                  [](const PredictionRecord& a, const PredictionRecord& b) { return a.example_id < b.example_id; });
        for (std::size_t i = 1; i < sys.records.size(); ++i) {
            if (sys.records[i].example_id == sys.records[i - 1].example_id) {
                throw ValidationError("eval: duplicate example_id '" + sys.records[i].example_id + "' in " +
                                      sys.path.string());
            }
        }
        if (dataset) {
            for (const auto& rec : sys.records) {
                if (!known_ids.contains(rec.example_id)) {
                    throw ValidationError("eval: example_id '" + rec.example_id + "' is not in the dataset");
                }
            }
        }
        sys.f1 = corpus_f1(std::span<PredictionRecord>(sys.records), task);
        if (sys.name == baseline) base = &sys;
    }
    if (!base) throw ConfigError("eval: baseline '" + baseline + "' is not among the systems");

    std::string csv;
    for (const auto& sys : systems) csv += "# " + input_comment(sys.path) + "\n";
    csv += "# bootstrap n_resamples=" + std::to_string(n_resamples) + " seed=" + std::to_string(seed) + "\n";
    csv += "system,n_examples,f1,baseline,mean_diff,p_value,significant\n";
    for (const auto& sys : systems) {
        csv += csv_field(sys.name) + "," + std::to_string(sys.records.size()) + "," + fmt(sys.f1) + ",";
        if (&sys == base) {
            csv += ",,,\n";
            continue;
        }
        if (sys.records.size() != base->records.size()) {
            throw ValidationError("eval: '" + sys.name + "' and '" + base->name + "' cover different examples");
        }
        std::vector<double> a, b;
        for (std::size_t i = 0; i < sys.records.size(); ++i) {
            if (sys.records[i].example_id != base->records[i].example_id) {
                throw ValidationError("eval: '" + sys.name + "' and '" + base->name + "' cover different examples");
            }
            a.push_back(*sys.records[i].score);
            b.push_back(*base->records[i].score);
        }
        // The higher-mean system goes first.
        const bool sys_first = sys.f1 >= base->f1;
        const auto result = sys_first ? paired_bootstrap(a, b, n_resamples, seed)
                                       : paired_bootstrap(b, a, n_resamples, seed);
        const double diff = sys.f1 - base->f1;
        csv += csv_field(base->name) + "," + fmt(diff) + "," + fmt(result.p_value) + "," +
               (result.p_value < alpha ? "yes" : "no") + "\n";
    }
    write_file(output, csv);
    CommandResult res;
    res.outputs.push_back(output);
    if (scored_dir) {
        for (const auto& sys : systems) {
            const fs::path p = fs::path(*scored_dir) / (sys.name + ".jsonl");
            write_predictions(p, sys.records);
            res.outputs.push_back(p);
        }
    }
    res.message = "scored " + std::to_string(systems.size()) + " systems";
    return res;
}

CommandResult cmd_report(const json& config) {
    ConfigReader r(config, "report");
    const auto mats = read_matrices(r.raw("matrices"), "report");
    std::vector<std::string> plan_paths;
    if (r.has("plans")) plan_paths = r.get<std::vector<std::string>>("plans");
    const auto formats = r.get<std::vector<std::string>>("formats", {"csv", "svg"});
    const fs::path out_dir = r.get<std::string>("output_dir");
    r.finish();
    for (const auto& f : formats) {
        if (f != "csv" && f != "svg") throw ConfigError("report: unknown format '" + f + "'");
    }

    fs::create_directories(out_dir);
    CommandResult res;
    std::string md = "# Retrieval head report\n\n## Inputs\n\n";
    for (const auto& m : mats) md += "- `" + m.path.string() + "` sha256 " + file_sha256(m.path) + "\n";
    for (const auto& p : plan_paths) md += "- `" + p + "` sha256 " + file_sha256(p) + "\n";
    md += "\n## Score matrices\n\n| matrix | kind | model | layers x heads | examples | heads > 0 | top heads |\n"
          "|---|---|---|---|---|---|---|\n";
    for (const auto& m : mats) {
        const auto& s = m.matrix;
        for (const auto& f : formats) {
            const fs::path p = out_dir / (m.name + "." + f);
            std::ostringstream os;
            if (f == "csv") {
                const std::vector<std::string> comments = {input_comment(m.path)};
                emit_heatmap_csv(s, os, comments);
            } else {
                emit_heatmap_svg(s, os, m.name);
            }
            write_file(p, os.str());
            res.outputs.push_back(p);
        }
        std::vector<std::size_t> order(s.values.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s.values[a] > s.values[b]; });
        std::string top;
        for (std::size_t i = 0; i < order.size() && i < 5 && s.values[order[i]] > 0.0; ++i) {
            const auto h = HeadId::from_flat(order[i], s.geometry);
            if (!top.empty()) top += ", ";
            top += "(" + std::to_string(h.layer) + "," + std::to_string(h.head) + ") " + fmt(s.values[order[i]]);
        }
        md += "| " + m.name + " | " + std::string(to_string(s.kind)) + " | " + s.model_id + " | " +
              std::to_string(s.geometry.n_layers) + " x " + std::to_string(s.geometry.n_heads) + " | " +
              std::to_string(s.n_examples) + " | " + std::to_string(head_set(s).size()) + " | " + top + " |\n";
    }
    if (!plan_paths.empty()) {
        md += "\n## Plans\n\n";
        for (const auto& p : plan_paths) {
            for (const auto& plan : read_plans(p)) {
                md += "- " + std::string(to_string(plan.kind)) + ": " + std::to_string(plan.n_heads) + " heads";
                if (plan.warning) {
                    md += " (warning: " + *plan.warning + ")";
                    res.warnings.push_back(p + ": " + std::string(to_string(plan.kind)) + ": " + *plan.warning);
                }
                md += "\n";
            }
        }
    }
    write_file(out_dir / "report.md", md);
    res.outputs.push_back(out_dir / "report.md");
    res.message = "reported " + std::to_string(mats.size()) + " matrices";
    return res;
}

CommandResult cmd_oracle(const json& config) {
    ConfigReader r(config, "oracle");
    const fs::path dataset = r.get<std::string>("dataset");
    const auto only = r.opt<std::string>("example_id");
    const auto output = r.opt<std::string>("output");
    r.finish();

    const Dataset ds = read_dataset(dataset);
    std::string out = "example_id\toracle\tstatus\n";
    std::size_t checked = 0, bad = 0;
    for (const auto& ex : ds.examples) {
        if (only && ex.example_id != *only) continue;
        ++checked;
        std::string answer, status;
        try {
            answer = symbolic::oracle_answer(ex);
            status = answer == ex.gold_answer ? "ok" : "mismatch";
        } catch (const Error& e) {
            status = std::string("error: ") + e.what();
        }
        if (status != "ok") ++bad;
        out += ex.example_id + "\t" + answer + "\t" + status + "\n";
    }
    if (only && checked == 0) throw ValidationError("oracle: no example '" + *only + "' in " + dataset.string());
    CommandResult res;
    if (output) {
        write_file(*output, out);
        res.outputs.push_back(*output);
    } else {
        res.message = out;
    }
    if (bad > 0) {
        throw ValidationError("oracle: " + std::to_string(bad) + " of " + std::to_string(checked) +
                              " examples disagree with their stored answers");
    }
    if (output) res.message = std::to_string(checked) + " examples agree with the oracle";
    return res;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"gen", "score", "analyze", "plan", "eval", "report", "oracle"};
    return names;
}

CommandResult run_command(const std::string& name, const json& config) {
    if (name == "gen") return cmd_gen(config);
    if (name == "score") return cmd_score(config);
    if (name == "analyze") return cmd_analyze(config);
    if (name == "plan") return cmd_plan(config);
    if (name == "eval") return cmd_eval(config);
    if (name == "report") return cmd_report(config);
    if (name == "oracle") return cmd_oracle(config);
    throw ConfigError("unknown command '" + name + "'");
}

}  // namespace synthctx::cli
