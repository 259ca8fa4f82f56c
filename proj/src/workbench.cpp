#include "mgm/workbench.hpp"

#include <filesystem>
#include <fstream>

#include "mgm/errors.hpp"
#include "mgm/mock_model.hpp"
#include "mgm/util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace mgm {

DatasetFormat dataset_format_from_string(const std::string& s) {
    if (s == "template_jsonl") return DatasetFormat::TemplateJsonl;
    if (s == "context_jsonl") return DatasetFormat::ContextJsonl;
    throw ValidationError("unknown dataset format: '" + s + "' (want template_jsonl|context_jsonl)");
}

const char* to_string(DatasetFormat f) {
    return f == DatasetFormat::TemplateJsonl ? "template_jsonl" : "context_jsonl";
}

RunConfig RunConfig::from_json_text(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config parse error: ") + e.what());
    }
    RunConfig c;
    c.dataset_path = j.value("dataset", "");
    if (j.contains("format")) c.format = dataset_format_from_string(j["format"].get<std::string>());
    c.model_label = j.value("model", "");
    c.endpoint = j.value("endpoint", "");
    c.mock_spec_path = j.value("mock_spec", "");
    if (j.contains("decode")) {
        const auto& d = j["decode"];
        if (d.contains("top_k")) c.decode.top_k = d["top_k"].get<int>();
        if (d.contains("top_p")) c.decode.top_p = d["top_p"].get<double>();
        if (d.contains("max_tokens")) c.decode.max_tokens = d["max_tokens"].get<int>();
        if (d.contains("num_samples")) c.decode.num_samples = d["num_samples"].get<int>();
        if (d.contains("temperature")) c.decode.temperature = d["temperature"].get<double>();
    }
    if (j.contains("settings")) {
        c.settings.clear();
        for (auto& s : j["settings"]) c.settings.insert(run_setting_from_string(s.get<std::string>()));
    }
    c.out_dir = j.value("out", "");
    c.seed = j.value("seed", uint64_t{0});
    c.workers = j.value("workers", 1);
    return c;
}

std::string RunConfig::canonical_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset_path;
    j["format"] = to_string(format);
    j["model"] = model_label;
    j["endpoint"] = endpoint;
    j["mock_spec"] = mock_spec_path;
    j["decode"] = {{"top_k", decode.top_k},
                   {"top_p", decode.top_p},
                   {"max_tokens", decode.max_tokens},
                   {"num_samples", decode.num_samples},
                   {"beams", decode.beams},
                   {"temperature", decode.temperature}};
    nlohmann::ordered_json settings_json = nlohmann::ordered_json::array();
    for (auto s : settings) settings_json.push_back(to_string(s));
    j["settings"] = settings_json;
    j["seed"] = seed;
    return j.dump();
}

std::string RunConfig::config_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_json())));
    return buf;
}

std::shared_ptr<ModelClient> make_backend(const RunConfig& config) {
    if (!config.mock_spec_path.empty())
        return std::make_shared<MockModel>(MockModel::from_file(config.mock_spec_path));
    std::string endpoint = config.endpoint;
    HttpClientConfig http = HttpClientConfig::from_env();
    if (!endpoint.empty()) http.endpoint = endpoint;
    if (!config.model_label.empty()) http.model = config.model_label;
    if (http.endpoint.empty())
        throw ConfigError("no backend: pass --mock-spec or --endpoint (or set MM_ENDPOINT)");
    return std::make_shared<HttpModelClient>(http);
}

namespace {

struct SplitOutcomes {
    // (method, setting) -> rows, in stable first-seen order
    std::vector<std::pair<std::string, std::vector<EvalOutcome>>> groups;

    void add(const EvalOutcome& o) {
        std::string name = o.method == EvalMethod::Probability ? "prob" : "gen";
        if (o.method == EvalMethod::Generation || o.setting != Setting::Native) {
            if (o.setting == Setting::PreMask) name += "_pre";
            if (o.setting == Setting::PostMask) name += "_post";
        }
        for (auto& [k, rows] : groups)
            if (k == name) {
                rows.push_back(o);
                return;
            }
        groups.push_back({name, {o}});
    }
};

}  // namespace

void cmd_eval(const RunConfig& config) {
    if (config.dataset_path.empty()) throw ValidationError("no dataset given");
    if (config.out_dir.empty()) throw ValidationError("no output directory given");
    if (config.settings.empty()) throw ValidationError("settings must be non-empty");

    auto backend = make_backend(config);
    // Probe remote endpoints before producing any output, so an unreachable
    // server cannot leave partial tables behind.
    if (config.mock_spec_path.empty()) {
        try {
            backend->score("ping");
        } catch (const CapabilityError&) {
            // reachable but cannot echo logprobs; generation-only runs are fine
        }
    }

    ParallelEvalOptions options;
    options.decode = config.decode;
    options.decode.seed = config.seed;
    options.settings = config.settings;
    options.workers = config.workers;

    // Instances with distractor sentences cannot be judged by the
    // first-pronoun heuristic; the automatic pipeline admits the rest.
    size_t excluded_distractors = 0;
    EvalTable table;
    if (config.format == DatasetFormat::TemplateJsonl) {
        auto templates = load_templates(config.dataset_path);
        auto admitted = without_distractors(templates);
        excluded_distractors = templates.size() - admitted.size();
        table = run_parallel_eval(admitted, *backend, options);
    } else {
        auto contexts = load_contexts(config.dataset_path);
        auto admitted = without_distractors(contexts);
        excluded_distractors = contexts.size() - admitted.size();
        table = run_parallel_eval(admitted, *backend, options);
    }

    if (table.outcomes.empty() && !table.errors.empty()) {
        bool transport = false;
        for (const auto& e : table.errors)
            if (e.find("[transport]") != std::string::npos) transport = true;
        std::string msg = "all instances failed; first error: " + table.errors.front();
        if (transport) throw TransportError(msg, true);
        throw Error(msg);
    }

    fs::create_directories(config.out_dir);
    SplitOutcomes split;
    for (const auto& o : table.outcomes) split.add(o);
    for (const auto& [name, rows] : split.groups) {
        write_outcomes((fs::path(config.out_dir) / ("outcomes_" + name + ".jsonl")).string(), rows);
        write_outcomes_csv((fs::path(config.out_dir) / ("outcomes_" + name + ".csv")).string(),
                           rows);
    }

    // Generation files per setting (ids repeat across pre/post, so they
    // cannot share a file).
    std::map<std::string, std::vector<GenerationRecord>> gen_files;
    for (const auto& [setting, record] : table.generations) {
        std::string name = "generations";
        if (setting == Setting::PreMask) name += "_pre";
        if (setting == Setting::PostMask) name += "_post";
        gen_files[name].push_back(record);
    }
    for (const auto& [name, records] : gen_files)
        write_generations((fs::path(config.out_dir) / (name + ".jsonl")).string(), records);

    nlohmann::ordered_json manifest;
    manifest["config_hash"] = config.config_hash();
    manifest["config"] = nlohmann::ordered_json::parse(config.canonical_json());
    manifest["model_id"] = backend->model_id();
    manifest["outcomes"] = table.outcomes.size();
    manifest["generations"] = table.generations.size();
    manifest["excluded_distractors"] = excluded_distractors;
    nlohmann::ordered_json errs = nlohmann::ordered_json::array();
    for (const auto& e : table.errors) errs.push_back(e);
    manifest["errors"] = errs;
    std::ofstream mf(fs::path(config.out_dir) / "manifest.json");
    mf << manifest.dump(2) << '\n';
}

}  // namespace mgm
