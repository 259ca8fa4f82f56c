// misgender-meta: parallel probability- and generation-based evaluation of
// pronoun misgendering, dataset transforms, agreement reports, divergence
// analysis, and a terminal annotation stepper.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mgm/annotation.hpp"
#include "mgm/divergence.hpp"
#include "mgm/errors.hpp"
#include "mgm/mock_model.hpp"
#include "mgm/transform.hpp"
#include "mgm/workbench.hpp"

using namespace mgm;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct EvalFlags {
    std::string config_path, dataset, format = "template_jsonl", model, endpoint, mock_spec, out;
    std::string settings = "prob,gen_pre,gen_post";
    uint64_t seed = 0;
    int workers = 1, top_k = 50, max_tokens = 50, num_samples = 5;
    double top_p = 0.95, temperature = 1.0;
};

RunConfig build_run_config(const EvalFlags& f, const CLI::App* cmd) {
    RunConfig c;
    if (!f.config_path.empty()) c = RunConfig::from_json_text(read_file(f.config_path));
    auto given = [&](const std::string& flag) { return cmd->count(flag) > 0; };
    if (given("--dataset") || c.dataset_path.empty()) c.dataset_path = f.dataset;
    if (given("--format")) c.format = dataset_format_from_string(f.format);
    if (given("--model") || c.model_label.empty()) c.model_label = f.model;
    if (given("--endpoint")) c.endpoint = f.endpoint;
    if (given("--mock-spec")) c.mock_spec_path = f.mock_spec;
    if (given("--out") || c.out_dir.empty()) c.out_dir = f.out;
    if (given("--seed")) c.seed = f.seed;
    if (given("--workers")) c.workers = f.workers;
    if (given("--top-k")) c.decode.top_k = f.top_k;
    if (given("--top-p")) c.decode.top_p = f.top_p;
    if (given("--max-tokens")) c.decode.max_tokens = f.max_tokens;
    if (given("--num-samples")) c.decode.num_samples = f.num_samples;
    if (given("--temperature")) c.decode.temperature = f.temperature;
    if (given("--settings")) {
        c.settings.clear();
        std::stringstream ss(f.settings);
        std::string item;
        while (std::getline(ss, item, ',')) c.settings.insert(run_setting_from_string(item));
    }
    return c;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"meta-evaluation toolkit for LLM pronoun misgendering"};
    app.require_subcommand(1);

    // ---- convert ----
    auto* convert = app.add_subcommand("convert", "transform datasets between formats");
    convert->require_subcommand(1);

    auto* p2g = convert->add_subcommand("prob2gen", "templates -> generation contexts");
    std::string p2g_mode = "pre", p2g_in, p2g_out;
    p2g->add_option("--mode", p2g_mode, "pre|post")->check(CLI::IsMember({"pre", "post"}));
    p2g->add_option("--in", p2g_in, "templates JSONL")->required();
    p2g->add_option("--out", p2g_out, "contexts JSONL")->required();
    p2g->callback([&] {
        auto templates = load_templates(p2g_in);
        std::vector<Context> contexts;
        for (const auto& t : templates)
            contexts.push_back(p2g_mode == "pre" ? prob_to_gen_pre(t) : prob_to_gen_post(t));
        write_contexts(p2g_out, contexts);
        std::cout << "wrote " << contexts.size() << " contexts to " << p2g_out << "\n";
    });

    auto* g2p = convert->add_subcommand("gen2prob", "context+generation pairs -> templates");
    std::string g2p_contexts, g2p_generations, g2p_out, g2p_conj;
    g2p->add_option("--contexts", g2p_contexts)->required();
    g2p->add_option("--generations", g2p_generations)->required();
    g2p->add_option("--out", g2p_out, "templates JSONL")->required();
    g2p->add_option("--conjugation-table", g2p_conj, "override table JSON");
    g2p->callback([&] {
        auto contexts = load_contexts(g2p_contexts);
        auto generations = load_generations(g2p_generations);
        ConjugationTable table = g2p_conj.empty()
                                     ? ConjugationTable::builtin()
                                     : ConjugationTable::from_json_text(read_file(g2p_conj));
        std::map<std::string, const Context*> by_id;
        for (const auto& c : contexts) by_id[c.id] = &c;
        std::vector<Template> templates;
        int no_pronoun = 0, failed = 0;
        for (const auto& g : generations) {
            auto it = by_id.find(g.context_id);
            if (it == by_id.end())
                throw ValidationError("generation references unknown context '" + g.context_id +
                                      "'");
            auto outcome = gen_to_prob(*it->second, g, SpellingProfile::by_name(it->second->profile),
                                       table);
            if (outcome.product)
                templates.push_back(*outcome.product);
            else if (outcome.status == ConversionStatus::NoPronoun)
                ++no_pronoun;
            else
                ++failed;
        }
        write_templates(g2p_out, templates);
        double rate = generations.empty()
                          ? 0.0
                          : static_cast<double>(no_pronoun) / static_cast<double>(generations.size());
        std::cout << "wrote " << templates.size() << " templates to " << g2p_out << " ("
                  << no_pronoun << " with no pronoun, failure rate " << rate << ", " << failed
                  << " rewrite failures)\n";
    });

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "run parallel probability/generation evaluation");
    EvalFlags ef;
    ev->add_option("--config", ef.config_path, "JSON run config");
    ev->add_option("--dataset", ef.dataset);
    ev->add_option("--format", ef.format)->check(CLI::IsMember({"template_jsonl", "context_jsonl"}));
    ev->add_option("--model", ef.model, "model id / report label");
    ev->add_option("--endpoint", ef.endpoint, "http backend (default: MM_ENDPOINT)");
    ev->add_option("--mock-spec", ef.mock_spec, "mock model spec JSON");
    ev->add_option("--out", ef.out, "output directory");
    ev->add_option("--seed", ef.seed);
    ev->add_option("--workers", ef.workers);
    ev->add_option("--settings", ef.settings, "comma list of prob,gen_pre,gen_post");
    ev->add_option("--top-k", ef.top_k);
    ev->add_option("--top-p", ef.top_p);
    ev->add_option("--max-tokens", ef.max_tokens);
    ev->add_option("--num-samples", ef.num_samples);
    ev->add_option("--temperature", ef.temperature);
    ev->callback([&] {
        RunConfig config = build_run_config(ef, ev);
        cmd_eval(config);
        std::cout << "eval complete; outputs in " << config.out_dir << " (config "
                  << config.config_hash() << ")\n";
    });

    // ---- agree / report ----
    auto* report = app.add_subcommand("report", "cell reports for an eval output directory");
    std::string report_dir;
    report->add_option("--run", report_dir, "eval output directory")->required();
    report->callback([&] {
        auto cells = cmd_report(report_dir);
        std::cout << "wrote " << cells.size() << " cell report(s) to " << report_dir
                  << "/cells.{json,csv}\n";
    });

    auto* agree = app.add_subcommand("agree", "agreement metrics over outcome tables");
    std::vector<std::string> agree_outcomes;
    std::string agree_pairing = "misgendered_ruff", agree_dataset = "dataset",
                agree_model = "model", agree_out;
    std::vector<std::string> agree_generations;
    agree->add_option("--outcomes", agree_outcomes, "outcome JSONL file(s)")->required();
    agree->add_option("--pairing", agree_pairing)
        ->check(CLI::IsMember({"misgendered_ruff", "tango"}));
    agree->add_option("--dataset-label", agree_dataset);
    agree->add_option("--model-label", agree_model);
    agree->add_option("--generations", agree_generations,
                      "setting=path pairs (e.g. pre_mask=gens.jsonl) for repetition rates");
    agree->add_option("--out", agree_out, "output prefix (writes <out>.json and <out>.csv)");
    agree->callback([&] {
        AgreeInputs inputs;
        inputs.dataset_label = agree_dataset;
        inputs.model_label = agree_model;
        inputs.pairing =
            agree_pairing == "tango" ? Pairing::Tango : Pairing::MisgenderedRuff;
        for (const auto& path : agree_outcomes) {
            auto rows = load_outcomes(path);
            inputs.outcomes.insert(inputs.outcomes.end(), rows.begin(), rows.end());
        }
        for (const auto& pair : agree_generations) {
            auto eq = pair.find('=');
            if (eq == std::string::npos)
                throw ValidationError("--generations wants setting=path, got '" + pair + "'");
            inputs.generations[setting_from_string(pair.substr(0, eq))] =
                load_generations(pair.substr(eq + 1));
        }
        auto cells = build_cell_reports(inputs);
        if (!agree_out.empty()) {
            write_cell_reports_json(agree_out + ".json", cells);
            write_cell_reports_csv(agree_out + ".csv", cells);
        }
        for (const auto& c : cells)
            std::cout << to_string(c.key.pronoun) << " x " << to_string(c.key.setting) << ": "
                      << agreement_report_to_json(c.agreement) << "\n";
        for (auto b : kAllBases) {
            bool present = false;
            for (const auto& c : cells) present |= c.key.pronoun == b;
            if (!present)
                std::cout << "note: no pairable instances for " << to_string(b)
                          << "; cell omitted\n";
        }
    });

    // ---- divergence ----
    auto* div = app.add_subcommand("divergence", "closed-form vs Monte-Carlo disagreement");
    std::string div_templates, div_id, div_spec, div_setting = "pre";
    uint64_t div_trials = 100000, div_seed = 0;
    int div_workers = 1;
    div->add_option("--templates", div_templates, "templates JSONL")->required();
    div->add_option("--id", div_id, "template id")->required();
    div->add_option("--mock-spec", div_spec, "mock model spec JSON")->required();
    div->add_option("--setting", div_setting)->check(CLI::IsMember({"pre", "post"}));
    div->add_option("--trials", div_trials);
    div->add_option("--seed", div_seed);
    div->add_option("--workers", div_workers);
    div->callback([&] {
        auto templates = load_templates(div_templates);
        const Template* t = nullptr;
        for (const auto& cand : templates)
            if (cand.id == div_id) t = &cand;
        if (!t) throw ValidationError("no template with id '" + div_id + "'");
        MockModel model = MockModel::from_file(div_spec);
        DivergenceSetting setting =
            div_setting == "post" ? DivergenceSetting::PostMask : DivergenceSetting::PreMask;
        DivergenceResult r =
            setting == DivergenceSetting::PreMask ? delta_pre(*t, model) : delta_post(*t, model);
        auto mc = monte_carlo_disagreement(*t, model, div_trials, div_seed, div_workers, setting);
        auto j = nlohmann::ordered_json::parse(divergence_to_json(r));
        j["mc_estimate"] = mc.estimate;
        j["mc_unconditioned"] = mc.unconditioned;
        j["qualifying"] = mc.qualifying;
        j["trials"] = mc.trials;
        std::cout << j.dump(2) << "\n";
    });

    // ---- rr ----
    auto* rr = app.add_subcommand("rr", "repetition rates of generations");
    std::string rr_generations, rr_contexts, rr_out;
    rr->add_option("--generations", rr_generations)->required();
    rr->add_option("--contexts", rr_contexts, "for per-pronoun aggregates");
    rr->add_option("--out", rr_out, "per-generation CSV");
    rr->callback([&] {
        auto gens = load_generations(rr_generations);
        std::map<std::string, BasePronoun> pronoun_of;
        if (!rr_contexts.empty())
            for (const auto& c : load_contexts(rr_contexts)) pronoun_of[c.id] = c.gold_base;
        std::ofstream csv;
        if (!rr_out.empty()) {
            csv.open(rr_out, std::ios::trunc);
            csv << "context_id,sample_index,rr\n";
        }
        std::vector<double> all;
        std::map<BasePronoun, std::vector<double>> by_pronoun;
        int undefined = 0;
        for (const auto& g : gens) {
            auto v = repetition_rate(g.text);
            if (csv.is_open()) {
                csv << g.context_id << ',' << g.sample_index << ',';
                if (v) csv << *v;
                csv << '\n';
            }
            if (!v) {
                ++undefined;
                continue;
            }
            all.push_back(*v);
            if (auto it = pronoun_of.find(g.context_id); it != pronoun_of.end())
                by_pronoun[it->second].push_back(*v);
        }
        auto s = summarize(all);
        nlohmann::ordered_json j;
        j["n"] = s.n;
        j["undefined"] = undefined;
        j["mean"] = s.mean;
        j["stdev"] = s.stdev;
        for (const auto& [b, values] : by_pronoun) {
            auto ps = summarize(values);
            j["by_pronoun"][to_string(b)] = {{"n", ps.n}, {"mean", ps.mean}, {"stdev", ps.stdev}};
        }
        std::cout << j.dump(2) << "\n";
    });

    // ---- annotate ----
    auto* ann = app.add_subcommand("annotate", "terminal annotation stepper");
    std::string ann_contexts, ann_generations, ann_out, ann_id;
    uint64_t ann_seed = 0;
    int ann_cell = 0;
    ann->add_option("--contexts", ann_contexts)->required();
    ann->add_option("--generations", ann_generations)->required();
    ann->add_option("--annotator", ann_id)->required();
    ann->add_option("--out", ann_out, "annotations JSONL (appended)")->required();
    ann->add_option("--seed", ann_seed);
    ann->add_option("--sample-per-cell", ann_cell, "cap per (pronoun x setting) cell");
    ann->callback([&] {
        AnnotateOptions opt;
        opt.annotator_id = ann_id;
        opt.seed = ann_seed;
        opt.sample_per_cell = ann_cell;
        run_annotation_session(std::cin, std::cout, load_contexts(ann_contexts),
                               load_generations(ann_generations), ann_out, opt);
    });

    // ---- validate ----
    auto* val = app.add_subcommand("validate", "human-human or human-automatic agreement");
    std::string val_a, val_b, val_outcomes;
    val->add_option("--a", val_a, "annotations JSONL")->required();
    val->add_option("--b", val_b, "second annotations JSONL (human-human)");
    val->add_option("--outcomes", val_outcomes, "outcome JSONL (human-automatic)");
    val->callback([&] {
        auto a = load_annotations(val_a);
        nlohmann::ordered_json j;
        if (!val_b.empty()) {
            auto r = validate_human_human(a, load_annotations(val_b));
            j["n"] = r.n;
            j["label_agreement"] = r.label_agreement;
            j["extraneous_agreement"] = r.extraneous_agreement;
        } else if (!val_outcomes.empty()) {
            auto r = validate_human_automatic(a, load_outcomes(val_outcomes));
            j = nlohmann::ordered_json::parse(agreement_report_to_json(r));
        } else {
            throw ValidationError("validate needs --b or --outcomes");
        }
        std::cout << j.dump(2) << "\n";
    });

    // ---- serve ----
    auto* serve = app.add_subcommand("serve", "serve a mock model over the wire protocol");
    std::string serve_spec, serve_host = "127.0.0.1";
    int serve_port = 8089;
    serve->add_option("--mock-spec", serve_spec)->required();
    serve->add_option("--host", serve_host);
    serve->add_option("--port", serve_port);
    serve->callback([&] {
        auto model = std::make_shared<MockModel>(MockModel::from_file(serve_spec));
        ModelServer server(model);
        int port = server.listen_async(serve_host, serve_port);
        std::cout << "serving '" << model->model_id() << "' on http://" << serve_host << ":" << port
                  << " (POST /v1/score, /v1/generate)\n";
        server.wait();
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
