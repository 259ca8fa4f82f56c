#include <algorithm>
#include <filesystem>
#include <fstream>

#include "mgm/errors.hpp"
#include "mgm/workbench.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace mgm {

namespace {

struct InstanceBucket {
    // probability side: one value for template datasets, per-sample values
    // for context datasets (absent entries were excluded samples)
    std::vector<int> prob;
    int prob_rows = 0;          // including excluded
    int prob_no_pronoun = 0;    // excluded with reason no_pronoun
    std::optional<int> prob_first;  // m of sample 0 (absent if excluded)
    std::vector<int> gen;           // per-sample generation outcomes
};

// cell key: (pronoun, generation setting)
using CellMap = std::map<std::pair<BasePronoun, Setting>, std::map<std::string, InstanceBucket>>;

}  // namespace

std::vector<CellReport> build_cell_reports(const AgreeInputs& inputs) {
    CellMap cells;
    // Generation rows define the cells; probability rows join on instance id.
    for (const auto& o : inputs.outcomes) {
        if (o.method != EvalMethod::Generation || !o.m) continue;
        cells[{o.gold_base, o.setting}][o.instance_id].gen.push_back(*o.m);
    }
    for (const auto& o : inputs.outcomes) {
        if (o.method != EvalMethod::Probability) continue;
        for (auto& [key, instances] : cells) {
            if (key.first != o.gold_base) continue;
            auto it = instances.find(o.instance_id);
            if (it == instances.end()) continue;
            auto& bucket = it->second;
            ++bucket.prob_rows;
            if (o.excluded) {
                if (o.exclusion_reason == "no_pronoun") ++bucket.prob_no_pronoun;
                if (o.sample_index && *o.sample_index == 0) bucket.prob_first.reset();
            } else if (o.m) {
                bucket.prob.push_back(*o.m);
                if (!o.sample_index || *o.sample_index == 0) bucket.prob_first = *o.m;
            }
        }
    }

    std::vector<CellReport> reports;
    for (auto& [key, instances] : cells) {
        CellReport rep;
        rep.key = {inputs.dataset_label, inputs.model_label, key.first, key.second};

        BinarySeries prob_series, gen_series;
        std::vector<InstanceSamples> prob_samples, gen_samples;
        std::vector<double> sigmas_gen, sigmas_prob;
        std::vector<double> failure_rates;
        bool any_prob = false;
        for (auto& [id, bucket] : instances) {
            if (!bucket.gen.empty()) sigmas_gen.push_back(instance_sigma(bucket.gen));
            if (bucket.prob_rows > 0) {
                any_prob = true;
                if (inputs.pairing == Pairing::Tango) {
                    if (!bucket.prob.empty()) sigmas_prob.push_back(instance_sigma(bucket.prob));
                    failure_rates.push_back(static_cast<double>(bucket.prob_no_pronoun) /
                                            static_cast<double>(bucket.prob_rows));
                }
                // the paired series use first samples only, to isolate
                // dataset variance from sampling variance
                if (bucket.prob_first && !bucket.gen.empty()) {
                    prob_series.keys.push_back(id);
                    prob_series.values.push_back(*bucket.prob_first);
                    gen_series.keys.push_back(id);
                    gen_series.values.push_back(bucket.gen.front());
                } else {
                    ++rep.dropped_pairs;
                }
                if (!bucket.prob.empty() && !bucket.gen.empty()) {
                    prob_samples.push_back({id, bucket.prob});
                    gen_samples.push_back({id, bucket.gen});
                }
            }
        }
        if (instances.empty() || !any_prob || prob_series.values.empty()) continue;

        rep.agreement = agreement(prob_series, gen_series);
        rep.sigma_gen = summarize(sigmas_gen);
        if (inputs.pairing == Pairing::Tango) {
            rep.sigma_prob = summarize(sigmas_prob);
            rep.failure_rate = summarize(failure_rates).mean;
        }
        try {
            // misgendered/ruff keeps a single prob value per instance
            std::vector<double> d = disagreement_series(prob_samples, gen_samples, inputs.pairing);
            rep.beta = beta_fit(d);
        } catch (const ContractError& e) {
            rep.beta_note = e.what();
        }
        auto gens = inputs.generations.find(key.second);
        if (gens != inputs.generations.end()) {
            std::set<std::string> cell_ids;
            for (const auto& [id, _] : instances) cell_ids.insert(id);
            std::vector<double> rrs;
            for (const auto& g : gens->second) {
                if (!cell_ids.count(g.context_id)) continue;
                if (auto rr = repetition_rate(g.text)) rrs.push_back(*rr);
            }
            if (!rrs.empty()) rep.rr = summarize(rrs);
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

namespace {

nlohmann::ordered_json summary_json(const Summary& s) {
    return {{"n", s.n}, {"mean", s.mean}, {"stdev", s.stdev}};
}

nlohmann::ordered_json cell_json(const CellReport& r) {
    nlohmann::ordered_json j;
    j["dataset"] = r.key.dataset;
    j["model"] = r.key.model;
    j["pronoun"] = to_string(r.key.pronoun);
    j["setting"] = to_string(r.key.setting);
    j["agreement"] = nlohmann::ordered_json::parse(agreement_report_to_json(r.agreement));
    j["ci_method"] = "mcc: Fisher z-transform; kappa: Wald normal approximation";
    j["sigma_gen"] = summary_json(r.sigma_gen);
    if (r.sigma_prob) j["sigma_prob"] = summary_json(*r.sigma_prob);
    if (r.beta)
        j["beta"] = {{"alpha", r.beta->alpha}, {"beta", r.beta->beta}, {"n", r.beta->n}};
    else
        j["beta"] = nullptr;
    if (!r.beta_note.empty()) j["beta_note"] = r.beta_note;
    j["failure_rate"] = r.failure_rate ? nlohmann::ordered_json(*r.failure_rate)
                                       : nlohmann::ordered_json(nullptr);
    if (r.rr) j["rr"] = summary_json(*r.rr);
    if (r.dropped_pairs > 0) j["dropped_pairs"] = r.dropped_pairs;
    return j;
}

std::string csv_opt(const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string();
}

}  // namespace

void write_cell_reports_json(const std::string& path, const std::vector<CellReport>& reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(cell_json(r));
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << arr.dump(2) << '\n';
}

void write_cell_reports_csv(const std::string& path, const std::vector<CellReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "dataset,model,pronoun,setting,n,p_o,mcc,mcc_lo,mcc_hi,kappa,kappa_lo,kappa_hi,"
           "undefined_reason,sigma_gen_mean,sigma_gen_stdev,alpha,beta,failure_rate,rr_mean,"
           "rr_stdev\n";
    for (const auto& r : reports) {
        const auto& a = r.agreement;
        out << r.key.dataset << ',' << r.key.model << ',' << to_string(r.key.pronoun) << ','
            << to_string(r.key.setting) << ',' << a.n << ',' << a.p_o << ','
            << csv_opt(a.mcc) << ',' << (a.mcc_ci ? std::to_string(a.mcc_ci->lo) : "") << ','
            << (a.mcc_ci ? std::to_string(a.mcc_ci->hi) : "") << ',' << csv_opt(a.kappa) << ','
            << (a.kappa_ci ? std::to_string(a.kappa_ci->lo) : "") << ','
            << (a.kappa_ci ? std::to_string(a.kappa_ci->hi) : "") << ','
            << (a.undefined_reason ? *a.undefined_reason : "") << ',' << r.sigma_gen.mean << ','
            << r.sigma_gen.stdev << ',' << (r.beta ? std::to_string(r.beta->alpha) : "") << ','
            << (r.beta ? std::to_string(r.beta->beta) : "") << ',' << csv_opt(r.failure_rate)
            << ',' << (r.rr ? std::to_string(r.rr->mean) : "") << ','
            << (r.rr ? std::to_string(r.rr->stdev) : "") << '\n';
    }
}

std::vector<CellReport> cmd_report(const std::string& run_dir) {
    fs::path dir(run_dir);
    if (!fs::exists(dir / "manifest.json"))
        throw ValidationError("no manifest.json in '" + run_dir + "'");
    nlohmann::json manifest;
    std::ifstream mf(dir / "manifest.json");
    mf >> manifest;

    AgreeInputs inputs;
    inputs.model_label = manifest.value("model_id", "model");
    std::string format = manifest["config"].value("format", "template_jsonl");
    inputs.pairing =
        format == "context_jsonl" ? Pairing::Tango : Pairing::MisgenderedRuff;
    inputs.dataset_label = manifest["config"].value("dataset", "dataset");

    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.starts_with("outcomes_") && name.ends_with(".jsonl")) {
            auto rows = load_outcomes(entry.path().string());
            inputs.outcomes.insert(inputs.outcomes.end(), rows.begin(), rows.end());
        } else if (name.starts_with("generations") && name.ends_with(".jsonl")) {
            Setting s = Setting::Native;
            if (name.find("_pre") != std::string::npos) s = Setting::PreMask;
            if (name.find("_post") != std::string::npos) s = Setting::PostMask;
            auto rows = load_generations(entry.path().string());
            auto& bucket = inputs.generations[s];
            bucket.insert(bucket.end(), rows.begin(), rows.end());
        }
    }
    if (inputs.outcomes.empty()) throw ValidationError("no outcome tables in '" + run_dir + "'");

    auto reports = build_cell_reports(inputs);
    write_cell_reports_json((dir / "cells.json").string(), reports);
    write_cell_reports_csv((dir / "cells.csv").string(), reports);
    return reports;
}

}  // namespace mgm
