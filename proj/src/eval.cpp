#include "mgm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "mgm/errors.hpp"
#include "mgm/util.hpp"
#include "json.hpp"

namespace mgm {

const char* to_string(EvalMethod m) {
    return m == EvalMethod::Probability ? "probability" : "generation";
}

EvalMethod eval_method_from_string(const std::string& s) {
    if (s == "probability") return EvalMethod::Probability;
    if (s == "generation") return EvalMethod::Generation;
    throw ValidationError("unknown eval method: '" + s + "'");
}

const char* to_string(RunSetting s) {
    switch (s) {
        case RunSetting::Prob: return "prob";
        case RunSetting::GenPre: return "gen_pre";
        case RunSetting::GenPost: return "gen_post";
    }
    return "?";
}

RunSetting run_setting_from_string(const std::string& s) {
    if (s == "prob") return RunSetting::Prob;
    if (s == "gen_pre") return RunSetting::GenPre;
    if (s == "gen_post") return RunSetting::GenPost;
    throw ValidationError("unknown run setting: '" + s + "' (want prob|gen_pre|gen_post)");
}

std::string outcome_to_json(const EvalOutcome& o) {
    nlohmann::ordered_json j;
    j["instance_id"] = o.instance_id;
    j["method"] = to_string(o.method);
    j["setting"] = to_string(o.setting);
    j["sample_index"] =
        o.sample_index ? nlohmann::ordered_json(*o.sample_index) : nlohmann::ordered_json(nullptr);
    j["m"] = o.m ? nlohmann::ordered_json(*o.m) : nlohmann::ordered_json(nullptr);
    j["predicted_base"] = o.predicted_base ? nlohmann::ordered_json(to_string(*o.predicted_base))
                                           : nlohmann::ordered_json(nullptr);
    j["gold_base"] = to_string(o.gold_base);
    if (o.excluded) {
        j["excluded"] = true;
        j["exclusion_reason"] = o.exclusion_reason;
    }
    if (o.tie) j["tie"] = true;
    if (o.candidate_perplexities) {
        nlohmann::ordered_json p = nlohmann::ordered_json::object();
        for (auto b : kAllBases) {
            double v = o.candidate_perplexities->at(b);
            p[to_string(b)] = std::isfinite(v) ? nlohmann::ordered_json(v)
                                               : nlohmann::ordered_json(nullptr);
        }
        j["perplexities"] = p;
    }
    return j.dump();
}

EvalOutcome outcome_from_json(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    EvalOutcome o;
    o.instance_id = j.at("instance_id").get<std::string>();
    o.method = eval_method_from_string(j.at("method").get<std::string>());
    o.setting = setting_from_string(j.at("setting").get<std::string>());
    if (j.contains("sample_index") && !j["sample_index"].is_null())
        o.sample_index = j["sample_index"].get<int>();
    if (j.contains("m") && !j["m"].is_null()) o.m = j["m"].get<int>();
    if (j.contains("predicted_base") && !j["predicted_base"].is_null())
        o.predicted_base = base_from_string(j["predicted_base"].get<std::string>());
    o.gold_base = base_from_string(j.at("gold_base").get<std::string>());
    o.excluded = j.value("excluded", false);
    o.exclusion_reason = j.value("exclusion_reason", "");
    o.tie = j.value("tie", false);
    if (j.contains("perplexities") && j["perplexities"].is_object()) {
        std::map<BasePronoun, double> p;
        for (auto& [k, v] : j["perplexities"].items())
            p[base_from_string(k)] =
                v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
        o.candidate_perplexities = std::move(p);
    }
    return o;
}

void write_outcomes(const std::string& path, const std::vector<EvalOutcome>& outcomes) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    for (const auto& o : outcomes) out << outcome_to_json(o) << '\n';
}

std::vector<EvalOutcome> load_outcomes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<EvalOutcome> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(outcome_from_json(line));
        } catch (const std::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_outcomes_csv(const std::string& path, const std::vector<EvalOutcome>& outcomes) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "instance_id,method,setting,sample_index,m,predicted_base,gold_base\n";
    for (const auto& o : outcomes) {
        out << o.instance_id << ',' << to_string(o.method) << ',' << to_string(o.setting) << ',';
        if (o.sample_index) out << *o.sample_index;
        out << ',';
        if (o.m) out << *o.m;
        out << ',';
        if (o.predicted_base) out << to_string(*o.predicted_base);
        out << ',' << to_string(o.gold_base) << '\n';
    }
}

EvalOutcome eval_probability(const Template& t, const ModelClient& model,
                             const SpellingProfile& profile) {
    EvalOutcome o;
    o.instance_id = t.id;
    o.method = EvalMethod::Probability;
    o.setting = Setting::Native;
    o.gold_base = t.gold_base;

    auto candidates = profile.forms_for_case(t.mask_case);
    std::map<BasePronoun, double> perplexities;
    std::vector<std::pair<PronounForm, double>> scored;
    for (const auto& form : candidates) {
        std::string text = t.renderings ? t.renderings->at(form.base) : render_mask(t, form);
        double perp = perplexity(model.score(text));
        perplexities[form.base] = perp;
        scored.emplace_back(form, perp);
    }
    double best = scored.front().second;
    for (const auto& [form, perp] : scored) best = std::min(best, perp);
    int at_best = 0;
    const PronounForm* winner = nullptr;
    for (const auto& [form, perp] : scored) {
        if (perp != best) continue;
        ++at_best;
        if (!winner || form.surface < winner->surface) winner = &form;
    }
    o.predicted_base = winner->base;
    o.tie = at_best > 1;
    o.candidate_perplexities = std::move(perplexities);
    o.m = (winner->base == t.gold_base) ? 1 : 0;
    return o;
}

namespace {

// Character ranges of sentences that merely declare pronouns
// ("X's pronouns are a/b/c"): a model repeating the declaration is not using
// the pronoun.
std::vector<SentenceSpan> declaration_spans(const std::string& text,
                                            const SpellingProfile& profile) {
    std::vector<SentenceSpan> out;
    for (const auto& s : split_sentences(text)) {
        std::string sentence = text.substr(s.begin, s.end - s.begin);
        auto toks = tokenize(sentence);
        for (size_t i = 0; i + 2 < toks.size(); ++i) {
            if (toks[i].kind != TokenKind::Word) continue;
            if (to_lower(toks[i].surface) != "pronouns") continue;
            if (to_lower(toks[i + 1].surface) != "are") continue;
            if (toks[i + 2].kind == TokenKind::Word && profile.find_form(toks[i + 2].surface)) {
                out.push_back(s);
                break;
            }
        }
    }
    return out;
}

}  // namespace

std::optional<PronounHit> first_pronoun_skipping_declarations(const std::string& text,
                                                              const SpellingProfile& profile) {
    auto skips = declaration_spans(text, profile);
    auto tokens = tokenize(text);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].kind != TokenKind::Word) continue;
        bool skipped = false;
        for (const auto& s : skips)
            if (tokens[i].begin >= s.begin && tokens[i].begin < s.end) {
                skipped = true;
                break;
            }
        if (skipped) continue;
        if (auto f = profile.find_form(tokens[i].surface)) return PronounHit{*f, i};
    }
    return std::nullopt;
}

EvalOutcome eval_generation(const Context& context, const GenerationRecord& generation,
                            const SpellingProfile& profile) {
    if (generation.context_id != context.id)
        throw ContractError("generation '" + generation.context_id +
                            "' does not belong to context '" + context.id + "'");
    EvalOutcome o;
    o.instance_id = context.id;
    o.method = EvalMethod::Generation;
    o.setting = context.setting;
    o.sample_index = generation.sample_index;
    o.gold_base = context.gold_base;
    auto hit = first_pronoun_skipping_declarations(generation.text, profile);
    if (!hit) {
        o.m = 1;  // no pronoun generated counts as correct for this method
        return o;
    }
    o.predicted_base = hit->form.base;
    o.m = (hit->form.base == context.gold_base) ? 1 : 0;
    return o;
}

namespace {

struct InstanceResult {
    std::vector<EvalOutcome> outcomes;
    std::vector<std::pair<Setting, GenerationRecord>> generations;
    std::vector<std::string> errors;
};

GenerationRecord make_record(const Context& ctx, const ModelClient& model,
                             const DecodeParams& decode, int index,
                             const ModelClient::Sample& sample) {
    GenerationRecord g;
    g.context_id = ctx.id;
    g.sample_index = index;
    g.text = sample.text;
    g.model_id = model.model_id();
    g.decode = decode;
    g.seed = sample.seed;
    return g;
}

template <typename Item, typename Fn>
std::vector<InstanceResult> run_instances(const std::vector<Item>& items, int workers, Fn&& fn) {
    std::vector<InstanceResult> results(items.size());
    if (workers < 1) workers = 1;
    auto work = [&](int w) {
        for (size_t i = w; i < items.size(); i += workers) {
            try {
                results[i] = fn(items[i]);
            } catch (const TransportError& e) {
                results[i].errors.push_back(std::string("[transport] instance failed: ") + e.what());
            } catch (const std::exception& e) {
                results[i].errors.push_back(std::string("instance failed: ") + e.what());
            }
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    return results;
}

EvalTable assemble(std::vector<InstanceResult> results, const std::vector<std::string>& ids) {
    EvalTable table;
    for (size_t i = 0; i < results.size(); ++i) {
        for (auto& o : results[i].outcomes) table.outcomes.push_back(std::move(o));
        for (auto& g : results[i].generations) table.generations.push_back(std::move(g));
        for (auto& e : results[i].errors) table.errors.push_back(ids[i] + ": " + e);
    }
    return table;
}

}  // namespace

EvalTable run_parallel_eval(const std::vector<Template>& templates, const ModelClient& model,
                            const ParallelEvalOptions& options) {
    validate(options.decode);
    auto results = run_instances(templates, options.workers, [&](const Template& t) {
        InstanceResult r;
        const auto& profile = SpellingProfile::by_name(t.profile);
        if (options.settings.count(RunSetting::Prob))
            r.outcomes.push_back(eval_probability(t, model, profile));
        auto run_gen = [&](Setting setting) {
            Context ctx =
                setting == Setting::PreMask ? prob_to_gen_pre(t) : prob_to_gen_post(t);
            auto samples = model.generate(ctx.text, options.decode);
            for (size_t i = 0; i < samples.size(); ++i) {
                auto rec = make_record(ctx, model, options.decode, static_cast<int>(i), samples[i]);
                r.outcomes.push_back(eval_generation(ctx, rec, profile));
                r.generations.emplace_back(setting, std::move(rec));
            }
        };
        if (options.settings.count(RunSetting::GenPre)) run_gen(Setting::PreMask);
        if (options.settings.count(RunSetting::GenPost)) run_gen(Setting::PostMask);
        return r;
    });
    std::vector<std::string> ids;
    for (const auto& t : templates) ids.push_back(t.id);
    return assemble(std::move(results), ids);
}

EvalTable run_parallel_eval(const std::vector<Context>& contexts, const ModelClient& model,
                            const ParallelEvalOptions& options) {
    validate(options.decode);
    bool want_gen =
        options.settings.count(RunSetting::GenPre) || options.settings.count(RunSetting::GenPost);
    auto results = run_instances(contexts, options.workers, [&](const Context& ctx) {
        InstanceResult r;
        const auto& profile = SpellingProfile::by_name(ctx.profile);
        // Generations are the substrate for both methods on a context dataset.
        auto samples = model.generate(ctx.text, options.decode);
        std::vector<GenerationRecord> records;
        for (size_t i = 0; i < samples.size(); ++i)
            records.push_back(make_record(ctx, model, options.decode, static_cast<int>(i), samples[i]));
        if (want_gen)
            for (const auto& rec : records) r.outcomes.push_back(eval_generation(ctx, rec, profile));
        if (options.settings.count(RunSetting::Prob)) {
            for (const auto& rec : records) {
                auto conv = gen_to_prob(ctx, rec, profile);
                EvalOutcome o;
                o.instance_id = ctx.id;
                o.method = EvalMethod::Probability;
                o.setting = ctx.setting;
                o.sample_index = rec.sample_index;
                o.gold_base = ctx.gold_base;
                if (conv.product) {
                    o = eval_probability(*conv.product, model, profile);
                    o.instance_id = ctx.id;
                    o.setting = ctx.setting;
                    o.sample_index = rec.sample_index;
                } else {
                    o.excluded = true;
                    o.exclusion_reason = conv.status == ConversionStatus::NoPronoun
                                             ? "no_pronoun"
                                             : "rewrite_failed";
                }
                r.outcomes.push_back(std::move(o));
            }
        }
        for (auto& rec : records) r.generations.emplace_back(ctx.setting, std::move(rec));
        return r;
    });
    std::vector<std::string> ids;
    for (const auto& c : contexts) ids.push_back(c.id);
    return assemble(std::move(results), ids);
}

}  // namespace mgm
