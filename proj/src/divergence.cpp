#include "mgm/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mgm/errors.hpp"
#include "mgm/mock_model.hpp"
#include "mgm/transform.hpp"
#include "mgm/util.hpp"
#include "json.hpp"

namespace mgm {

const char* to_string(DivergenceSetting s) {
    switch (s) {
        case DivergenceSetting::PreMask: return "pre_mask";
        case DivergenceSetting::PostMask: return "post_mask";
        case DivergenceSetting::GenToProb: return "gen_to_prob";
    }
    return "?";
}

double delta_star_from_masses(const std::map<BasePronoun, double>& mass) {
    double total = 0.0, max = 0.0;
    for (const auto& [_, v] : mass) {
        total += v;
        max = std::max(max, v);
    }
    if (total <= 0.0) throw ConfigError("degenerate distribution: zero total candidate mass");
    return 1.0 - max / total;
}

namespace {

// Whole-word assumption: the mask must be its own whitespace token, so the
// candidate pronoun is exactly one model token.
void require_standalone_mask(const Template& t) {
    size_t off = t.mask_char_offset();
    size_t end = off + std::char_traits<char>::length(kMaskLiteral);
    bool left_ok = off == 0 || t.text[off - 1] == ' ' || t.text[off - 1] == '\n';
    bool right_ok = end == t.text.size() || t.text[end] == ' ' || t.text[end] == '\n';
    if (!left_ok || !right_ok)
        throw ContractError("template '" + t.id +
                            "': the mask must be a standalone whitespace-delimited token for "
                            "divergence analysis");
}

// Does a completion that starts right after `prefix` begin a new sentence?
bool continuation_starts_sentence(const std::string& prefix) {
    std::string p = trim_right(prefix);
    if (p.empty()) return true;
    size_t i = p.size();
    while (i > 0 && (p[i - 1] == '"' || p[i - 1] == '\'')) --i;
    if (i == 0) return true;
    char c = p[i - 1];
    return c == '.' || c == '!' || c == '?';
}

std::string capitalize_if(std::string s, bool cap) {
    if (cap && !s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

struct CandidateSetup {
    std::string prefix;  // conditioning sequence before the pronoun slot
    std::vector<std::pair<BasePronoun, std::string>> tokens;  // candidate token per base
    // Full sequence per base for the p* argmax (prefix + candidate + suffix).
    std::vector<std::pair<BasePronoun, std::string>> full_texts;
};

CandidateSetup setup_from_template(const Template& t) {
    require_standalone_mask(t);
    const auto& profile = SpellingProfile::by_name(t.profile);
    CandidateSetup s;
    s.prefix = prob_to_gen_pre(t).text;
    bool cap = continuation_starts_sentence(s.prefix);
    for (const auto& form : profile.forms_for_case(t.mask_case)) {
        s.tokens.emplace_back(form.base, capitalize_if(form.surface, cap));
        s.full_texts.emplace_back(form.base, render_mask(t, form));
    }
    return s;
}

struct MassResult {
    std::map<BasePronoun, double> mass;
    double total = 0.0;
};

MassResult candidate_masses(const ModelClient& model, const CandidateSetup& s) {
    auto dist = model.next_token_distribution(s.prefix);
    MassResult r;
    for (const auto& [base, token] : s.tokens) {
        auto it = dist.find(token);
        double m = (it == dist.end()) ? 0.0 : it->second;
        r.mass[base] = m;
        r.total += m;
    }
    if (r.total <= 0.0) throw ConfigError("degenerate distribution: zero total candidate mass");
    return r;
}

// argmax by full-sequence log-probability; ties break to the lexicographically
// lowest candidate token.
std::pair<BasePronoun, bool> argmax_full_sequence(const ModelClient& model,
                                                  const CandidateSetup& s) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<BasePronoun, std::string>> ranked;
    std::vector<double> totals;
    for (const auto& [base, text] : s.full_texts) totals.push_back(model.score(text).total_logprob);
    for (double v : totals) best = std::max(best, v);
    const std::pair<BasePronoun, std::string>* winner = nullptr;
    int at_best = 0;
    for (size_t i = 0; i < totals.size(); ++i) {
        if (totals[i] != best) continue;
        ++at_best;
        if (!winner || s.tokens[i].second < winner->second) winner = &s.tokens[i];
    }
    return {winner->first, at_best > 1};
}

// argmax of the candidate mass itself (post-mask setting: nothing follows
// the slot, so the suffix factor is 1).
std::pair<BasePronoun, bool> argmax_mass(const MassResult& r, const CandidateSetup& s) {
    double best = -1.0;
    for (const auto& [_, v] : r.mass) best = std::max(best, v);
    const std::pair<BasePronoun, std::string>* winner = nullptr;
    int at_best = 0;
    for (const auto& cand : s.tokens) {
        if (r.mass.at(cand.first) != best) continue;
        ++at_best;
        if (!winner || cand.second < winner->second) winner = &cand;
    }
    return {winner->first, at_best > 1};
}

DivergenceResult finish(DivergenceSetting setting, const MassResult& masses,
                        std::pair<BasePronoun, bool> star) {
    DivergenceResult r;
    r.setting = setting;
    r.candidate_mass = masses.mass;
    r.p_star = star.first;
    r.tie = star.second;
    r.delta = 1.0 - masses.mass.at(star.first) / masses.total;
    r.delta_star = delta_star_from_masses(masses.mass);
    return r;
}

}  // namespace

BasePronoun p_star(const Template& t, const ModelClient& model) {
    auto s = setup_from_template(t);
    return argmax_full_sequence(model, s).first;
}

DivergenceResult delta_pre(const Template& t, const ModelClient& model) {
    auto s = setup_from_template(t);
    auto masses = candidate_masses(model, s);
    return finish(DivergenceSetting::PreMask, masses, argmax_full_sequence(model, s));
}

DivergenceResult delta_post(const Template& t, const ModelClient& model) {
    require_standalone_mask(t);
    const auto& profile = SpellingProfile::by_name(t.profile);
    CandidateSetup s;
    s.prefix = prob_to_gen_post(t).text;
    bool cap = continuation_starts_sentence(s.prefix);
    for (const auto& form : profile.forms_for_case(t.mask_case))
        s.tokens.emplace_back(form.base, capitalize_if(form.surface, cap));
    auto masses = candidate_masses(model, s);
    return finish(DivergenceSetting::PostMask, masses, argmax_mass(masses, s));
}

DivergenceResult delta_gen_to_prob(const Context& context, const GenerationRecord& generation,
                                   const ModelClient& model) {
    if (generation.context_id != context.id)
        throw ContractError("generation does not belong to context '" + context.id + "'");
    const auto& profile = SpellingProfile::by_name(context.profile);
    // Whole-word token scan of the generation.
    auto gtokens = MockModel::split_tokens(generation.text);
    size_t slot = gtokens.size();
    CaseSet cases;
    for (size_t i = 0; i < gtokens.size(); ++i) {
        if (auto f = profile.find_form(gtokens[i])) {
            slot = i;
            cases = f->cases;
            break;
        }
    }
    if (slot == gtokens.size())
        throw ContractError("generation for '" + context.id +
                            "' contains no pronoun; no mask site for divergence");
    // Resolve ambiguous cases against the corpus tokenization, which sees
    // the neighbors the whole-word scan glosses over.
    auto corpus_tokens = tokenize(generation.text);
    size_t corpus_slot = 0;
    for (size_t i = 0; i < corpus_tokens.size(); ++i)
        if (corpus_tokens[i].kind == TokenKind::Word &&
            profile.find_form(corpus_tokens[i].surface)) {
            corpus_slot = i;
            break;
        }
    PronounCase slot_case =
        resolve_pronoun_case(corpus_tokens, corpus_slot, cases, ConjugationTable::builtin());

    CandidateSetup s;
    std::string gen_prefix;
    for (size_t i = 0; i < slot; ++i) {
        if (!gen_prefix.empty()) gen_prefix += ' ';
        gen_prefix += gtokens[i];
    }
    s.prefix = trim_right(context.text);
    if (!gen_prefix.empty()) s.prefix += " " + gen_prefix;
    std::string suffix;
    for (size_t i = slot + 1; i < gtokens.size(); ++i) {
        suffix += ' ';
        suffix += gtokens[i];
    }
    bool cap = continuation_starts_sentence(s.prefix);
    for (const auto& form : profile.forms_for_case(slot_case)) {
        std::string token = capitalize_if(form.surface, cap);
        s.tokens.emplace_back(form.base, token);
        s.full_texts.emplace_back(form.base, s.prefix + " " + token + suffix);
    }
    auto masses = candidate_masses(model, s);
    return finish(DivergenceSetting::GenToProb, masses, argmax_full_sequence(model, s));
}

MonteCarloResult monte_carlo_disagreement(const Template& t, const ModelClient& model,
                                          uint64_t trials, uint64_t seed, int workers,
                                          DivergenceSetting setting) {
    if (trials < 1) throw ContractError("monte_carlo_disagreement: trials must be >= 1");
    if (setting == DivergenceSetting::GenToProb)
        throw ContractError("monte_carlo_disagreement runs on templates (pre/post settings)");

    std::string prefix;
    std::vector<std::pair<BasePronoun, std::string>> candidates;
    BasePronoun star;
    if (setting == DivergenceSetting::PreMask) {
        auto s = setup_from_template(t);
        prefix = s.prefix;
        candidates = s.tokens;
        star = argmax_full_sequence(model, s).first;
    } else {
        auto r = delta_post(t, model);
        prefix = prob_to_gen_post(t).text;
        const auto& profile = SpellingProfile::by_name(t.profile);
        bool cap = continuation_starts_sentence(prefix);
        for (const auto& form : profile.forms_for_case(t.mask_case))
            candidates.emplace_back(form.base, capitalize_if(form.surface, cap));
        star = r.p_star;
    }
    std::string star_token;
    for (const auto& [base, token] : candidates)
        if (base == star) star_token = token;

    // Unfiltered single-step sampling from the exact conditional.
    auto dist_map = model.next_token_distribution(prefix);
    std::vector<std::pair<std::string, double>> dist(dist_map.begin(), dist_map.end());

    constexpr uint64_t kChunk = 1 << 16;
    uint64_t num_chunks = (trials + kChunk - 1) / kChunk;
    std::vector<uint64_t> qualifying(num_chunks, 0), disagree(num_chunks, 0);

    auto run_chunk = [&](uint64_t c) {
        uint64_t count = std::min(kChunk, trials - c * kChunk);
        Rng rng(derive_seed(seed, prefix, c));
        for (uint64_t i = 0; i < count; ++i) {
            double u = rng.next_double();
            double acc = 0.0;
            const std::string* tok = &dist.back().first;
            for (const auto& [token, p] : dist) {
                acc += p;
                if (u < acc) {
                    tok = &token;
                    break;
                }
            }
            for (const auto& [base, ctoken] : candidates) {
                if (*tok == ctoken) {
                    ++qualifying[c];
                    if (*tok != star_token) ++disagree[c];
                    break;
                }
            }
        }
    };
    if (workers <= 1) {
        for (uint64_t c = 0; c < num_chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (uint64_t c = w; c < num_chunks; c += workers) run_chunk(c);
            });
        for (auto& th : pool) th.join();
    }
    MonteCarloResult r;
    r.trials = trials;
    for (uint64_t c = 0; c < num_chunks; ++c) {
        r.qualifying += qualifying[c];
        // disagreements only counted within qualifying trials
    }
    uint64_t dis = 0;
    for (uint64_t c = 0; c < num_chunks; ++c) dis += disagree[c];
    if (r.qualifying == 0)
        throw Error("monte_carlo_disagreement: no qualifying trials (no candidate pronoun ever "
                    "landed on the mask)");
    r.estimate = static_cast<double>(dis) / static_cast<double>(r.qualifying);
    r.unconditioned = static_cast<double>(dis) / static_cast<double>(trials);
    return r;
}

std::string divergence_to_json(const DivergenceResult& r) {
    nlohmann::ordered_json j;
    j["setting"] = to_string(r.setting);
    j["delta"] = r.delta;
    j["delta_star"] = r.delta_star;
    j["p_star"] = to_string(r.p_star);
    nlohmann::ordered_json mass = nlohmann::ordered_json::object();
    for (auto b : kAllBases)
        if (r.candidate_mass.count(b)) mass[to_string(b)] = r.candidate_mass.at(b);
    j["candidate_mass"] = mass;
    if (r.tie) j["tie"] = true;
    return j.dump();
}

}  // namespace mgm
