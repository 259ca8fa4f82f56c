#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgm/corpus.hpp"
#include "mgm/model_client.hpp"
#include "mgm/pronouns.hpp"
#include "mgm/transform.hpp"

namespace mgm {

enum class EvalMethod : uint8_t { Probability, Generation };
const char* to_string(EvalMethod m);
EvalMethod eval_method_from_string(const std::string& s);

// One binary correct-gendering verdict. m = 1 iff no pronoun was produced or
// the predicted base pronoun equals the gold one. Rows with `excluded` set
// carry no m: the sample could not be converted into a template (these feed
// the failure rate).
struct EvalOutcome {
    std::string instance_id;
    EvalMethod method = EvalMethod::Generation;
    Setting setting = Setting::Native;
    std::optional<int> sample_index;
    std::optional<int> m;
    std::optional<BasePronoun> predicted_base;
    BasePronoun gold_base = BasePronoun::He;
    std::optional<std::map<BasePronoun, double>> candidate_perplexities;
    bool excluded = false;
    std::string exclusion_reason;  // "no_pronoun" or "rewrite_failed"
    bool tie = false;
};

std::string outcome_to_json(const EvalOutcome& o);
EvalOutcome outcome_from_json(const std::string& json_text);
void write_outcomes(const std::string& path, const std::vector<EvalOutcome>& outcomes);
std::vector<EvalOutcome> load_outcomes(const std::string& path);
void write_outcomes_csv(const std::string& path, const std::vector<EvalOutcome>& outcomes);

// Probability-based verdict: fill the mask with each candidate of the
// mask's case, score, and take the perplexity argmin. Ties (possible only
// with mock backends) break to the lexicographically lowest surface and are
// flagged. Derived templates carry their own rewritten candidate sequences.
EvalOutcome eval_probability(const Template& t, const ModelClient& model,
                             const SpellingProfile& profile);

// Generation-based verdict: resolve the first pronoun of the completion;
// none means m = 1. Pronouns inside a re-emitted declaration sentence
// ("... pronouns are xe/xem/xyrs") are meta-discourse, not use, and are
// skipped.
EvalOutcome eval_generation(const Context& context, const GenerationRecord& generation,
                            const SpellingProfile& profile);

// first_pronoun with the declaration-sentence skip used by eval_generation.
std::optional<PronounHit> first_pronoun_skipping_declarations(const std::string& text,
                                                              const SpellingProfile& profile);

enum class RunSetting : uint8_t { Prob, GenPre, GenPost };
const char* to_string(RunSetting s);
RunSetting run_setting_from_string(const std::string& s);

struct ParallelEvalOptions {
    DecodeParams decode;
    std::set<RunSetting> settings = {RunSetting::Prob, RunSetting::GenPre, RunSetting::GenPost};
    int workers = 1;
};

struct EvalTable {
    std::vector<EvalOutcome> outcomes;
    // Generation records with the setting they were produced under (ids
    // repeat across pre/post, so the setting disambiguates).
    std::vector<std::pair<Setting, GenerationRecord>> generations;
    std::vector<std::string> errors;  // per-instance failures (the run continues)
};

// Template dataset: one probability outcome per instance plus R pre- and R
// post-mask generation outcomes. Context dataset: R native generation
// outcomes plus a per-sample probability outcome via gen_to_prob; samples
// without a pronoun are recorded as excluded. Outcomes are keyed
// (instance, setting, sample) and ordered deterministically regardless of
// worker count.
EvalTable run_parallel_eval(const std::vector<Template>& templates, const ModelClient& model,
                            const ParallelEvalOptions& options);
EvalTable run_parallel_eval(const std::vector<Context>& contexts, const ModelClient& model,
                            const ParallelEvalOptions& options);

}  // namespace mgm
