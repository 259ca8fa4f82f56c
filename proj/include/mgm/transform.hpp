#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgm/corpus.hpp"
#include "mgm/errors.hpp"
#include "mgm/pronouns.hpp"

namespace mgm {

// Conjugation repair could not be applied (unknown verb next to a
// rewritten nominative pronoun).
struct RewriteError : Error {
    using Error::Error;
};

// Verb conjugation data for pronoun rewriting. `pairs` is a bijection
// between third-person-singular and plural forms; regular verbs are covered
// by -s/-es/-ies rules over `base_verbs`; `tense_neutral` forms (modals,
// irregular pasts) are identical for both subjects.
struct ConjugationTable {
    std::map<std::string, std::string> to_plural;    // is -> are, has -> have, ...
    std::map<std::string, std::string> to_singular;  // inverse of to_plural
    std::set<std::string> tense_neutral;
    std::set<std::string> base_verbs;

    static const ConjugationTable& builtin();
    // {"pairs": {"is": "are", ...}, "tense_neutral": [...], "base_verbs": [...]}
    static ConjugationTable from_json_text(const std::string& json_text);
};

enum class ConversionStatus : uint8_t { Ok, NoPronoun, AmbiguousCaseResolved, RewriteFailed };
const char* to_string(ConversionStatus s);

struct ConversionOutcome {
    ConversionStatus status = ConversionStatus::Ok;
    std::optional<Template> product;
    std::vector<std::string> diagnostics;
};

// Template truncated before the [MASK]; trailing whitespace trimmed.
Context prob_to_gen_pre(const Template& t);

// Full template with the [MASK] replaced by the gold pronoun in the mask's
// case, capitalized when the slot is sentence-initial.
Context prob_to_gen_post(const Template& t);

// Full sequence with the [MASK] replaced by `form`; capitalization applied
// when the slot starts a sentence. form.cases must contain t.mask_case.
std::string render_mask(const Template& t, const PronounForm& form);

// Resolve the grammatical case of an ambiguous pronoun token (her, his,
// tango xir) from its right neighbor: dependent possessive before a
// noun-like token, otherwise accusative / independent possessive.
PronounCase resolve_pronoun_case(const std::vector<Token>& tokens, size_t index,
                                 const CaseSet& candidates, const ConjugationTable& table);

// Rewrite every pronoun of `from_base` in `text` to `to_base`, repairing the
// conjugation of verbs governed by a rewritten nominative pronoun. Pipeline:
// xe maps through she, then to they, then (reversed) to the target base.
// Throws RewriteError when a verb next to a singular-subject slot cannot be
// conjugated.
std::string rewrite_pronouns(const std::string& text, BasePronoun from_base, BasePronoun to_base,
                             const SpellingProfile& profile,
                             const ConjugationTable& table = ConjugationTable::builtin(),
                             std::vector<std::string>* diagnostics = nullptr);

// Context + generation -> template: truncate the generation so exactly one
// pronoun remains, mark its slot, and attach four candidate sequences (one
// rewritten per base pronoun).
ConversionOutcome gen_to_prob(const Context& context, const GenerationRecord& generation,
                              const SpellingProfile& profile,
                              const ConjugationTable& table = ConjugationTable::builtin());

}  // namespace mgm
