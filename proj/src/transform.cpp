#include "mgm/transform.hpp"

#include <algorithm>

#include "mgm/util.hpp"
#include "json.hpp"

namespace mgm {

namespace {

const std::set<std::string> kSkippableAdverbs = {"also", "never", "often"};

ConjugationTable make_builtin_table() {
    ConjugationTable t;
    t.to_plural = {
        {"is", "are"},       {"was", "were"},       {"has", "have"},
        {"does", "do"},      {"isn't", "aren't"},   {"wasn't", "weren't"},
        {"hasn't", "haven't"}, {"doesn't", "don't"},
    };
    for (const auto& [sg, pl] : t.to_plural) t.to_singular[pl] = sg;
    // Forms whose spelling does not mark the subject's number: modals and
    // common irregular pasts (regular pasts are covered by the -ed rule).
    t.tense_neutral = {
        "will",  "would",  "can",    "could",  "may",    "might",  "must",   "shall",
        "should", "ought",  "did",    "had",    "said",   "went",   "got",    "made",
        "knew",  "thought", "took",   "saw",    "came",   "gave",   "found",  "told",
        "felt",  "became", "left",   "put",    "kept",   "let",    "began",  "ate",
        "ran",   "wrote",  "stood",  "met",    "paid",   "sat",    "spoke",  "won",
        "bought", "brought", "chose", "fell",   "drove",  "rose",   "grew",   "threw",
        "flew",  "drew",   "broke",  "spent",  "sent",   "built",  "understood",
        "taught", "caught", "fought", "sought", "heard",  "held",   "lost",   "meant",
        "slept", "swept",  "wept",   "crept",  "dealt",  "knelt",  "leapt",  "learnt",
        "burnt", "bent",   "lent",   "sang",   "rang",   "drank",  "swam",   "sank",
        "spun",  "dug",    "hung",   "struck", "stuck",  "swung",  "forgot", "forgave",
        "froze", "woke",   "wore",   "tore",   "swore",  "bore",   "rode",   "shone",
        "shot",  "sold",   "cut",    "hit",    "hurt",   "set",    "shut",   "cost",
        "quit",  "spread", "bet",    "bit",    "clung",  "flung",  "slung",  "stung",
        "wrung", "sprang", "shrank", "blew",   "grown",  "beat",
    };
    t.base_verbs = {
        "say",     "see",     "get",     "make",    "know",     "think",   "take",
        "come",    "want",    "look",    "use",     "find",     "give",    "tell",
        "work",    "call",    "try",     "ask",     "need",     "feel",    "become",
        "leave",   "mean",    "keep",    "begin",   "seem",     "help",    "talk",
        "turn",    "start",   "show",    "hear",    "play",     "run",     "move",
        "like",    "live",    "believe", "hold",    "bring",    "happen",  "write",
        "provide", "sit",     "stand",   "lose",    "pay",      "meet",    "include",
        "continue", "learn",  "change",  "lead",    "understand", "watch", "follow",
        "stop",    "create",  "speak",   "read",    "allow",    "add",     "spend",
        "grow",    "open",    "walk",    "win",     "offer",    "remember", "love",
        "consider", "appear", "buy",     "wait",    "serve",    "die",     "send",
        "expect",  "build",   "stay",    "fall",    "reach",    "kill",    "remain",
        "suggest", "raise",   "pass",    "sell",    "require",  "report",  "decide",
        "pull",    "carry",   "drink",   "eat",     "drive",    "dance",   "sing",
        "smile",   "laugh",   "cry",     "teach",   "catch",    "fight",   "sleep",
        "dress",   "wash",    "wish",    "focus",   "miss",     "fix",     "push",
        "rush",    "enjoy",   "study",   "worry",   "hurry",    "marry",   "visit",
        "travel",  "paint",   "cook",    "clean",   "swim",     "jump",    "climb",
        "shout",   "whisper", "argue",   "agree",   "manage",   "prepare", "answer",
        "explain", "describe", "discuss", "listen", "wear",     "ride",    "fly",
        "throw",   "blow",    "go",      "charge",  "prefer",   "insist",  "act",
        "sound",   "stifle",  "encourage",
    };
    return t;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool takes_es(const std::string& stem) {
    if (stem.empty()) return false;
    char last = stem.back();
    if (last == 'o' || last == 's' || last == 'x' || last == 'z') return true;
    if (stem.size() >= 2) {
        std::string tail = stem.substr(stem.size() - 2);
        if (tail == "ch" || tail == "sh") return true;
    }
    return false;
}

// base -> third-person-singular: try/tries, go/goes, walk/walks
std::string add_s(const std::string& base) {
    if (base.size() >= 2 && base.back() == 'y' && !is_vowel(base[base.size() - 2]))
        return base.substr(0, base.size() - 1) + "ies";
    if (takes_es(base)) return base + "es";
    return base + "s";
}

// tries -> try, goes -> go, walks -> walk; only stems listed as base verbs
// are accepted, everything else is left alone by the caller.
std::optional<std::string> strip_s(const std::string& word, const ConjugationTable& t) {
    if (word.size() > 3 && word.ends_with("ies")) {
        std::string stem = word.substr(0, word.size() - 3) + "y";
        if (t.base_verbs.count(stem)) return stem;
    }
    if (word.size() > 2 && word.ends_with("es")) {
        std::string stem = word.substr(0, word.size() - 2);
        if (takes_es(stem) && t.base_verbs.count(stem)) return stem;
    }
    if (word.size() > 1 && word.ends_with("s")) {
        std::string stem = word.substr(0, word.size() - 1);
        if (t.base_verbs.count(stem)) return stem;
    }
    return std::nullopt;
}

bool ends_with_ed(const std::string& w) { return w.size() > 3 && w.ends_with("ed"); }

std::string match_capitalization(const std::string& original, std::string replacement) {
    if (!original.empty() && !replacement.empty() && is_ascii_upper(original[0]) &&
        replacement[0] >= 'a' && replacement[0] <= 'z')
        replacement[0] = static_cast<char>(replacement[0] - 'a' + 'A');
    return replacement;
}

// Closed-class words that cannot start a nominal; "met her at noon" must
// tag an accusative, not a dependent possessive.
bool function_word(const std::string& lower) {
    static const std::set<std::string> words = {
        "at",   "in",    "on",    "to",    "for",   "with", "by",   "from", "of",    "and",
        "or",   "but",   "so",    "when",  "while", "after", "before", "because", "if", "that",
        "than", "as",    "the",   "a",     "an",    "into", "over", "under", "about", "again",
        "then", "there", "here",  "out",   "up",    "down", "off",  "too",  "very",  "not",
        "yesterday", "today", "tomorrow", "now",    "soon", "later", "once", "twice",
    };
    return words.count(lower) > 0;
}

// Unambiguously a verb. Regular -s/-ed forms and base verbs double as nouns
// ("his work", "her charges") and must not veto a dependent possessive.
bool definite_verb(const std::string& lower, const ConjugationTable& t) {
    return t.to_plural.count(lower) || t.to_singular.count(lower) || t.tense_neutral.count(lower);
}

}  // namespace

const ConjugationTable& ConjugationTable::builtin() {
    static const ConjugationTable t = make_builtin_table();
    return t;
}

ConjugationTable ConjugationTable::from_json_text(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("conjugation table parse error: ") + e.what());
    }
    ConjugationTable t;
    if (j.contains("pairs"))
        for (auto& [sg, pl] : j["pairs"].items()) {
            std::string plural = pl.get<std::string>();
            t.to_plural[sg] = plural;
            if (!t.to_singular.emplace(plural, sg).second)
                throw ConfigError("conjugation pairs are not a bijection: duplicate plural '" +
                                  plural + "'");
        }
    if (j.contains("tense_neutral"))
        for (auto& v : j["tense_neutral"]) t.tense_neutral.insert(v.get<std::string>());
    if (j.contains("base_verbs"))
        for (auto& v : j["base_verbs"]) t.base_verbs.insert(v.get<std::string>());
    return t;
}

const char* to_string(ConversionStatus s) {
    switch (s) {
        case ConversionStatus::Ok: return "ok";
        case ConversionStatus::NoPronoun: return "no_pronoun";
        case ConversionStatus::AmbiguousCaseResolved: return "ambiguous_case_resolved";
        case ConversionStatus::RewriteFailed: return "rewrite_failed";
    }
    return "?";
}

namespace {

// True when the mask/pronoun slot at `offset` starts a sentence: nothing but
// whitespace before it, or the previous content is . ! ? (possibly behind a
// closing quote).
bool sentence_initial(const std::string& text, size_t offset) {
    size_t i = offset;
    while (i > 0 && (text[i - 1] == ' ' || text[i - 1] == '\t' || text[i - 1] == '\n')) --i;
    if (i == 0) return true;
    size_t p = i;
    while (p > 0 && (text[p - 1] == '"' || text[p - 1] == '\'')) --p;
    if (p == 0) return true;
    char c = text[p - 1];
    return c == '.' || c == '!' || c == '?';
}

std::string capitalized(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

}  // namespace

Context prob_to_gen_pre(const Template& t) {
    size_t offset = t.mask_char_offset();
    if (offset == 0)
        throw ValidationError("template '" + t.id + "': mask at position 0 leaves no context");
    Context c;
    c.id = t.id;
    c.dataset = t.dataset;
    c.text = trim_right(std::string_view(t.text).substr(0, offset));
    if (c.text.empty())
        throw ValidationError("template '" + t.id + "': nothing precedes the mask");
    c.gold_base = t.gold_base;
    c.profile = t.profile;
    c.setting = Setting::PreMask;
    c.metadata = t.metadata;
    return c;
}

Context prob_to_gen_post(const Template& t) {
    const auto& profile = SpellingProfile::by_name(t.profile);
    PronounForm gold = *profile.find_form(profile.surface(t.gold_base, t.mask_case));
    Context c;
    c.id = t.id;
    c.dataset = t.dataset;
    c.text = render_mask(t, gold);
    c.gold_base = t.gold_base;
    c.profile = t.profile;
    c.setting = Setting::PostMask;
    c.metadata = t.metadata;
    return c;
}

std::string render_mask(const Template& t, const PronounForm& form) {
    if (!form.cases.contains(t.mask_case))
        throw ContractError("form '" + form.surface + "' cannot fill a " +
                            std::string(to_string(t.mask_case)) + " mask");
    size_t offset = t.mask_char_offset();
    std::string surface = form.surface;
    if (sentence_initial(t.text, offset)) surface = capitalized(surface);
    std::string out = t.text;
    out.replace(offset, std::char_traits<char>::length(kMaskLiteral), surface);
    return out;
}

PronounCase resolve_pronoun_case(const std::vector<Token>& tokens, size_t index,
                                 const CaseSet& candidates, const ConjugationTable& table) {
    if (candidates.singleton()) return candidates.values().front();
    // Next word token decides. No word, punctuation, an unambiguous verb, or
    // a closed-class function word after the slot rules out the dependent
    // possessive.
    bool noun_like_follows = false;
    if (index + 1 < tokens.size() && tokens[index + 1].kind == TokenKind::Word) {
        std::string next = to_lower(tokens[index + 1].surface);
        noun_like_follows = !definite_verb(next, table) && !function_word(next);
    }
    bool has_pd = candidates.contains(PronounCase::PossessiveDependent);
    if (has_pd && noun_like_follows) return PronounCase::PossessiveDependent;
    if (candidates.contains(PronounCase::Accusative)) return PronounCase::Accusative;
    if (candidates.contains(PronounCase::PossessiveIndependent))
        return PronounCase::PossessiveIndependent;
    return candidates.values().front();
}

namespace {

struct PronounOccurrence {
    size_t token_index;
    PronounCase resolved_case;
    bool was_ambiguous;
};

std::vector<PronounOccurrence> find_occurrences(const std::vector<Token>& tokens,
                                                BasePronoun base, const SpellingProfile& profile,
                                                const ConjugationTable& table) {
    std::vector<PronounOccurrence> out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].kind != TokenKind::Word) continue;
        auto f = profile.find_form(tokens[i].surface);
        if (!f || f->base != base) continue;
        PronounCase c = resolve_pronoun_case(tokens, i, f->cases, table);
        out.push_back({i, c, !f->cases.singleton()});
    }
    return out;
}

enum class NumberShift { None, ToPlural, ToSingular };

// Conjugate the verb right-adjacent to a rewritten nominative pronoun.
// Unknown words are tolerated when the target is plural (a diagnostic is
// recorded); the singular direction throws, since silently skipping would
// fabricate an ungrammatical minimal pair.
std::string shift_verb(const std::string& word, NumberShift shift, const ConjugationTable& t,
                       std::vector<std::string>* diagnostics) {
    std::string lower = to_lower(word);
    if (shift == NumberShift::ToPlural) {
        if (auto it = t.to_plural.find(lower); it != t.to_plural.end())
            return match_capitalization(word, it->second);
        if (auto stem = strip_s(lower, t)) return match_capitalization(word, *stem);
        if (!t.tense_neutral.count(lower) && !ends_with_ed(lower) && diagnostics)
            diagnostics->push_back("verb '" + word + "' left unchanged after plural rewrite");
        return word;
    }
    if (shift == NumberShift::ToSingular) {
        if (auto it = t.to_singular.find(lower); it != t.to_singular.end())
            return match_capitalization(word, it->second);
        if (t.base_verbs.count(lower)) return match_capitalization(word, add_s(lower));
        if (t.tense_neutral.count(lower) || ends_with_ed(lower)) return word;
        throw RewriteError("cannot conjugate verb '" + word + "' for a singular subject");
    }
    return word;
}

}  // namespace

std::string rewrite_pronouns(const std::string& text, BasePronoun from_base, BasePronoun to_base,
                             const SpellingProfile& profile, const ConjugationTable& table,
                             std::vector<std::string>* diagnostics) {
    if (from_base == to_base) return text;
    auto tokens = tokenize(text);
    auto occurrences = find_occurrences(tokens, from_base, profile, table);
    if (occurrences.empty()) return text;

    // Pronoun surfaces compose through the pipeline (xe -> she -> they ->
    // target) to a straight (base, case) table lookup; verbs shift number
    // once, by the net singular/plural change.
    NumberShift shift = NumberShift::None;
    if (from_base != BasePronoun::They && to_base == BasePronoun::They)
        shift = NumberShift::ToPlural;
    else if (from_base == BasePronoun::They && to_base != BasePronoun::They)
        shift = NumberShift::ToSingular;

    std::set<size_t> pronoun_positions;
    for (const auto& occ : occurrences) pronoun_positions.insert(occ.token_index);

    std::map<size_t, std::string> replacements;
    for (const auto& occ : occurrences) {
        const Token& tok = tokens[occ.token_index];
        std::string target = profile.surface(to_base, occ.resolved_case);
        replacements[occ.token_index] = match_capitalization(tok.surface, target);
        if (occ.was_ambiguous && diagnostics)
            diagnostics->push_back("resolved '" + tok.surface + "' as " +
                                   to_string(occ.resolved_case));
        if (occ.resolved_case != PronounCase::Nominative || shift == NumberShift::None) continue;
        size_t j = occ.token_index + 1;
        if (j < tokens.size() && tokens[j].kind == TokenKind::Word &&
            kSkippableAdverbs.count(to_lower(tokens[j].surface)))
            ++j;
        if (j >= tokens.size() || tokens[j].kind != TokenKind::Word) continue;
        if (pronoun_positions.count(j) || profile.find_form(tokens[j].surface)) continue;
        replacements[j] = shift_verb(tokens[j].surface, shift, table, diagnostics);
    }
    return splice_tokens(text, tokens, replacements);
}

ConversionOutcome gen_to_prob(const Context& context, const GenerationRecord& generation,
                              const SpellingProfile& profile, const ConjugationTable& table) {
    if (generation.context_id != context.id)
        throw ContractError("generation '" + generation.context_id +
                            "' does not belong to context '" + context.id + "'");
    ConversionOutcome outcome;
    auto hit = first_pronoun(generation.text, profile);
    if (!hit) {
        outcome.status = ConversionStatus::NoPronoun;
        outcome.diagnostics.push_back("no pronoun in generation; template not constructed");
        return outcome;
    }
    auto tokens = tokenize(generation.text);
    const Token& ptok = tokens[hit->token_index];

    // Truncate at the end of the pronoun's sentence; if that sentence holds
    // a second pronoun, cut right after the first one instead.
    auto sentences = split_sentences(generation.text);
    size_t sentence_end = generation.text.size();
    for (const auto& s : sentences) {
        if (ptok.begin >= s.begin && ptok.begin < s.end) {
            sentence_end = s.end;
            break;
        }
    }
    bool second_pronoun = false;
    for (size_t i = hit->token_index + 1; i < tokens.size() && tokens[i].begin < sentence_end; ++i) {
        if (tokens[i].kind == TokenKind::Word && profile.find_form(tokens[i].surface)) {
            second_pronoun = true;
            break;
        }
    }
    std::string truncated;
    if (second_pronoun)
        truncated = generation.text.substr(0, ptok.end) + ".";
    else
        truncated = generation.text.substr(0, sentence_end);

    PronounCase slot_case = resolve_pronoun_case(tokens, hit->token_index, hit->form.cases, table);
    bool ambiguous = !hit->form.cases.singleton();
    if (ambiguous)
        outcome.diagnostics.push_back("resolved '" + ptok.surface + "' as " +
                                      std::string(to_string(slot_case)));

    std::string prefix = trim_right(context.text);
    std::string masked = truncated;
    masked.replace(ptok.begin, ptok.end - ptok.begin, kMaskLiteral);

    Template t;
    t.id = context.id + "#s" + std::to_string(generation.sample_index);
    t.dataset = context.dataset;
    t.text = prefix + " " + masked;
    t.mask_case = slot_case;
    t.gold_base = context.gold_base;
    t.profile = profile.name();
    t.metadata = context.metadata;
    t.metadata["source_context"] = context.id;
    t.metadata["sample_index"] = std::to_string(generation.sample_index);

    // Four candidate sequences via the rewriting pipeline: neutralize the
    // truncated generation once, then map to each base pronoun.
    BasePronoun found = hit->form.base;
    std::map<BasePronoun, std::string> renderings;
    try {
        std::string neutral = rewrite_pronouns(truncated, found, BasePronoun::They, profile, table,
                                               &outcome.diagnostics);
        for (auto b : kAllBases) {
            std::string variant =
                (b == found) ? truncated
                             : rewrite_pronouns(neutral, BasePronoun::They, b, profile, table,
                                                &outcome.diagnostics);
            renderings[b] = prefix + " " + variant;
        }
    } catch (const RewriteError& e) {
        outcome.status = ConversionStatus::RewriteFailed;
        outcome.diagnostics.push_back(e.what());
        return outcome;
    }
    t.renderings = std::move(renderings);
    outcome.product = std::move(t);
    outcome.status = ambiguous ? ConversionStatus::AmbiguousCaseResolved : ConversionStatus::Ok;
    return outcome;
}

}  // namespace mgm
