#include "mgm/pronouns.hpp"

#include <algorithm>

#include "mgm/corpus.hpp"
#include "mgm/errors.hpp"
#include "mgm/util.hpp"
#include "json.hpp"

namespace mgm {

const char* to_string(BasePronoun b) {
    switch (b) {
        case BasePronoun::He: return "he";
        case BasePronoun::She: return "she";
        case BasePronoun::They: return "they";
        case BasePronoun::Xe: return "xe";
    }
    return "?";
}

const char* to_string(PronounCase c) {
    switch (c) {
        case PronounCase::Nominative: return "nom";
        case PronounCase::Accusative: return "acc";
        case PronounCase::PossessiveDependent: return "pos_dep";
        case PronounCase::PossessiveIndependent: return "pos_ind";
        case PronounCase::Reflexive: return "refl";
    }
    return "?";
}

BasePronoun base_from_string(const std::string& s) {
    for (auto b : kAllBases)
        if (s == to_string(b)) return b;
    throw ValidationError("unknown base pronoun: '" + s + "'");
}

PronounCase case_from_string(const std::string& s) {
    for (auto c : kAllCases)
        if (s == to_string(c)) return c;
    throw ValidationError("unknown pronoun case: '" + s + "'");
}

int CaseSet::size() const {
    int n = 0;
    for (auto c : kAllCases)
        if (contains(c)) ++n;
    return n;
}

std::vector<PronounCase> CaseSet::values() const {
    std::vector<PronounCase> out;
    for (auto c : kAllCases)
        if (contains(c)) out.push_back(c);
    return out;
}

namespace {

// nom, acc, pos_dep, pos_ind, refl
constexpr std::array<std::array<const char*, 5>, 3> kSharedRows = {{
    {"he", "him", "his", "his", "himself"},
    {"she", "her", "her", "hers", "herself"},
    {"they", "them", "their", "theirs", "themself"},
}};

std::array<std::array<std::string, 5>, 4> make_table(const std::array<const char*, 5>& xe_row) {
    std::array<std::array<std::string, 5>, 4> t;
    for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 5; ++c) t[b][c] = kSharedRows[b][c];
    for (int c = 0; c < 5; ++c) t[3][c] = xe_row[c];
    return t;
}

}  // namespace

SpellingProfile::SpellingProfile(std::string name,
                                 std::array<std::array<std::string, 5>, 4> table)
    : name_(std::move(name)), table_(std::move(table)) {
    for (auto b : kAllBases)
        for (auto c : kAllCases)
            if (surface(b, c).empty())
                throw ConfigError("profile '" + name_ + "' is missing the " +
                                  std::string(to_string(c)) + " surface of " + to_string(b));
    build_forms();
}

void SpellingProfile::build_forms() {
    forms_.clear();
    auto add = [&](const std::string& surface, BasePronoun b, PronounCase c) {
        std::string lower = to_lower(surface);
        for (auto& f : forms_) {
            if (f.surface == lower) {
                if (f.base != b)
                    throw ConfigError("profile '" + name_ + "': surface '" + lower +
                                      "' maps to two base pronouns");
                f.cases.add(c);
                return;
            }
        }
        forms_.push_back({lower, b, CaseSet{c}});
    };
    for (auto b : kAllBases)
        for (auto c : kAllCases) add(surface(b, c), b, c);
    // Both reflexive spellings of singular they are accepted on detection;
    // the table emits "themself".
    add("themselves", BasePronoun::They, PronounCase::Reflexive);
}

const SpellingProfile& SpellingProfile::misgendered_ruff() {
    static const SpellingProfile p("misgendered_ruff",
                                   make_table({"xe", "xem", "xyr", "xyrs", "xemself"}));
    return p;
}

const SpellingProfile& SpellingProfile::tango() {
    static const SpellingProfile p("tango", make_table({"xe", "xir", "xir", "xirs", "xirself"}));
    return p;
}

const SpellingProfile& SpellingProfile::by_name(const std::string& name) {
    if (name == "misgendered_ruff") return misgendered_ruff();
    if (name == "tango") return tango();
    throw ConfigError("unknown spelling profile: '" + name + "'");
}

SpellingProfile SpellingProfile::from_json_text(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("profile JSON parse error: ") + e.what());
    }
    if (!j.contains("name") || !j.contains("table"))
        throw ConfigError("profile JSON needs 'name' and 'table'");
    std::array<std::array<std::string, 5>, 4> table;
    for (auto b : kAllBases) {
        const char* bname = to_string(b);
        if (!j["table"].contains(bname))
            throw ConfigError(std::string("profile table is missing base '") + bname + "'");
        for (auto c : kAllCases) {
            const char* cname = to_string(c);
            if (!j["table"][bname].contains(cname))
                throw ConfigError(std::string("profile table is not total: missing ") + bname +
                                  "." + cname);
            table[static_cast<int>(b)][static_cast<int>(c)] =
                j["table"][bname][cname].get<std::string>();
        }
    }
    return SpellingProfile(j["name"].get<std::string>(), table);
}

std::string SpellingProfile::to_json_text() const {
    nlohmann::ordered_json j;
    j["name"] = name_;
    for (auto b : kAllBases)
        for (auto c : kAllCases) j["table"][to_string(b)][to_string(c)] = surface(b, c);
    return j.dump();
}

std::vector<PronounForm> SpellingProfile::forms_for_case(PronounCase c) const {
    std::vector<PronounForm> out;
    for (auto b : kAllBases) {
        auto f = find_form(surface(b, c));
        out.push_back(*f);
    }
    return out;
}

std::optional<PronounForm> SpellingProfile::find_form(const std::string& surface) const {
    std::string lower = to_lower(surface);
    for (const auto& f : forms_)
        if (f.surface == lower) return f;
    return std::nullopt;
}

BasePronoun SpellingProfile::resolve_base(const std::string& surface) const {
    auto f = find_form(surface);
    if (!f) throw ConfigError("surface '" + surface + "' is not in profile '" + name_ + "'");
    return f->base;
}

std::optional<PronounHit> first_pronoun(const std::string& text, const SpellingProfile& profile) {
    auto tokens = tokenize(text);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].kind != TokenKind::Word) continue;
        if (auto f = profile.find_form(tokens[i].surface)) return PronounHit{*f, i};
    }
    return std::nullopt;
}

}  // namespace mgm
