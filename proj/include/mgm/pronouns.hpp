#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mgm {

// The closed set of base third-person singular pronouns, named by their
// nominative form. Order is fixed and used for deterministic candidate lists.
enum class BasePronoun : uint8_t { He = 0, She = 1, They = 2, Xe = 3 };
inline constexpr std::array<BasePronoun, 4> kAllBases = {
    BasePronoun::He, BasePronoun::She, BasePronoun::They, BasePronoun::Xe};

enum class PronounCase : uint8_t {
    Nominative = 0,
    Accusative = 1,
    PossessiveDependent = 2,
    PossessiveIndependent = 3,
    Reflexive = 4,
};
inline constexpr std::array<PronounCase, 5> kAllCases = {
    PronounCase::Nominative, PronounCase::Accusative, PronounCase::PossessiveDependent,
    PronounCase::PossessiveIndependent, PronounCase::Reflexive};

const char* to_string(BasePronoun b);
const char* to_string(PronounCase c);      // short keys: nom, acc, pos_dep, pos_ind, refl
BasePronoun base_from_string(const std::string& s);
PronounCase case_from_string(const std::string& s);

// Small set-of-cases representation; a surface like "her" carries
// {Accusative, PossessiveDependent}.
class CaseSet {
public:
    CaseSet() = default;
    CaseSet(std::initializer_list<PronounCase> cs) {
        for (auto c : cs) add(c);
    }
    void add(PronounCase c) { bits_ |= mask(c); }
    bool contains(PronounCase c) const { return bits_ & mask(c); }
    bool singleton() const { return bits_ && !(bits_ & (bits_ - 1)); }
    int size() const;
    std::vector<PronounCase> values() const;
    bool operator==(const CaseSet&) const = default;

private:
    static uint8_t mask(PronounCase c) { return static_cast<uint8_t>(1u << static_cast<int>(c)); }
    uint8_t bits_ = 0;
};

// One entry of a profile's surface set Omega: a lowercase surface string,
// the unique base pronoun it resolves to, and every case it can fill.
struct PronounForm {
    std::string surface;
    BasePronoun base;
    CaseSet cases;
};

// A spelling convention: a total (base x case) -> surface table. The two
// built-ins differ only in how they spell the cases of xe.
class SpellingProfile {
public:
    SpellingProfile(std::string name,
                    std::array<std::array<std::string, 5>, 4> table);

    // misgendered_ruff: xe/xem/xyr/xyrs/xemself; tango: xe/xir/xir/xirs/xirself
    static const SpellingProfile& misgendered_ruff();
    static const SpellingProfile& tango();
    static const SpellingProfile& by_name(const std::string& name);  // built-ins only

    // {"name": ..., "table": {"he": {"nom": "he", ...}, ...}}; a non-total
    // table is a configuration error.
    static SpellingProfile from_json_text(const std::string& json_text);
    std::string to_json_text() const;

    const std::string& name() const { return name_; }
    const std::string& surface(BasePronoun b, PronounCase c) const {
        return table_[static_cast<int>(b)][static_cast<int>(c)];
    }

    // Omega: every distinct surface with its base and collapsed case set.
    // Includes the detection-only alias "themselves" alongside "themself".
    const std::vector<PronounForm>& surface_set() const { return forms_; }

    // The minimal contrast candidates for a mask of case c: exactly one form
    // per base pronoun, in kAllBases order.
    std::vector<PronounForm> forms_for_case(PronounCase c) const;

    // Lookup by surface (caller lowercases via find_form's own fold).
    std::optional<PronounForm> find_form(const std::string& surface) const;

    // Base pronoun of a surface; throws ConfigError when the surface is not
    // in Omega.
    BasePronoun resolve_base(const std::string& surface) const;

private:
    void build_forms();
    std::string name_;
    std::array<std::array<std::string, 5>, 4> table_;
    std::vector<PronounForm> forms_;
};

// Earliest token of `text` whose case-folded surface is in the profile's
// Omega, with its index into the corpus tokenization. Substrings of longer
// tokens never match. Absence is a normal outcome.
struct PronounHit {
    PronounForm form;
    size_t token_index;
};
std::optional<PronounHit> first_pronoun(const std::string& text, const SpellingProfile& profile);

}  // namespace mgm
