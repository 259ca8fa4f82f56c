#include "mgm/corpus.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <set>

#include "mgm/errors.hpp"
#include "mgm/util.hpp"
#include "json.hpp"

namespace mgm {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// ASCII punctuation only; multibyte UTF-8 stays word content.
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

bool starts_with_mask(const std::string& s, size_t i) {
    return s.compare(i, std::strlen(kMaskLiteral), kMaskLiteral) == 0;
}

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> out;
    const size_t n = text.size();
    size_t i = 0;
    auto emit = [&](size_t b, size_t e, TokenKind k) {
        out.push_back(Token{text.substr(b, e - b), b, e, k});
    };
    while (i < n) {
        if (is_space(text[i])) {
            ++i;
            continue;
        }
        if (starts_with_mask(text, i)) {
            size_t e = i + std::strlen(kMaskLiteral);
            emit(i, e, TokenKind::Mask);
            i = e;
            continue;
        }
        if (is_punct(text[i])) {
            emit(i, i + 1, TokenKind::Punctuation);
            ++i;
            continue;
        }
        // Word: run until whitespace, '/', or a mask literal. Internal
        // apostrophes and periods stay inside the token.
        size_t b = i;
        while (i < n && !is_space(text[i]) && text[i] != '/' && !starts_with_mask(text, i)) ++i;
        size_t e = i;
        // Peel trailing punctuation back off the word.
        size_t w = e;
        while (w > b && is_punct(text[w - 1])) --w;
        if (w == b) {
            // all punctuation after all: emit char by char
            for (size_t p = b; p < e; ++p) emit(p, p + 1, TokenKind::Punctuation);
            continue;
        }
        emit(b, w, TokenKind::Word);
        for (size_t p = w; p < e; ++p) emit(p, p + 1, TokenKind::Punctuation);
    }
    return out;
}

std::string splice_tokens(const std::string& text, const std::vector<Token>& tokens,
                          const std::map<size_t, std::string>& replacements) {
    std::string out;
    out.reserve(text.size() + 16);
    size_t pos = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        out.append(text, pos, tokens[i].begin - pos);
        auto it = replacements.find(i);
        out += (it != replacements.end()) ? it->second : tokens[i].surface;
        pos = tokens[i].end;
    }
    out.append(text, pos, text.size() - pos);
    return out;
}

namespace {

const std::set<std::string>& abbreviation_stoplist() {
    static const std::set<std::string> s = {"mr",  "mrs", "ms", "dr", "prof", "st", "jr",
                                            "sr",  "vs",  "etc", "eg", "ie",  "no", "al"};
    return s;
}

bool is_closing_quote(char c) { return c == '"' || c == '\''; }

bool abbreviation_before(const std::string& text, size_t dot) {
    size_t e = dot;
    size_t b = e;
    while (b > 0 && std::isalpha(static_cast<unsigned char>(text[b - 1]))) --b;
    if (b == e) return false;
    std::string word = to_lower(std::string_view(text).substr(b, e - b));
    if (word.size() == 1 && is_ascii_upper(text[b])) return true;  // initials: "J. K."
    return abbreviation_stoplist().count(word) > 0;
}

}  // namespace

std::vector<SentenceSpan> split_sentences(const std::string& text) {
    std::vector<SentenceSpan> out;
    const size_t n = text.size();
    size_t begin = 0;
    while (begin < n && is_space(text[begin])) ++begin;
    for (size_t i = begin; i < n; ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (c == '.' && abbreviation_before(text, i)) continue;
        size_t j = i + 1;
        while (j < n && is_closing_quote(text[j])) ++j;
        if (j >= n) {
            out.push_back({begin, j});
            begin = j;
            i = j;
            continue;
        }
        if (!is_space(text[j])) continue;
        size_t k = j;
        while (k < n && is_space(text[k])) ++k;
        if (k < n && !is_ascii_upper(text[k])) continue;
        out.push_back({begin, j});
        begin = k;
        i = j - 1;
    }
    if (begin < n) out.push_back({begin, n});
    return out;
}

const char* to_string(Dataset d) {
    switch (d) {
        case Dataset::Misgendered: return "misgendered";
        case Dataset::Ruff: return "ruff";
        case Dataset::TangoDerived: return "tango_derived";
        case Dataset::Custom: return "custom";
    }
    return "?";
}

Dataset dataset_from_string(const std::string& s) {
    if (s == "misgendered") return Dataset::Misgendered;
    if (s == "ruff") return Dataset::Ruff;
    if (s == "tango_derived") return Dataset::TangoDerived;
    if (s == "custom") return Dataset::Custom;
    throw ValidationError("unknown dataset: '" + s + "'");
}

const char* to_string(Setting s) {
    switch (s) {
        case Setting::Native: return "native";
        case Setting::PreMask: return "pre_mask";
        case Setting::PostMask: return "post_mask";
    }
    return "?";
}

Setting setting_from_string(const std::string& s) {
    if (s == "native") return Setting::Native;
    if (s == "pre_mask") return Setting::PreMask;
    if (s == "post_mask") return Setting::PostMask;
    throw ValidationError("unknown setting: '" + s + "'");
}

const char* to_string(AnnotationLabel l) {
    switch (l) {
        case AnnotationLabel::Correct: return "correct";
        case AnnotationLabel::Misgendering: return "misgendering";
        case AnnotationLabel::NoPronoun: return "no_pronoun";
    }
    return "?";
}

AnnotationLabel annotation_label_from_string(const std::string& s) {
    if (s == "correct") return AnnotationLabel::Correct;
    if (s == "misgendering") return AnnotationLabel::Misgendering;
    if (s == "no_pronoun") return AnnotationLabel::NoPronoun;
    throw ValidationError("unknown annotation label: '" + s + "'");
}

std::vector<Token> Template::tokens() const { return tokenize(text); }

size_t Template::mask_token_index() const {
    auto toks = tokens();
    for (size_t i = 0; i < toks.size(); ++i)
        if (toks[i].kind == TokenKind::Mask) return i;
    throw ContractError("template '" + id + "' has no mask token");
}

size_t Template::mask_char_offset() const {
    size_t pos = text.find(kMaskLiteral);
    if (pos == std::string::npos) throw ContractError("template '" + id + "' has no mask token");
    return pos;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string require_string(const json& j, const char* field) {
    if (!j.contains(field)) throw ValidationError(std::string("missing field '") + field + "'");
    if (!j[field].is_string())
        throw ValidationError(std::string("field '") + field + "' must be a string");
    return j[field].get<std::string>();
}

Metadata metadata_from(const json& j) {
    Metadata m;
    if (!j.contains("metadata")) return m;
    if (!j["metadata"].is_object()) throw ValidationError("field 'metadata' must be an object");
    for (auto& [k, v] : j["metadata"].items()) {
        if (v.is_string())
            m[k] = v.get<std::string>();
        else
            m[k] = v.dump();
    }
    return m;
}

ordered_json metadata_to(const Metadata& m) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

size_t count_masks(const std::string& text) {
    size_t count = 0, pos = 0;
    while ((pos = text.find(kMaskLiteral, pos)) != std::string::npos) {
        ++count;
        pos += std::strlen(kMaskLiteral);
    }
    return count;
}

void check_gold_form_present(const std::string& text, BasePronoun gold,
                             const std::string& profile_name, const std::string& id) {
    // Only enforceable when the profile is a built-in we can resolve here.
    const SpellingProfile* p = nullptr;
    if (profile_name == "misgendered_ruff")
        p = &SpellingProfile::misgendered_ruff();
    else if (profile_name == "tango")
        p = &SpellingProfile::tango();
    if (!p) return;
    for (const auto& tok : tokenize(text)) {
        if (tok.kind != TokenKind::Word) continue;
        if (auto f = p->find_form(tok.surface); f && f->base == gold) return;
    }
    throw ValidationError("context '" + id + "' surfaces no form of its gold base pronoun");
}

}  // namespace

Template template_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    Template t;
    t.id = require_string(j, "id");
    t.dataset = dataset_from_string(require_string(j, "dataset"));
    t.text = require_string(j, "text");
    t.mask_case = case_from_string(require_string(j, "mask_case"));
    t.gold_base = base_from_string(require_string(j, "gold_base"));
    t.profile = require_string(j, "profile");
    t.metadata = metadata_from(j);
    if (count_masks(t.text) != 1)
        throw ValidationError("template '" + t.id + "' must contain exactly one " + kMaskLiteral);
    if (j.contains("renderings")) {
        std::map<BasePronoun, std::string> r;
        for (auto& [k, v] : j["renderings"].items()) r[base_from_string(k)] = v.get<std::string>();
        if (r.size() != kAllBases.size())
            throw ValidationError("template '" + t.id + "' renderings must cover all base pronouns");
        t.renderings = std::move(r);
    }
    return t;
}

std::string template_to_json(const Template& t) {
    ordered_json j;
    j["id"] = t.id;
    j["dataset"] = to_string(t.dataset);
    j["text"] = t.text;
    j["mask_case"] = to_string(t.mask_case);
    j["gold_base"] = to_string(t.gold_base);
    j["profile"] = t.profile;
    j["metadata"] = metadata_to(t.metadata);
    if (t.renderings) {
        ordered_json r = ordered_json::object();
        for (auto b : kAllBases) r[to_string(b)] = t.renderings->at(b);
        j["renderings"] = r;
    }
    return j.dump();
}

Context context_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    Context c;
    c.id = require_string(j, "id");
    c.dataset = dataset_from_string(require_string(j, "dataset"));
    c.text = require_string(j, "text");
    c.gold_base = base_from_string(require_string(j, "gold_base"));
    c.profile = require_string(j, "profile");
    c.setting = setting_from_string(require_string(j, "setting"));
    c.metadata = metadata_from(j);
    if (c.setting != Setting::PreMask)
        check_gold_form_present(c.text, c.gold_base, c.profile, c.id);
    return c;
}

std::string context_to_json(const Context& c) {
    ordered_json j;
    j["id"] = c.id;
    j["dataset"] = to_string(c.dataset);
    j["text"] = c.text;
    j["gold_base"] = to_string(c.gold_base);
    j["profile"] = c.profile;
    j["setting"] = to_string(c.setting);
    j["metadata"] = metadata_to(c.metadata);
    return j.dump();
}

GenerationRecord generation_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    GenerationRecord g;
    g.context_id = require_string(j, "context_id");
    if (!j.contains("sample_index")) throw ValidationError("missing field 'sample_index'");
    g.sample_index = j["sample_index"].get<int>();
    g.text = require_string(j, "text");
    g.model_id = require_string(j, "model_id");
    if (j.contains("decode")) {
        const auto& d = j["decode"];
        if (d.contains("top_k")) g.decode.top_k = d["top_k"].get<int>();
        if (d.contains("top_p")) g.decode.top_p = d["top_p"].get<double>();
        if (d.contains("max_tokens")) g.decode.max_tokens = d["max_tokens"].get<int>();
        if (d.contains("num_samples")) g.decode.num_samples = d["num_samples"].get<int>();
        if (d.contains("beams")) g.decode.beams = d["beams"].get<int>();
        if (d.contains("temperature")) g.decode.temperature = d["temperature"].get<double>();
        if (d.contains("seed")) g.decode.seed = d["seed"].get<uint64_t>();
    }
    if (j.contains("seed")) g.seed = j["seed"].get<uint64_t>();
    if (g.sample_index < 0 || g.sample_index >= g.decode.num_samples)
        throw ValidationError("generation for '" + g.context_id +
                              "' has sample_index outside [0, num_samples)");
    return g;
}

std::string generation_to_json(const GenerationRecord& g) {
    ordered_json j;
    j["context_id"] = g.context_id;
    j["sample_index"] = g.sample_index;
    j["text"] = g.text;
    j["model_id"] = g.model_id;
    j["decode"] = {{"top_k", g.decode.top_k},
                   {"top_p", g.decode.top_p},
                   {"max_tokens", g.decode.max_tokens},
                   {"num_samples", g.decode.num_samples},
                   {"beams", g.decode.beams},
                   {"temperature", g.decode.temperature},
                   {"seed", g.decode.seed}};
    j["seed"] = g.seed;
    return j.dump();
}

AnnotationRecord annotation_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    AnnotationRecord a;
    a.context_id = require_string(j, "context_id");
    if (!j.contains("sample_index")) throw ValidationError("missing field 'sample_index'");
    a.sample_index = j["sample_index"].get<int>();
    a.label = annotation_label_from_string(require_string(j, "label"));
    if (j.contains("extraneous_gendered")) a.extraneous_gendered = j["extraneous_gendered"].get<bool>();
    if (j.contains("notes")) a.notes = j["notes"].get<std::string>();
    a.annotator_id = require_string(j, "annotator_id");
    return a;
}

std::string annotation_to_json(const AnnotationRecord& a) {
    ordered_json j;
    j["context_id"] = a.context_id;
    j["sample_index"] = a.sample_index;
    j["label"] = to_string(a.label);
    j["extraneous_gendered"] = a.extraneous_gendered;
    j["notes"] = a.notes;
    j["annotator_id"] = a.annotator_id;
    return j.dump();
}

namespace {

template <typename Rec, typename ParseFn, typename KeyFn>
std::vector<Rec> load_jsonl(const std::string& path, ParseFn parse, KeyFn key) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<Rec> out;
    std::set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            Rec r = parse(line);
            std::string k = key(r);
            if (!seen.insert(k).second)
                throw ValidationError("duplicate id '" + k + "'");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed JSON: " +
                                  e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <typename Rec, typename DumpFn>
void write_jsonl(const std::string& path, const std::vector<Rec>& records, DumpFn dump,
                 bool append = false) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    for (const auto& r : records) out << dump(r) << '\n';
    if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace

std::vector<Template> load_templates(const std::string& path) {
    return load_jsonl<Template>(
        path, [](const std::string& l) { return template_from_json(l); },
        [](const Template& t) { return t.id; });
}

std::vector<Context> load_contexts(const std::string& path) {
    return load_jsonl<Context>(
        path, [](const std::string& l) { return context_from_json(l); },
        [](const Context& c) { return c.id; });
}

std::vector<GenerationRecord> load_generations(const std::string& path) {
    return load_jsonl<GenerationRecord>(
        path, [](const std::string& l) { return generation_from_json(l); },
        [](const GenerationRecord& g) {
            return g.context_id + "#" + std::to_string(g.sample_index);
        });
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
    return load_jsonl<AnnotationRecord>(
        path, [](const std::string& l) { return annotation_from_json(l); },
        [](const AnnotationRecord& a) {
            return a.context_id + "#" + std::to_string(a.sample_index) + "#" + a.annotator_id;
        });
}

void write_templates(const std::string& path, const std::vector<Template>& records) {
    write_jsonl(path, records, [](const Template& t) { return template_to_json(t); });
}

void write_contexts(const std::string& path, const std::vector<Context>& records) {
    write_jsonl(path, records, [](const Context& c) { return context_to_json(c); });
}

void write_generations(const std::string& path, const std::vector<GenerationRecord>& records) {
    write_jsonl(path, records, [](const GenerationRecord& g) { return generation_to_json(g); });
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records,
                       bool append) {
    write_jsonl(path, records, [](const AnnotationRecord& a) { return annotation_to_json(a); },
                append);
}

bool has_distractor(const Metadata& m) {
    auto it = m.find("has_distractor");
    if (it == m.end()) return false;
    std::string v = to_lower(it->second);
    return v == "true" || v == "1" || v == "yes";
}

}  // namespace mgm
