#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mgm/pronouns.hpp"

namespace mgm {

inline constexpr const char* kMaskLiteral = "[MASK]";

enum class TokenKind : uint8_t { Word, Punctuation, Mask };

// Tokens carry their source span so detokenization is byte-exact.
struct Token {
    std::string surface;
    size_t begin = 0;  // char offset into the source string
    size_t end = 0;    // one past the last char
    TokenKind kind = TokenKind::Word;
};

// Rule-based tokenizer: whitespace split, leading/trailing punctuation peeled
// one char at a time, internal slashes split (pronoun declarations), internal
// apostrophes kept ("xyr's"), the literal [MASK] kept as one mask token.
std::vector<Token> tokenize(const std::string& text);

// Splice per-token replacements back into the source text, preserving all
// inter-token bytes. `replacements[i]` empty means "keep token i".
std::string splice_tokens(const std::string& text, const std::vector<Token>& tokens,
                          const std::map<size_t, std::string>& replacements);

// Sentence spans as [begin, end) char ranges. A sentence ends at . ! ? when
// followed by whitespace and an uppercase letter (or end of text), with a
// small abbreviation stop-list.
struct SentenceSpan {
    size_t begin;
    size_t end;
};
std::vector<SentenceSpan> split_sentences(const std::string& text);

enum class Dataset : uint8_t { Misgendered, Ruff, TangoDerived, Custom };
const char* to_string(Dataset d);
Dataset dataset_from_string(const std::string& s);

enum class Setting : uint8_t { Native, PreMask, PostMask };
const char* to_string(Setting s);
Setting setting_from_string(const std::string& s);

using Metadata = std::map<std::string, std::string>;

// A templatic sequence with exactly one [MASK] slot of known grammatical
// case and a known gold base pronoun.
struct Template {
    std::string id;
    Dataset dataset = Dataset::Custom;
    std::string text;  // contains the literal [MASK] exactly once
    PronounCase mask_case = PronounCase::Nominative;
    BasePronoun gold_base = BasePronoun::He;
    std::string profile;  // spelling profile name
    Metadata metadata;
    // Present on templates derived from generations: full candidate sequence
    // per base pronoun (rewriting handles verb conjugation, so these are not
    // literal mask substitutions).
    std::optional<std::map<BasePronoun, std::string>> renderings;

    std::vector<Token> tokens() const;  // tokenization of `text`
    size_t mask_token_index() const;    // index of the mask token
    size_t mask_char_offset() const;    // char offset of "[MASK]"
};

struct Context {
    std::string id;
    Dataset dataset = Dataset::Custom;
    std::string text;
    BasePronoun gold_base = BasePronoun::He;
    std::string profile;
    Setting setting = Setting::Native;
    Metadata metadata;
};

struct DecodeParams {
    int top_k = 50;
    double top_p = 0.95;
    int max_tokens = 50;
    int num_samples = 5;  // R
    int beams = 1;        // single beam, always
    double temperature = 1.0;
    uint64_t seed = 0;
};

struct GenerationRecord {
    std::string context_id;
    int sample_index = 0;  // 0-based, < R
    std::string text;
    std::string model_id;
    DecodeParams decode;
    uint64_t seed = 0;  // derived per-sample seed actually used
};

enum class AnnotationLabel : uint8_t { Correct, Misgendering, NoPronoun };
const char* to_string(AnnotationLabel l);
AnnotationLabel annotation_label_from_string(const std::string& s);

struct AnnotationRecord {
    std::string context_id;
    int sample_index = 0;
    AnnotationLabel label = AnnotationLabel::Correct;
    bool extraneous_gendered = false;
    std::string notes;
    std::string annotator_id;
};

// JSONL I/O. Loaders validate each line and report errors with the line
// number; duplicate ids are rejected. Writers emit one record per line with
// stable field order, UTF-8, LF endings.
std::vector<Template> load_templates(const std::string& path);
std::vector<Context> load_contexts(const std::string& path);
std::vector<GenerationRecord> load_generations(const std::string& path);
std::vector<AnnotationRecord> load_annotations(const std::string& path);

void write_templates(const std::string& path, const std::vector<Template>& records);
void write_contexts(const std::string& path, const std::vector<Context>& records);
void write_generations(const std::string& path, const std::vector<GenerationRecord>& records);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records,
                       bool append = false);

// Single-record JSON codecs (used by the JSONL layer and by tests).
std::string template_to_json(const Template& t);
Template template_from_json(const std::string& json_text);
std::string context_to_json(const Context& c);
Context context_from_json(const std::string& json_text);
std::string generation_to_json(const GenerationRecord& g);
GenerationRecord generation_from_json(const std::string& json_text);
std::string annotation_to_json(const AnnotationRecord& a);
AnnotationRecord annotation_from_json(const std::string& json_text);

// Instances flagged with metadata has_distractor=true cannot be evaluated by
// the first-pronoun heuristic; automatic pipelines admit only the rest.
bool has_distractor(const Metadata& m);
template <typename Rec>
std::vector<Rec> without_distractors(const std::vector<Rec>& records) {
    std::vector<Rec> out;
    for (const auto& r : records)
        if (!has_distractor(r.metadata)) out.push_back(r);
    return out;
}

}  // namespace mgm
