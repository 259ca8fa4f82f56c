#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mgm/corpus.hpp"
#include "mgm/eval.hpp"
#include "mgm/metrics.hpp"

namespace mgm {

// The three-way annotation schema, applied mechanically: any pronoun of the
// wrong base anywhere in the completion is Misgendering (it overrides the
// other categories); otherwise any pronoun of the gold base is Correct;
// otherwise NoPronoun. Declaration sentences are skipped like in eval. The
// stepper shows this as a suggestion; humans can overrule it.
AnnotationLabel heuristic_label(const Context& context, const GenerationRecord& generation,
                                const SpellingProfile& profile);

// Binary collapse for validating the automatic heuristic: only Misgendering
// counts as misgendering (returns 0); Correct and NoPronoun return 1.
int collapse_to_binary(AnnotationLabel label);

struct AnnotateOptions {
    std::string annotator_id;
    uint64_t seed = 0;
    // When > 0, annotate at most this many generations per
    // (gold pronoun x setting) cell, chosen by seeded shuffle.
    int sample_per_cell = 0;
};

// Terminal stepper: shows context + generation, reads single-key commands
// per line (1=correct, 2=misgendering, 3=no pronoun, g=toggle extraneous,
// n=note, s=skip, q=quit). Appends AnnotationRecords to `out_path` one by
// one, so an interrupted session is valid up to the last completed item;
// rerunning skips already-labeled items. Returns the number of new records.
int run_annotation_session(std::istream& in, std::ostream& ui, const std::vector<Context>& contexts,
                           const std::vector<GenerationRecord>& generations,
                           const std::string& out_path, const AnnotateOptions& options);

struct HumanHumanAgreement {
    int n = 0;
    double label_agreement = 0.0;       // raw agreement on the 3-way label
    double extraneous_agreement = 0.0;  // raw agreement on the extraneous flag
};

// Overlapping (context, sample) pairs annotated by both raters.
HumanHumanAgreement validate_human_human(const std::vector<AnnotationRecord>& a,
                                         const std::vector<AnnotationRecord>& b);

// Collapse annotations to binary and compare with automatic generation-based
// outcomes on overlapping keys.
AgreementReport validate_human_automatic(const std::vector<AnnotationRecord>& annotations,
                                         const std::vector<EvalOutcome>& outcomes);

}  // namespace mgm
