#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mgm/corpus.hpp"
#include "mgm/model_client.hpp"
#include "mgm/pronouns.hpp"

namespace mgm {

// Closed-form disagreement probabilities between probability- and
// generation-based evaluation, exact under two assumptions the module
// enforces: whole-word tokens (the mask must be whitespace-delimited) and
// unfiltered single-beam sampling. Requires a backend that exposes full
// next-token distributions (the mock); remote backends raise a capability
// error.

enum class DivergenceSetting : uint8_t { PreMask, PostMask, GenToProb };
const char* to_string(DivergenceSetting s);

struct DivergenceResult {
    DivergenceSetting setting = DivergenceSetting::PreMask;
    // delta: probability that one sampled mask-position pronoun differs from
    // the probability-based prediction p*. delta_star: the same with the
    // best-case p (mode of the conditional); neither bounds the other.
    double delta = 0.0;
    double delta_star = 0.0;
    BasePronoun p_star = BasePronoun::He;
    std::map<BasePronoun, double> candidate_mass;
    bool tie = false;  // p* argmax was tied; broken lexicographically
};

// 1 - max(mass)/sum(mass); invariant under rescaling all masses.
double delta_star_from_masses(const std::map<BasePronoun, double>& mass);

// argmax over candidates of Pr(p | prefix) * Pr(suffix | prefix, p),
// computed as the full-sequence probability argmax.
BasePronoun p_star(const Template& t, const ModelClient& model);

DivergenceResult delta_pre(const Template& t, const ModelClient& model);
DivergenceResult delta_post(const Template& t, const ModelClient& model);
DivergenceResult delta_gen_to_prob(const Context& context, const GenerationRecord& generation,
                                   const ModelClient& model);

struct MonteCarloResult {
    double estimate = 0.0;        // disagreements / qualifying trials
    double unconditioned = 0.0;   // disagreements / all trials
    uint64_t qualifying = 0;
    uint64_t trials = 0;
};

// Empirical oracle: sample the mask-position token (no top-k/top-p, single
// beam); a trial qualifies when a candidate pronoun lands on the slot, and
// disagrees when it is not p*. Chunked with derived seeds, so the estimate
// is identical for any worker count.
MonteCarloResult monte_carlo_disagreement(const Template& t, const ModelClient& model,
                                          uint64_t trials, uint64_t seed = 0, int workers = 1,
                                          DivergenceSetting setting = DivergenceSetting::PreMask);

std::string divergence_to_json(const DivergenceResult& r);

}  // namespace mgm
