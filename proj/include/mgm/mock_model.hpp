#pragma once

#include <map>
#include <string>
#include <vector>

#include "mgm/model_client.hpp"

namespace mgm {

// Deterministic in-process n-gram model for desk-scale runs. Tokens are
// whitespace-split words; conditionals are keyed by the joined context
// suffix (longest listed suffix wins, up to order-1 tokens), with a uniform
// fallback for everything else.
//
// Spec file:
//   {"name": "mock-a", "vocabulary": ["a","b"], "order": 2,
//    "conditionals": {"a": [0.25, 0.75], "b": {"a": 0.5, "b": 0.5}}}
// Vectors align with the vocabulary; object form is sparse (missing = 0).
// Every distribution must sum to 1 within 1e-9.
class MockModel : public ModelClient {
public:
    static MockModel from_json_text(const std::string& json_text);
    static MockModel from_file(const std::string& path);

    std::string model_id() const override { return name_; }
    const std::vector<std::string>& vocabulary() const { return vocab_; }
    int order() const { return order_; }

    ScoreResult score(const std::string& text) const override;
    std::vector<Sample> generate(const std::string& prompt,
                                 const DecodeParams& params) const override;
    std::map<std::string, double> next_token_distribution(
        const std::string& prefix, std::vector<std::string>* diagnostics = nullptr) const override;

    // The conditional for an already-tokenized context, aligned with the
    // vocabulary. Used by divergence, which needs raw vectors.
    const std::vector<double>& conditional(const std::vector<std::string>& context_tokens) const;

    static std::vector<std::string> split_tokens(const std::string& text);

private:
    MockModel() = default;
    std::string name_ = "mock";
    std::vector<std::string> vocab_;
    std::map<std::string, size_t> vocab_index_;
    int order_ = 1;
    std::map<std::string, std::vector<double>> conditionals_;
    std::vector<double> fallback_;  // uniform
};

}  // namespace mgm
