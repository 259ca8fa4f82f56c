#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mgm/corpus.hpp"

namespace mgm {

struct TokenScore {
    std::string text;
    // Natural-log conditional probability; absent when the backend cannot
    // provide it (most servers cannot echo the first token's conditional).
    std::optional<double> logprob;
};

struct ScoreResult {
    std::vector<TokenScore> tokens;
    double total_logprob = 0.0;  // sum over available positions
    int token_count = 0;         // number of available positions
};

// Fills totals from the per-token entries.
ScoreResult make_score_result(std::vector<TokenScore> tokens);

// exp(-total_logprob / token_count); per-token normalization keeps argmin
// comparisons fair across candidates of different lengths.
double perplexity(const ScoreResult& score);

void validate(const DecodeParams& params);

// Scoring/generation backend. Implementations must be safe for concurrent
// callers.
class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual std::string model_id() const = 0;

    // Deterministic per-token log-probabilities of `text` under the model's
    // own tokenization. Empty text is a contract violation.
    virtual ScoreResult score(const std::string& text) const = 0;

    struct Sample {
        std::string text;
        uint64_t seed = 0;  // derived seed actually used for this sample
    };
    // R samples, top-k then nucleus filtered; sample i uses
    // derive_seed(params.seed, prompt, i), so any evaluation order yields the
    // same outputs.
    virtual std::vector<Sample> generate(const std::string& prompt,
                                         const DecodeParams& params) const = 0;

    // Exact next-token conditional. Remote backends decline.
    virtual std::map<std::string, double> next_token_distribution(
        const std::string& prefix, std::vector<std::string>* diagnostics = nullptr) const;
};

// Client for the wire protocol:
//   POST /v1/score    {"model","text"} -> {"tokens":[{"text","logprob"|null}]}
//   POST /v1/generate {"model","prompt","top_k","top_p","max_tokens","n",
//                      "temperature","seed"} -> {"completions":[{"text"}]}
struct HttpClientConfig {
    std::string endpoint;  // e.g. http://127.0.0.1:8080
    std::string model;
    int timeout_ms = 30000;

    // Reads MM_ENDPOINT, MM_MODEL, MM_TIMEOUT_MS.
    static HttpClientConfig from_env();
};

class HttpModelClient : public ModelClient {
public:
    explicit HttpModelClient(HttpClientConfig config);
    std::string model_id() const override { return config_.model; }
    ScoreResult score(const std::string& text) const override;
    std::vector<Sample> generate(const std::string& prompt,
                                 const DecodeParams& params) const override;

private:
    HttpClientConfig config_;
};

// Serves any ModelClient behind the wire protocol; a shim like this in front
// of an inference engine is all a real deployment needs.
class ModelServer {
public:
    explicit ModelServer(std::shared_ptr<const ModelClient> backend);
    ~ModelServer();
    ModelServer(const ModelServer&) = delete;
    ModelServer& operator=(const ModelServer&) = delete;

    // Binds and serves on a background thread; port 0 picks a free port.
    // Returns the bound port.
    int listen_async(const std::string& host, int port);
    void wait();  // blocks until stop() or process signal
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mgm
