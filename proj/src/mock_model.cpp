#include "mgm/mock_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mgm/errors.hpp"
#include "mgm/util.hpp"
#include "json.hpp"

namespace mgm {

std::vector<std::string> MockModel::split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

namespace {

void validate_distribution(const std::vector<double>& p, const std::string& what) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) throw ConfigError(what + ": negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError(what + ": probabilities sum to " + std::to_string(sum) + ", not 1");
}

}  // namespace

MockModel MockModel::from_json_text(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mock spec parse error: ") + e.what());
    }
    MockModel m;
    if (j.contains("name")) m.name_ = j["name"].get<std::string>();
    if (!j.contains("vocabulary") || !j["vocabulary"].is_array() || j["vocabulary"].empty())
        throw ConfigError("mock spec needs a non-empty 'vocabulary' array");
    for (auto& v : j["vocabulary"]) {
        std::string tok = v.get<std::string>();
        if (!m.vocab_index_.emplace(tok, m.vocab_.size()).second)
            throw ConfigError("mock spec vocabulary repeats token '" + tok + "'");
        m.vocab_.push_back(tok);
    }
    m.order_ = j.value("order", 1);
    if (m.order_ < 1) throw ConfigError("mock spec order must be >= 1");
    if (j.contains("conditionals")) {
        for (auto& [ctx, dist] : j["conditionals"].items()) {
            std::vector<double> p(m.vocab_.size(), 0.0);
            if (dist.is_array()) {
                if (dist.size() != m.vocab_.size())
                    throw ConfigError("conditional for '" + ctx +
                                      "' has wrong length (expected vocabulary size)");
                for (size_t i = 0; i < p.size(); ++i) p[i] = dist[i].get<double>();
            } else if (dist.is_object()) {
                for (auto& [tok, prob] : dist.items()) {
                    auto it = m.vocab_index_.find(tok);
                    if (it == m.vocab_index_.end())
                        throw ConfigError("conditional for '" + ctx + "' names unknown token '" +
                                          tok + "'");
                    p[it->second] = prob.get<double>();
                }
            } else {
                throw ConfigError("conditional for '" + ctx + "' must be an array or object");
            }
            validate_distribution(p, "conditional for '" + ctx + "'");
            m.conditionals_[ctx] = std::move(p);
        }
    }
    m.fallback_.assign(m.vocab_.size(), 1.0 / static_cast<double>(m.vocab_.size()));
    return m;
}

MockModel MockModel::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mock spec '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

const std::vector<double>& MockModel::conditional(
    const std::vector<std::string>& context_tokens) const {
    size_t max_len = std::min<size_t>(context_tokens.size(), static_cast<size_t>(order_ - 1));
    for (size_t len = max_len; len > 0; --len) {
        std::string key;
        for (size_t i = context_tokens.size() - len; i < context_tokens.size(); ++i) {
            if (!key.empty()) key += ' ';
            key += context_tokens[i];
        }
        if (auto it = conditionals_.find(key); it != conditionals_.end()) return it->second;
    }
    // "" is the sequence-start conditional, not a default for unmatched
    // contexts; those get the uniform fallback.
    if (context_tokens.empty())
        if (auto it = conditionals_.find(""); it != conditionals_.end()) return it->second;
    return fallback_;
}

ScoreResult MockModel::score(const std::string& text) const {
    if (text.empty()) throw ContractError("score: text must be non-empty");
    auto tokens = split_tokens(text);
    if (tokens.empty()) throw ContractError("score: text has no tokens");
    std::vector<TokenScore> scored;
    std::vector<std::string> context;
    for (const auto& tok : tokens) {
        const auto& dist = conditional(context);
        auto it = vocab_index_.find(tok);
        double p = (it == vocab_index_.end()) ? 0.0 : dist[it->second];
        scored.push_back({tok, std::log(p)});  // log(0) = -inf for out-of-vocab
        context.push_back(tok);
    }
    return make_score_result(std::move(scored));
}

std::map<std::string, double> MockModel::next_token_distribution(
    const std::string& prefix, std::vector<std::string>* diagnostics) const {
    auto tokens = split_tokens(prefix);
    if (diagnostics)
        for (const auto& tok : tokens)
            if (!vocab_index_.count(tok))
                diagnostics->push_back("prefix token '" + tok + "' is out of vocabulary");
    const auto& dist = conditional(tokens);
    std::map<std::string, double> out;
    for (size_t i = 0; i < vocab_.size(); ++i) out[vocab_[i]] = dist[i];
    return out;
}

std::vector<ModelClient::Sample> MockModel::generate(const std::string& prompt,
                                                     const DecodeParams& params) const {
    validate(params);
    std::vector<Sample> out;
    out.reserve(params.num_samples);
    auto prompt_tokens = split_tokens(prompt);
    for (int s = 0; s < params.num_samples; ++s) {
        uint64_t seed = derive_seed(params.seed, prompt, static_cast<uint64_t>(s));
        Rng rng(seed);
        std::vector<std::string> context = prompt_tokens;
        std::string text;
        for (int step = 0; step < params.max_tokens; ++step) {
            const auto& dist = conditional(context);
            // temperature first, then top-k, then nucleus, then renormalize
            std::vector<double> p(dist);
            if (params.temperature != 1.0) {
                double inv_t = 1.0 / params.temperature;
                for (double& v : p) v = (v > 0.0) ? std::pow(v, inv_t) : 0.0;
            }
            std::vector<size_t> order(p.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](size_t a, size_t b) { return p[a] > p[b]; });
            size_t keep = std::min<size_t>(order.size(), static_cast<size_t>(params.top_k));
            double total = 0.0;
            for (size_t i = 0; i < keep; ++i) total += p[order[i]];
            if (params.top_p < 1.0 && total > 0.0) {
                double mass = 0.0;
                size_t nucleus = keep;
                for (size_t i = 0; i < keep; ++i) {
                    mass += p[order[i]] / total;
                    if (mass >= params.top_p) {
                        nucleus = i + 1;
                        break;
                    }
                }
                keep = nucleus;
            }
            double norm = 0.0;
            for (size_t i = 0; i < keep; ++i) norm += p[order[i]];
            if (norm <= 0.0) throw ConfigError("mock model: empty filtered distribution");
            double u = rng.next_double() * norm;
            size_t chosen = order[keep - 1];
            double acc = 0.0;
            for (size_t i = 0; i < keep; ++i) {
                acc += p[order[i]];
                if (u < acc) {
                    chosen = order[i];
                    break;
                }
            }
            const std::string& tok = vocab_[chosen];
            if (!text.empty()) text += ' ';
            text += tok;
            context.push_back(tok);
        }
        out.push_back({std::move(text), seed});
    }
    return out;
}

}  // namespace mgm
