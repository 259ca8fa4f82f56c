#include "mgm/model_client.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "mgm/errors.hpp"
#include "mgm/util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace mgm {

ScoreResult make_score_result(std::vector<TokenScore> tokens) {
    ScoreResult r;
    r.tokens = std::move(tokens);
    for (const auto& t : r.tokens) {
        if (!t.logprob) continue;
        r.total_logprob += *t.logprob;
        ++r.token_count;
    }
    return r;
}

double perplexity(const ScoreResult& score) {
    if (score.token_count < 1)
        throw ContractError("perplexity undefined: no scored positions");
    return std::exp(-score.total_logprob / static_cast<double>(score.token_count));
}

void validate(const DecodeParams& p) {
    if (p.top_k < 1) throw ValidationError("top_k must be >= 1");
    if (p.top_p <= 0.0 || p.top_p > 1.0) throw ValidationError("top_p must be in (0, 1]");
    if (p.max_tokens < 0) throw ValidationError("max_tokens must be >= 0");
    if (p.num_samples < 0) throw ValidationError("num_samples must be >= 0");
    if (p.beams != 1) throw ValidationError("generation uses a single beam; beams must be 1");
    if (p.temperature <= 0.0) throw ValidationError("temperature must be positive");
}

std::map<std::string, double> ModelClient::next_token_distribution(const std::string&,
                                                                   std::vector<std::string>*) const {
    throw CapabilityError("backend '" + model_id() + "' cannot expose full next-token distributions");
}

HttpClientConfig HttpClientConfig::from_env() {
    HttpClientConfig c;
    if (const char* e = std::getenv("MM_ENDPOINT")) c.endpoint = e;
    if (const char* m = std::getenv("MM_MODEL")) c.model = m;
    if (const char* t = std::getenv("MM_TIMEOUT_MS")) c.timeout_ms = std::atoi(t);
    return c;
}

namespace {

httplib::Client make_client(const HttpClientConfig& cfg) {
    httplib::Client cli(cfg.endpoint);
    cli.set_connection_timeout(0, cfg.timeout_ms * 1000);
    cli.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    return cli;
}

nlohmann::json post_json(const HttpClientConfig& cfg, const std::string& path,
                         const nlohmann::json& body) {
    auto cli = make_client(cfg);
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res)
        throw TransportError("endpoint '" + cfg.endpoint + "' unreachable (" +
                                 httplib::to_string(res.error()) + "); retry may help",
                             /*retryable=*/true);
    if (res->status != 200)
        throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + " for " +
                                 path,
                             /*retryable=*/res->status >= 500, res->status);
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("endpoint returned malformed JSON: ") + e.what(),
                             /*retryable=*/false, res->status);
    }
}

}  // namespace

HttpModelClient::HttpModelClient(HttpClientConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("no endpoint configured (set MM_ENDPOINT)");
}

ScoreResult HttpModelClient::score(const std::string& text) const {
    if (text.empty()) throw ContractError("score: text must be non-empty");
    auto j = post_json(config_, "/v1/score", {{"model", config_.model}, {"text", text}});
    if (!j.contains("tokens") || !j["tokens"].is_array())
        throw TransportError("score response lacks 'tokens'", false);
    std::vector<TokenScore> tokens;
    bool any_available = false;
    for (auto& t : j["tokens"]) {
        TokenScore ts;
        ts.text = t.value("text", "");
        if (t.contains("logprob") && !t["logprob"].is_null()) {
            ts.logprob = t["logprob"].get<double>();
            any_available = true;
        }
        tokens.push_back(std::move(ts));
    }
    if (!tokens.empty() && !any_available)
        throw CapabilityError("backend '" + config_.model + "' does not echo log-probabilities");
    return make_score_result(std::move(tokens));
}

std::vector<ModelClient::Sample> HttpModelClient::generate(const std::string& prompt,
                                                           const DecodeParams& params) const {
    validate(params);
    nlohmann::json body = {{"model", config_.model},     {"prompt", prompt},
                           {"top_k", params.top_k},      {"top_p", params.top_p},
                           {"max_tokens", params.max_tokens}, {"n", params.num_samples},
                           {"temperature", params.temperature}, {"seed", params.seed}};
    auto j = post_json(config_, "/v1/generate", body);
    if (!j.contains("completions") || !j["completions"].is_array())
        throw TransportError("generate response lacks 'completions'", false);
    std::vector<Sample> out;
    int i = 0;
    for (auto& c : j["completions"]) {
        Sample s;
        s.text = c.value("text", "");
        s.seed = derive_seed(params.seed, prompt, static_cast<uint64_t>(i++));
        out.push_back(std::move(s));
    }
    if (static_cast<int>(out.size()) != params.num_samples)
        throw TransportError("generate returned " + std::to_string(out.size()) +
                                 " completions, expected " + std::to_string(params.num_samples),
                             false);
    return out;
}

struct ModelServer::Impl {
    std::shared_ptr<const ModelClient> backend;
    httplib::Server server;
    std::thread thread;
};

ModelServer::ModelServer(std::shared_ptr<const ModelClient> backend) : impl_(new Impl) {
    impl_->backend = std::move(backend);
    auto* impl = impl_.get();

    impl->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"status\":\"ok\"}", "application/json");
    });

    impl->server.Post("/v1/score", [impl](const httplib::Request& req, httplib::Response& res) {
        try {
            auto body = nlohmann::json::parse(req.body);
            auto score = impl->backend->score(body.at("text").get<std::string>());
            nlohmann::json tokens = nlohmann::json::array();
            for (const auto& t : score.tokens) {
                nlohmann::json tok = {{"text", t.text}};
                if (t.logprob && std::isfinite(*t.logprob))
                    tok["logprob"] = *t.logprob;
                else
                    tok["logprob"] = nullptr;
                tokens.push_back(tok);
            }
            res.set_content(nlohmann::json{{"tokens", tokens}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    });

    impl->server.Post("/v1/generate", [impl](const httplib::Request& req, httplib::Response& res) {
        try {
            auto body = nlohmann::json::parse(req.body);
            DecodeParams params;
            params.top_k = body.value("top_k", params.top_k);
            params.top_p = body.value("top_p", params.top_p);
            params.max_tokens = body.value("max_tokens", params.max_tokens);
            params.num_samples = body.value("n", params.num_samples);
            params.temperature = body.value("temperature", params.temperature);
            params.seed = body.value("seed", params.seed);
            auto samples =
                impl->backend->generate(body.at("prompt").get<std::string>(), params);
            nlohmann::json completions = nlohmann::json::array();
            for (const auto& s : samples) completions.push_back({{"text", s.text}});
            res.set_content(nlohmann::json{{"completions", completions}}.dump(),
                            "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    });
}

ModelServer::~ModelServer() { stop(); }

int ModelServer::listen_async(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0) throw TransportError("cannot bind model server", false);
    } else {
        if (!impl_->server.bind_to_port(host, port))
            throw TransportError("cannot bind model server to port " + std::to_string(port), false);
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ModelServer::wait() {
    if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

void ModelServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace mgm
