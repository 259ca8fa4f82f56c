#include "mgm/metrics.hpp"

#include <cmath>
#include <unordered_map>

#include "mgm/corpus.hpp"
#include "mgm/errors.hpp"
#include "json.hpp"

namespace mgm {

double instance_sigma(const std::vector<int>& values) {
    if (values.empty()) throw ContractError("instance_sigma: no values");
    long long sum = 0, sumsq = 0;
    for (int v : values) {
        if (v != 0 && v != 1) throw ContractError("instance_sigma: values must be binary");
        sum += v;
        sumsq += v * v;
    }
    const auto n = static_cast<long long>(values.size());
    // population variance, in integers: (n*sum(x^2) - sum(x)^2) / n^2
    long long num = n * sumsq - sum * sum;
    return std::sqrt(static_cast<double>(num)) / static_cast<double>(n);
}

namespace {

struct Contingency {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    long long n() const { return tp + fp + fn + tn; }
};

Contingency tabulate(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size())
        throw ContractError("agreement: paired series have different lengths");
    if (a.empty()) throw ContractError("agreement: empty series");
    Contingency c;
    for (size_t i = 0; i < a.size(); ++i) {
        if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1))
            throw ContractError("agreement: values must be binary");
        if (a[i] == 1 && b[i] == 1)
            ++c.tp;
        else if (a[i] == 1 && b[i] == 0)
            ++c.fn;
        else if (a[i] == 0 && b[i] == 1)
            ++c.fp;
        else
            ++c.tn;
    }
    return c;
}

}  // namespace

AgreementReport agreement(const std::vector<int>& a, const std::vector<int>& b) {
    Contingency c = tabulate(a, b);
    AgreementReport r;
    r.n = static_cast<int>(c.n());
    r.p_o = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.n());

    // MCC = (TP*TN - FP*FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))
    long long m1 = c.tp + c.fp, m2 = c.tp + c.fn, m3 = c.tn + c.fp, m4 = c.tn + c.fn;
    if (m1 == 0 || m2 == 0 || m3 == 0 || m4 == 0) {
        r.undefined_reason = "constant rater";
    } else {
        double num = static_cast<double>(c.tp) * c.tn - static_cast<double>(c.fp) * c.fn;
        double den = std::sqrt(static_cast<double>(m1)) * std::sqrt(static_cast<double>(m2)) *
                     std::sqrt(static_cast<double>(m3)) * std::sqrt(static_cast<double>(m4));
        r.mcc = num / den;
        r.mcc_ci = mcc_ci(*r.mcc, r.n);
    }

    // kappa = (p_o - p_e) / (1 - p_e), p_e from the marginals
    double n = static_cast<double>(c.n());
    double pa1 = static_cast<double>(c.tp + c.fn) / n;
    double pb1 = static_cast<double>(c.tp + c.fp) / n;
    double p_e = pa1 * pb1 + (1.0 - pa1) * (1.0 - pb1);
    if (p_e >= 1.0) {
        if (!r.undefined_reason) r.undefined_reason = "degenerate marginals";
    } else {
        r.kappa = (r.p_o - p_e) / (1.0 - p_e);
        r.kappa_ci = kappa_ci(*r.kappa, r.p_o, p_e, r.n);
    }
    return r;
}

AgreementReport agreement(const BinarySeries& a, const BinarySeries& b) {
    if (a.keys.size() != a.values.size() || b.keys.size() != b.values.size())
        throw ContractError("agreement: series keys and values differ in length");
    if (a.keys != b.keys) throw ContractError("agreement: paired series have different keys");
    return agreement(a.values, b.values);
}

std::optional<Interval> mcc_ci(double mcc, int n) {
    if (n < 4) return std::nullopt;
    if (mcc >= 1.0 || mcc <= -1.0) return Interval{mcc, mcc};
    double z = std::atanh(mcc);
    double hw = 1.96 / std::sqrt(static_cast<double>(n - 3));
    return Interval{std::tanh(z - hw), std::tanh(z + hw)};
}

std::optional<Interval> kappa_ci(double kappa, double p_o, double p_e, int n) {
    if (n < 4) return std::nullopt;
    double se = std::sqrt(p_o * (1.0 - p_o) / (n * (1.0 - p_e) * (1.0 - p_e)));
    return Interval{kappa - 1.96 * se, kappa + 1.96 * se};
}

BetaFit beta_fit(const std::vector<double>& d) {
    if (d.size() < 2) throw ContractError("beta_fit: need at least 2 samples");
    double mu = 0.0;
    for (double x : d) {
        if (x < 0.0 || x > 1.0) throw ContractError("beta_fit: samples must lie in [0,1]");
        mu += x;
    }
    mu /= static_cast<double>(d.size());
    double ss = 0.0;
    for (double x : d) ss += (x - mu) * (x - mu);
    double var = ss / static_cast<double>(d.size() - 1);
    // rounding can leave a constant sample with variance ~1e-34
    if (var <= 1e-12 * std::max(mu * (1.0 - mu), 1e-300))
        throw ContractError("beta_fit: sample variance must be > 0");
    if (var >= mu * (1.0 - mu))
        throw ContractError("beta_fit: sample variance must be < mu*(1-mu)");
    double common = mu * (1.0 - mu) / var - 1.0;
    return BetaFit{mu * common, (1.0 - mu) * common, static_cast<int>(d.size())};
}

namespace {

double mean_of(const std::vector<int>& v) {
    double s = 0.0;
    for (int x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> disagreement_series(const std::vector<InstanceSamples>& prob,
                                        const std::vector<InstanceSamples>& gen, Pairing pairing) {
    if (prob.size() != gen.size())
        throw ContractError("disagreement_series: instance counts differ");
    std::vector<double> out;
    out.reserve(prob.size());
    for (size_t i = 0; i < prob.size(); ++i) {
        if (prob[i].id != gen[i].id)
            throw ContractError("disagreement_series: key mismatch at '" + prob[i].id + "' vs '" +
                                gen[i].id + "'");
        if (prob[i].values.empty() || gen[i].values.empty())
            throw ContractError("disagreement_series: empty sample set for '" + prob[i].id + "'");
        if (pairing == Pairing::MisgenderedRuff && prob[i].values.size() != 1)
            throw ContractError(
                "disagreement_series: probability side must be a single value per instance for "
                "the misgendered/ruff pairing");
        double mp = mean_of(prob[i].values);
        double mg = mean_of(gen[i].values);
        out.push_back(mp * (1.0 - mg) + (1.0 - mp) * mg);
    }
    return out;
}

std::optional<double> repetition_rate(const std::string& text) {
    auto tokens = tokenize(text);
    if (tokens.size() < 4) return std::nullopt;
    double product = 1.0;
    for (int n = 1; n <= 4; ++n) {
        std::unordered_map<std::string, int> counts;
        for (size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string key;
            for (int k = 0; k < n; ++k) {
                key += tokens[i + k].surface;
                key += '\x1f';
            }
            ++counts[key];
        }
        long long types = static_cast<long long>(counts.size());
        long long singletons = 0;
        for (const auto& [_, c] : counts)
            if (c == 1) ++singletons;
        product *= static_cast<double>(types - singletons) / static_cast<double>(types);
    }
    return std::pow(product, 0.25);
}

Summary summarize(const std::vector<double>& values) {
    Summary s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= values.size();
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(ss / values.size());
    return s;
}

std::string agreement_report_to_json(const AgreementReport& r) {
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["p_o"] = r.p_o;
    j["mcc"] = r.mcc ? nlohmann::ordered_json(*r.mcc) : nlohmann::ordered_json(nullptr);
    j["mcc_ci"] = r.mcc_ci ? nlohmann::ordered_json({r.mcc_ci->lo, r.mcc_ci->hi})
                           : nlohmann::ordered_json(nullptr);
    j["kappa"] = r.kappa ? nlohmann::ordered_json(*r.kappa) : nlohmann::ordered_json(nullptr);
    j["kappa_ci"] = r.kappa_ci ? nlohmann::ordered_json({r.kappa_ci->lo, r.kappa_ci->hi})
                               : nlohmann::ordered_json(nullptr);
    j["undefined_reason"] =
        r.undefined_reason ? nlohmann::ordered_json(*r.undefined_reason) : nlohmann::ordered_json(nullptr);
    return j.dump();
}

}  // namespace mgm
