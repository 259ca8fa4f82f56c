#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mgm {

// Ordered binary outcomes keyed by instance id. Paired series must share
// key sets and order.
struct BinarySeries {
    std::vector<std::string> keys;
    std::vector<int> values;  // each 0 or 1
};

// Population standard deviation (divide by count); with 5 binary samples
// the only possible values are 0, 0.4 and sqrt(6)/5 = 0.4899.
double instance_sigma(const std::vector<int>& values);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct AgreementReport {
    int n = 0;
    double p_o = 0.0;
    std::optional<double> mcc;
    std::optional<Interval> mcc_ci;
    std::optional<double> kappa;
    std::optional<Interval> kappa_ci;
    std::optional<std::string> undefined_reason;
};

// p_o, MCC and Cohen's kappa from the 2x2 contingency table of two paired
// binary series. MCC is undefined (typed absence, not zero) when any margin
// is zero, i.e. when either series is constant; kappa is undefined when the
// chance agreement p_e is 1.
AgreementReport agreement(const BinarySeries& a, const BinarySeries& b);
AgreementReport agreement(const std::vector<int>& a, const std::vector<int>& b);

// 95% CI for MCC via the Fisher z-transform: tanh(atanh(r) +- 1.96/sqrt(n-3)).
// Asymmetric in r-space; degenerate at |r| = 1; absent for n < 4.
std::optional<Interval> mcc_ci(double mcc, int n);

// 95% CI for kappa: kappa +- 1.96 * sqrt(p_o(1-p_o) / (n(1-p_e)^2)).
std::optional<Interval> kappa_ci(double kappa, double p_o, double p_e, int n);

struct BetaFit {
    double alpha = 0.0;
    double beta = 0.0;
    int n = 0;
};

// Method-of-moments beta fit over disagreement probabilities in [0,1]:
//   common = mu(1-mu)/s^2 - 1,  alpha = mu*common,  beta = (1-mu)*common
// with s^2 the unbiased sample variance. Requires 0 < s^2 < mu(1-mu).
BetaFit beta_fit(const std::vector<double>& d);

enum class Pairing { MisgenderedRuff, Tango };

// Per-instance samples of one evaluation method.
struct InstanceSamples {
    std::string id;
    std::vector<int> values;
};

// Per-instance disagreement probability d between the probability- and
// generation-based results:
//   d = m_prob * (1 - mean(m_gen)) + (1 - m_prob) * mean(m_gen)
// For the tango pairing both sides enter as per-instance means; for
// misgendered/ruff the probability side is a single value per instance.
std::vector<double> disagreement_series(const std::vector<InstanceSamples>& prob,
                                        const std::vector<InstanceSamples>& gen, Pairing pairing);

// Repetition rate: geometric mean over n = 1..4 of the fraction of n-gram
// types that occur more than once, over the whole token sequence. Undefined
// (absent) for texts of fewer than 4 tokens.
std::optional<double> repetition_rate(const std::string& text);

struct Summary {
    int n = 0;
    double mean = 0.0;
    double stdev = 0.0;  // population
};
Summary summarize(const std::vector<double>& values);

std::string agreement_report_to_json(const AgreementReport& r);

}  // namespace mgm
