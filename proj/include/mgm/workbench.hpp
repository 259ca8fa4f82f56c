#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mgm/annotation.hpp"
#include "mgm/corpus.hpp"
#include "mgm/divergence.hpp"
#include "mgm/eval.hpp"
#include "mgm/metrics.hpp"
#include "mgm/model_client.hpp"

namespace mgm {

enum class DatasetFormat : uint8_t { TemplateJsonl, ContextJsonl };
DatasetFormat dataset_format_from_string(const std::string& s);
const char* to_string(DatasetFormat f);

struct RunConfig {
    std::string dataset_path;
    DatasetFormat format = DatasetFormat::TemplateJsonl;
    std::string model_label;      // report label; also the wire model id
    std::string endpoint;         // remote backend; empty means mock
    std::string mock_spec_path;   // mock backend spec
    DecodeParams decode;
    std::set<RunSetting> settings = {RunSetting::Prob, RunSetting::GenPre, RunSetting::GenPost};
    std::string out_dir;
    uint64_t seed = 0;
    int workers = 1;  // execution detail: not part of the config hash

    static RunConfig from_json_text(const std::string& json_text);
    // Canonical form of the experiment-relevant fields; hashed into the
    // manifest so a rerun can prove it used the same inputs.
    std::string canonical_json() const;
    std::string config_hash() const;
};

std::shared_ptr<ModelClient> make_backend(const RunConfig& config);

// Runs the parallel evaluation and writes outcome tables (JSONL + CSV per
// method/setting), generation files, and manifest.json into out_dir. Output
// bytes depend only on the config hash fields. Throws TransportError when
// the endpoint is unreachable before anything is written.
void cmd_eval(const RunConfig& config);

struct CellKey {
    std::string dataset;
    std::string model;
    BasePronoun pronoun = BasePronoun::He;
    Setting setting = Setting::Native;
};

struct CellReport {
    CellKey key;
    AgreementReport agreement;
    Summary sigma_gen;                  // per-instance sigma across generations
    std::optional<Summary> sigma_prob;  // context datasets: sigma across templates
    std::optional<BetaFit> beta;
    std::string beta_note;              // why the fit is absent, when it is
    std::optional<double> failure_rate; // context datasets only
    std::optional<Summary> rr;          // repetition rate over generations
    int dropped_pairs = 0;              // instances unusable for the paired series
};

struct AgreeInputs {
    std::string dataset_label;
    std::string model_label;
    Pairing pairing = Pairing::MisgenderedRuff;
    std::vector<EvalOutcome> outcomes;
    std::map<Setting, std::vector<GenerationRecord>> generations;  // for RR; optional
};

// Every number here is recomputable from the outcome tables by the metrics
// module alone.
std::vector<CellReport> build_cell_reports(const AgreeInputs& inputs);
void write_cell_reports_json(const std::string& path, const std::vector<CellReport>& reports);
void write_cell_reports_csv(const std::string& path, const std::vector<CellReport>& reports);

// Reads outcome tables (and any generation files) from an eval output
// directory and writes cells.json / cells.csv next to them.
std::vector<CellReport> cmd_report(const std::string& run_dir);

}  // namespace mgm
