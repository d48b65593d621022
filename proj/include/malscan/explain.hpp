#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "malscan/callgraph.hpp"
#include "malscan/featureset.hpp"
#include "malscan/model.hpp"

namespace malscan {

// Black-box scoring function LIME perturbs; any callable mapping a feature
// vector to a malicious score works, the trained forest being the usual one.
using ScoreFn = std::function<double(const std::vector<double>&)>;

struct WeightedFeature {
    int feature_index = -1;
    std::string api_name;
    double weight = 0.0;
};

struct LimeOptions {
    int n_samples = 5000;  // >= 100
    std::uint64_t seed = 0;
    double ridge_lambda = 1.0;
    double kernel_width_scale = 0.75;  // sigma = scale * sqrt(#non-zero)
    int max_features = 10;
};

struct LimeExplanation {
    std::string package_id;
    std::vector<WeightedFeature> weighted_features;  // descending |weight|
    double local_fit = 0.0;                          // weighted surrogate R^2
    int n_samples = 0;
    std::uint64_t seed = 0;
};

// Kernel-weighted ridge fit over presence/absence masks of the non-zero
// features, truncated to the strongest |weight| entries. Deterministic in
// (scorer, vector, options.seed).
LimeExplanation lime_explain(const ScoreFn& scorer, const FeatureVector& vector,
                             const std::vector<std::string>& feature_names,
                             const LimeOptions& options = {});

LimeExplanation lime_explain(const TrainedClassifier& model, const FeatureVector& vector,
                             const SensitiveFeatureSet& featureset, const LimeOptions& options = {});

struct Occurrence {
    std::string file;
    int line = 0;
    Scope scope;

    bool operator==(const Occurrence&) const = default;
};

// Call sites whose api_name matches exactly; file-lexicographic then line
// order.
std::vector<Occurrence> locate_api_occurrences(const ApiCallGraph& graph,
                                               const std::string& api_name);

struct Finding {
    std::string api_name;
    std::vector<Occurrence> occurrences;
    std::vector<std::string> behaviors;  // verbatim ground-truth strings
    double lime_weight = 0.0;
};

struct Verdict {
    Label label = Label::benign;
    double score = 0.0;
};

struct ExplanationReport {
    std::string package_id;
    Verdict verdict;
    std::vector<Finding> findings;  // ordered by first occurrence in the sources
};

struct ReportOptions {
    // When false, APIs missing from the ground truth get an empty behavior
    // list instead of failing; used when scanning without a ground-truth file.
    bool require_ground_truth = true;
};

ExplanationReport build_report(const ApiCallGraph& graph, const std::string& package_id,
                               const Verdict& verdict,
                               const std::optional<LimeExplanation>& lime, const GroundTruth& gt,
                               const ReportOptions& options = {}, WarningLog* warnings = nullptr);

nlohmann::json report_to_json(const ExplanationReport& report);
std::string report_to_text(const ExplanationReport& report);

}  // namespace malscan
