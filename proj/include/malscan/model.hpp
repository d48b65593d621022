#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "malscan/featureset.hpp"
#include "malscan/ingest.hpp"

namespace malscan {

enum class Label { benign, malicious };

const char* label_name(Label label);
Label label_from_name(const std::string& name);

// Feature values are position-aligned to the feature set: 0 for an absent
// API, else the package's adjusted centrality (>= 1).
struct FeatureVector {
    std::string package_id;
    std::vector<double> values;
    std::optional<Label> label;
};

struct VectorizeOptions {
    KatzParams katz;
    bool apply_offset = true;  // test hook; production always keeps the offset
};

FeatureVector vectorize(const PackageArtifact& artifact, const SensitiveFeatureSet& featureset,
                        const VectorizeOptions& options = {}, WarningLog* warnings = nullptr);

// Same scoring against an already-built graph (callers that also need the
// graph for reporting avoid parsing twice).
FeatureVector vectorize_graph(const ApiCallGraph& graph, const std::string& package_id,
                              const SensitiveFeatureSet& featureset,
                              const VectorizeOptions& options = {});

// Seeded stratified split: each class shuffled independently, both splits
// contain both classes whenever the class sizes allow it.
std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> split_dataset(
    const std::vector<FeatureVector>& vectors, double train_ratio, std::uint64_t seed);

struct ForestConfig {
    int tree_count = 100;
    std::uint64_t seed = 0;
    double threshold = 0.5;
};

// CART node; leaves keep the bootstrap-sample majority vote.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int vote = -1;  // 0 benign / 1 malicious at leaves
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    int predict(const std::vector<double>& values) const;
};

struct TrainedClassifier {
    std::string kind = "random_forest";
    ForestConfig config;
    std::size_t dimension = 0;
    std::string featureset_fingerprint;
    std::vector<DecisionTree> trees;

    nlohmann::json to_json() const;
    static TrainedClassifier from_json(const nlohmann::json& j);
    void save_file(const std::string& path) const;
    static TrainedClassifier load_file(const std::string& path);
};

struct Prediction {
    Label label = Label::benign;
    double score = 0.0;  // fraction of trees voting malicious
};

// Bootstrap forest over Gini splits with sqrt(d) feature subsampling and
// unlimited depth; per-tree seeds derive from config.seed, so results do not
// depend on scheduling.
TrainedClassifier train(const std::vector<FeatureVector>& training, const ForestConfig& config,
                        const std::string& featureset_fingerprint);

Prediction predict(const TrainedClassifier& model, const FeatureVector& vector);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long tp = 0, fp = 0, fn = 0, tn = 0;
};

double f1_score(double precision, double recall);
Metrics metrics_from_counts(long long tp, long long fp, long long fn, long long tn);

Metrics evaluate(const TrainedClassifier& model, const std::vector<FeatureVector>& test);

// CSV: header row of API names plus trailing "label"; one row per package.
void vectors_to_csv(const std::vector<FeatureVector>& vectors,
                    const std::vector<std::string>& api_names, std::ostream& out);
std::pair<std::vector<FeatureVector>, std::vector<std::string>> vectors_from_csv(std::istream& in);
void save_vectors_csv(const std::vector<FeatureVector>& vectors,
                      const std::vector<std::string>& api_names, const std::string& path);
std::pair<std::vector<FeatureVector>, std::vector<std::string>> load_vectors_csv(
    const std::string& path);

}  // namespace malscan
