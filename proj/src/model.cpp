#include "malscan/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "malscan/callgraph.hpp"

namespace malscan {

namespace {

constexpr int kModelFormatVersion = 1;
constexpr const char* kModelFormatName = "malscan-model";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

const char* label_name(Label label) {
    return label == Label::malicious ? "malicious" : "benign";
}

Label label_from_name(const std::string& name) {
    if (name == "malicious") return Label::malicious;
    if (name == "benign") return Label::benign;
    throw ScanError(ErrorCode::InvalidArgument, "unknown label: " + name);
}

FeatureVector vectorize_graph(const ApiCallGraph& graph, const std::string& package_id,
                              const SensitiveFeatureSet& featureset,
                              const VectorizeOptions& options) {
    CentralityTable table = compute_centrality(graph, featureset.metric, options.katz);
    if (options.apply_offset) {
        table = adjust_offset(table);
    }

    FeatureVector vector;
    vector.package_id = package_id;
    vector.values.reserve(featureset.apis.size());
    for (const std::string& api : featureset.apis) {
        const auto it = table.scores.find(api);
        vector.values.push_back(it == table.scores.end() ? 0.0 : it->second);
    }
    return vector;
}

FeatureVector vectorize(const PackageArtifact& artifact, const SensitiveFeatureSet& featureset,
                        const VectorizeOptions& options, WarningLog* warnings) {
    return vectorize_graph(build_call_graph(artifact, warnings), artifact.id(), featureset,
                           options);
}

std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> split_dataset(
    const std::vector<FeatureVector>& vectors, double train_ratio, std::uint64_t seed) {
    if (train_ratio <= 0.0 || train_ratio >= 1.0) {
        throw ScanError(ErrorCode::InvalidArgument, "train ratio must lie strictly in (0,1)");
    }
    std::vector<std::size_t> benign_idx;
    std::vector<std::size_t> malicious_idx;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (!vectors[i].label) {
            throw ScanError(ErrorCode::InvalidArgument, "unlabeled vector in split input");
        }
        (*vectors[i].label == Label::malicious ? malicious_idx : benign_idx).push_back(i);
    }
    if (benign_idx.size() < 2 || malicious_idx.size() < 2) {
        throw ScanError(ErrorCode::TooFewSamples, "need at least 2 samples per class");
    }

    std::mt19937_64 rng(seed);
    std::pair<std::vector<FeatureVector>, std::vector<FeatureVector>> result;
    for (auto* cls : {&benign_idx, &malicious_idx}) {
        std::shuffle(cls->begin(), cls->end(), rng);
        // Keep both splits populated per class.
        std::size_t take = static_cast<std::size_t>(
            std::llround(train_ratio * static_cast<double>(cls->size())));
        take = std::clamp<std::size_t>(take, 1, cls->size() - 1);
        for (std::size_t i = 0; i < cls->size(); ++i) {
            (i < take ? result.first : result.second).push_back(vectors[(*cls)[i]]);
        }
    }
    return result;
}

int DecisionTree::predict(const std::vector<double>& values) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].vote < 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = values[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].vote;
}

namespace {

struct TreeBuilder {
    const std::vector<const FeatureVector*>& samples;
    std::size_t dimension;
    std::mt19937_64 rng;
    std::vector<TreeNode> nodes;

    static double gini(long long malicious, long long total) {
        if (total == 0) return 0.0;
        const double p = static_cast<double>(malicious) / static_cast<double>(total);
        return 2.0 * p * (1.0 - p);
    }

    int build(std::vector<std::size_t> rows) {
        long long malicious = 0;
        for (std::size_t r : rows) {
            if (*samples[r]->label == Label::malicious) ++malicious;
        }
        const long long total = static_cast<long long>(rows.size());

        const int node_index = static_cast<int>(nodes.size());
        nodes.emplace_back();

        auto make_leaf = [&]() {
            nodes[static_cast<std::size_t>(node_index)].vote =
                malicious * 2 >= total ? 1 : 0;
            return node_index;
        };
        if (malicious == 0 || malicious == total) return make_leaf();

        // sqrt(d) feature subsample, sorted for deterministic scanning.
        const std::size_t m = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dimension)))));
        std::vector<std::size_t> features(dimension);
        for (std::size_t i = 0; i < dimension; ++i) features[i] = i;
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, dimension - 1);
            std::swap(features[i], features[pick(rng)]);
        }
        features.resize(m);
        std::sort(features.begin(), features.end());

        const double parent_impurity = gini(malicious, total);
        double best_gain = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;

        std::vector<std::pair<double, int>> column;
        for (std::size_t f : features) {
            column.clear();
            for (std::size_t r : rows) {
                column.emplace_back(samples[r]->values[f],
                                    *samples[r]->label == Label::malicious ? 1 : 0);
            }
            std::sort(column.begin(), column.end());
            long long left_total = 0;
            long long left_malicious = 0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                ++left_total;
                left_malicious += column[i].second;
                if (column[i].first == column[i + 1].first) continue;
                const long long right_total = total - left_total;
                const long long right_malicious = malicious - left_malicious;
                const double weighted =
                    (static_cast<double>(left_total) * gini(left_malicious, left_total) +
                     static_cast<double>(right_total) * gini(right_malicious, right_total)) /
                    static_cast<double>(total);
                const double gain = parent_impurity - weighted;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = (column[i].first + column[i + 1].first) / 2.0;
                }
            }
        }
        if (best_gain <= 0.0) return make_leaf();

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t r : rows) {
            (samples[r]->values[best_feature] <= best_threshold ? left_rows : right_rows)
                .push_back(r);
        }
        if (left_rows.empty() || right_rows.empty()) return make_leaf();
        rows.clear();
        rows.shrink_to_fit();

        nodes[static_cast<std::size_t>(node_index)].feature = static_cast<int>(best_feature);
        nodes[static_cast<std::size_t>(node_index)].threshold = best_threshold;
        const int left = build(std::move(left_rows));
        nodes[static_cast<std::size_t>(node_index)].left = left;
        const int right = build(std::move(right_rows));
        nodes[static_cast<std::size_t>(node_index)].right = right;
        return node_index;
    }
};

}  // namespace

TrainedClassifier train(const std::vector<FeatureVector>& training, const ForestConfig& config,
                        const std::string& featureset_fingerprint) {
    if (training.size() < 2) {
        throw ScanError(ErrorCode::TooFewSamples, "need at least 2 training samples");
    }
    if (config.tree_count <= 0 || config.threshold <= 0.0 || config.threshold >= 1.0) {
        throw ScanError(ErrorCode::InvalidArgument, "bad forest configuration");
    }
    const std::size_t dimension = training.front().values.size();
    bool any_benign = false;
    bool any_malicious = false;
    for (const FeatureVector& v : training) {
        if (!v.label) throw ScanError(ErrorCode::InvalidArgument, "unlabeled training vector");
        if (v.values.size() != dimension) {
            throw ScanError(ErrorCode::DimensionMismatch, "inconsistent vector lengths");
        }
        (*v.label == Label::malicious ? any_malicious : any_benign) = true;
    }
    if (!any_benign || !any_malicious) {
        throw ScanError(ErrorCode::DegenerateData, "training data contains a single class");
    }

    std::vector<const FeatureVector*> samples;
    samples.reserve(training.size());
    for (const FeatureVector& v : training) samples.push_back(&v);

    TrainedClassifier model;
    model.config = config;
    model.dimension = dimension;
    model.featureset_fingerprint = featureset_fingerprint;
    model.trees.resize(static_cast<std::size_t>(config.tree_count));

    for (int t = 0; t < config.tree_count; ++t) {
        const std::uint64_t tree_seed =
            splitmix64(config.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t + 1)));
        TreeBuilder builder{samples, dimension, std::mt19937_64(tree_seed), {}};

        std::vector<std::size_t> rows(samples.size());
        std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
        for (std::size_t& r : rows) r = pick(builder.rng);

        builder.build(std::move(rows));
        model.trees[static_cast<std::size_t>(t)].nodes = std::move(builder.nodes);
    }
    return model;
}

Prediction predict(const TrainedClassifier& model, const FeatureVector& vector) {
    if (vector.values.size() != model.dimension) {
        throw ScanError(ErrorCode::DimensionMismatch,
                        "vector has " + std::to_string(vector.values.size()) +
                            " features, model expects " + std::to_string(model.dimension));
    }
    long long malicious_votes = 0;
    for (const DecisionTree& tree : model.trees) {
        malicious_votes += tree.predict(vector.values);
    }
    Prediction p;
    p.score = static_cast<double>(malicious_votes) / static_cast<double>(model.trees.size());
    p.label = p.score >= model.config.threshold ? Label::malicious : Label::benign;
    return p;
}

double f1_score(double precision, double recall) {
    if (precision + recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

Metrics metrics_from_counts(long long tp, long long fp, long long fn, long long tn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

Metrics evaluate(const TrainedClassifier& model, const std::vector<FeatureVector>& test) {
    if (test.empty()) throw ScanError(ErrorCode::InvalidArgument, "empty test set");
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    for (const FeatureVector& v : test) {
        if (!v.label) throw ScanError(ErrorCode::InvalidArgument, "unlabeled test vector");
        const bool actual = *v.label == Label::malicious;
        const bool predicted = predict(model, v).label == Label::malicious;
        if (predicted && actual) ++tp;
        else if (predicted && !actual) ++fp;
        else if (!predicted && actual) ++fn;
        else ++tn;
    }
    return metrics_from_counts(tp, fp, fn, tn);
}

nlohmann::json TrainedClassifier::to_json() const {
    nlohmann::json trees_json = nlohmann::json::array();
    for (const DecisionTree& tree : trees) {
        nlohmann::json nodes_json = nlohmann::json::array();
        for (const TreeNode& n : tree.nodes) {
            if (n.vote >= 0) {
                nodes_json.push_back({{"v", n.vote}});
            } else {
                nodes_json.push_back(
                    {{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
            }
        }
        trees_json.push_back(std::move(nodes_json));
    }
    return {{"format", kModelFormatName},
            {"version", kModelFormatVersion},
            {"kind", kind},
            {"tree_count", config.tree_count},
            {"seed", config.seed},
            {"threshold", config.threshold},
            {"dimension", dimension},
            {"featureset_fingerprint", featureset_fingerprint},
            {"trees", std::move(trees_json)}};
}

TrainedClassifier TrainedClassifier::from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != kModelFormatName) {
        throw ScanError(ErrorCode::UnknownModelVersion, "not a recognizable model file");
    }
    if (j.value("version", -1) != kModelFormatVersion) {
        throw ScanError(ErrorCode::UnknownModelVersion,
                        "unsupported model version " + j.value("version", nlohmann::json()).dump());
    }
    TrainedClassifier model;
    model.kind = j.at("kind").get<std::string>();
    model.config.tree_count = j.at("tree_count").get<int>();
    model.config.seed = j.at("seed").get<std::uint64_t>();
    model.config.threshold = j.at("threshold").get<double>();
    model.dimension = j.at("dimension").get<std::size_t>();
    model.featureset_fingerprint = j.at("featureset_fingerprint").get<std::string>();
    for (const auto& tree_json : j.at("trees")) {
        DecisionTree tree;
        for (const auto& node_json : tree_json) {
            TreeNode n;
            if (node_json.contains("v")) {
                n.vote = node_json.at("v").get<int>();
            } else {
                n.feature = node_json.at("f").get<int>();
                n.threshold = node_json.at("t").get<double>();
                n.left = node_json.at("l").get<int>();
                n.right = node_json.at("r").get<int>();
            }
            tree.nodes.push_back(n);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

void TrainedClassifier::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ScanError(ErrorCode::IoError, "cannot write model " + path);
    out << to_json().dump() << '\n';
}

TrainedClassifier TrainedClassifier::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScanError(ErrorCode::IoError, "cannot open model " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ScanError(ErrorCode::IoError, "bad model file: " + std::string(e.what()));
    }
    return from_json(j);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

}  // namespace

void vectors_to_csv(const std::vector<FeatureVector>& vectors,
                    const std::vector<std::string>& api_names, std::ostream& out) {
    for (const std::string& api : api_names) {
        out << api << ',';
    }
    out << "label\n";
    for (const FeatureVector& v : vectors) {
        if (v.values.size() != api_names.size()) {
            throw ScanError(ErrorCode::DimensionMismatch, "vector/header length mismatch");
        }
        for (double value : v.values) {
            out << format_double(value) << ',';
        }
        out << (v.label ? label_name(*v.label) : "") << '\n';
    }
}

std::pair<std::vector<FeatureVector>, std::vector<std::string>> vectors_from_csv(
    std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ScanError(ErrorCode::IoError, "empty CSV");
    }
    std::vector<std::string> header = split_csv_line(line);
    if (header.empty() || header.back() != "label") {
        throw ScanError(ErrorCode::IoError, "CSV header must end with a label column");
    }
    header.pop_back();

    std::vector<FeatureVector> vectors;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size() + 1) {
            throw ScanError(ErrorCode::IoError,
                            "CSV row " + std::to_string(row + 2) + " has wrong arity");
        }
        FeatureVector v;
        v.package_id = "row-" + std::to_string(row++);
        v.values.reserve(header.size());
        for (std::size_t i = 0; i < header.size(); ++i) {
            double value = 0.0;
            const auto [ptr, ec] =
                std::from_chars(cells[i].data(), cells[i].data() + cells[i].size(), value);
            if (ec != std::errc() || ptr != cells[i].data() + cells[i].size()) {
                throw ScanError(ErrorCode::IoError, "bad numeric cell: " + cells[i]);
            }
            v.values.push_back(value);
        }
        if (!cells.back().empty()) {
            v.label = label_from_name(cells.back());
        }
        vectors.push_back(std::move(v));
    }
    return {std::move(vectors), std::move(header)};
}

void save_vectors_csv(const std::vector<FeatureVector>& vectors,
                      const std::vector<std::string>& api_names, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ScanError(ErrorCode::IoError, "cannot write " + path);
    vectors_to_csv(vectors, api_names, out);
}

std::pair<std::vector<FeatureVector>, std::vector<std::string>> load_vectors_csv(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScanError(ErrorCode::IoError, "cannot open " + path);
    return vectors_from_csv(in);
}

}  // namespace malscan
