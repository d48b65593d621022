#include "malscan/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace malscan {

namespace {

// Gaussian elimination with partial pivoting; the systems here are tiny
// ((p+1) x (p+1) for p non-zero features).
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        const double diag = a[col][col];
        if (std::abs(diag) < 1e-12) continue;  // ridge term keeps this rare
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r][col] / diag;
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t row = n; row-- > 0;) {
        double acc = b[row];
        for (std::size_t c = row + 1; c < n; ++c) acc -= a[row][c] * x[c];
        x[row] = std::abs(a[row][row]) < 1e-12 ? 0.0 : acc / a[row][row];
    }
    return x;
}

}  // namespace

LimeExplanation lime_explain(const ScoreFn& scorer, const FeatureVector& vector,
                             const std::vector<std::string>& feature_names,
                             const LimeOptions& options) {
    if (options.n_samples < 100) {
        throw ScanError(ErrorCode::InvalidArgument, "LIME needs at least 100 samples");
    }
    if (vector.values.size() != feature_names.size()) {
        throw ScanError(ErrorCode::DimensionMismatch, "vector/feature-name length mismatch");
    }
    std::vector<int> active;  // indices of non-zero features
    for (std::size_t i = 0; i < vector.values.size(); ++i) {
        if (vector.values[i] != 0.0) active.push_back(static_cast<int>(i));
    }
    if (active.empty()) {
        throw ScanError(ErrorCode::NoNonZeroFeatures, "all-zero vector cannot be explained");
    }
    const std::size_t p = active.size();
    const std::size_t n = static_cast<std::size_t>(options.n_samples);

    // Masks come out of the seed before any scoring, so the explanation is
    // independent of evaluation order.
    std::mt19937_64 rng(options.seed);
    std::vector<std::uint8_t> masks(n * p);
    std::bernoulli_distribution keep(0.5);
    for (auto& bit : masks) bit = keep(rng) ? 1 : 0;

    const double sigma = options.kernel_width_scale * std::sqrt(static_cast<double>(p));
    const double sigma_sq = sigma * sigma;

    std::vector<double> scores(n);
    std::vector<double> weights(n);
    std::vector<double> perturbed = vector.values;
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t masked_out = 0;
        for (std::size_t j = 0; j < p; ++j) {
            const bool kept = masks[s * p + j] != 0;
            perturbed[static_cast<std::size_t>(active[j])] =
                kept ? vector.values[static_cast<std::size_t>(active[j])] : 0.0;
            if (!kept) ++masked_out;
        }
        scores[s] = scorer(perturbed);
        // Distance to the all-ones mask in mask space.
        weights[s] = std::exp(-static_cast<double>(masked_out) / sigma_sq);
    }
    for (std::size_t j = 0; j < p; ++j) {
        perturbed[static_cast<std::size_t>(active[j])] =
            vector.values[static_cast<std::size_t>(active[j])];
    }

    // Weighted ridge over [intercept, mask bits]; the intercept is not
    // penalized.
    const std::size_t cols = p + 1;
    std::vector<std::vector<double>> xtx(cols, std::vector<double>(cols, 0.0));
    std::vector<double> xty(cols, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        const double w = weights[s];
        const double ws = w * scores[s];
        xtx[0][0] += w;
        xty[0] += ws;
        for (std::size_t j = 0; j < p; ++j) {
            if (masks[s * p + j] == 0) continue;
            xtx[0][j + 1] += w;
            xtx[j + 1][0] += w;
            xty[j + 1] += ws;
            for (std::size_t k = j; k < p; ++k) {
                if (masks[s * p + k] != 0) {
                    xtx[j + 1][k + 1] += w;
                    if (k != j) xtx[k + 1][j + 1] += w;
                }
            }
        }
    }
    for (std::size_t j = 1; j < cols; ++j) xtx[j][j] += options.ridge_lambda;

    const std::vector<double> theta = solve_dense(xtx, xty);

    // Weighted R^2 of the surrogate.
    double weight_sum = 0.0;
    double mean = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        weight_sum += weights[s];
        mean += weights[s] * scores[s];
    }
    mean = weight_sum > 0.0 ? mean / weight_sum : 0.0;
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double fitted = theta[0];
        for (std::size_t j = 0; j < p; ++j) {
            if (masks[s * p + j] != 0) fitted += theta[j + 1];
        }
        ss_res += weights[s] * (scores[s] - fitted) * (scores[s] - fitted);
        ss_tot += weights[s] * (scores[s] - mean) * (scores[s] - mean);
    }

    LimeExplanation explanation;
    explanation.package_id = vector.package_id;
    explanation.n_samples = options.n_samples;
    explanation.seed = options.seed;
    explanation.local_fit = ss_tot > 1e-12 ? 1.0 - ss_res / ss_tot : (ss_res < 1e-9 ? 1.0 : 0.0);

    std::vector<WeightedFeature> features;
    features.reserve(p);
    for (std::size_t j = 0; j < p; ++j) {
        features.push_back(WeightedFeature{active[j],
                                           feature_names[static_cast<std::size_t>(active[j])],
                                           theta[j + 1]});
    }
    std::stable_sort(features.begin(), features.end(),
                     [](const WeightedFeature& a, const WeightedFeature& b) {
                         if (std::abs(a.weight) != std::abs(b.weight)) {
                             return std::abs(a.weight) > std::abs(b.weight);
                         }
                         return a.feature_index < b.feature_index;
                     });
    if (features.size() > static_cast<std::size_t>(options.max_features)) {
        features.resize(static_cast<std::size_t>(options.max_features));
    }
    explanation.weighted_features = std::move(features);
    return explanation;
}

LimeExplanation lime_explain(const TrainedClassifier& model, const FeatureVector& vector,
                             const SensitiveFeatureSet& featureset, const LimeOptions& options) {
    ScoreFn scorer = [&model](const std::vector<double>& values) {
        FeatureVector probe;
        probe.values = values;
        return predict(model, probe).score;
    };
    return lime_explain(scorer, vector, featureset.apis, options);
}

std::vector<Occurrence> locate_api_occurrences(const ApiCallGraph& graph,
                                               const std::string& api_name) {
    std::vector<Occurrence> out;
    for (const CallSite& site : graph.call_sites) {
        if (site.api_name == api_name) {
            out.push_back(Occurrence{site.file, site.line, site.scope});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Occurrence& a, const Occurrence& b) {
        if (a.file != b.file) return a.file < b.file;
        return a.line < b.line;
    });
    return out;
}

ExplanationReport build_report(const ApiCallGraph& graph, const std::string& package_id,
                               const Verdict& verdict,
                               const std::optional<LimeExplanation>& lime, const GroundTruth& gt,
                               const ReportOptions& options, WarningLog* warnings) {
    ExplanationReport report;
    report.package_id = package_id;
    report.verdict = verdict;
    if (verdict.label == Label::benign || !lime) {
        return report;
    }

    for (const WeightedFeature& feature : lime->weighted_features) {
        Finding finding;
        finding.api_name = feature.api_name;
        finding.lime_weight = feature.weight;
        finding.occurrences = locate_api_occurrences(graph, feature.api_name);
        if (finding.occurrences.empty()) {
            warn(warnings, "no call site for influential feature '" + feature.api_name +
                               "'; dropped from report");
            continue;
        }
        const auto it = gt.entries.find(feature.api_name);
        if (it == gt.entries.end()) {
            if (options.require_ground_truth) {
                throw ScanError(ErrorCode::MissingGroundTruth,
                                "'" + feature.api_name +
                                    "' has no ground-truth entry; feature set and ground truth "
                                    "are out of sync");
            }
        } else {
            finding.behaviors = it->second;
        }
        report.findings.push_back(std::move(finding));
    }

    std::stable_sort(report.findings.begin(), report.findings.end(),
                     [](const Finding& a, const Finding& b) {
                         const Occurrence& fa = a.occurrences.front();
                         const Occurrence& fb = b.occurrences.front();
                         if (fa.file != fb.file) return fa.file < fb.file;
                         return fa.line < fb.line;
                     });
    return report;
}

nlohmann::json report_to_json(const ExplanationReport& report) {
    nlohmann::json findings = nlohmann::json::array();
    for (const Finding& finding : report.findings) {
        nlohmann::json occurrences = nlohmann::json::array();
        for (const Occurrence& occ : finding.occurrences) {
            occurrences.push_back(
                {{"file", occ.file}, {"line", occ.line}, {"scope", occ.scope.serialized()}});
        }
        findings.push_back({{"api", finding.api_name},
                            {"occurrences", std::move(occurrences)},
                            {"behaviors", finding.behaviors},
                            {"lime_weight", finding.lime_weight}});
    }
    return {{"package", report.package_id},
            {"verdict", label_name(report.verdict.label)},
            {"score", report.verdict.score},
            {"findings", std::move(findings)}};
}

std::string report_to_text(const ExplanationReport& report) {
    std::ostringstream out;
    char score_buf[32];
    std::snprintf(score_buf, sizeof score_buf, "%.3f", report.verdict.score);
    out << "Package: " << report.package_id << "\n";
    out << "Verdict: " << (report.verdict.label == Label::malicious ? "MALICIOUS" : "benign")
        << " (score " << score_buf << ")\n";
    if (report.findings.empty()) {
        if (report.verdict.label == Label::benign) {
            out << "No suspicious behavior to report.\n";
        }
        return out.str();
    }
    out << "Sensitive APIs in order of appearance:\n";
    int rank = 1;
    for (const Finding& finding : report.findings) {
        out << "\n[" << rank++ << "] " << finding.api_name << "\n";
        out << "    Locations:\n";
        for (const Occurrence& occ : finding.occurrences) {
            out << "      - " << occ.file << ":" << occ.line << " (" << occ.scope.display()
                << ")\n";
        }
        if (!finding.behaviors.empty()) {
            out << "    Potential malicious behaviors:\n";
            for (const std::string& behavior : finding.behaviors) {
                out << "      - " << behavior << "\n";
            }
        }
    }
    return out.str();
}

}  // namespace malscan
