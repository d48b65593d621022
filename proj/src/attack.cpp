#include "malscan/attack.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "malscan/featureset.hpp"

namespace malscan {

InjectionParams::InjectionParams(int alpha_in, int beta_in, std::uint64_t seed_in)
    : alpha(alpha_in), beta(beta_in), seed(seed_in) {
    if (alpha < 1 || alpha > 3) {
        throw ScanError(ErrorCode::InvalidArgument, "alpha must lie in [1,3]");
    }
    if (beta < 1 || beta > 5) {
        throw ScanError(ErrorCode::InvalidArgument, "beta must lie in [1,5]");
    }
}

std::vector<FeatureVector> add_noise(const std::vector<FeatureVector>& vectors, double sigma,
                                     std::uint64_t seed) {
    if (sigma < 0.0) {
        throw ScanError(ErrorCode::InvalidArgument, "sigma must be non-negative");
    }
    std::vector<FeatureVector> out = vectors;
    if (sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (FeatureVector& v : out) {
        for (double& value : v.values) {
            value = std::max(0.0, value + noise(rng));
        }
    }
    return out;
}

std::vector<FeatureVector> binarize(const std::vector<FeatureVector>& vectors) {
    std::vector<FeatureVector> out = vectors;
    for (FeatureVector& v : out) {
        for (double& value : v.values) {
            value = value > 0.0 ? 1.0 : 0.0;
        }
    }
    return out;
}

PackageArtifact inject_benign_files(const PackageArtifact& target,
                                    const std::vector<PackageArtifact>& donors,
                                    const InjectionParams& params) {
    if (static_cast<int>(donors.size()) < params.alpha) {
        throw ScanError(ErrorCode::InsufficientDonors,
                        "need " + std::to_string(params.alpha) + " donors, have " +
                            std::to_string(donors.size()));
    }
    std::mt19937_64 rng(params.seed);

    // Pick alpha donors, then pool their files.
    std::vector<std::size_t> donor_idx(donors.size());
    for (std::size_t i = 0; i < donor_idx.size(); ++i) donor_idx[i] = i;
    for (int i = 0; i < params.alpha; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                        donor_idx.size() - 1);
        std::swap(donor_idx[static_cast<std::size_t>(i)], donor_idx[pick(rng)]);
    }
    std::vector<const SourceFile*> pool;
    for (int i = 0; i < params.alpha; ++i) {
        for (const SourceFile& f : donors[donor_idx[static_cast<std::size_t>(i)]].sources) {
            pool.push_back(&f);
        }
    }
    if (static_cast<int>(pool.size()) < params.beta) {
        throw ScanError(ErrorCode::InsufficientDonors,
                        "selected donors hold " + std::to_string(pool.size()) +
                            " files, need " + std::to_string(params.beta));
    }
    for (int i = 0; i < params.beta; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                        pool.size() - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
    }

    PackageArtifact out = target;
    std::set<std::string> taken;
    for (const SourceFile& f : out.sources) taken.insert(f.relative_path);

    const std::string tag = fnv1a_hex(std::to_string(params.seed)).substr(0, 8);
    for (int i = 0; i < params.beta; ++i) {
        const SourceFile& donor_file = *pool[static_cast<std::size_t>(i)];
        std::string base = donor_file.relative_path;
        const std::size_t slash = base.find_last_of('/');
        if (slash != std::string::npos) base = base.substr(slash + 1);

        std::string fresh;
        int bump = i;
        do {
            fresh = "inj_" + tag + "_" + std::to_string(bump++) + "_" + base;
        } while (taken.contains(fresh));
        taken.insert(fresh);
        out.sources.push_back(SourceFile{fresh, donor_file.text, donor_file.line_count});
    }

    std::sort(out.sources.begin(), out.sources.end(),
              [](const SourceFile& a, const SourceFile& b) {
                  return a.relative_path < b.relative_path;
              });
    return out;
}

}  // namespace malscan
