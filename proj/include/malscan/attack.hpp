#pragma once

#include <cstdint>
#include <vector>

#include "malscan/ingest.hpp"
#include "malscan/model.hpp"

namespace malscan {

// Dead-code injection knobs: alpha donor packages, beta copied source files.
struct InjectionParams {
    int alpha = 1;  // in [1,3]
    int beta = 1;   // in [1,5]
    std::uint64_t seed = 0;

    InjectionParams(int alpha_in, int beta_in, std::uint64_t seed_in);
};

// Seeded Gaussian noise on every component, clamped at zero. sigma == 0 is
// the identity.
std::vector<FeatureVector> add_noise(const std::vector<FeatureVector>& vectors, double sigma,
                                     std::uint64_t seed);

// Non-zero values become 1.0; idempotent.
std::vector<FeatureVector> binarize(const std::vector<FeatureVector>& vectors);

// Copies beta source files from alpha seeded-chosen donors into the target
// under fresh names. Original files stay byte-identical; sources are re-sorted
// to keep the lexicographic invariant.
PackageArtifact inject_benign_files(const PackageArtifact& target,
                                    const std::vector<PackageArtifact>& donors,
                                    const InjectionParams& params);

}  // namespace malscan
