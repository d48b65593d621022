#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "malscan/ingest.hpp"

namespace malscan::testing {

// Self-cleaning directory under the system temp root.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);

// Builds an in-memory artifact from (relative_path, text) pairs, sorted to
// keep the source-order invariant.
PackageArtifact make_artifact(const std::string& name, const std::string& version,
                              std::vector<std::pair<std::string, std::string>> files);

}  // namespace malscan::testing
