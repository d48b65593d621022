#include "support/fixtures.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace malscan::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "malscan-test-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

PackageArtifact make_artifact(const std::string& name, const std::string& version,
                              std::vector<std::pair<std::string, std::string>> files) {
    PackageArtifact artifact;
    artifact.name = name;
    artifact.version = version;
    artifact.archive_kind = ArchiveKind::directory;
    std::sort(files.begin(), files.end());
    for (auto& [rel, text] : files) {
        const int lines = count_lines(text);
        artifact.sources.push_back(SourceFile{rel, std::move(text), lines});
    }
    return artifact;
}

}  // namespace malscan::testing
