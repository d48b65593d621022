#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "malscan/errors.hpp"

namespace malscan {

struct SourceFile {
    std::string relative_path;  // '/'-separated, unique within the artifact
    std::string text;
    int line_count = 0;
};

enum class ArchiveKind { tar_gz, zip_wheel, directory };

// One unpacked package: name/version from the filename convention, sources
// restricted to ".py" files in lexicographic path order.
struct PackageArtifact {
    std::string name;
    std::string version;
    std::filesystem::path root_path;
    std::vector<SourceFile> sources;
    ArchiveKind archive_kind = ArchiveKind::directory;

    std::string id() const { return version.empty() ? name : name + "-" + version; }
};

int count_lines(const std::string& text);
bool is_valid_utf8(const std::string& text);

// "name-version" split at the last '-' preceding a digit-leading segment;
// falls back to {stem, "0"}.
std::pair<std::string, std::string> parse_name_version(const std::string& archive_filename);

// Recursively collects ".py" files under root, skipping symlinks and files
// that are not valid UTF-8 (warned, not fatal). Deterministic lexicographic
// order by relative path.
std::vector<SourceFile> discover_sources(const std::filesystem::path& root,
                                         WarningLog* warnings = nullptr);

// Unpacks .tar.gz/.tgz/.zip/.whl into dest_root (a fresh temp directory when
// empty) or walks a plain directory in place. Member paths that escape the
// extraction root are rejected with PathTraversal.
PackageArtifact unpack_package(const std::filesystem::path& archive,
                               const std::filesystem::path& dest_root = {},
                               WarningLog* warnings = nullptr);

namespace archive {

struct Member {
    std::string path;  // as stored in the archive
    std::string data;
    bool is_dir = false;
};

std::vector<Member> read_tar_gz(const std::filesystem::path& path);
std::vector<Member> read_zip(const std::filesystem::path& path);

// Fixture writers. tar.gz uses gzip-wrapped ustar; zip stores entries
// uncompressed. Paths are written verbatim so tests can plant traversal
// members.
void write_tar_gz(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, std::string>>& entries);
void write_zip(const std::filesystem::path& path,
               const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace archive

}  // namespace malscan
