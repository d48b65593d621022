#include "malscan/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace malscan {

namespace fs = std::filesystem;

int count_lines(const std::string& text) {
    if (text.empty()) return 0;
    int lines = static_cast<int>(std::count(text.begin(), text.end(), '\n'));
    if (text.back() != '\n') ++lines;
    return lines;
}

bool is_valid_utf8(const std::string& text) {
    const auto* p = reinterpret_cast<const unsigned char*>(text.data());
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const unsigned char c = p[i];
        std::size_t cont = 0;
        if (c < 0x80) {
            cont = 0;
        } else if ((c & 0xE0) == 0xC0) {
            if (c < 0xC2) return false;  // overlong
            cont = 1;
        } else if ((c & 0xF0) == 0xE0) {
            cont = 2;
        } else if ((c & 0xF8) == 0xF0) {
            if (c > 0xF4) return false;
            cont = 3;
        } else {
            return false;
        }
        for (std::size_t k = 1; k <= cont; ++k) {
            if (i + k >= n || (p[i + k] & 0xC0) != 0x80) return false;
        }
        i += cont + 1;
    }
    return true;
}

std::pair<std::string, std::string> parse_name_version(const std::string& archive_filename) {
    std::string stem = archive_filename;
    auto strip_suffix = [&stem](const std::string& suffix) {
        if (stem.size() > suffix.size()) {
            std::string tail = stem.substr(stem.size() - suffix.size());
            std::transform(tail.begin(), tail.end(), tail.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (tail == suffix) {
                stem.resize(stem.size() - suffix.size());
                return true;
            }
        }
        return false;
    };
    strip_suffix(".tar.gz") || strip_suffix(".tgz") || strip_suffix(".zip") || strip_suffix(".whl");

    // Last '-' whose following segment starts with a digit splits name from
    // version (sdist convention "name-version").
    std::size_t split = std::string::npos;
    for (std::size_t i = 0; i < stem.size(); ++i) {
        if (stem[i] == '-' && i + 1 < stem.size() &&
            std::isdigit(static_cast<unsigned char>(stem[i + 1]))) {
            split = i;
        }
    }
    if (split == std::string::npos || split == 0) {
        return {stem, "0"};
    }
    return {stem.substr(0, split), stem.substr(split + 1)};
}

namespace {

// Rejects absolute paths and any ".." component; returns the cleaned
// '/'-separated relative path.
std::string sanitize_member_path(const std::string& raw) {
    std::string path = raw;
    std::replace(path.begin(), path.end(), '\\', '/');
    if (!path.empty() && path.front() == '/') {
        throw ScanError(ErrorCode::PathTraversal, "absolute member path: " + raw);
    }
    std::string cleaned;
    std::size_t start = 0;
    while (start <= path.size()) {
        std::size_t end = path.find('/', start);
        if (end == std::string::npos) end = path.size();
        const std::string comp = path.substr(start, end - start);
        if (comp == "..") {
            throw ScanError(ErrorCode::PathTraversal, "member path escapes root: " + raw);
        }
        if (!comp.empty() && comp != ".") {
            if (!cleaned.empty()) cleaned += '/';
            cleaned += comp;
        }
        start = end + 1;
        if (end == path.size()) break;
    }
    return cleaned;
}

fs::path make_temp_root() {
    std::string tmpl = (fs::temp_directory_path() / "malscan-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr) {
        throw ScanError(ErrorCode::IoError, "cannot create temp directory");
    }
    return fs::path(tmpl);
}

void extract_members(const std::vector<archive::Member>& members, const fs::path& root) {
    for (const auto& m : members) {
        const std::string rel = sanitize_member_path(m.path);
        if (rel.empty()) continue;
        const fs::path target = root / rel;
        if (m.is_dir) {
            fs::create_directories(target);
            continue;
        }
        fs::create_directories(target.parent_path());
        std::ofstream out(target, std::ios::binary);
        if (!out) throw ScanError(ErrorCode::IoError, "cannot write " + target.string());
        out.write(m.data.data(), static_cast<std::streamsize>(m.data.size()));
    }
}

}  // namespace

std::vector<SourceFile> discover_sources(const fs::path& root, WarningLog* warnings) {
    std::error_code ec;
    if (!fs::is_directory(root, ec) || ec) {
        throw ScanError(ErrorCode::IoError, "not a readable directory: " + root.string());
    }

    std::vector<std::string> rel_paths;
    try {
        for (auto it = fs::recursive_directory_iterator(root);
             it != fs::recursive_directory_iterator(); ++it) {
            if (it->is_symlink()) {
                if (it->is_directory()) it.disable_recursion_pending();
                continue;
            }
            if (!it->is_regular_file()) continue;
            if (it->path().extension() != ".py") continue;
            rel_paths.push_back(fs::relative(it->path(), root).generic_string());
        }
    } catch (const fs::filesystem_error& e) {
        throw ScanError(ErrorCode::IoError, std::string("walk failed: ") + e.what());
    }
    std::sort(rel_paths.begin(), rel_paths.end());

    std::vector<SourceFile> sources;
    for (const auto& rel : rel_paths) {
        std::ifstream in(root / rel, std::ios::binary);
        if (!in) {
            warn(warnings, "unreadable source skipped: " + rel);
            continue;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        if (!is_valid_utf8(text)) {
            warn(warnings, "non-UTF8 source skipped: " + rel);
            continue;
        }
        const int lines = count_lines(text);
        sources.push_back({rel, std::move(text), lines});
    }
    return sources;
}

PackageArtifact unpack_package(const fs::path& archive_path, const fs::path& dest_root,
                               WarningLog* warnings) {
    std::error_code ec;
    if (!fs::exists(archive_path, ec) || ec) {
        throw ScanError(ErrorCode::IoError, "no such path: " + archive_path.string());
    }

    PackageArtifact artifact;
    const std::string filename = archive_path.filename().string();
    std::tie(artifact.name, artifact.version) = parse_name_version(filename);

    if (fs::is_directory(archive_path)) {
        artifact.archive_kind = ArchiveKind::directory;
        artifact.root_path = archive_path;
        artifact.sources = discover_sources(archive_path, warnings);
        return artifact;
    }

    std::string lower = filename;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    const bool is_targz = lower.ends_with(".tar.gz") || lower.ends_with(".tgz");
    const bool is_zip = lower.ends_with(".zip") || lower.ends_with(".whl");
    if (!is_targz && !is_zip) {
        throw ScanError(ErrorCode::UnsupportedArchive, "unknown extension: " + filename);
    }
    artifact.archive_kind = is_targz ? ArchiveKind::tar_gz : ArchiveKind::zip_wheel;

    const bool own_root = dest_root.empty();
    const fs::path root = own_root ? make_temp_root() : dest_root;
    if (!own_root) fs::create_directories(root);
    try {
        const auto members =
            is_targz ? archive::read_tar_gz(archive_path) : archive::read_zip(archive_path);
        extract_members(members, root);
    } catch (...) {
        if (own_root) fs::remove_all(root, ec);
        throw;
    }

    artifact.root_path = root;
    artifact.sources = discover_sources(root, warnings);
    return artifact;
}

}  // namespace malscan
