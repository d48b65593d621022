#include <doctest.h>

#include <fstream>
#include <functional>

#include "malscan/ingest.hpp"
#include "support/fixtures.hpp"

using namespace malscan;
using testing::TempDir;
using testing::write_file;

namespace {

bool throws_code(ErrorCode code, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ScanError& e) {
        return e.code() == code;
    }
    return false;
}

}  // namespace

TEST_CASE("tar.gz unpack enumerates sources lexicographically") {
    TempDir dir;
    const auto archive = dir.path() / "demo-1.0.tar.gz";
    archive::write_tar_gz(archive, {
        {"setup.py", "import os\n"},
        {"pkg/mod.py", "x = 1\n"},
        {"README.md", "not python\n"},
    });

    const PackageArtifact artifact = unpack_package(archive);
    CHECK(artifact.name == "demo");
    CHECK(artifact.version == "1.0");
    CHECK(artifact.archive_kind == ArchiveKind::tar_gz);
    REQUIRE(artifact.sources.size() == 2);
    CHECK(artifact.sources[0].relative_path == "pkg/mod.py");
    CHECK(artifact.sources[1].relative_path == "setup.py");
    CHECK(artifact.sources[1].text == "import os\n");
    CHECK(artifact.sources[1].line_count == 1);
    std::filesystem::remove_all(artifact.root_path);
}

TEST_CASE("empty tar.gz yields an artifact with zero sources") {
    TempDir dir;
    const auto archive = dir.path() / "empty-0.1.tgz";
    archive::write_tar_gz(archive, {});
    const PackageArtifact artifact = unpack_package(archive);
    CHECK(artifact.sources.empty());
    std::filesystem::remove_all(artifact.root_path);
}

TEST_CASE("zip and wheel archives unpack") {
    TempDir dir;
    const auto wheel = dir.path() / "pkg-2.3.0-py3-none-any.whl";
    archive::write_zip(wheel, {
        {"pkg/__init__.py", "import sys\n"},
        {"pkg/data.txt", "binary-ish"},
    });
    const PackageArtifact artifact = unpack_package(wheel);
    CHECK(artifact.name == "pkg");
    CHECK(artifact.archive_kind == ArchiveKind::zip_wheel);
    REQUIRE(artifact.sources.size() == 1);
    CHECK(artifact.sources[0].relative_path == "pkg/__init__.py");
    std::filesystem::remove_all(artifact.root_path);
}

TEST_CASE("traversal members are rejected") {
    TempDir dir;

    SUBCASE("tar with ../../ member") {
        const auto archive = dir.path() / "evil-1.0.tar.gz";
        archive::write_tar_gz(archive, {{"../../evil.py", "print('x')\n"}});
        CHECK(throws_code(ErrorCode::PathTraversal, [&] { unpack_package(archive); }));
    }
    SUBCASE("zip with absolute member") {
        const auto archive = dir.path() / "evil-1.0.zip";
        archive::write_zip(archive, {{"/tmp/evil.py", "print('x')\n"}});
        CHECK(throws_code(ErrorCode::PathTraversal, [&] { unpack_package(archive); }));
    }
    // Nothing outside the extraction root may exist afterwards.
    CHECK(!std::filesystem::exists(dir.path().parent_path() / "evil.py"));
}

TEST_CASE("unknown extension and corrupt archives") {
    TempDir dir;
    const auto odd = dir.path() / "demo.rar";
    write_file(odd, "junk");
    CHECK(throws_code(ErrorCode::UnsupportedArchive, [&] { unpack_package(odd); }));

    const auto corrupt = dir.path() / "demo-1.0.zip";
    write_file(corrupt, "this is not a zip file at all............");
    CHECK(throws_code(ErrorCode::CorruptArchive, [&] { unpack_package(corrupt); }));

    CHECK(throws_code(ErrorCode::IoError, [&] { unpack_package(dir.path() / "missing.tar.gz"); }));
}

TEST_CASE("discover_sources filters, sorts and skips") {
    TempDir dir;
    write_file(dir.path() / "a.py", "x = 1\n");
    write_file(dir.path() / "b" / "c.py", "y = 2\n");
    write_file(dir.path() / "d.txt", "nope\n");

    WarningLog warnings;
    auto sources = discover_sources(dir.path(), &warnings);
    REQUIRE(sources.size() == 2);
    CHECK(sources[0].relative_path == "a.py");
    CHECK(sources[1].relative_path == "b/c.py");
    CHECK(warnings.messages.empty());

    SUBCASE("second run is identical") {
        const auto again = discover_sources(dir.path());
        REQUIRE(again.size() == sources.size());
        for (std::size_t i = 0; i < again.size(); ++i) {
            CHECK(again[i].relative_path == sources[i].relative_path);
            CHECK(again[i].text == sources[i].text);
        }
    }
}

TEST_CASE("discover_sources: empty directory and non-UTF8 files") {
    TempDir dir;
    CHECK(discover_sources(dir.path()).empty());

    write_file(dir.path() / "bad.py", std::string("x = '\xff\xfe\x01'\n"));
    write_file(dir.path() / "good.py", "x = 1\n");
    WarningLog warnings;
    const auto sources = discover_sources(dir.path(), &warnings);
    REQUIRE(sources.size() == 1);
    CHECK(sources[0].relative_path == "good.py");
    REQUIRE(warnings.messages.size() == 1);
    CHECK(warnings.messages[0].find("bad.py") != std::string::npos);
}

TEST_CASE("discover_sources never follows symlinks") {
    TempDir outside;
    write_file(outside.path() / "secret.py", "leak = True\n");
    TempDir dir;
    write_file(dir.path() / "ok.py", "x = 1\n");
    std::filesystem::create_symlink(outside.path() / "secret.py", dir.path() / "link.py");
    std::filesystem::create_directory_symlink(outside.path(), dir.path() / "linked_dir");

    const auto sources = discover_sources(dir.path());
    REQUIRE(sources.size() == 1);
    CHECK(sources[0].relative_path == "ok.py");
}

TEST_CASE("discover_sources on unreadable root") {
    TempDir dir;
    CHECK(throws_code(ErrorCode::IoError, [&] { discover_sources(dir.path() / "nope"); }));
}

TEST_CASE("name/version parsing follows the sdist convention") {
    CHECK(parse_name_version("requests-2.31.0.tar.gz") ==
          std::pair<std::string, std::string>{"requests", "2.31.0"});
    CHECK(parse_name_version("foo-bar-1.2.3.zip") ==
          std::pair<std::string, std::string>{"foo-bar", "1.2.3"});
    CHECK(parse_name_version("noversion.tgz") ==
          std::pair<std::string, std::string>{"noversion", "0"});
    CHECK(parse_name_version("plain-dir") == std::pair<std::string, std::string>{"plain-dir", "0"});
    CHECK(parse_name_version("crytic-compilers-0.3.9.tar.gz") ==
          std::pair<std::string, std::string>{"crytic-compilers", "0.3.9"});
}

TEST_CASE("directory packages are walked in place") {
    TempDir dir;
    const auto pkg = dir.path() / "mytool-0.2";
    write_file(pkg / "setup.py", "import os\n");
    const PackageArtifact artifact = unpack_package(pkg);
    CHECK(artifact.archive_kind == ArchiveKind::directory);
    CHECK(artifact.name == "mytool");
    CHECK(artifact.version == "0.2");
    CHECK(artifact.root_path == pkg);
    REQUIRE(artifact.sources.size() == 1);
}

TEST_CASE("count_lines and utf8 validation") {
    CHECK(count_lines("") == 0);
    CHECK(count_lines("a") == 1);
    CHECK(count_lines("a\n") == 1);
    CHECK(count_lines("a\nb") == 2);
    CHECK(is_valid_utf8("plain ascii"));
    CHECK(is_valid_utf8("caf\xc3\xa9"));
    CHECK(!is_valid_utf8("bad\xff"));
    CHECK(!is_valid_utf8("trunc\xc3"));
}
