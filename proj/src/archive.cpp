#include "malscan/ingest.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>

namespace malscan::archive {

namespace {

constexpr std::size_t kTarBlock = 512;

std::string gz_read_all(const std::filesystem::path& path) {
    gzFile gz = gzopen(path.string().c_str(), "rb");
    if (gz == nullptr) {
        throw ScanError(ErrorCode::IoError, "cannot open " + path.string());
    }
    std::string out;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(gz, buf, sizeof buf)) > 0) {
        out.append(buf, static_cast<std::size_t>(n));
    }
    if (n < 0) {
        int errnum = 0;
        const char* msg = gzerror(gz, &errnum);
        std::string detail = msg != nullptr ? msg : "gzread failed";
        gzclose(gz);
        throw ScanError(ErrorCode::CorruptArchive, path.string() + ": " + detail);
    }
    gzclose(gz);
    return out;
}

std::uint64_t parse_octal(const char* field, std::size_t len) {
    std::uint64_t value = 0;
    bool seen = false;
    for (std::size_t i = 0; i < len; ++i) {
        char c = field[i];
        if (c == ' ' || c == '\0') {
            if (seen) break;
            continue;
        }
        if (c < '0' || c > '7') {
            throw ScanError(ErrorCode::CorruptArchive, "bad octal field in tar header");
        }
        value = value * 8 + static_cast<std::uint64_t>(c - '0');
        seen = true;
    }
    return value;
}

bool block_is_zero(const char* block) {
    for (std::size_t i = 0; i < kTarBlock; ++i) {
        if (block[i] != '\0') return false;
    }
    return true;
}

std::string trimmed_field(const char* field, std::size_t len) {
    std::size_t n = 0;
    while (n < len && field[n] != '\0') ++n;
    return std::string(field, n);
}

std::uint32_t read_le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void write_le32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void write_le16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

std::string inflate_raw(const unsigned char* data, std::size_t compressed_size,
                        std::size_t expected_size) {
    std::string out;
    out.resize(expected_size);
    z_stream zs;
    std::memset(&zs, 0, sizeof zs);
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) {
        throw ScanError(ErrorCode::CorruptArchive, "inflateInit failed");
    }
    zs.next_in = const_cast<unsigned char*>(data);
    zs.avail_in = static_cast<uInt>(compressed_size);
    zs.next_out = reinterpret_cast<unsigned char*>(out.data());
    zs.avail_out = static_cast<uInt>(expected_size);
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected_size) {
        throw ScanError(ErrorCode::CorruptArchive, "deflate stream truncated or corrupt");
    }
    return out;
}

}  // namespace

std::vector<Member> read_tar_gz(const std::filesystem::path& path) {
    const std::string raw = gz_read_all(path);
    if (raw.size() % kTarBlock != 0) {
        throw ScanError(ErrorCode::CorruptArchive, path.string() + ": size not block-aligned");
    }
    std::vector<Member> members;
    std::size_t off = 0;
    std::string pending_longname;
    while (off + kTarBlock <= raw.size()) {
        const char* block = raw.data() + off;
        if (block_is_zero(block)) break;  // end-of-archive marker
        const std::uint64_t size = parse_octal(block + 124, 12);
        const char typeflag = block[156];
        std::string name = trimmed_field(block, 100);
        const std::string prefix = trimmed_field(block + 345, 155);
        if (!prefix.empty()) name = prefix + "/" + name;
        if (!pending_longname.empty()) {
            name = pending_longname;
            pending_longname.clear();
        }
        off += kTarBlock;
        const std::size_t padded = static_cast<std::size_t>((size + kTarBlock - 1) / kTarBlock) * kTarBlock;
        if (off + padded > raw.size()) {
            throw ScanError(ErrorCode::CorruptArchive, path.string() + ": truncated member " + name);
        }
        if (typeflag == 'L') {  // GNU long name: data holds the real path
            pending_longname = std::string(raw.data() + off, static_cast<std::size_t>(size));
            while (!pending_longname.empty() && pending_longname.back() == '\0') {
                pending_longname.pop_back();
            }
        } else if (typeflag == '0' || typeflag == '\0') {
            members.push_back({name, std::string(raw.data() + off, static_cast<std::size_t>(size)), false});
        } else if (typeflag == '5') {
            members.push_back({name, "", true});
        }
        // Symlinks ('2'), PAX headers ('x','g') and device nodes are skipped.
        off += padded;
    }
    return members;
}

std::vector<Member> read_zip(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScanError(ErrorCode::IoError, "cannot open " + path.string());
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());

    // End-of-central-directory: scan backwards through the trailing comment.
    if (raw.size() < 22) throw ScanError(ErrorCode::CorruptArchive, path.string() + ": too small");
    std::size_t eocd = std::string::npos;
    const std::size_t scan_floor = raw.size() > (1 << 16) + 22 ? raw.size() - (1 << 16) - 22 : 0;
    for (std::size_t i = raw.size() - 22 + 1; i-- > scan_floor;) {
        if (read_le32(bytes + i) == 0x06054b50) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) {
        throw ScanError(ErrorCode::CorruptArchive, path.string() + ": no central directory");
    }
    const std::uint16_t entry_count = read_le16(bytes + eocd + 10);
    const std::uint32_t cd_offset = read_le32(bytes + eocd + 16);

    std::vector<Member> members;
    std::size_t off = cd_offset;
    for (std::uint16_t e = 0; e < entry_count; ++e) {
        if (off + 46 > raw.size() || read_le32(bytes + off) != 0x02014b50) {
            throw ScanError(ErrorCode::CorruptArchive, path.string() + ": bad central header");
        }
        const std::uint16_t method = read_le16(bytes + off + 10);
        const std::uint32_t comp_size = read_le32(bytes + off + 20);
        const std::uint32_t uncomp_size = read_le32(bytes + off + 24);
        const std::uint16_t name_len = read_le16(bytes + off + 28);
        const std::uint16_t extra_len = read_le16(bytes + off + 30);
        const std::uint16_t comment_len = read_le16(bytes + off + 32);
        const std::uint32_t local_off = read_le32(bytes + off + 42);
        if (comp_size == 0xFFFFFFFF || uncomp_size == 0xFFFFFFFF || local_off == 0xFFFFFFFF) {
            throw ScanError(ErrorCode::CorruptArchive, path.string() + ": zip64 not supported");
        }
        if (off + 46 + name_len > raw.size()) {
            throw ScanError(ErrorCode::CorruptArchive, path.string() + ": truncated name");
        }
        std::string name(raw.data() + off + 46, name_len);
        off += 46u + name_len + extra_len + comment_len;

        if (local_off + 30 > raw.size() || read_le32(bytes + local_off) != 0x04034b50) {
            throw ScanError(ErrorCode::CorruptArchive, path.string() + ": bad local header for " + name);
        }
        const std::uint16_t l_name_len = read_le16(bytes + local_off + 26);
        const std::uint16_t l_extra_len = read_le16(bytes + local_off + 28);
        const std::size_t data_off = local_off + 30u + l_name_len + l_extra_len;
        if (data_off + comp_size > raw.size()) {
            throw ScanError(ErrorCode::CorruptArchive, path.string() + ": truncated data for " + name);
        }

        const bool is_dir = !name.empty() && name.back() == '/';
        std::string data;
        if (!is_dir) {
            if (method == 0) {
                data.assign(raw.data() + data_off, comp_size);
            } else if (method == 8) {
                data = inflate_raw(bytes + data_off, comp_size, uncomp_size);
            } else {
                throw ScanError(ErrorCode::CorruptArchive,
                                path.string() + ": unsupported compression method for " + name);
            }
        }
        members.push_back({std::move(name), std::move(data), is_dir});
    }
    return members;
}

void write_tar_gz(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string tar;
    for (const auto& [name, data] : entries) {
        char header[kTarBlock];
        std::memset(header, 0, sizeof header);
        std::snprintf(header, 100, "%s", name.c_str());
        std::snprintf(header + 100, 8, "%07o", 0644);
        std::snprintf(header + 108, 8, "%07o", 0);
        std::snprintf(header + 116, 8, "%07o", 0);
        std::snprintf(header + 124, 12, "%011llo", static_cast<unsigned long long>(data.size()));
        std::snprintf(header + 136, 12, "%011o", 0);
        std::memset(header + 148, ' ', 8);  // checksum computed over spaces
        header[156] = '0';
        std::memcpy(header + 257, "ustar", 6);
        std::memcpy(header + 263, "00", 2);
        unsigned checksum = 0;
        for (unsigned char c : header) checksum += c;
        std::snprintf(header + 148, 8, "%06o", checksum);
        header[154] = '\0';
        header[155] = ' ';
        tar.append(header, kTarBlock);
        tar.append(data);
        if (data.size() % kTarBlock != 0) {
            tar.append(kTarBlock - data.size() % kTarBlock, '\0');
        }
    }
    tar.append(2 * kTarBlock, '\0');

    gzFile gz = gzopen(path.string().c_str(), "wb");
    if (gz == nullptr) throw ScanError(ErrorCode::IoError, "cannot create " + path.string());
    if (gzwrite(gz, tar.data(), static_cast<unsigned>(tar.size())) != static_cast<int>(tar.size())) {
        gzclose(gz);
        throw ScanError(ErrorCode::IoError, "short write to " + path.string());
    }
    gzclose(gz);
}

void write_zip(const std::filesystem::path& path,
               const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string out;
    std::string central;
    for (const auto& [name, data] : entries) {
        const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
        const std::uint32_t crc =
            static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(data.data()),
                                             static_cast<uInt>(data.size())));
        write_le32(out, 0x04034b50);
        write_le16(out, 20);  // version needed
        write_le16(out, 0);   // flags
        write_le16(out, 0);   // method: stored
        write_le16(out, 0);   // mod time
        write_le16(out, 0);   // mod date
        write_le32(out, crc);
        write_le32(out, static_cast<std::uint32_t>(data.size()));
        write_le32(out, static_cast<std::uint32_t>(data.size()));
        write_le16(out, static_cast<std::uint16_t>(name.size()));
        write_le16(out, 0);  // extra
        out += name;
        out += data;

        write_le32(central, 0x02014b50);
        write_le16(central, 20);
        write_le16(central, 20);
        write_le16(central, 0);
        write_le16(central, 0);
        write_le16(central, 0);
        write_le16(central, 0);
        write_le32(central, crc);
        write_le32(central, static_cast<std::uint32_t>(data.size()));
        write_le32(central, static_cast<std::uint32_t>(data.size()));
        write_le16(central, static_cast<std::uint16_t>(name.size()));
        write_le16(central, 0);
        write_le16(central, 0);
        write_le16(central, 0);
        write_le16(central, 0);
        write_le32(central, 0);
        write_le32(central, offset);
        central += name;
    }
    const std::uint32_t cd_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    write_le32(out, 0x06054b50);
    write_le16(out, 0);
    write_le16(out, 0);
    write_le16(out, static_cast<std::uint16_t>(entries.size()));
    write_le16(out, static_cast<std::uint16_t>(entries.size()));
    write_le32(out, static_cast<std::uint32_t>(central.size()));
    write_le32(out, cd_offset);
    write_le16(out, 0);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw ScanError(ErrorCode::IoError, "cannot create " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace malscan::archive
