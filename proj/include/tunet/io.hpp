#ifndef TUNET_IO_HPP
#define TUNET_IO_HPP

#include "tunet/rng.hpp"
#include "tunet/volume.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace tunet {

/// File-level failures carry a machine-checkable code on top of the message.
struct IoError : DataError {
    enum class Code { bad_magic, truncated, dim_overflow, kind_mismatch, unreadable, bad_format };
    Code code;
    IoError(Code c, const std::string& msg) : DataError(msg), code(c) {}
};

enum class VolKind : std::uint8_t { f32_scalar = 0, u8_label = 1, u8_mask = 2 };

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (unsigned char)(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError(IoError::Code::truncated, std::string("truncated header field: ") + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError(IoError::Code::truncated, std::string("truncated header field: ") + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& in, const char* what) {
    std::uint64_t bits = get_u64(in, what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

constexpr std::uint64_t kMaxDim = std::uint64_t(1) << 20;

inline Dims3 get_dims(std::istream& in) {
    std::uint64_t w = get_u64(in, "W"), h = get_u64(in, "H"), d = get_u64(in, "D");
    if (w == 0 || h == 0 || d == 0 || w > kMaxDim || h > kMaxDim || d > kMaxDim ||
        w * h > (std::uint64_t(1) << 40) / d)
        throw IoError(IoError::Code::dim_overflow, "volume dims out of range");
    return Dims3{Index(w), Index(h), Index(d)};
}

}  // namespace detail

/// Writes through a temp file and renames into place, so readers never see a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& writer) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(IoError::Code::unreadable, "cannot open for write: " + tmp.string());
        writer(out);
        if (!out) throw IoError(IoError::Code::unreadable, "write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// MVOL1 container. Byte layout documented in docs/FORMATS.md. Little-endian
// payload throughout, x fastest, then y, then z.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_mvol(const std::filesystem::path& path, VolKind kind, Dims3 dims,
                       Spacing spacing, const char* payload, std::size_t bytes) {
    write_file_atomic(path, [&](std::ostream& out) {
        out.write("MVOL1", 5);
        char kb = char(kind);
        char endian = 1;  // little
        char reserved = 0;
        out.write(&kb, 1);
        out.write(&endian, 1);
        out.write(&reserved, 1);
        put_u64(out, std::uint64_t(dims.w));
        put_u64(out, std::uint64_t(dims.h));
        put_u64(out, std::uint64_t(dims.d));
        put_f64(out, spacing.dx);
        put_f64(out, spacing.dy);
        put_f64(out, spacing.dz);
        out.write(payload, std::streamsize(bytes));
    });
}

struct MvolHeader {
    VolKind kind;
    Dims3 dims;
    Spacing spacing;
};

inline MvolHeader read_mvol_header(std::istream& in, const std::filesystem::path& path) {
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "MVOL1", 5) != 0)
        throw IoError(IoError::Code::bad_magic, "bad magic in " + path.string());
    char kind, endian, reserved;
    in.read(&kind, 1);
    in.read(&endian, 1);
    in.read(&reserved, 1);
    if (!in) throw IoError(IoError::Code::truncated, "truncated header in " + path.string());
    if (kind < 0 || kind > 2)
        throw IoError(IoError::Code::bad_format, "unknown value kind in " + path.string());
    if (endian != 1)
        throw IoError(IoError::Code::bad_format, "unsupported endianness tag in " + path.string());
    MvolHeader h;
    h.kind = VolKind(kind);
    h.dims = get_dims(in);
    h.spacing.dx = get_f64(in, "dx");
    h.spacing.dy = get_f64(in, "dy");
    h.spacing.dz = get_f64(in, "dz");
    return h;
}

template <typename T>
void read_payload(std::istream& in, ArrayX<T>& data, Index count, const std::filesystem::path& path) {
    data.resize(count);
    in.read(reinterpret_cast<char*>(data.data()), std::streamsize(std::size_t(count) * sizeof(T)));
    if (in.gcount() != std::streamsize(std::size_t(count) * sizeof(T)))
        throw IoError(IoError::Code::truncated, "truncated payload in " + path.string());
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Code::unreadable, "cannot open " + path.string());
    return in;
}

}  // namespace detail

inline void write_volume(const Volume<float>& v, const std::filesystem::path& path) {
    detail::write_mvol(path, VolKind::f32_scalar, v.dims, v.spacing,
                       reinterpret_cast<const char*>(v.data.data()),
                       std::size_t(v.data.size()) * 4);
}

inline void write_volume(const LabelMap& v, const std::filesystem::path& path, Spacing sp = {}) {
    detail::write_mvol(path, VolKind::u8_label, v.dims, sp,
                       reinterpret_cast<const char*>(v.data.data()), std::size_t(v.data.size()));
}

inline void write_volume(const BinaryMask& v, const std::filesystem::path& path, Spacing sp = {}) {
    detail::write_mvol(path, VolKind::u8_mask, v.dims, sp,
                       reinterpret_cast<const char*>(v.data.data()), std::size_t(v.data.size()));
}

inline VolKind peek_kind(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return detail::read_mvol_header(in, path).kind;
}

inline Volume<float> read_scalar_volume(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    auto h = detail::read_mvol_header(in, path);
    if (h.kind != VolKind::f32_scalar)
        throw IoError(IoError::Code::kind_mismatch, "expected f32 scalar volume: " + path.string());
    Volume<float> v;
    v.dims = h.dims;
    v.spacing = h.spacing;
    detail::read_payload(in, v.data, h.dims.voxels(), path);
    if (!v.data.isFinite().all())
        throw NumericError("non-finite voxel values in " + path.string());
    return v;
}

inline LabelMap read_label_map(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    auto h = detail::read_mvol_header(in, path);
    if (h.kind != VolKind::u8_label)
        throw IoError(IoError::Code::kind_mismatch, "expected label map: " + path.string());
    LabelMap v;
    v.dims = h.dims;
    detail::read_payload(in, v.data, h.dims.voxels(), path);
    if ((v.data > 2).any()) throw IoError(IoError::Code::bad_format, "labels outside {0,1,2} in " + path.string());
    return v;
}

inline BinaryMask read_mask(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    auto h = detail::read_mvol_header(in, path);
    if (h.kind != VolKind::u8_mask)
        throw IoError(IoError::Code::kind_mismatch, "expected binary mask: " + path.string());
    BinaryMask v;
    v.dims = h.dims;
    detail::read_payload(in, v.data, h.dims.voxels(), path);
    if ((v.data > 1).any()) throw IoError(IoError::Code::bad_format, "mask values outside {0,1} in " + path.string());
    return v;
}

// ---------------------------------------------------------------------------
// Case manifests: one `case_id<TAB>image_path<TAB>label_path` line per case.
// Relative paths are resolved against the manifest's directory.
// ---------------------------------------------------------------------------

struct CaseRecord {
    std::string id;
    std::filesystem::path image_path;
    std::filesystem::path label_path;
};

struct CaseManifest {
    std::vector<CaseRecord> cases;
};

inline CaseManifest load_manifest(const std::filesystem::path& path, bool check_exists = true) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Code::unreadable, "cannot open manifest " + path.string());
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    CaseManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw IoError(IoError::Code::bad_format,
                          "manifest line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
        CaseRecord rec;
        rec.id = line.substr(0, t1);
        std::filesystem::path img = line.substr(t1 + 1, t2 - t1 - 1);
        std::filesystem::path lbl = line.substr(t2 + 1);
        rec.image_path = img.is_absolute() ? img : base / img;
        rec.label_path = lbl.is_absolute() ? lbl : base / lbl;
        m.cases.push_back(std::move(rec));
    }
    std::vector<std::string> ids;
    for (const auto& c : m.cases) ids.push_back(c.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw IoError(IoError::Code::bad_format, "duplicate case id in manifest " + path.string());
    if (check_exists)
        for (const auto& c : m.cases) {
            if (!std::filesystem::exists(c.image_path))
                throw IoError(IoError::Code::unreadable, "missing image file " + c.image_path.string());
            if (!std::filesystem::exists(c.label_path))
                throw IoError(IoError::Code::unreadable, "missing label file " + c.label_path.string());
        }
    return m;
}

inline void save_manifest(const CaseManifest& m, const std::filesystem::path& path) {
    write_file_atomic(path, [&](std::ostream& out) {
        for (const auto& c : m.cases)
            out << c.id << '\t' << c.image_path.string() << '\t' << c.label_path.string() << '\n';
    });
}

// ---------------------------------------------------------------------------
// Deterministic k-fold split: sort case ids, shuffle with a seeded SplitMix64,
// deal round-robin. Depends only on the id set, k and seed, never on manifest
// file order.
// ---------------------------------------------------------------------------

struct FoldSplit {
    int k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, int> assignment;

    std::vector<std::string> fold_cases(int fold) const {
        std::vector<std::string> out;
        for (const auto& [id, f] : assignment)
            if (f == fold) out.push_back(id);
        return out;
    }
};

inline FoldSplit split_folds(const CaseManifest& manifest, int k, std::uint64_t seed) {
    require(!manifest.cases.empty(), "split_folds: empty manifest");
    require(k >= 2, "split_folds: fold count must be >= 2");
    require(std::size_t(k) <= manifest.cases.size(), "split_folds: more folds than cases");
    std::vector<std::string> ids;
    for (const auto& c : manifest.cases) ids.push_back(c.id);
    std::sort(ids.begin(), ids.end());
    SplitMix64 rng(seed);
    shuffle(ids, rng);
    FoldSplit split;
    split.k = k;
    split.seed = seed;
    for (std::size_t i = 0; i < ids.size(); ++i) split.assignment[ids[i]] = int(i % std::size_t(k));
    return split;
}

// ---------------------------------------------------------------------------
// MPAR1 parameter container: name-keyed f32 blocks, bit-exact round trip.
// ---------------------------------------------------------------------------

struct ParamFileEntry {
    std::string name;
    ArrayX<float> values;
};

inline void save_params(const std::vector<ParamFileEntry>& blocks, const std::filesystem::path& path) {
    write_file_atomic(path, [&](std::ostream& out) {
        out.write("MPAR1", 5);
        char kind = 0;  // f32
        char reserved[2] = {0, 0};
        out.write(&kind, 1);
        out.write(reserved, 2);
        detail::put_u32(out, std::uint32_t(blocks.size()));
        for (const auto& b : blocks) {
            detail::put_u32(out, std::uint32_t(b.name.size()));
            out.write(b.name.data(), std::streamsize(b.name.size()));
            detail::put_u64(out, std::uint64_t(b.values.size()));
            out.write(reinterpret_cast<const char*>(b.values.data()),
                      std::streamsize(std::size_t(b.values.size()) * 4));
        }
    });
}

inline std::vector<ParamFileEntry> load_params(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "MPAR1", 5) != 0)
        throw IoError(IoError::Code::bad_magic, "bad magic in " + path.string());
    char kind, reserved[2];
    in.read(&kind, 1);
    in.read(reserved, 2);
    if (!in || kind != 0)
        throw IoError(IoError::Code::bad_format, "unsupported parameter scalar kind in " + path.string());
    std::uint32_t count = detail::get_u32(in, "block count");
    std::vector<ParamFileEntry> blocks(count);
    for (auto& b : blocks) {
        std::uint32_t len = detail::get_u32(in, "name length");
        if (len > 4096) throw IoError(IoError::Code::bad_format, "unreasonable block name length");
        b.name.resize(len);
        in.read(b.name.data(), len);
        if (!in) throw IoError(IoError::Code::truncated, "truncated block name in " + path.string());
        std::uint64_t n = detail::get_u64(in, "value count");
        if (n > (std::uint64_t(1) << 32))
            throw IoError(IoError::Code::dim_overflow, "parameter block too large in " + path.string());
        detail::read_payload(in, b.values, Index(n), path);
    }
    return blocks;
}

// Architecture sidecar: `key=value` lines, used to validate parameter files
// against the network they are loaded into.
inline void save_kv(const std::map<std::string, std::string>& kv, const std::filesystem::path& path) {
    write_file_atomic(path, [&](std::ostream& out) {
        for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
    });
}

inline std::map<std::string, std::string> load_kv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Code::unreadable, "cannot open " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(IoError::Code::bad_format, "bad key=value line in " + path.string());
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace tunet

#endif
