#ifndef HASTE_CONTAINER_HPP
#define HASTE_CONTAINER_HPP

// HSTE weight/dataset container.
//
//   offset  size  field
//   0       4     magic "HSTE"
//   4       4     u32 LE format version (1)
//   8       8     u64 LE manifest length M
//   16      M     UTF-8 JSON manifest
//   16+M    4     u32 LE CRC-32 of the blob
//   20+M    ...   blob: tensors, little-endian (float32 / int64)
//
// The manifest carries a "tensors" array of {name, dtype, shape, offset,
// length} (offset/length in bytes, relative to the blob start) plus
// "blob_length" and "blob_crc32". Any other keys are free-form metadata.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "haste/error.hpp"

namespace haste {

inline constexpr std::uint32_t container_version = 1;
inline constexpr std::string_view container_magic = "HSTE";

enum class DType { float32, int64 };

inline std::size_t dtype_size(DType t) noexcept { return t == DType::float32 ? 4 : 8; }
inline const char* dtype_name(DType t) noexcept { return t == DType::float32 ? "float32" : "int64"; }

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large blobs in chunks
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

/// One named tensor; values are held in host order.
struct TensorRecord {
    std::string name;
    DType dtype = DType::float32;
    std::vector<std::size_t> shape;
    std::vector<float> f32;
    std::vector<std::int64_t> i64;

    std::size_t numel() const noexcept {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    static TensorRecord floats(std::string name, std::vector<std::size_t> shape, std::vector<float> values) {
        TensorRecord t{std::move(name), DType::float32, std::move(shape), std::move(values), {}};
        if (t.f32.size() != t.numel()) throw ConfigError("tensor " + t.name + ": value count does not match shape");
        return t;
    }
    static TensorRecord ints(std::string name, std::vector<std::size_t> shape, std::vector<std::int64_t> values) {
        TensorRecord t{std::move(name), DType::int64, std::move(shape), {}, std::move(values)};
        if (t.i64.size() != t.numel()) throw ConfigError("tensor " + t.name + ": value count does not match shape");
        return t;
    }
};

struct Container {
    nlohmann::json manifest = nlohmann::json::object(); // metadata; tensor table is generated
    std::vector<TensorRecord> tensors;

    const TensorRecord* find(std::string_view name) const noexcept {
        for (const auto& t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }
    const TensorRecord& get(std::string_view name) const {
        if (const auto* t = find(name)) return *t;
        throw ValidationError("missing tensor '" + std::string(name) + "'");
    }
};

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    using U = std::make_unsigned_t<T>;
    U u;
    std::memcpy(&u, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

template <class T>
T get_le(const std::uint8_t* p) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(p[i]) << (8 * i);
    T v;
    std::memcpy(&v, &u, sizeof(T));
    return v;
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_le(out, u);
}

inline float get_f32(const std::uint8_t* p) {
    const auto u = get_le<std::uint32_t>(p);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

} // namespace detail

inline std::vector<std::uint8_t> serialize(const Container& c) {
    std::vector<std::uint8_t> blob;
    nlohmann::json table = nlohmann::json::array();
    for (const auto& t : c.tensors) {
        const std::size_t offset = blob.size();
        if (t.dtype == DType::float32) {
            if (t.f32.size() != t.numel()) throw ConfigError("tensor " + t.name + ": value count does not match shape");
            for (float f : t.f32) detail::put_f32(blob, f);
        } else {
            if (t.i64.size() != t.numel()) throw ConfigError("tensor " + t.name + ": value count does not match shape");
            for (auto v : t.i64) detail::put_le(blob, v);
        }
        table.push_back({{"name", t.name},
                         {"dtype", dtype_name(t.dtype)},
                         {"shape", t.shape},
                         {"offset", offset},
                         {"length", blob.size() - offset}});
    }
    nlohmann::json manifest = c.manifest;
    manifest["tensors"] = std::move(table);
    manifest["blob_length"] = blob.size();
    const std::uint32_t crc = crc32_of(blob);
    manifest["blob_crc32"] = crc;
    const std::string text = manifest.dump();

    std::vector<std::uint8_t> out;
    out.reserve(20 + text.size() + blob.size());
    out.insert(out.end(), container_magic.begin(), container_magic.end());
    detail::put_le(out, container_version);
    detail::put_le(out, static_cast<std::uint64_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    detail::put_le(out, crc);
    out.insert(out.end(), blob.begin(), blob.end());
    return out;
}

/// Parses and fully validates a container; nothing is returned on failure.
inline Container deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || !std::equal(container_magic.begin(), container_magic.end(), bytes.begin()))
        throw FormatError("not an HSTE container (bad magic)");
    const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
    if (version != container_version) throw FormatError("unsupported container version " + std::to_string(version));
    const auto mlen = detail::get_le<std::uint64_t>(bytes.data() + 8);
    if (mlen > bytes.size() - 16 || bytes.size() - 16 - mlen < 4)
        throw CorruptionError("container truncated inside manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("tensors") || !manifest["tensors"].is_array())
        throw FormatError("manifest lacks a tensor table");

    const std::uint8_t* crc_at = bytes.data() + 16 + mlen;
    const auto crc = detail::get_le<std::uint32_t>(crc_at);
    const std::span<const std::uint8_t> blob(crc_at + 4, bytes.size() - 20 - mlen);

    try {
        if (manifest.contains("blob_length") && manifest["blob_length"].get<std::uint64_t>() != blob.size())
            throw CorruptionError("blob length " + std::to_string(blob.size()) + " does not match manifest " +
                                  manifest["blob_length"].dump());
        if (crc32_of(blob) != crc) throw CorruptionError("blob CRC-32 mismatch");
        if (manifest.contains("blob_crc32") && manifest["blob_crc32"].get<std::uint32_t>() != crc)
            throw CorruptionError("manifest CRC-32 field disagrees with envelope");

        Container c;
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (const auto& d : manifest["tensors"]) {
            TensorRecord t;
            t.name = d.at("name").get<std::string>();
            const auto dt = d.at("dtype").get<std::string>();
            if (dt == "float32")
                t.dtype = DType::float32;
            else if (dt == "int64")
                t.dtype = DType::int64;
            else
                throw FormatError("tensor " + t.name + ": unsupported dtype " + dt);
            t.shape = d.at("shape").get<std::vector<std::size_t>>();
            const auto offset = d.at("offset").get<std::size_t>();
            const auto length = d.at("length").get<std::size_t>();
            if (length != t.numel() * dtype_size(t.dtype))
                throw CorruptionError("tensor " + t.name + ": byte length does not match shape");
            if (offset > blob.size() || length > blob.size() - offset)
                throw CorruptionError("tensor " + t.name + ": extends past end of blob");
            spans.emplace_back(offset, length);
            const std::uint8_t* p = blob.data() + offset;
            if (t.dtype == DType::float32) {
                t.f32.resize(t.numel());
                for (std::size_t i = 0; i < t.f32.size(); ++i) t.f32[i] = detail::get_f32(p + 4 * i);
            } else {
                t.i64.resize(t.numel());
                for (std::size_t i = 0; i < t.i64.size(); ++i) t.i64[i] = detail::get_le<std::int64_t>(p + 8 * i);
            }
            c.tensors.push_back(std::move(t));
        }
        std::sort(spans.begin(), spans.end());
        for (std::size_t i = 1; i < spans.size(); ++i)
            if (spans[i - 1].first + spans[i - 1].second > spans[i].first)
                throw CorruptionError("tensor byte ranges overlap");

        manifest.erase("tensors");
        manifest.erase("blob_length");
        manifest.erase("blob_crc32");
        c.manifest = std::move(manifest);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes via a temporary file in the same directory, then renames.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Container load_container(const std::filesystem::path& path) { return deserialize(read_file(path)); }

inline void save_container(const std::filesystem::path& path, const Container& c) {
    write_file_atomic(path, serialize(c));
}

} // namespace haste

#endif // HASTE_CONTAINER_HPP
