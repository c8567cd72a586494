#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "simlab/spectral_field.hpp"

namespace simlab {

/// SPF1 snapshot layout (all little-endian):
///   bytes 0..3   magic "SPF1" (the trailing byte doubles as the version)
///   u32          N (modes per direction)
///   f64          L (box length)
///   f64          timestamp (simulation time)
///   2*N*N        complex coefficients as interleaved f64 (re, im),
///                component-major then row-major in the bin order of
///                Lattice::freq.
/// A JSON sidecar at <path>.json carries (nu, alpha, seed, step_index).
struct SnapshotMeta {
    double nu = 0.0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t step_index = 0;
};

namespace detail {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    if constexpr (std::endian::native == std::endian::little) {
        out.append(b, n);
    } else {
        for (std::size_t i = 0; i < n; ++i) out.push_back(b[n - 1 - i]);
    }
}
inline void put_u32(std::string& out, std::uint32_t v) { put_bytes(out, &v, 4); }
inline void put_f64(std::string& out, double v) { put_bytes(out, &v, 8); }

inline const char* get_bytes(const char* p, const char* end, void* dst, std::size_t n) {
    if (p + n > end) throw std::runtime_error("snapshot: truncated file");
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(dst, p, n);
    } else {
        auto* d = static_cast<char*>(dst);
        for (std::size_t i = 0; i < n; ++i) d[i] = p[n - 1 - i];
    }
    return p + n;
}

} // namespace detail

/// Write bytes to path via a temp file + rename, so readers never observe a
/// partially written artifact.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

inline std::string encode_snapshot(const SpectralField& field, double timestamp) {
    std::string out;
    const int n = field.lattice.n;
    out.reserve(24 + static_cast<std::size_t>(2) * n * n * 16);
    out.append("SPF1");
    detail::put_u32(out, static_cast<std::uint32_t>(n));
    detail::put_f64(out, field.lattice.box);
    detail::put_f64(out, timestamp);
    for (const Complex& c : field.coef) {
        detail::put_f64(out, c.real());
        detail::put_f64(out, c.imag());
    }
    return out;
}

inline void write_snapshot(const SpectralField& field, const SnapshotMeta& meta,
                           double timestamp, const std::filesystem::path& path) {
    atomic_write_file(path, encode_snapshot(field, timestamp));
    nlohmann::json side;
    side["nu"] = meta.nu;
    side["alpha"] = meta.alpha;
    side["seed"] = meta.seed;
    side["step_index"] = meta.step_index;
    atomic_write_file(path.string() + ".json", side.dump(2) + "\n");
}

struct LoadedSnapshot {
    SpectralField field;
    double timestamp = 0.0;
    std::optional<SnapshotMeta> meta;
};

/// Read a snapshot; when expected is given the stored lattice must match.
inline LoadedSnapshot read_snapshot(const std::filesystem::path& path,
                                    const Lattice* expected = nullptr) {
    const std::string bytes = read_file_bytes(path);
    const char* p = bytes.data();
    const char* end = p + bytes.size();
    if (bytes.size() < 4 || std::string(p, p + 4) != "SPF1")
        throw std::runtime_error("snapshot: bad magic in " + path.string());
    p += 4;
    std::uint32_t n32 = 0;
    double box = 0.0, timestamp = 0.0;
    p = detail::get_bytes(p, end, &n32, 4);
    p = detail::get_bytes(p, end, &box, 8);
    p = detail::get_bytes(p, end, &timestamp, 8);
    const Lattice lat = make_lattice(static_cast<int>(n32), box);
    if (expected && !(lat == *expected))
        throw std::runtime_error("snapshot: lattice mismatch in " + path.string());
    LoadedSnapshot snap{SpectralField(lat), timestamp, std::nullopt};
    for (Complex& c : snap.field.coef) {
        double re = 0.0, im = 0.0;
        p = detail::get_bytes(p, end, &re, 8);
        p = detail::get_bytes(p, end, &im, 8);
        c = Complex(re, im);
    }
    const std::filesystem::path side = path.string() + ".json";
    if (std::filesystem::exists(side)) {
        const nlohmann::json j = nlohmann::json::parse(read_file_bytes(side));
        SnapshotMeta meta;
        meta.nu = j.value("nu", 0.0);
        meta.alpha = j.value("alpha", 0.0);
        meta.seed = j.value("seed", std::uint64_t{0});
        meta.step_index = j.value("step_index", std::uint64_t{0});
        snap.meta = meta;
    }
    return snap;
}

/// FNV-1a 64-bit content hash used by the artifact manifest.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace simlab
