#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "aedf/params.hpp"
#include "aedf/tensor.hpp"

namespace aedf {

// Binary tensor container, also used for per-clip feature cache files.
// Layout: magic "AEDF", u16 version, then records of
//   {u16 name length, name bytes, u8 rank, u32 dims..., f32 payload},
// all little-endian. Optimizer state is never written.

inline constexpr char kCheckpointMagic[4] = {'A', 'E', 'D', 'F'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool read_le(std::istream& is, T& v) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
    v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return true;
}

inline void write_f32(std::ostream& os, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_le(os, bits);
}

inline bool read_f32(std::istream& is, float& f) {
    std::uint32_t bits;
    if (!read_le(is, bits)) return false;
    std::memcpy(&f, &bits, 4);
    return true;
}

}  // namespace detail

inline void write_tensor_file(const std::string& path,
                              const std::vector<std::pair<std::string, Tensor>>& records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(cat("cannot open '", path, "' for writing"));
    os.write(kCheckpointMagic, 4);
    detail::write_le(os, kCheckpointVersion);
    for (const auto& [name, tensor] : records) {
        if (name.size() > 0xffff) throw IoError(cat("record name too long: '", name, "'"));
        detail::write_le(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(tensor.rank()));
        for (int i = 0; i < tensor.rank(); ++i)
            detail::write_le(os, static_cast<std::uint32_t>(tensor.dim(i)));
        for (std::size_t i = 0; i < tensor.size(); ++i) detail::write_f32(os, tensor.data()[i]);
    }
    if (!os) throw IoError(cat("write failed for '", path, "'"));
}

inline std::map<std::string, Tensor> read_tensor_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(cat("cannot open '", path, "'"));
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError(cat("'", path, "': bad magic at offset 0"));
    std::uint16_t version;
    if (!detail::read_le(is, version) || version != kCheckpointVersion)
        throw FormatError(cat("'", path, "': unsupported format version"));
    std::map<std::string, Tensor> out;
    while (true) {
        std::uint16_t name_len;
        if (!detail::read_le(is, name_len)) break;  // clean EOF
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw FormatError(cat("'", path, "': truncated record name"));
        int rank = is.get();
        if (rank == std::char_traits<char>::eof() || rank < 1)
            throw FormatError(cat("'", path, "': bad rank for record '", name, "'"));
        Shape shape(static_cast<std::size_t>(rank));
        std::size_t numel = 1;
        for (int i = 0; i < rank; ++i) {
            std::uint32_t d;
            if (!detail::read_le(is, d) || d == 0)
                throw FormatError(cat("'", path, "': bad dims for record '", name, "'"));
            shape[static_cast<std::size_t>(i)] = static_cast<int>(d);
            numel *= d;
        }
        std::vector<float> data(numel);
        for (std::size_t i = 0; i < numel; ++i)
            if (!detail::read_f32(is, data[i]))
                throw FormatError(cat("'", path, "': truncated payload in record '", name, "'"));
        if (out.count(name)) throw FormatError(cat("'", path, "': duplicate record '", name, "'"));
        out.emplace(name, Tensor::from_data(std::move(shape), std::move(data)));
    }
    return out;
}

inline void save_checkpoint(const ParamStore& store, const std::string& path) {
    std::vector<std::pair<std::string, Tensor>> records;
    for (const auto& [name, entry] : store) records.emplace_back(name, entry.value);
    write_tensor_file(path, records);
}

/// Rebuilds a parameter store from a checkpoint; all tensors requires_grad.
inline ParamStore load_checkpoint(const std::string& path) {
    ParamStore store;
    for (auto& [name, tensor] : read_tensor_file(path)) store.insert(name, std::move(tensor));
    return store;
}

}  // namespace aedf
