#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "aedf/common.hpp"

namespace aedf {

/// Mono audio in [-1, 1] plus its sample rate and originating item id.
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 0;
    std::string source_id;
};

namespace wav_detail {

inline std::uint32_t u32_at(const std::vector<unsigned char>& b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

inline std::uint16_t u16_at(const std::vector<unsigned char>& b, std::size_t off) {
    return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

}  // namespace wav_detail

/// Reads a 16-bit PCM RIFF/WAVE file; stereo is averaged to mono and samples
/// scale by 1/32768. Malformed input raises FormatError naming the offset.
inline AudioClip load_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(cat("cannot open '", path, "'"));
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());

    auto fail = [&](std::size_t off, const std::string& what) -> void {
        throw FormatError(cat("'", path, "': ", what, " at offset ", off));
    };

    if (bytes.size() < 12) fail(bytes.size(), "file too short for RIFF header");
    if (std::memcmp(bytes.data(), "RIFF", 4) != 0) fail(0, "bad RIFF magic");
    if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) fail(8, "bad WAVE magic");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    std::size_t data_off = 0, data_len = 0;
    bool have_data = false;

    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        char id[5] = {0};
        std::memcpy(id, bytes.data() + off, 4);
        const std::uint32_t chunk_len = wav_detail::u32_at(bytes, off + 4);
        const std::size_t payload = off + 8;
        if (payload + chunk_len > bytes.size()) fail(off, cat("chunk '", id, "' overruns file"));
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_len < 16) fail(off, "fmt chunk too short");
            format = wav_detail::u16_at(bytes, payload + 0);
            channels = wav_detail::u16_at(bytes, payload + 2);
            sample_rate = wav_detail::u32_at(bytes, payload + 4);
            bits = wav_detail::u16_at(bytes, payload + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_off = payload;
            data_len = chunk_len;
            have_data = true;
        }
        off = payload + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }

    if (!have_fmt) fail(12, "missing fmt chunk");
    if (!have_data) fail(12, "missing data chunk");
    if (format != 1 || bits != 16)
        fail(data_off, cat("unsupported codec (format ", format, ", ", bits, " bits)"));
    if (channels != 1 && channels != 2) fail(data_off, cat("unsupported channel count ", channels));
    if (sample_rate == 0) fail(data_off, "zero sample rate");
    if (data_len == 0) fail(data_off, "empty data chunk");
    if (data_len % (2u * channels) != 0) fail(data_off, "data chunk length not frame-aligned");

    const std::size_t frames = data_len / (2u * channels);
    AudioClip clip;
    clip.sample_rate = static_cast<int>(sample_rate);
    clip.samples.resize(frames);
    const float scale = 1.0f / 32768.0f;
    for (std::size_t i = 0; i < frames; ++i) {
        std::int32_t acc = 0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            const std::size_t p = data_off + (i * channels + c) * 2;
            const std::int16_t s = static_cast<std::int16_t>(bytes[p] | (bytes[p + 1] << 8));
            acc += s;
        }
        clip.samples[i] = scale * (static_cast<float>(acc) / static_cast<float>(channels));
    }
    return clip;
}

/// Writes mono 16-bit PCM; samples are clamped to [-1, 1] and rounded.
inline void save_wav(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(cat("cannot open '", path, "' for writing"));

    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        os.write(reinterpret_cast<char*>(b), 4);
    };
    auto put_u16 = [&](std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
        os.write(reinterpret_cast<char*>(b), 2);
    };

    const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
    os.write("RIFF", 4);
    put_u32(36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(16);
    put_u16(1);  // PCM
    put_u16(1);  // mono
    put_u32(static_cast<std::uint32_t>(sample_rate));
    put_u32(static_cast<std::uint32_t>(sample_rate) * 2);
    put_u16(2);
    put_u16(16);
    os.write("data", 4);
    put_u32(data_len);
    for (float s : samples) {
        const float x = std::clamp(s, -1.0f, 1.0f);
        const std::int16_t q = static_cast<std::int16_t>(
            std::clamp(std::lround(x * 32767.0f), -32768L, 32767L));
        put_u16(static_cast<std::uint16_t>(q));
    }
    if (!os) throw IoError(cat("write failed for '", path, "'"));
}

}  // namespace aedf
