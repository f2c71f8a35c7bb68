// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// RIFF/WAVE reading and writing. Integer PCM is mapped to [-1, 1) by 2^(bits-1).

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "locata/error.hpp"
#include "locata/sigproc.hpp"

namespace locata::wav {

static_assert(std::endian::native == std::endian::little, "wav I/O assumes a little-endian host");

enum class SampleFormat { Pcm16, Pcm24, Pcm32, Float32, Float64 };

inline int bits_of(SampleFormat f) {
  switch (f) {
    case SampleFormat::Pcm16: return 16;
    case SampleFormat::Pcm24: return 24;
    case SampleFormat::Pcm32: return 32;
    case SampleFormat::Float32: return 32;
    case SampleFormat::Float64: return 64;
  }
  return 0;
}

inline bool is_float(SampleFormat f) { return f == SampleFormat::Float32 || f == SampleFormat::Float64; }

struct WavInfo {
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  bool floating = false;
  std::size_t frames = 0;
};

namespace detail {

constexpr std::uint16_t kTagPcm = 1;
constexpr std::uint16_t kTagFloat = 3;
constexpr std::uint16_t kTagExtensible = 0xFFFE;

template <typename T>
T read_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

inline std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline sigproc::MultichannelAudio read_wav(const std::string& path, WavInfo* info_out = nullptr) {
  const auto buf = detail::slurp(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError(path, 0, "not a RIFF/WAVE file");
  WavInfo info;
  std::uint16_t tag = 0, block_align = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* ck = buf.data() + pos;
    const auto size = detail::read_le<std::uint32_t>(ck + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = buf.size() - body;
    if (std::memcmp(ck, "fmt ", 4) == 0) {
      if (size < 16 || size > avail) throw FormatError(path, 0, "truncated fmt chunk");
      const unsigned char* f = buf.data() + body;
      tag = detail::read_le<std::uint16_t>(f);
      info.channels = detail::read_le<std::uint16_t>(f + 2);
      info.sample_rate = detail::read_le<std::uint32_t>(f + 4);
      block_align = detail::read_le<std::uint16_t>(f + 12);
      info.bits = detail::read_le<std::uint16_t>(f + 14);
      if (tag == detail::kTagExtensible) {
        if (size < 40) throw FormatError(path, 0, "truncated extensible fmt chunk");
        tag = detail::read_le<std::uint16_t>(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(ck, "data", 4) == 0) {
      data = buf.data() + body;
      data_size = std::min<std::size_t>(size, avail);  // tolerate streams with an unset length
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw FormatError(path, 0, "missing fmt chunk");
  if (!data) throw FormatError(path, 0, "missing data chunk");
  if (info.channels == 0 || info.sample_rate == 0) throw FormatError(path, 0, "invalid channel count or sample rate");
  if (tag == detail::kTagFloat) {
    info.floating = true;
    if (info.bits != 32 && info.bits != 64) throw FormatError(path, 0, "unsupported float width");
  } else if (tag == detail::kTagPcm) {
    if (info.bits != 8 && info.bits != 16 && info.bits != 24 && info.bits != 32)
      throw FormatError(path, 0, "unsupported PCM width " + std::to_string(info.bits));
  } else {
    throw FormatError(path, 0, "unsupported format tag " + std::to_string(tag));
  }
  const std::size_t bytes = info.bits / 8u;
  if (block_align != bytes * info.channels) throw FormatError(path, 0, "inconsistent block alignment");
  info.frames = data_size / block_align;

  sigproc::MultichannelAudio a =
      sigproc::MultichannelAudio::zeros(info.channels, info.frames, static_cast<double>(info.sample_rate));
  const double scale = info.floating ? 1.0 : 1.0 / std::ldexp(1.0, info.bits - 1);
  for (std::size_t i = 0; i < info.frames; ++i) {
    const unsigned char* fr = data + i * block_align;
    for (std::size_t c = 0; c < info.channels; ++c) {
      const unsigned char* s = fr + c * bytes;
      double v = 0.0;
      if (info.floating) {
        v = info.bits == 32 ? static_cast<double>(detail::read_le<float>(s)) : detail::read_le<double>(s);
      } else {
        switch (info.bits) {
          case 8: v = static_cast<double>(static_cast<int>(s[0]) - 128); break;
          case 16: v = detail::read_le<std::int16_t>(s); break;
          case 24: {
            std::int32_t x = static_cast<std::int32_t>(s[0]) | (static_cast<std::int32_t>(s[1]) << 8) |
                             (static_cast<std::int32_t>(static_cast<std::int8_t>(s[2])) << 16);
            v = x;
            break;
          }
          default: v = detail::read_le<std::int32_t>(s); break;
        }
        v *= scale;
      }
      a.channels[c][i] = v;
    }
  }
  if (info_out) *info_out = info;
  return a;
}

inline void write_wav(const std::string& path, const sigproc::MultichannelAudio& audio,
                      SampleFormat fmt = SampleFormat::Float64) {
  audio.validate();
  const auto channels = static_cast<std::uint16_t>(audio.channel_count());
  if (channels == 0) throw ArgumentError("write_wav: no channels");
  const double rate = audio.sample_rate_hz;
  if (rate != std::round(rate) || rate > 4294967295.0) throw ArgumentError("write_wav: sample rate must be integral");
  const int bits = bits_of(fmt);
  const std::size_t bytes = static_cast<std::size_t>(bits) / 8;
  const std::size_t frames = audio.length();
  const std::size_t data_size = frames * channels * bytes;
  if (data_size > 0xFFFFFFFFull - 80) throw ArgumentError("write_wav: data exceed the RIFF size limit");

  std::string out;
  out.reserve(data_size + 80);
  const bool ext = channels > 2 || bits > 16;
  const std::uint16_t tag = is_float(fmt) ? detail::kTagFloat : detail::kTagPcm;
  const std::uint32_t fmt_size = ext ? 40 : 16;
  out += "RIFF";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(4 + 8 + fmt_size + 8 + data_size));
  out += "WAVEfmt ";
  detail::put_le<std::uint32_t>(out, fmt_size);
  detail::put_le<std::uint16_t>(out, ext ? detail::kTagExtensible : tag);
  detail::put_le<std::uint16_t>(out, channels);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate * static_cast<double>(channels * bytes)));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * bytes));
  detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(bits));
  if (ext) {
    detail::put_le<std::uint16_t>(out, 22);
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(bits));
    detail::put_le<std::uint32_t>(out, 0);  // no speaker mapping
    detail::put_le<std::uint16_t>(out, tag);
    static constexpr std::array<unsigned char, 14> kGuidTail = {0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80,
                                                                0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    out.append(reinterpret_cast<const char*>(kGuidTail.data()), kGuidTail.size());
  }
  out += "data";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data_size));
  const double full = std::ldexp(1.0, bits - 1);
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = audio.channels[c][i];
      if (!std::isfinite(v)) throw ArgumentError("write_wav: non-finite sample");
      switch (fmt) {
        case SampleFormat::Float64: detail::put_le<double>(out, v); break;
        case SampleFormat::Float32: detail::put_le<float>(out, static_cast<float>(v)); break;
        default: {
          const double q = std::clamp(std::round(v * full), -full, full - 1.0);
          const auto x = static_cast<std::int32_t>(q);
          if (bits == 16) {
            detail::put_le<std::int16_t>(out, static_cast<std::int16_t>(x));
          } else if (bits == 24) {
            const auto u = static_cast<std::uint32_t>(x);
            out.push_back(static_cast<char>(u & 0xFF));
            out.push_back(static_cast<char>((u >> 8) & 0xFF));
            out.push_back(static_cast<char>((u >> 16) & 0xFF));
          } else {
            detail::put_le<std::int32_t>(out, x);
          }
        }
      }
    }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(path, "cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw LoadError(path, "write failed");
}

}  // namespace locata::wav
