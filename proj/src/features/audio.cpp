#include "fcanet/features/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fcanet/common/errors.hpp"

namespace fcanet::features {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioClip pad_or_trim(const AudioClip& clip) {
  if (clip.samples.empty()) throw ArgumentError("pad_or_trim: empty clip '" + clip.source_id + "'");
  AudioClip out = clip;
  out.samples.resize(kClipSamples, 0.0);
  return out;
}

AudioClip time_shift(const AudioClip& clip, double shift_ms) {
  if (!(std::abs(shift_ms) <= 100.0)) throw ArgumentError("time_shift: |shift| must be <= 100 ms");
  const auto shift = static_cast<std::ptrdiff_t>(std::lround(shift_ms * kSampleRate / 1000.0));
  const auto n = static_cast<std::ptrdiff_t>(clip.samples.size());
  AudioClip out = clip;
  std::fill(out.samples.begin(), out.samples.end(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t src = i - shift;
    if (src >= 0 && src < n) out.samples[i] = clip.samples[src];
  }
  return out;
}

std::vector<double> read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file" + where);
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError("truncated chunk" + where);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("short fmt chunk" + where);
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = read_u16(f);
      const std::uint16_t channels = read_u16(f + 2);
      const std::uint32_t rate = read_u32(f + 4);
      const std::uint16_t bits = read_u16(f + 14);
      if (format != 1) throw DataError("only PCM WAV is supported" + where);
      if (channels != 1) throw DataError("expected mono audio, got " + std::to_string(channels) + " channels" + where);
      if (rate != static_cast<std::uint32_t>(kSampleRate)) {
        throw DataError("expected 16000 Hz audio, got " + std::to_string(rate) + " Hz" + where);
      }
      if (bits != 16) throw DataError("expected 16-bit samples, got " + std::to_string(bits) + where);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw DataError("data chunk before fmt chunk" + where);
      std::vector<double> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        samples[i] = static_cast<double>(v) / 32768.0;
      }
      return samples;
    }
    pos = body + size + (size & 1u);
  }
  throw DataError("no data chunk" + where);
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write WAV file " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

double mean_square(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc / static_cast<double>(samples.size());
}

}  // namespace fcanet::features
