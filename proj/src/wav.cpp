// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cascade/audio.hpp"
#include "cascade/error.hpp"

namespace cascade {

namespace {

uint32_t le32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t le16(const uint8_t* p) { return uint16_t(p[0] | p[1] << 8); }

void put32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}
void put_tag(std::vector<uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::ParseError, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw bad("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  Waveform w;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    const uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw bad("chunk runs past end of file");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw bad("fmt chunk too small");
      const uint8_t* f = bytes.data() + body;
      if (le16(f) != 1) throw bad("only PCM encoding is supported");
      if (le16(f + 2) != 1) throw bad("only mono audio is supported");
      if (le16(f + 14) != 16) throw bad("only 16-bit samples are supported");
      w.sample_rate = le32(f + 4);
      if (w.sample_rate == 0) throw bad("sample rate is zero");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      const uint8_t* d = bytes.data() + body;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = static_cast<float>(static_cast<int16_t>(le16(d + 2 * i))) / 32768.0f;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw bad("no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, w.sample_rate);
  put32(out, w.sample_rate * 2);
  put16(out, 2);
  put16(out, 16);
  put_tag(out, "data");
  put32(out, data_bytes);
  for (float s : w.samples) {
    const auto v = static_cast<int16_t>(std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f));
    put16(out, static_cast<uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace cascade
