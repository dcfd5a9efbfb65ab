#include "ictn/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ictn {

namespace {

void fail(const std::string& message) { throw std::runtime_error(message); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24);
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    fail(path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_size = 0;

  std::size_t at = 12;
  while (at + 8 <= bytes.size()) {
    const std::string id = bytes.substr(at, 4);
    const std::uint32_t size = read_u32(bytes, at + 4);
    const std::size_t body = at + 8;
    if (body + size > bytes.size()) fail(path.string() + ": truncated chunk " + id);
    if (id == "fmt ") {
      if (size < 16) fail(path.string() + ": malformed fmt chunk");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_size = size;
    }
    at = body + size + (size % 2);  // chunks are word aligned
  }

  if (!have_fmt) fail(path.string() + ": missing fmt chunk");
  if (data_at == 0) fail(path.string() + ": missing data chunk");
  if (channels == 0) fail(path.string() + ": zero channels");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32)
    fail(path.string() + ": unsupported encoding (format tag " + std::to_string(format) + ", " +
         std::to_string(bits) + "-bit); expected PCM 16-bit or IEEE float 32-bit");

  const std::size_t bytes_per = pcm16 ? 2 : 4;
  const std::size_t values = data_size / bytes_per;
  const std::size_t frames = values / channels;

  AudioBuffer audio;
  audio.sample_rate = rate;
  audio.channels = channels;
  audio.samples.resize(frames * channels);
  for (std::size_t i = 0; i < frames * channels; ++i) {
    const std::size_t off = data_at + i * bytes_per;
    if (pcm16) {
      const auto raw = static_cast<std::int16_t>(read_u16(bytes, off));
      audio.samples[i] = static_cast<double>(raw) / 32768.0;
    } else {
      std::uint32_t word = read_u32(bytes, off);
      float f;
      std::memcpy(&f, &word, sizeof f);
      audio.samples[i] = static_cast<double>(f);
    }
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding) {
  if (audio.channels < 1) fail("write_wav: audio has no channels");
  const bool pcm = encoding == WavEncoding::Pcm16;
  const std::uint16_t bytes_per = pcm ? 2 : 4;
  const auto channels = static_cast<std::uint16_t>(audio.channels);
  const auto rate = static_cast<std::uint32_t>(audio.sample_rate);
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(audio.samples.size()) * bytes_per;

  std::string out;
  out.reserve(64 + data_size);
  out += "RIFF";
  put_u32(out, 0);  // patched below
  out += "WAVE";

  out += "fmt ";
  put_u32(out, pcm ? 16 : 18);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * channels * bytes_per);  // byte rate
  put_u16(out, static_cast<std::uint16_t>(channels * bytes_per));
  put_u16(out, static_cast<std::uint16_t>(bytes_per * 8));
  if (!pcm) {
    put_u16(out, 0);  // cbSize
    out += "fact";
    put_u32(out, 4);
    put_u32(out, static_cast<std::uint32_t>(audio.frames()));
  }

  out += "data";
  put_u32(out, data_size);
  for (double v : audio.samples) {
    if (pcm) {
      double scaled = v * 32768.0;
      if (scaled > 32767.0) scaled = 32767.0;
      if (scaled < -32768.0) scaled = -32768.0;
      const auto raw = static_cast<std::int16_t>(std::llround(scaled));
      put_u16(out, static_cast<std::uint16_t>(raw));
    } else {
      const auto f = static_cast<float>(v);
      std::uint32_t word;
      std::memcpy(&word, &f, sizeof word);
      put_u32(out, word);
    }
  }
  if (out.size() % 2) out.push_back('\0');

  const std::uint32_t riff_size = static_cast<std::uint32_t>(out.size()) - 8;
  out[4] = static_cast<char>(riff_size & 0xff);
  out[5] = static_cast<char>((riff_size >> 8) & 0xff);
  out[6] = static_cast<char>((riff_size >> 16) & 0xff);
  out[7] = static_cast<char>((riff_size >> 24) & 0xff);

  write_file_atomic(path, out);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path temp = path.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open " + temp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("short write to " + temp.string());
  }
  std::filesystem::rename(temp, path);
}

}  // namespace ictn
