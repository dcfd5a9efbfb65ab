#pragma once

#include <filesystem>

#include "ictn/frontend.hpp"

namespace ictn {

enum class WavEncoding { Pcm16, Float32 };

// RIFF/WAVE reader for PCM 16-bit and IEEE float 32-bit payloads, any
// channel count. 16-bit samples map to [-1, 1) by division by 32768.
AudioBuffer read_wav(const std::filesystem::path& path);

// Inverse of read_wav for the chosen encoding (Pcm16 clamps). Writes to a
// temp file and renames, so the target is never left partial.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding);

// Atomic whole-file write used by every file-producing command.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace ictn
