#pragma once

#include <string>

#include "swg/features.hpp"

namespace swg {

// RIFF WAV I/O. Reads PCM 16/24-bit and IEEE float32; writes float32.
AudioClip read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioClip& clip);

}  // namespace swg
