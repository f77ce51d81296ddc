#pragma once

#include <string>

#include "pairvc/audio/types.hpp"

namespace pairvc::audio {

// 16-bit PCM mono RIFF only; anything else is an Error naming the offence.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

}  // namespace pairvc::audio
