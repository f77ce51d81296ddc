#include "pairvc/audio/wav_io.hpp"

#include <cstring>
#include <fstream>

#include "pairvc/common.hpp"

namespace pairvc::audio {

namespace {

uint32_t rd_u32(const unsigned char* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const unsigned char* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}
void wr_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail("cannot open wav file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 12 || memcmp(buf.data(), "RIFF", 4) != 0 || memcmp(buf.data() + 8, "WAVE", 4) != 0)
        fail("not a RIFF/WAVE file: " + path);

    Waveform w;
    bool have_fmt = false, have_data = false;
    size_t pos = 12;
    while (pos + 8 <= buf.size()) {
        char id[5] = {0};
        memcpy(id, buf.data() + pos, 4);
        uint32_t sz = rd_u32(buf.data() + pos + 4);
        size_t body = pos + 8;
        if (body + sz > buf.size()) fail("truncated wav chunk in " + path);
        if (memcmp(id, "fmt ", 4) == 0) {
            if (sz < 16) fail("bad fmt chunk in " + path);
            uint16_t format = rd_u16(buf.data() + body);
            uint16_t channels = rd_u16(buf.data() + body + 2);
            uint32_t rate = rd_u32(buf.data() + body + 4);
            uint16_t bits = rd_u16(buf.data() + body + 14);
            if (format != 1) fail("unsupported wav encoding (want 16-bit PCM): " + path);
            if (channels != 1) fail("unsupported channel count (want mono): " + path);
            if (bits != 16) fail("unsupported bit depth (want 16-bit PCM): " + path);
            w.sample_rate = int(rate);
            have_fmt = true;
        } else if (memcmp(id, "data", 4) == 0) {
            if (!have_fmt) fail("wav data chunk before fmt in " + path);
            size_t n = sz / 2;
            w.samples.resize(n);
            for (size_t i = 0; i < n; ++i) {
                int16_t s = int16_t(rd_u16(buf.data() + body + 2 * i));
                w.samples[i] = double(s) / 32768.0;
            }
            have_data = true;
        }
        pos = body + sz + (sz & 1);  // chunks are word-aligned
    }
    if (!have_fmt || !have_data) fail("wav missing fmt or data chunk: " + path);
    return w;
}

void write_wav(const std::string& path, const Waveform& w) {
    require(w.sample_rate > 0, "write_wav: sample_rate must be positive");
    std::ofstream f(path, std::ios::binary);
    if (!f) fail("cannot write wav file: " + path);
    uint32_t data_bytes = uint32_t(w.samples.size() * 2);
    f.write("RIFF", 4);
    wr_u32(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    wr_u32(f, 16);
    wr_u16(f, 1);  // PCM
    wr_u16(f, 1);  // mono
    wr_u32(f, uint32_t(w.sample_rate));
    wr_u32(f, uint32_t(w.sample_rate * 2));
    wr_u16(f, 2);
    wr_u16(f, 16);
    f.write("data", 4);
    wr_u32(f, data_bytes);
    for (double s : w.samples) {
        // symmetric with the reader's /32768 so grid values round-trip exactly
        long q = std::lrint(std::clamp(s, -1.0, 1.0) * 32768.0);
        if (q > 32767) q = 32767;
        wr_u16(f, uint16_t(int16_t(q)));
    }
    if (!f) fail("short write to wav file: " + path);
}

}  // namespace pairvc::audio
