#include "swg/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace swg {

namespace {

uint32_t rd_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::ostream& os, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
void wr_u16(std::ostream& os, uint16_t v) {
    uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open wav file: " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
        std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("not a RIFF/WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    size_t data_off = 0, data_len = 0;
    size_t pos = 12;
    while (pos + 8 <= raw.size()) {
        uint32_t chunk_len = rd_u32(raw.data() + pos + 4);
        if (std::memcmp(raw.data() + pos, "fmt ", 4) == 0) {
            if (pos + 8 + 16 > raw.size()) throw std::runtime_error("truncated fmt chunk: " + path);
            const uint8_t* p = raw.data() + pos + 8;
            format = rd_u16(p);
            channels = rd_u16(p + 2);
            sample_rate = rd_u32(p + 4);
            bits = rd_u16(p + 14);
        } else if (std::memcmp(raw.data() + pos, "data", 4) == 0) {
            data_off = pos + 8;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }
    if (data_off == 0) throw std::runtime_error("wav has no data chunk: " + path);
    if (data_off + data_len > raw.size()) throw std::runtime_error("truncated wav data: " + path);
    if (channels != 4)
        throw std::runtime_error("expected 4-channel FOA wav, got " + std::to_string(channels) +
                                 " channels: " + path);

    bool is_float = (format == 3) && bits == 32;
    bool is_pcm16 = (format == 1) && bits == 16;
    bool is_pcm24 = (format == 1) && bits == 24;
    if (!is_float && !is_pcm16 && !is_pcm24)
        throw std::runtime_error("unsupported wav encoding (format=" + std::to_string(format) +
                                 ", bits=" + std::to_string(bits) + "): " + path);

    size_t bytes_per = bits / 8;
    size_t n_frames = data_len / (bytes_per * channels);
    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples = Tensor({4, n_frames});
    const uint8_t* d = raw.data() + data_off;
    for (size_t i = 0; i < n_frames; ++i)
        for (size_t ch = 0; ch < 4; ++ch) {
            const uint8_t* p = d + (i * channels + ch) * bytes_per;
            double v;
            if (is_float) {
                uint32_t u = rd_u32(p);
                float fv;
                std::memcpy(&fv, &u, 4);
                v = fv;
            } else if (is_pcm16) {
                int16_t s = int16_t(rd_u16(p));
                v = double(s) / 32768.0;
            } else {
                int32_t s = int32_t(uint32_t(p[0]) << 8 | uint32_t(p[1]) << 16 |
                                    uint32_t(p[2]) << 24) >>
                            8;
                v = double(s) / 8388608.0;
            }
            clip.samples.at({ch, i}) = v;
        }
    return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
    clip.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write wav file: " + path);
    size_t L = clip.length();
    uint32_t data_len = uint32_t(L * 4 * 4);
    f.write("RIFF", 4);
    wr_u32(f, 36 + data_len);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    wr_u32(f, 16);
    wr_u16(f, 3);  // IEEE float
    wr_u16(f, 4);
    wr_u32(f, uint32_t(clip.sample_rate));
    wr_u32(f, uint32_t(clip.sample_rate * 4 * 4));
    wr_u16(f, 16);  // block align
    wr_u16(f, 32);
    f.write("data", 4);
    wr_u32(f, data_len);
    for (size_t i = 0; i < L; ++i)
        for (size_t ch = 0; ch < 4; ++ch) {
            float v = float(clip.samples.at({ch, i}));
            uint32_t u;
            std::memcpy(&u, &v, 4);
            wr_u32(f, u);
        }
    if (!f) throw std::runtime_error("wav write failed: " + path);
}

}  // namespace swg
