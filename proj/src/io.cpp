#include "kslab/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kslab {
namespace {

constexpr char kMagic[8] = {'K', 'S', 'L', 'A', 'B', '0', '0', '1'};

void require_finite(const double* p, size_t n, const char* what) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) throw format_error(std::string(what) + ": non-finite payload");
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw format_error("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open for reading: " + path.string());
    return is;
}

}  // namespace

namespace wire {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw format_error("truncated stream");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw format_error("truncated stream");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    const uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace wire

uint64_t TensorData::element_count() const {
    uint64_t n = 1;
    for (uint64_t d : dims) n *= d;
    return n;
}

void write_tensor_stream(std::ostream& os, const TensorData& t) {
    const uint64_t n = t.element_count();
    switch (t.dtype) {
        case TensorData::Dtype::F64:
            if (t.f64.size() != n) throw std::invalid_argument("tensor payload size mismatch");
            break;
        case TensorData::Dtype::C128:
            if (t.c128.size() != n) throw std::invalid_argument("tensor payload size mismatch");
            break;
        case TensorData::Dtype::U8:
            if (t.u8.size() != n) throw std::invalid_argument("tensor payload size mismatch");
            break;
    }
    os.write(kMagic, 8);
    wire::put_u32(os, static_cast<uint32_t>(t.dtype));
    wire::put_u32(os, static_cast<uint32_t>(t.dims.size()));
    for (uint64_t d : t.dims) wire::put_u64(os, d);
    switch (t.dtype) {
        case TensorData::Dtype::F64:
            for (double v : t.f64) wire::put_f64(os, v);
            break;
        case TensorData::Dtype::C128:
            for (const cplx& v : t.c128) {
                wire::put_f64(os, v.real());
                wire::put_f64(os, v.imag());
            }
            break;
        case TensorData::Dtype::U8:
            os.write(reinterpret_cast<const char*>(t.u8.data()),
                     static_cast<std::streamsize>(t.u8.size()));
            break;
    }
    if (!os) throw format_error("tensor stream write failed");
}

void write_tensor_file(const std::filesystem::path& path, const TensorData& t) {
    auto os = open_out(path);
    write_tensor_stream(os, t);
    if (!os) throw format_error("write failed: " + path.string());
}

TensorData read_tensor_stream(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw format_error("bad tensor magic");
    TensorData t;
    const uint32_t dtype = wire::get_u32(is);
    if (dtype > 2) throw format_error("unknown tensor dtype");
    t.dtype = static_cast<TensorData::Dtype>(dtype);
    const uint32_t rank = wire::get_u32(is);
    if (rank > 8) throw format_error("implausible tensor rank");
    t.dims.resize(rank);
    for (uint32_t i = 0; i < rank; ++i) t.dims[i] = wire::get_u64(is);
    const uint64_t n = t.element_count();
    if (n > (1ull << 32)) throw format_error("implausible tensor size");
    switch (t.dtype) {
        case TensorData::Dtype::F64:
            t.f64.resize(n);
            for (uint64_t i = 0; i < n; ++i) t.f64[i] = wire::get_f64(is);
            require_finite(t.f64.data(), t.f64.size(), "tensor read");
            break;
        case TensorData::Dtype::C128:
            t.c128.resize(n);
            for (uint64_t i = 0; i < n; ++i) {
                const double re = wire::get_f64(is);
                const double im = wire::get_f64(is);
                t.c128[i] = cplx{re, im};
            }
            require_finite(reinterpret_cast<const double*>(t.c128.data()), 2 * t.c128.size(),
                           "tensor read");
            break;
        case TensorData::Dtype::U8:
            t.u8.resize(n);
            is.read(reinterpret_cast<char*>(t.u8.data()), static_cast<std::streamsize>(n));
            if (!is) throw format_error("truncated stream");
            break;
    }
    return t;
}

TensorData read_tensor_file(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return read_tensor_stream(is);
    } catch (const format_error& e) {
        throw format_error(std::string(e.what()) + ": " + path.string());
    }
}

void save_real_image(const std::filesystem::path& path, const RealImage& img) {
    TensorData t;
    t.dtype = TensorData::Dtype::F64;
    t.dims = {static_cast<uint64_t>(img.height()), static_cast<uint64_t>(img.width())};
    t.f64.assign(img.data(), img.data() + img.size());
    write_tensor_file(path, t);
}

RealImage load_real_image(const std::filesystem::path& path) {
    TensorData t = read_tensor_file(path);
    if (t.dtype != TensorData::Dtype::F64 || t.dims.size() != 2)
        throw format_error("expected rank-2 f64 tensor: " + path.string());
    RealImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    std::copy(t.f64.begin(), t.f64.end(), img.data());
    return img;
}

void save_complex_image(const std::filesystem::path& path, const ComplexImage& img) {
    TensorData t;
    t.dtype = TensorData::Dtype::C128;
    t.dims = {static_cast<uint64_t>(img.height()), static_cast<uint64_t>(img.width())};
    t.c128.assign(img.data(), img.data() + img.size());
    write_tensor_file(path, t);
}

ComplexImage load_complex_image(const std::filesystem::path& path) {
    TensorData t = read_tensor_file(path);
    if (t.dtype != TensorData::Dtype::C128 || t.dims.size() != 2)
        throw format_error("expected rank-2 c128 tensor: " + path.string());
    ComplexImage img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    std::copy(t.c128.begin(), t.c128.end(), img.data());
    return img;
}

void save_coil_stack(const std::filesystem::path& path, const CoilStack& stack) {
    require_coherent_stack(stack, "save_coil_stack");
    TensorData t;
    t.dtype = TensorData::Dtype::C128;
    t.dims = {stack.size(), static_cast<uint64_t>(stack.front().height()),
              static_cast<uint64_t>(stack.front().width())};
    t.c128.reserve(stack.size() * stack.front().size());
    for (const auto& coil : stack) t.c128.insert(t.c128.end(), coil.data(), coil.data() + coil.size());
    write_tensor_file(path, t);
}

CoilStack load_coil_stack(const std::filesystem::path& path) {
    TensorData t = read_tensor_file(path);
    if (t.dtype != TensorData::Dtype::C128 || t.dims.size() != 3)
        throw format_error("expected rank-3 c128 tensor: " + path.string());
    CoilStack stack;
    const int h = static_cast<int>(t.dims[1]), w = static_cast<int>(t.dims[2]);
    const size_t plane = static_cast<size_t>(h) * w;
    for (uint64_t k = 0; k < t.dims[0]; ++k) {
        ComplexImage img(h, w);
        std::copy_n(t.c128.begin() + k * plane, plane, img.data());
        stack.push_back(std::move(img));
    }
    return stack;
}

void save_mask_tensor(const std::filesystem::path& path, const SamplingMask& m) {
    TensorData t;
    t.dtype = TensorData::Dtype::U8;
    t.dims = {static_cast<uint64_t>(m.height), static_cast<uint64_t>(m.width)};
    t.u8 = m.on;
    write_tensor_file(path, t);
}

// ---------------------------------------------------------------------------
// PNG output. Chunks are written by hand; IDAT holds a zlib stream made of
// uncompressed DEFLATE blocks, which keeps the writer dependency-free and its
// bytes stable.

namespace {

uint32_t crc32_update(uint32_t crc, const unsigned char* p, size_t n) {
    static std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

void put_be32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& data) {
    put_be32(out, static_cast<uint32_t>(data.size()));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uint32_t crc = crc32_update(0, out.data() + type_at, 4 + data.size());
    put_be32(out, crc);
}

std::vector<unsigned char> zlib_stored(const std::vector<unsigned char>& raw) {
    std::vector<unsigned char> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t pos = 0;
    do {
        const size_t n = std::min<size_t>(raw.size() - pos, 65535);
        const bool final = pos + n == raw.size();
        z.push_back(final ? 1 : 0);
        z.push_back(static_cast<unsigned char>(n & 0xFF));
        z.push_back(static_cast<unsigned char>(n >> 8));
        z.push_back(static_cast<unsigned char>(~n & 0xFF));
        z.push_back(static_cast<unsigned char>((~n >> 8) & 0xFF));
        z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + n);
        pos += n;
    } while (pos < raw.size());
    uint32_t a = 1, b = 0;
    for (unsigned char c : raw) {
        a = (a + c) % 65521;
        b = (b + a) % 65521;
    }
    put_be32(z, (b << 16) | a);
    return z;
}

void write_png_gray(const std::filesystem::path& path, int width, int height, int bit_depth,
                    const std::vector<unsigned char>& samples) {
    std::vector<unsigned char> ihdr;
    put_be32(ihdr, static_cast<uint32_t>(width));
    put_be32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(static_cast<unsigned char>(bit_depth));
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);

    const size_t stride = static_cast<size_t>(width) * (bit_depth / 8);
    std::vector<unsigned char> raw;
    raw.reserve((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // no per-row filter
        raw.insert(raw.end(), samples.begin() + y * stride, samples.begin() + (y + 1) * stride);
    }

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zlib_stored(raw));
    put_chunk(out, "IEND", {});

    auto os = open_out(path);
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw format_error("write failed: " + path.string());
}

}  // namespace

void write_png16(const std::filesystem::path& path, const RealImage& img) {
    double lo = img[0], hi = img[0];
    for (size_t i = 0; i < img.size(); ++i) {
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    const double span = hi - lo;
    std::vector<unsigned char> samples(img.size() * 2);
    for (size_t i = 0; i < img.size(); ++i) {
        const double v = span > 0.0 ? (img[i] - lo) / span : 0.0;
        const uint16_t q = static_cast<uint16_t>(std::lround(v * 65535.0));
        samples[2 * i] = static_cast<unsigned char>(q >> 8);
        samples[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
    }
    write_png_gray(path, img.width(), img.height(), 16, samples);
}

void write_png16_scaled(const std::filesystem::path& path, const RealImage& img, double lo,
                        double hi) {
    if (!(hi > lo)) throw std::invalid_argument("write_png16_scaled: empty intensity window");
    std::vector<unsigned char> samples(img.size() * 2);
    for (size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp((img[i] - lo) / (hi - lo), 0.0, 1.0);
        const uint16_t q = static_cast<uint16_t>(std::lround(v * 65535.0));
        samples[2 * i] = static_cast<unsigned char>(q >> 8);
        samples[2 * i + 1] = static_cast<unsigned char>(q & 0xFF);
    }
    write_png_gray(path, img.width(), img.height(), 16, samples);
}

void write_mask_png(const std::filesystem::path& path, const SamplingMask& m) {
    std::vector<unsigned char> samples(m.on.size());
    for (size_t i = 0; i < m.on.size(); ++i) samples[i] = m.on[i] ? 255 : 0;
    write_png_gray(path, m.width, m.height, 8, samples);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    auto os = open_out(path);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw format_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace kslab
