#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kslab/errors.hpp"
#include "kslab/image.hpp"
#include "kslab/sampling.hpp"

namespace kslab {

/**
 * On-disk tensor container. Layout, all little-endian:
 *   bytes 0-7   magic "KSLAB001"
 *   u32         dtype (0 = f64, 1 = c128 interleaved re/im, 2 = u8)
 *   u32         rank
 *   u64 * rank  dims
 *   payload     row-major
 * Reads reject bad magic, truncation, and non-finite float payloads.
 */
struct TensorData {
    enum class Dtype : uint32_t { F64 = 0, C128 = 1, U8 = 2 };
    Dtype dtype = Dtype::F64;
    std::vector<uint64_t> dims;
    std::vector<double> f64;
    std::vector<cplx> c128;
    std::vector<uint8_t> u8;

    uint64_t element_count() const;
};

void write_tensor_file(const std::filesystem::path& path, const TensorData& t);
TensorData read_tensor_file(const std::filesystem::path& path);

/** Same record layout on an open stream (used for embedded tensors). */
void write_tensor_stream(std::ostream& os, const TensorData& t);
TensorData read_tensor_stream(std::istream& is);

void save_real_image(const std::filesystem::path& path, const RealImage& img);
RealImage load_real_image(const std::filesystem::path& path);
void save_complex_image(const std::filesystem::path& path, const ComplexImage& img);
ComplexImage load_complex_image(const std::filesystem::path& path);
void save_coil_stack(const std::filesystem::path& path, const CoilStack& stack);
CoilStack load_coil_stack(const std::filesystem::path& path);
void save_mask_tensor(const std::filesystem::path& path, const SamplingMask& m);

/** 16-bit grayscale PNG, min-max normalized (flat images come out black). */
void write_png16(const std::filesystem::path& path, const RealImage& img);

/**
 * 16-bit grayscale PNG with a caller-fixed intensity window [lo, hi]; values
 * outside clamp. Lets several images share one color scale.
 */
void write_png16_scaled(const std::filesystem::path& path, const RealImage& img, double lo,
                        double hi);

/** 8-bit black/white PNG of a sampling pattern. */
void write_mask_png(const std::filesystem::path& path, const SamplingMask& m);

/** Whole-file text helpers (UTF-8, caller supplies LF line endings). */
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

namespace wire {
void put_u32(std::ostream& os, uint32_t v);
void put_u64(std::ostream& os, uint64_t v);
void put_f64(std::ostream& os, double v);
uint32_t get_u32(std::istream& is);
uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
}  // namespace wire

}  // namespace kslab
