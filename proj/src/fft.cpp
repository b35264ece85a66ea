#include "kslab/fft.hpp"

#include <cmath>
#include <memory>
#include <mutex>
#include <unordered_map>

namespace kslab {
namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
    size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

/** Twiddles and scratch layout for one transform length, reused across calls. */
struct Plan {
    size_t n = 0;
    // Power-of-two path: forward twiddles for each butterfly span.
    std::vector<cplx> twiddle;  // twiddle[j] = exp(-2*pi*i*j/n), j in [0, n/2)
    // Bluestein path.
    size_t m = 0;                // pow2 convolution length >= 2n-1
    std::vector<cplx> chirp;     // exp(-i*pi*k^2/n), k in [0, n)
    std::vector<cplx> kernel_f;  // FFT_m of the circular chirp-conjugate kernel
};

void fft_pow2(cplx* a, size_t n, const std::vector<cplx>& tw, bool inverse) {
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const size_t step = n / len;
        for (size_t i = 0; i < n; i += len) {
            for (size_t j = 0; j < len / 2; ++j) {
                cplx w = tw[j * step];
                if (inverse) w = std::conj(w);
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }
}

std::shared_ptr<const Plan> plan_for(size_t n);

/** Bluestein chirp-z: arbitrary-length DFT via one pow2 circular convolution. */
void fft_bluestein(std::vector<cplx>& a, const Plan& p, bool inverse) {
    const size_t n = p.n, m = p.m;
    auto mp = plan_for(m);
    std::vector<cplx> buf(m, cplx{0.0, 0.0});
    for (size_t k = 0; k < n; ++k) {
        const cplx c = inverse ? std::conj(p.chirp[k]) : p.chirp[k];
        buf[k] = a[k] * c;
    }
    fft_pow2(buf.data(), m, mp->twiddle, false);
    if (inverse) {
        for (size_t k = 0; k < m; ++k) buf[k] *= std::conj(p.kernel_f[m == 0 ? 0 : (m - k) % m]);
    } else {
        for (size_t k = 0; k < m; ++k) buf[k] *= p.kernel_f[k];
    }
    fft_pow2(buf.data(), m, mp->twiddle, true);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (size_t k = 0; k < n; ++k) {
        const cplx c = inverse ? std::conj(p.chirp[k]) : p.chirp[k];
        a[k] = buf[k] * inv_m * c;
    }
}

std::shared_ptr<const Plan> make_plan(size_t n) {
    auto p = std::make_shared<Plan>();
    p->n = n;
    if (is_pow2(n)) {
        p->twiddle.resize(n / 2);
        for (size_t j = 0; j < n / 2; ++j)
            p->twiddle[j] = std::polar(1.0, -2.0 * kPi * static_cast<double>(j) / static_cast<double>(n));
        return p;
    }
    p->m = next_pow2(2 * n - 1);
    p->chirp.resize(n);
    for (size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small and exact.
        const size_t k2 = (k * k) % (2 * n);
        p->chirp[k] = std::polar(1.0, -kPi * static_cast<double>(k2) / static_cast<double>(n));
    }
    std::vector<cplx> b(p->m, cplx{0.0, 0.0});
    b[0] = std::conj(p->chirp[0]);
    for (size_t k = 1; k < n; ++k) {
        b[k] = std::conj(p->chirp[k]);
        b[p->m - k] = b[k];
    }
    auto mp = make_plan(p->m);
    fft_pow2(b.data(), p->m, mp->twiddle, false);
    p->kernel_f = std::move(b);
    return p;
}

std::shared_ptr<const Plan> plan_for(size_t n) {
    static std::mutex mu;
    static std::unordered_map<size_t, std::shared_ptr<const Plan>> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
    }
    auto p = make_plan(n);
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(n, p);
    return p;
}

ComplexImage roll2(const ComplexImage& x, int dr, int dc) {
    const int h = x.height(), w = x.width();
    ComplexImage out(h, w);
    for (int r = 0; r < h; ++r) {
        const int rr = (r + dr) % h;
        for (int c = 0; c < w; ++c) out.at(rr, (c + dc) % w) = x.at(r, c);
    }
    return out;
}

enum class Dir { Forward, Inverse };

/** Row and column 1D transforms, no scaling, no shifts. */
void transform2(ComplexImage& x, Dir dir) {
    const int h = x.height(), w = x.width();
    const bool inv = dir == Dir::Inverse;
    std::vector<cplx> line(static_cast<size_t>(w));
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) line[c] = x.at(r, c);
        detail::fft_1d(line, inv);
        for (int c = 0; c < w; ++c) x.at(r, c) = line[c];
    }
    line.assign(static_cast<size_t>(h), cplx{0.0, 0.0});
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) line[r] = x.at(r, c);
        detail::fft_1d(line, inv);
        for (int r = 0; r < h; ++r) x.at(r, c) = line[r];
    }
}

ComplexImage centered(const ComplexImage& x, Dir dir) {
    ComplexImage y = ifftshift2(x);
    transform2(y, dir);
    y = fftshift2(y);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (size_t i = 0; i < y.size(); ++i) y[i] *= s;
    return y;
}

}  // namespace

namespace detail {
void fft_1d(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0) throw std::invalid_argument("fft_1d: empty input");
    if (n == 1) return;
    auto p = plan_for(n);
    if (is_pow2(n)) {
        fft_pow2(a.data(), n, p->twiddle, inverse);
    } else {
        fft_bluestein(a, *p, inverse);
    }
}
}  // namespace detail

ComplexImage fftshift2(const ComplexImage& x) {
    return roll2(x, x.height() / 2, x.width() / 2);
}

ComplexImage ifftshift2(const ComplexImage& x) {
    return roll2(x, x.height() - x.height() / 2, x.width() - x.width() / 2);
}

ComplexImage fft2c(const ComplexImage& x) { return centered(x, Dir::Forward); }

ComplexImage ifft2c(const ComplexImage& x) { return centered(x, Dir::Inverse); }

RealImage magnitude(const ComplexImage& x) {
    RealImage out(x.height(), x.width());
    for (size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i]);
    return out;
}

ComplexImage to_complex(const RealImage& x) {
    ComplexImage out(x.height(), x.width());
    for (size_t i = 0; i < x.size(); ++i) out[i] = cplx{x[i], 0.0};
    return out;
}

}  // namespace kslab
