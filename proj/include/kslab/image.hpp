#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace kslab {

using cplx = std::complex<double>;

/** Dense row-major 2D array of complex doubles. */
class ComplexImage {
public:
    ComplexImage() = default;
    ComplexImage(int height, int width, cplx fill = cplx{0.0, 0.0})
        : h_(check_dim(height)), w_(check_dim(width)),
          v_(static_cast<size_t>(height) * width, fill) {}

    int height() const { return h_; }
    int width() const { return w_; }
    size_t size() const { return v_.size(); }

    cplx& at(int r, int c) { return v_[static_cast<size_t>(r) * w_ + c]; }
    const cplx& at(int r, int c) const { return v_[static_cast<size_t>(r) * w_ + c]; }
    cplx& operator[](size_t i) { return v_[i]; }
    const cplx& operator[](size_t i) const { return v_[i]; }

    cplx* data() { return v_.data(); }
    const cplx* data() const { return v_.data(); }

    bool same_shape(const ComplexImage& o) const { return h_ == o.h_ && w_ == o.w_; }

private:
    static int check_dim(int n) {
        if (n <= 0) throw std::invalid_argument("image dimension must be positive");
        return n;
    }
    int h_ = 0, w_ = 0;
    std::vector<cplx> v_;
};

/** Dense row-major 2D array of doubles. */
class RealImage {
public:
    RealImage() = default;
    RealImage(int height, int width, double fill = 0.0)
        : h_(check_dim(height)), w_(check_dim(width)),
          v_(static_cast<size_t>(height) * width, fill) {}

    int height() const { return h_; }
    int width() const { return w_; }
    size_t size() const { return v_.size(); }

    double& at(int r, int c) { return v_[static_cast<size_t>(r) * w_ + c]; }
    const double& at(int r, int c) const { return v_[static_cast<size_t>(r) * w_ + c]; }
    double& operator[](size_t i) { return v_[i]; }
    const double& operator[](size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool same_shape(const RealImage& o) const { return h_ == o.h_ && w_ == o.w_; }

private:
    static int check_dim(int n) {
        if (n <= 0) throw std::invalid_argument("image dimension must be positive");
        return n;
    }
    int h_ = 0, w_ = 0;
    std::vector<double> v_;
};

/** Per-coil stack of equally shaped complex images (k-space or image domain). */
using CoilStack = std::vector<ComplexImage>;

inline void require_same_shape(const ComplexImage& a, const ComplexImage& b,
                               const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline void require_same_shape(const RealImage& a, const RealImage& b, const char* what) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline void require_coherent_stack(const CoilStack& s, const char* what) {
    if (s.empty()) throw std::invalid_argument(std::string(what) + ": empty coil stack");
    for (const auto& c : s) require_same_shape(s.front(), c, what);
}

RealImage magnitude(const ComplexImage& x);
ComplexImage to_complex(const RealImage& x);

}  // namespace kslab
