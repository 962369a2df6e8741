#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attrcrit/errors.hpp"

namespace attrcrit {

/// Dense n-dimensional array of 64-bit reals, row-major.
/// Immutable by convention once built: operations return new tensors.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(checkedCount(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (checkedCount(shape_) != data_.size()) {
            throw ShapeError("tensor: shape " + shapeString(shape_) + " does not match " +
                             std::to_string(data_.size()) + " elements");
        }
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& at3(std::size_t c, std::size_t h, std::size_t w) {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double at3(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    Tensor reshape(std::vector<std::size_t> newShape) const {
        if (checkedCount(newShape) != data_.size()) {
            throw ShapeError("reshape: " + shapeString(shape_) + " -> " + shapeString(newShape) +
                             " changes element count");
        }
        return Tensor(std::move(newShape), data_);
    }

    bool allFinite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    /// Throws unless every element is finite. Used on every file-loaded tensor.
    void requireFinite(const std::string& what) const {
        if (!allFinite()) throw ShapeError(what + ": non-finite element");
    }

    bool sameShape(const Tensor& other) const { return shape_ == other.shape_; }

    static std::string shapeString(const std::vector<std::size_t>& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += "x";
            out += std::to_string(s[i]);
        }
        return out + ")";
    }

private:
    static std::size_t checkedCount(const std::vector<std::size_t>& shape) {
        if (shape.empty()) return 0;
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("tensor: zero extent in shape " + shapeString(shape));
            n *= e;
        }
        return n;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

enum class ElemOp { add, sub, mul, div, max, min };

namespace detail {

inline double applyElemOp(ElemOp op, double a, double b) {
    switch (op) {
        case ElemOp::add: return a + b;
        case ElemOp::sub: return a - b;
        case ElemOp::mul: return a * b;
        case ElemOp::div: return a / b;
        case ElemOp::max: return std::max(a, b);
        case ElemOp::min: return std::min(a, b);
    }
    throw Error("unreachable elementwise op");
}

#ifndef NDEBUG
inline void debugCheckFinite(const Tensor& t, const char* op) {
    if (!t.allFinite()) throw ShapeError(std::string(op) + ": produced non-finite element");
}
#else
inline void debugCheckFinite(const Tensor&, const char*) {}
#endif

} // namespace detail

inline Tensor elementwise(ElemOp op, const Tensor& a, const Tensor& b) {
    if (!a.sameShape(b)) {
        throw ShapeError("elementwise: shape mismatch " + Tensor::shapeString(a.shape()) + " vs " +
                         Tensor::shapeString(b.shape()));
    }
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = detail::applyElemOp(op, a[i], b[i]);
    Tensor r(a.shape(), std::move(out));
    detail::debugCheckFinite(r, "elementwise");
    return r;
}

inline Tensor elementwise(ElemOp op, const Tensor& a, double b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = detail::applyElemOp(op, a[i], b);
    Tensor r(a.shape(), std::move(out));
    detail::debugCheckFinite(r, "elementwise");
    return r;
}

inline Tensor relu(const Tensor& a) { return elementwise(ElemOp::max, a, 0.0); }

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: incompatible shapes " + Tensor::shapeString(a.shape()) + " * " +
                         Tensor::shapeString(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.at2(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at2(i, j) += av * b.at2(p, j);
        }
    }
    detail::debugCheckFinite(out, "matmul");
    return out;
}

/// Cross-correlation with zero padding. input (C_in,H,W), kernels (C_out,C_in,kh,kw).
inline Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride = 1,
                     std::size_t padding = 0) {
    if (input.ndim() != 3 || kernels.ndim() != 4 || kernels.extent(1) != input.extent(0)) {
        throw ShapeError("conv2d: need input (C,H,W) and kernels (C_out,C,kh,kw), got " +
                         Tensor::shapeString(input.shape()) + " and " +
                         Tensor::shapeString(kernels.shape()));
    }
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    const std::size_t cIn = input.extent(0), h = input.extent(1), w = input.extent(2);
    const std::size_t cOut = kernels.extent(0), kh = kernels.extent(2), kw = kernels.extent(3);
    if (kh > h + 2 * padding || kw > w + 2 * padding) {
        throw ShapeError("conv2d: kernel exceeds padded input");
    }
    const std::size_t hOut = (h + 2 * padding - kh) / stride + 1;
    const std::size_t wOut = (w + 2 * padding - kw) / stride + 1;

    Tensor out({cOut, hOut, wOut});
    for (std::size_t co = 0; co < cOut; ++co) {
        for (std::size_t oy = 0; oy < hOut; ++oy) {
            for (std::size_t ox = 0; ox < wOut; ++ox) {
                double acc = 0.0;
                for (std::size_t ci = 0; ci < cIn; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride + ky) -
                            static_cast<std::ptrdiff_t>(padding);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(padding);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            acc += input.at3(ci, static_cast<std::size_t>(iy),
                                             static_cast<std::size_t>(ix)) *
                                   kernels[((co * cIn + ci) * kh + ky) * kw + kx];
                        }
                    }
                }
                out.at3(co, oy, ox) = acc;
            }
        }
    }
    detail::debugCheckFinite(out, "conv2d");
    return out;
}

struct MaxPoolResult {
    Tensor values;
    std::vector<std::size_t> argmax; // flat index into the input, aligned with values
};

/// Per-window max over (C,H,W); ties break to the lowest flat index.
inline MaxPoolResult maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
    if (input.ndim() != 3) throw ShapeError("maxpool2d: need (C,H,W) input");
    if (window < 1 || stride < 1) throw ShapeError("maxpool2d: window/stride must be >= 1");
    const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
    if (window > h || window > w) throw ShapeError("maxpool2d: window exceeds input extents");
    const std::size_t hOut = (h - window) / stride + 1;
    const std::size_t wOut = (w - window) / stride + 1;

    MaxPoolResult res{Tensor({c, hOut, wOut}), {}};
    res.argmax.resize(c * hOut * wOut);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oy = 0; oy < hOut; ++oy) {
            for (std::size_t ox = 0; ox < wOut; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t bestIdx = 0;
                for (std::size_t ky = 0; ky < window; ++ky) {
                    for (std::size_t kx = 0; kx < window; ++kx) {
                        const std::size_t iy = oy * stride + ky;
                        const std::size_t ix = ox * stride + kx;
                        const std::size_t flat = (ch * h + iy) * w + ix;
                        if (input[flat] > best) {
                            best = input[flat];
                            bestIdx = flat;
                        }
                    }
                }
                const std::size_t o = (ch * hOut + oy) * wOut + ox;
                res.values[o] = best;
                res.argmax[o] = bestIdx;
            }
        }
    }
    return res;
}

} // namespace attrcrit
