#pragma once

#include <cstddef>
#include <vector>

#include "attrcrit/errors.hpp"
#include "attrcrit/tensor.hpp"

namespace attrcrit {

/// Maps between tensor layout and the per-pixel view the metrics work in.
/// A "pixel" is one spatial location: for (C,H,W) tensors all C channels of
/// (h,w); for 1-D/2-D tensors every element is its own pixel.
struct PixelSpace {
    std::vector<std::size_t> input_shape;
    std::size_t channels = 1;
    std::size_t pixel_count = 0;

    explicit PixelSpace(const std::vector<std::size_t>& shape) : input_shape(shape) {
        if (shape.empty()) throw ShapeError("pixel space: empty shape");
        if (shape.size() == 3) {
            channels = shape[0];
            pixel_count = shape[1] * shape[2];
        } else if (shape.size() <= 2) {
            std::size_t n = 1;
            for (std::size_t e : shape) n *= e;
            pixel_count = n;
        } else {
            throw ShapeError("pixel space: rank " + std::to_string(shape.size()) +
                             " input not supported");
        }
    }

    std::vector<std::size_t> spatialShape() const {
        if (input_shape.size() == 3) return {input_shape[1], input_shape[2]};
        return input_shape;
    }

    /// Sets every channel of the pixel to `value`.
    void setPixel(Tensor& image, std::size_t pixel, double value) const {
        for (std::size_t c = 0; c < channels; ++c) image[c * pixel_count + pixel] = value;
    }

    /// Copies every channel of the pixel from `src`.
    void copyPixel(Tensor& image, const Tensor& src, std::size_t pixel) const {
        for (std::size_t c = 0; c < channels; ++c) {
            image[c * pixel_count + pixel] = src[c * pixel_count + pixel];
        }
    }

    /// Per-pixel sum over channels; identity for 1-D/2-D inputs.
    Tensor collapseChannels(const Tensor& t) const {
        if (t.shape() != input_shape) throw ShapeError("collapse: shape mismatch");
        if (input_shape.size() != 3) return t;
        Tensor out(spatialShape());
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t p = 0; p < pixel_count; ++p) out[p] += t[c * pixel_count + p];
        }
        return out;
    }
};

} // namespace attrcrit
