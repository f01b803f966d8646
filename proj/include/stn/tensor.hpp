#ifndef STN_TENSOR_HPP
#define STN_TENSOR_HPP

#include <cstddef>
#include <vector>

#include "stn/errors.hpp"

namespace stn {

// Dense H x W x C tensor, row-major in (row, column, channel) order.
// Used both for input frames and for intermediate feature maps.
template <class R>
struct Tensor3T {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<R> data;

    Tensor3T() = default;
    Tensor3T(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, R(0)) {
        if (h < 1 || w < 1 || c < 1) {
            throw ConfigError("tensor dims must be >= 1");
        }
    }

    std::size_t size() const { return data.size(); }

    std::size_t index(int m, int n, int c) const {
        return (static_cast<std::size_t>(m) * width + n) * channels + c;
    }
    R& at(int m, int n, int c) { return data[index(m, n, c)]; }
    const R& at(int m, int n, int c) const { return data[index(m, n, c)]; }

    bool same_shape(const Tensor3T& other) const {
        return height == other.height && width == other.width &&
               channels == other.channels;
    }
};

using Tensor3 = Tensor3T<float>;

template <class R, class S>
Tensor3T<R> tensor_cast(const Tensor3T<S>& src) {
    Tensor3T<R> out(src.height, src.width, src.channels);
    for (std::size_t i = 0; i < src.data.size(); ++i) {
        out.data[i] = static_cast<R>(src.data[i]);
    }
    return out;
}

} // namespace stn

#endif
