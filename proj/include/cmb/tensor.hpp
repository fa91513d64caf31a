#ifndef CMB_TENSOR_HPP
#define CMB_TENSOR_HPP

#include <cstddef>
#include <vector>

namespace cmb {

// Dense CHW float tensor used for network inputs/activations and channel
// stacks. Channel-major, row-major within a channel.
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.0f) {}

    static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }

    size_t size() const { return v.size(); }
    size_t plane() const { return size_t(h) * w; }

    float& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
    float at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }

    float* channel(int ci) { return v.data() + size_t(ci) * plane(); }
    const float* channel(int ci) const { return v.data() + size_t(ci) * plane(); }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    void fill(float x) { std::fill(v.begin(), v.end(), x); }
};

} // namespace cmb

#endif
