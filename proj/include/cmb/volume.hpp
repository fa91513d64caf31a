#ifndef CMB_VOLUME_HPP
#define CMB_VOLUME_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cmb/errors.hpp"

namespace cmb {

struct Shape3 {
    int ns = 0; // slices
    int nr = 0; // rows
    int nc = 0; // cols

    bool operator==(const Shape3&) const = default;
    size_t size() const { return size_t(ns) * size_t(nr) * size_t(nc); }
    std::string str() const {
        return std::to_string(ns) + "x" + std::to_string(nr) + "x" + std::to_string(nc);
    }
};

struct Spacing3 {
    float dz = 1.0f; // mm between slices
    float dy = 1.0f;
    float dx = 1.0f;

    bool operator==(const Spacing3&) const = default;
};

// 3D scalar grid indexed (slice, row, col), col fastest. Carries images,
// score maps and binary masks alike; masks hold exactly 0/1 values.
struct Volume {
    Shape3 shape;
    Spacing3 spacing;
    std::vector<float> data;

    Volume() = default;
    Volume(Shape3 sh, Spacing3 sp) : shape(sh), spacing(sp), data(sh.size(), 0.0f) {}

    static Volume zeros(Shape3 sh, Spacing3 sp = {}) { return Volume(sh, sp); }

    size_t size() const { return data.size(); }

    size_t index(int s, int r, int c) const {
        return (size_t(s) * shape.nr + r) * shape.nc + c;
    }

    float& at(int s, int r, int c) { return data[index(s, r, c)]; }
    float at(int s, int r, int c) const { return data[index(s, r, c)]; }

    bool in_bounds(int s, int r, int c) const {
        return s >= 0 && s < shape.ns && r >= 0 && r < shape.nr && c >= 0 && c < shape.nc;
    }

    bool is_binary() const {
        for (float v : data)
            if (v != 0.0f && v != 1.0f) return false;
        return true;
    }

    bool all_finite() const {
        for (float v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_valid(const std::string& what) const {
        if (shape.ns < 1 || shape.nr < 1 || shape.nc < 1)
            throw ShapeMismatch(what + ": all dimensions must be >= 1, got " + shape.str());
        if (!(spacing.dz > 0 && spacing.dy > 0 && spacing.dx > 0))
            throw Error(what + ": spacing components must be strictly positive");
        if (data.size() != shape.size())
            throw ShapeMismatch(what + ": data size does not match shape");
    }

    size_t count_nonzero() const {
        size_t n = 0;
        for (float v : data) n += (v != 0.0f);
        return n;
    }
};

inline void require_same_shape(const Volume& a, const Volume& b, const std::string& what) {
    if (!(a.shape == b.shape))
        throw ShapeMismatch(what + ": " + a.shape.str() + " vs " + b.shape.str());
}

} // namespace cmb

#endif
