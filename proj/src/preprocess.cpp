#include "cmb/preprocess.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace cmb {

std::string ResizeTransform::str() const {
    std::ostringstream os;
    os << "src=" << src_h << "x" << src_w << " dst=" << dst_h << "x" << dst_w;
    return os.str();
}

Volume zscore_normalize(const Volume& v) {
    v.require_valid("zscore_normalize");
    if (v.size() < 2) throw DegenerateVolume("zscore_normalize: need at least 2 voxels");

    double sum = 0.0;
    for (float x : v.data) sum += x;
    const double mean = sum / double(v.size());
    double ss = 0.0;
    for (float x : v.data) {
        double d = double(x) - mean;
        ss += d * d;
    }
    const double var = ss / double(v.size());
    if (!(var > 0.0))
        throw DegenerateVolume("zscore_normalize: zero intensity variance (constant volume)");
    const double inv_sd = 1.0 / std::sqrt(var);

    Volume out = v;
    for (float& x : out.data)
        x = static_cast<float>((double(x) - mean) * inv_sd);
    return out;
}

void resample_plane(const float* src, int src_h, int src_w, float* dst, int dst_h, int dst_w,
                    Interp interp) {
    if (src_h == dst_h && src_w == dst_w) { // identity path, bit-exact
        std::memcpy(dst, src, sizeof(float) * size_t(src_h) * src_w);
        return;
    }
    const double sy = double(src_h) / dst_h;
    const double sx = double(src_w) / dst_w;
    for (int y = 0; y < dst_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < dst_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            float value;
            if (interp == Interp::nearest) {
                int iy = static_cast<int>(std::floor(fy + 0.5));
                int ix = static_cast<int>(std::floor(fx + 0.5));
                iy = std::clamp(iy, 0, src_h - 1);
                ix = std::clamp(ix, 0, src_w - 1);
                value = src[size_t(iy) * src_w + ix];
            } else {
                double cy = std::clamp(fy, 0.0, double(src_h - 1));
                double cx = std::clamp(fx, 0.0, double(src_w - 1));
                int y0 = static_cast<int>(std::floor(cy));
                int x0 = static_cast<int>(std::floor(cx));
                int y1 = std::min(y0 + 1, src_h - 1);
                int x1 = std::min(x0 + 1, src_w - 1);
                double wy = cy - y0;
                double wx = cx - x0;
                double v00 = src[size_t(y0) * src_w + x0];
                double v01 = src[size_t(y0) * src_w + x1];
                double v10 = src[size_t(y1) * src_w + x0];
                double v11 = src[size_t(y1) * src_w + x1];
                value = static_cast<float>((1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                           wy * ((1 - wx) * v10 + wx * v11));
            }
            dst[size_t(y) * dst_w + x] = value;
        }
    }
}

namespace {

Volume resample_volume(const Volume& v, int dst_h, int dst_w, Interp interp) {
    Volume out;
    out.shape = {v.shape.ns, dst_h, dst_w};
    out.spacing = v.spacing;
    out.spacing.dy = v.spacing.dy * float(double(v.shape.nr) / dst_h);
    out.spacing.dx = v.spacing.dx * float(double(v.shape.nc) / dst_w);
    out.data.resize(out.shape.size());
    const size_t src_plane = size_t(v.shape.nr) * v.shape.nc;
    const size_t dst_plane = size_t(dst_h) * dst_w;
    for (int s = 0; s < v.shape.ns; ++s)
        resample_plane(v.data.data() + s * src_plane, v.shape.nr, v.shape.nc,
                       out.data.data() + s * dst_plane, dst_h, dst_w, interp);
    return out;
}

} // namespace

Volume resize_inplane(const Volume& v, const ResizeTransform& t, Interp interp) {
    v.require_valid("resize_inplane");
    if (v.shape.nr != t.src_h || v.shape.nc != t.src_w)
        throw ShapeMismatch("resize_inplane: volume is " + std::to_string(v.shape.nr) + "x" +
                            std::to_string(v.shape.nc) + " but transform expects " +
                            std::to_string(t.src_h) + "x" + std::to_string(t.src_w));
    return resample_volume(v, t.dst_h, t.dst_w, interp);
}

Volume invert_resize(const Volume& prediction, const ResizeTransform& t, Interp interp) {
    prediction.require_valid("invert_resize");
    if (prediction.shape.nr != t.dst_h || prediction.shape.nc != t.dst_w)
        throw ShapeMismatch("invert_resize: prediction is " + std::to_string(prediction.shape.nr) +
                            "x" + std::to_string(prediction.shape.nc) + " but transform maps to " +
                            std::to_string(t.dst_h) + "x" + std::to_string(t.dst_w));
    return resample_volume(prediction, t.src_h, t.src_w, interp);
}

namespace {

void copy_slice(const Volume& v, int slice, float* dst) {
    const size_t plane = size_t(v.shape.nr) * v.shape.nc;
    std::memcpy(dst, v.data.data() + size_t(slice) * plane, plane * sizeof(float));
}

} // namespace

ChannelStack stack_detector_channels(const Volume& t1, const Volume& t2, const Volume& t2s,
                                     int slice_idx) {
    require_same_shape(t1, t2s, "stack_detector_channels T1/T2S");
    require_same_shape(t2, t2s, "stack_detector_channels T2/T2S");
    if (slice_idx < 0 || slice_idx >= t2s.shape.ns)
        throw IndexOutOfRange("stack_detector_channels: slice " + std::to_string(slice_idx) +
                              " of " + std::to_string(t2s.shape.ns));
    ChannelStack out{StackTag::detector_input, Tensor(3, t2s.shape.nr, t2s.shape.nc)};
    copy_slice(t1, slice_idx, out.data.channel(0));
    copy_slice(t2, slice_idx, out.data.channel(1));
    copy_slice(t2s, slice_idx, out.data.channel(2));
    return out;
}

ChannelStack assemble_segmenter_input(const Volume& t2s, const Volume& stage1, int slice_idx) {
    require_same_shape(t2s, stage1, "assemble_segmenter_input");
    if (slice_idx < 0 || slice_idx >= t2s.shape.ns)
        throw IndexOutOfRange("assemble_segmenter_input: slice " + std::to_string(slice_idx) +
                              " of " + std::to_string(t2s.shape.ns));
    ChannelStack out{StackTag::segmenter_input, Tensor(4, t2s.shape.nr, t2s.shape.nc)};
    if (slice_idx > 0) copy_slice(t2s, slice_idx - 1, out.data.channel(0));
    copy_slice(t2s, slice_idx, out.data.channel(1));
    if (slice_idx + 1 < t2s.shape.ns) copy_slice(t2s, slice_idx + 1, out.data.channel(2));
    copy_slice(stage1, slice_idx, out.data.channel(3));
    return out;
}

} // namespace cmb
