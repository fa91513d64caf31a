#ifndef CMB_PREPROCESS_HPP
#define CMB_PREPROCESS_HPP

#include <string>

#include "cmb/tensor.hpp"
#include "cmb/volume.hpp"

namespace cmb {

enum class Interp { linear, nearest };

// In-plane resampling between the native grid and the common 512x512
// field of view. The transform is kept so predictions can be mapped back
// onto the native grid for evaluation.
struct ResizeTransform {
    int src_h = 0;
    int src_w = 0;
    int dst_h = 512;
    int dst_w = 512;

    static ResizeTransform to_common_grid(const Volume& v, int side = 512) {
        return {v.shape.nr, v.shape.nc, side, side};
    }

    // source coordinate per unit destination step
    double sy() const { return double(src_h) / dst_h; }
    double sx() const { return double(src_w) / dst_w; }

    ResizeTransform inverse() const { return {dst_h, dst_w, src_h, src_w}; }

    std::string str() const;
    bool operator==(const ResizeTransform&) const = default;
};

// Zero-mean unit-variance rescaling over all voxels of the volume.
// Throws DegenerateVolume for constant input.
Volume zscore_normalize(const Volume& v);

// Resamples every slice to (dst_h, dst_w). Images use linear interpolation,
// masks nearest-neighbor. In-plane spacing is rescaled by src/dst.
Volume resize_inplane(const Volume& v, const ResizeTransform& t, Interp interp);

// Maps a prediction on the common grid back to the native grid.
Volume invert_resize(const Volume& prediction, const ResizeTransform& t, Interp interp);

enum class StackTag { detector_input, segmenter_input };

struct ChannelStack {
    StackTag tag;
    Tensor data;
};

// Channels ordered (T1, T2, T2*) for one slice.
ChannelStack stack_detector_channels(const Volume& t1, const Volume& t2, const Volume& t2s,
                                     int slice_idx);

// Channels ordered (T2*[i-1], T2*[i], T2*[i+1], stage1[i]); neighbours
// outside the volume are blank.
ChannelStack assemble_segmenter_input(const Volume& t2s, const Volume& stage1, int slice_idx);

// Shared resampling kernel (used by patch upsampling as well): maps a
// (h, w) plane to (dst_h, dst_w) with edge-clamped sampling.
void resample_plane(const float* src, int src_h, int src_w, float* dst, int dst_h, int dst_w,
                    Interp interp);

} // namespace cmb

#endif
