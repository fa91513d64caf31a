#ifndef CMB_POSTPROCESS_HPP
#define CMB_POSTPROCESS_HPP

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "cmb/volume.hpp"

namespace cmb {

// Connected components of a binary volume. Labels are 1..count, assigned
// in lexicographic order of each component's smallest (slice,row,col)
// voxel so labelling is deterministic.
struct LesionSet {
    Shape3 shape;
    std::vector<int32_t> labels; // 0 = background
    int count = 0;
    std::vector<std::vector<size_t>> voxels;          // per lesion, linear indices
    std::vector<std::array<double, 3>> centroids;     // (slice, row, col)

    int32_t label_at(size_t idx) const { return labels[idx]; }
};

LesionSet connected_components(const Volume& mask, int connectivity = 26);

// The brightest per-lesion minimum of the normalized T2* image: the most
// permissive cut every training lesion survives at its darkest voxel. An
// optional additive margin widens it.
struct ThresholdProvenance {
    std::string subject_id;
    int lesion_id = 0;
    float lesion_min = 0.0f;
};

struct IntensityThreshold {
    float value = 0.0f;
    std::vector<ThresholdProvenance> provenance;

    void save(const std::filesystem::path& path) const;
    static IntensityThreshold load(const std::filesystem::path& path);
};

struct AnnotatedView {
    std::string id;
    const Volume* t2s_norm = nullptr;
    const Volume* annotation = nullptr;
};

IntensityThreshold derive_intensity_threshold(const std::vector<AnnotatedView>& subjects,
                                              int connectivity = 26, float margin = 0.0f);

enum class FilterMode { voxel, object };

std::string to_string(FilterMode m);
FilterMode filter_mode_from_string(const std::string& s);

// voxel mode: zero the score wherever the T2* intensity exceeds the
// threshold. object mode: keep a whole connected component of positive
// scores if at least one of its voxels survives.
Volume apply_intensity_filter(const Volume& scores, const Volume& t2s_norm,
                              const IntensityThreshold& thr, FilterMode mode,
                              int connectivity = 26);

// Brain mask: Otsu foreground split, largest 3D component, per-slice hole
// fill, then dilation so brain-border lesions stay inside.
struct BrainMask {
    Volume mask;
    int dilation_radius = 0;
};

BrainMask compute_brain_mask(const Volume& t2s_norm, int dilation_radius = 3);

// Morphological dilation with a Euclidean ball (radius in voxels),
// computed through an exact squared distance transform.
Volume dilate(const Volume& mask, int radius);

// Squared Euclidean distance (in voxel units) to the nearest set voxel.
std::vector<double> squared_distance_to_set(const Volume& mask);

float otsu_threshold(const Volume& v);

Volume binarize(const Volume& prob, float threshold = 0.001f);

// intensity filter -> brain mask multiply -> binarize, in that order.
// stage_log (when given) records the applied stage names.
Volume postprocess_pipeline(const Volume& prob, const Volume& t2s_norm,
                            const IntensityThreshold& thr, const BrainMask& brain,
                            FilterMode mode, int connectivity = 26,
                            float binarize_threshold = 0.001f,
                            std::vector<std::string>* stage_log = nullptr);

} // namespace cmb

#endif
