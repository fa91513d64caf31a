#ifndef CMB_DETECTOR_HPP
#define CMB_DETECTOR_HPP

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmb/catalog.hpp"
#include "cmb/preprocess.hpp"
#include "cmb/rng.hpp"
#include "cmb/tensor.hpp"
#include "cmb/volume.hpp"

namespace cmb {

// Axis-aligned rectangle in patch coordinates, half-open [r0,r1)x[c0,c1).
struct Box {
    int r0 = 0, c0 = 0, r1 = 0, c1 = 0;
    bool operator==(const Box&) const = default;
    bool empty() const { return r1 <= r0 || c1 <= c0; }
};

Box scale_box(const Box& b, int factor);
// tight bounding box of the nonzero voxels of a single-channel mask
Box tight_box(const Tensor& mask);

// One training example for the detection stage: an upsampled 3-channel
// patch plus per-lesion instance targets.
struct PatchSample {
    Tensor image; // (3, 256, 256) after x4 upsampling
    std::vector<Box> boxes;
    std::vector<Tensor> instance_masks; // (1, 256, 256) binary, one per box
    std::string subject_id;
    int slice_idx = 0;
    int origin_row = 0;
    int origin_col = 0;

    void validate() const;
};

struct AugmentParams {
    float max_rotate_deg = 15.0f;
    float scale_min = 0.9f;
    float scale_max = 1.1f;
    float max_translate = 8.0f; // voxels at the native 64x64 patch scale
    float flip_prob = 0.5f;
};

struct DetectorHyperparams {
    int epochs = 15;
    int batch_size = 6;
    float learning_rate = 5e-6f;
    int patch_side = 64;
    int upsample_factor = 4;
    float negatives_per_positive = 1.0f;
    AugmentParams aug;

    void validate() const;
};

struct SamplingPolicy {
    float negatives_per_positive = 1.0f;
    int jitter = 16;                  // random positive-patch offset, voxels
    float foreground_quantile = 0.25f; // negatives sampled above this intensity quantile
    bool allow_negative_only = true;   // subjects without lesions contribute negatives
    int negatives_if_no_lesions = 4;
    int max_attempts = 100;
};

// One positive patch per annotated lesion (centroid + jitter, shifted to
// stay in bounds) plus uniform lesion-free background patches.
std::vector<PatchSample> extract_training_patches(const SubjectRecord& preprocessed,
                                                  const SamplingPolicy& policy, Rng& rng,
                                                  int patch_side = 64, int upsample_factor = 4);

// x4 patch upsampling: linear for image channels, nearest for masks.
Tensor upsample_patch(const Tensor& patch, int factor, Interp interp);

// Deterministic affine + flip, applied identically to image, masks and
// boxes (boxes are recomputed as tight boxes of the transformed masks).
struct AffineParams {
    float rotate_deg = 0.0f;
    float scale = 1.0f;
    float translate_row = 0.0f; // pixels at the sample's own resolution
    float translate_col = 0.0f;
    bool flip = false;
};

PatchSample apply_affine(const PatchSample& sample, const AffineParams& params);

// Random augmentation; samples whose lesions vanish are redrawn (at most
// 10 tries, then the input is returned unchanged).
PatchSample augment(const PatchSample& sample, const AugmentParams& params, Rng& rng);

struct DetectedInstance {
    Box box;
    Tensor mask; // (1, H, W) soft mask, zero outside the instance
    float confidence = 0.0f;
};

struct DetectorPrediction {
    std::vector<DetectedInstance> instances;
    Tensor score_map; // (1, H, W), values in [0, 1]
};

// Opaque trainable detection backend. The shipped implementation is a
// deliberately tiny randomly-initialized network so training and tests
// run hermetically; a finetuned region-proposal model can be dropped in
// behind the same contract.
class DetectorBackend {
public:
    virtual ~DetectorBackend() = default;
    virtual float train_batch(std::span<const PatchSample> batch, float lr) = 0;
    virtual float eval_batch_loss(std::span<const PatchSample> batch) const = 0;
    virtual DetectorPrediction predict(const ChannelStack& input) const = 0;
    virtual void save(const std::filesystem::path& path) const = 0;
    virtual std::string describe() const = 0;
    virtual bool thread_safe_inference() const { return true; }
};

std::unique_ptr<DetectorBackend> make_tiny_detector_backend(const std::vector<int>& widths,
                                                            uint64_t seed,
                                                            float instance_threshold = 0.5f);
std::unique_ptr<DetectorBackend> load_detector_backend(const std::filesystem::path& path);

struct TrainingLog {
    std::vector<float> epoch_train_loss;
    std::vector<float> epoch_val_loss;
    int64_t optimizer_steps = 0;
};

TrainingLog finetune_detector(const std::vector<PatchSample>& train,
                              const std::vector<PatchSample>& val,
                              const DetectorHyperparams& hp, DetectorBackend& backend,
                              uint64_t seed);

struct SliceInstance {
    int slice = 0;
    Box box; // slice coordinates
    float confidence = 0.0f;
};

struct DetectionResult {
    Volume score_volume; // [0, 1] on the preprocessed grid
    std::vector<SliceInstance> instances;
};

// 64x64 windows at stride 32 (edge windows clamped), each upsampled x4,
// scored by the backend, block-averaged back to slice scale and fused by
// voxel-wise maximum.
DetectionResult infer_detector(const DetectorBackend& backend, const Volume& t1,
                               const Volume& t2, const Volume& t2s, int patch_side = 64,
                               int stride = 32, int upsample_factor = 4, int workers = 1);

DetectionResult infer_detector(const DetectorBackend& backend, const SubjectRecord& preprocessed,
                               int patch_side = 64, int stride = 32, int upsample_factor = 4,
                               int workers = 1);

std::vector<int> tile_origins(int extent, int window, int stride);

} // namespace cmb

#endif
