#ifndef CMB_SEGMENTER_HPP
#define CMB_SEGMENTER_HPP

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmb/catalog.hpp"
#include "cmb/detector.hpp"
#include "cmb/preprocess.hpp"
#include "cmb/rng.hpp"

namespace cmb {

struct SegmenterHyperparams {
    int epochs = 50;
    int batch_size = 4;
    float learning_rate = 5e-5f;
    float keep_empty_slice_prob = 0.25f;
    float pos_weight_cap = 1000.0f;
    AugmentParams aug;

    void validate() const;
};

// One whole-slice training example: four-channel input plus the binary
// annotation slice as target.
struct SlicePair {
    ChannelStack input;
    Tensor target; // (1, H, W)
};

// Slices carrying lesions are always kept; empty slices survive with
// keep_empty_slice_prob.
std::vector<int> select_training_slices(const Volume& annotation, float keep_empty_slice_prob,
                                        Rng& rng);

std::vector<SlicePair> build_training_pairs(const SubjectRecord& preprocessed,
                                            const Volume& stage1_scores,
                                            float keep_empty_slice_prob, Rng& rng);

class SegmenterBackend {
public:
    virtual ~SegmenterBackend() = default;
    virtual float train_batch(std::span<const SlicePair> batch, float lr,
                              float pos_weight_cap) = 0;
    virtual float eval_batch_loss(std::span<const SlicePair> batch,
                                  float pos_weight_cap) const = 0;
    virtual Tensor predict(const ChannelStack& input) const = 0; // probabilities in [0,1]
    virtual void save(const std::filesystem::path& path) const = 0;
    virtual std::string describe() const = 0;
    virtual bool thread_safe_inference() const { return true; }
};

std::unique_ptr<SegmenterBackend> make_unet_segmenter_backend(const std::vector<int>& widths,
                                                              uint64_t seed);
std::unique_ptr<SegmenterBackend> load_segmenter_backend(const std::filesystem::path& path);

// Lazy view over per-subject volumes so whole training sets need not be
// materialized as channel stacks.
struct PairSource {
    const Volume* t2s = nullptr;
    const Volume* stage1 = nullptr;
    const Volume* annotation = nullptr;
    int slice = 0;
};

SlicePair assemble_pair(const PairSource& src);

TrainingLog train_segmenter(const std::vector<PairSource>& train,
                            const std::vector<PairSource>& val, const SegmenterHyperparams& hp,
                            SegmenterBackend& backend, uint64_t seed);

// convenience overload matching build_training_pairs output
TrainingLog train_segmenter(const std::vector<SlicePair>& train,
                            const std::vector<SlicePair>& val, const SegmenterHyperparams& hp,
                            SegmenterBackend& backend, uint64_t seed);

// Per-slice forward pass over the whole volume; output in [0, 1].
Volume infer_segmenter(const SegmenterBackend& backend, const Volume& t2s, const Volume& stage1,
                       int workers = 1);

} // namespace cmb

#endif
