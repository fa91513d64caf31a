#include "cmb/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "cmb/nn.hpp"
#include "cmb/postprocess.hpp"

namespace cmb {

Box scale_box(const Box& b, int factor) {
    return {b.r0 * factor, b.c0 * factor, b.r1 * factor, b.c1 * factor};
}

Box tight_box(const Tensor& mask) {
    Box b{mask.h, mask.w, 0, 0};
    const float* m = mask.channel(0);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            if (m[size_t(y) * mask.w + x] != 0.0f) {
                b.r0 = std::min(b.r0, y);
                b.c0 = std::min(b.c0, x);
                b.r1 = std::max(b.r1, y + 1);
                b.c1 = std::max(b.c1, x + 1);
            }
    if (b.r1 <= b.r0) return {0, 0, 0, 0};
    return b;
}

void PatchSample::validate() const {
    if (image.h != image.w) throw Error("patch must be square");
    if (boxes.size() != instance_masks.size())
        throw Error("patch: boxes and instance masks must pair up");
    for (size_t i = 0; i < boxes.size(); ++i) {
        const Box& b = boxes[i];
        if (b.r0 < 0 || b.c0 < 0 || b.r1 > image.h || b.c1 > image.w || b.empty())
            throw Error("patch: box outside patch bounds");
        const Tensor& m = instance_masks[i];
        bool any = false;
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x)
                if (m.at(0, y, x) != 0.0f) {
                    any = true;
                    if (y < b.r0 || y >= b.r1 || x < b.c0 || x >= b.c1)
                        throw Error("patch: instance mask escapes its box");
                }
        if (!any) throw Error("patch: empty instance mask");
    }
}

void DetectorHyperparams::validate() const {
    if (epochs < 0 || batch_size < 1 || !(learning_rate > 0))
        throw ConfigError("detector hyperparameters must be positive");
    if (patch_side < 1 || upsample_factor < 1)
        throw ConfigError("patch side and upsample factor must be positive");
    if (patch_side * upsample_factor != 256)
        throw ConfigError("patch_side * upsample_factor must equal 256");
    if (negatives_per_positive < 0)
        throw ConfigError("negatives_per_positive must be >= 0");
}

Tensor upsample_patch(const Tensor& patch, int factor, Interp interp) {
    if (factor < 1) throw Error("upsample_patch: factor must be >= 1");
    Tensor out(patch.c, patch.h * factor, patch.w * factor);
    for (int ci = 0; ci < patch.c; ++ci)
        resample_plane(patch.channel(ci), patch.h, patch.w, out.channel(ci), out.h, out.w,
                       interp);
    return out;
}

namespace {

Tensor crop_stack(const Volume& t1, const Volume& t2, const Volume& t2s, int slice, int row0,
                  int col0, int side) {
    Tensor out(3, side, side);
    const Volume* vols[3] = {&t1, &t2, &t2s};
    for (int ci = 0; ci < 3; ++ci) {
        const Volume& v = *vols[ci];
        for (int y = 0; y < side; ++y)
            std::memcpy(out.channel(ci) + size_t(y) * side,
                        &v.data[v.index(slice, row0 + y, col0)], size_t(side) * sizeof(float));
    }
    return out;
}

int clamp_origin(int center, int side, int extent) {
    return std::clamp(center - side / 2, 0, extent - side);
}

float intensity_quantile(const Volume& v, float q) {
    std::vector<float> sorted(v.data);
    size_t k = static_cast<size_t>(q * double(sorted.size() - 1));
    std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
    return sorted[k];
}

bool window_has_annotation(const Volume& annot, int slice, int row0, int col0, int side) {
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            if (annot.at(slice, row0 + y, col0 + x) != 0.0f) return true;
    return false;
}

PatchSample build_sample(const SubjectRecord& subject, const LesionSet& lesions, int slice,
                         int row0, int col0, int side, int factor) {
    PatchSample s;
    s.subject_id = subject.id;
    s.slice_idx = slice;
    s.origin_row = row0;
    s.origin_col = col0;
    Tensor native = crop_stack(subject.t1, subject.t2, subject.t2s, slice, row0, col0, side);
    s.image = upsample_patch(native, factor, Interp::linear);

    // one instance per lesion component intersecting the window
    const int nc = subject.t2s.shape.nc, nr = subject.t2s.shape.nr;
    for (int l = 0; l < lesions.count; ++l) {
        Tensor m(1, side, side);
        bool any = false;
        for (size_t idx : lesions.voxels[l]) {
            const int ls = static_cast<int>(idx / (size_t(nr) * nc));
            if (ls != slice) continue;
            const int lr = static_cast<int>((idx / nc) % nr) - row0;
            const int lc = static_cast<int>(idx % nc) - col0;
            if (lr < 0 || lr >= side || lc < 0 || lc >= side) continue;
            m.at(0, lr, lc) = 1.0f;
            any = true;
        }
        if (!any) continue;
        Tensor up = upsample_patch(m, factor, Interp::nearest);
        s.boxes.push_back(tight_box(up));
        s.instance_masks.push_back(std::move(up));
    }
    return s;
}

} // namespace

std::vector<PatchSample> extract_training_patches(const SubjectRecord& subject,
                                                  const SamplingPolicy& policy, Rng& rng,
                                                  int patch_side, int upsample_factor) {
    if (!subject.annotation)
        throw NoLesions("subject " + subject.id + " has no annotation for patch extraction");
    const Volume& annot = *subject.annotation;
    require_same_shape(annot, subject.t2s, "extract_training_patches");
    const int nr = subject.t2s.shape.nr, nc = subject.t2s.shape.nc;
    if (nr < patch_side || nc < patch_side)
        throw ShapeMismatch("extract_training_patches: plane smaller than patch");

    LesionSet lesions = connected_components(annot, 26);
    if (lesions.count == 0 && !policy.allow_negative_only)
        throw NoLesions("subject " + subject.id + " has no annotated lesions");

    std::vector<PatchSample> out;

    for (int l = 0; l < lesions.count; ++l) {
        // pick the annotated slice nearest the lesion centroid
        const int want = static_cast<int>(std::lround(lesions.centroids[l][0]));
        int slice = -1, best_d = std::numeric_limits<int>::max();
        for (size_t idx : lesions.voxels[l]) {
            const int ls = static_cast<int>(idx / (size_t(nr) * nc));
            const int d = std::abs(ls - want);
            if (d < best_d) {
                best_d = d;
                slice = ls;
            }
        }
        const int jr = static_cast<int>(rng.uniform_int(-policy.jitter, policy.jitter));
        const int jc = static_cast<int>(rng.uniform_int(-policy.jitter, policy.jitter));
        const int row0 = clamp_origin(static_cast<int>(std::lround(lesions.centroids[l][1])) + jr,
                                      patch_side, nr);
        const int col0 = clamp_origin(static_cast<int>(std::lround(lesions.centroids[l][2])) + jc,
                                      patch_side, nc);
        out.push_back(build_sample(subject, lesions, slice, row0, col0, patch_side,
                                   upsample_factor));
    }

    int n_negatives = lesions.count > 0
                          ? static_cast<int>(std::lround(policy.negatives_per_positive *
                                                         double(lesions.count)))
                          : policy.negatives_if_no_lesions;
    const float fg_cut = intensity_quantile(subject.t2s, policy.foreground_quantile);
    int placed = 0;
    for (int n = 0; n < n_negatives; ++n) {
        for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
            const size_t idx =
                static_cast<size_t>(rng.uniform_int(0, int64_t(subject.t2s.size()) - 1));
            if (subject.t2s.data[idx] < fg_cut) continue;
            const int s = static_cast<int>(idx / (size_t(nr) * nc));
            const int r = static_cast<int>((idx / nc) % nr);
            const int c = static_cast<int>(idx % nc);
            const int row0 = clamp_origin(r, patch_side, nr);
            const int col0 = clamp_origin(c, patch_side, nc);
            if (window_has_annotation(annot, s, row0, col0, patch_side)) continue;
            out.push_back(build_sample(subject, lesions, s, row0, col0, patch_side,
                                       upsample_factor));
            ++placed;
            break;
        }
    }
    (void)placed;
    return out;
}

namespace {

struct AffineMap {
    // output pixel -> input pixel, both in (row, col)
    double cos_t, sin_t, inv_scale;
    double t_row, t_col;
    double center;
    bool flip;
    int side;

    std::pair<double, double> source_of(int y, int x) const {
        double xc = double(flip ? side - 1 - x : x) - center - t_col;
        double yc = double(y) - center - t_row;
        // inverse rotation by theta then inverse scale, in (col,row) axes
        double sx = (cos_t * xc + sin_t * yc) * inv_scale;
        double sy = (-sin_t * xc + cos_t * yc) * inv_scale;
        return {sy + center, sx + center};
    }
};

AffineMap make_map(const AffineParams& p, int side) {
    const double theta = double(p.rotate_deg) * M_PI / 180.0;
    AffineMap m;
    m.cos_t = std::cos(theta);
    m.sin_t = std::sin(theta);
    m.inv_scale = 1.0 / double(p.scale);
    m.t_row = p.translate_row;
    m.t_col = p.translate_col;
    m.center = (side - 1) / 2.0;
    m.flip = p.flip;
    m.side = side;
    return m;
}

bool is_identity(const AffineParams& p) {
    return p.rotate_deg == 0.0f && p.scale == 1.0f && p.translate_row == 0.0f &&
           p.translate_col == 0.0f;
}

void warp_plane(const float* src, float* dst, int side, const AffineMap& m, Interp interp) {
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            auto [fy, fx] = m.source_of(y, x);
            float value = 0.0f;
            if (interp == Interp::nearest) {
                int iy = static_cast<int>(std::floor(fy + 0.5));
                int ix = static_cast<int>(std::floor(fx + 0.5));
                if (iy >= 0 && iy < side && ix >= 0 && ix < side)
                    value = src[size_t(iy) * side + ix];
            } else {
                if (fy >= 0 && fy <= side - 1 && fx >= 0 && fx <= side - 1) {
                    int y0 = static_cast<int>(std::floor(fy));
                    int x0 = static_cast<int>(std::floor(fx));
                    int y1 = std::min(y0 + 1, side - 1);
                    int x1 = std::min(x0 + 1, side - 1);
                    double wy = fy - y0, wx = fx - x0;
                    value = static_cast<float>(
                        (1 - wy) * ((1 - wx) * src[size_t(y0) * side + x0] +
                                    wx * src[size_t(y0) * side + x1]) +
                        wy * ((1 - wx) * src[size_t(y1) * side + x0] +
                              wx * src[size_t(y1) * side + x1]));
                }
            }
            dst[size_t(y) * side + x] = value;
        }
}

} // namespace

PatchSample apply_affine(const PatchSample& sample, const AffineParams& params) {
    const int side = sample.image.h;

    if (is_identity(params) && !params.flip) return sample;

    PatchSample out = sample;
    if (is_identity(params) && params.flip) {
        // pure mirror stays exact (and is an involution)
        auto mirror = [side](const float* src, float* dst) {
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x)
                    dst[size_t(y) * side + x] = src[size_t(y) * side + (side - 1 - x)];
        };
        for (int ci = 0; ci < sample.image.c; ++ci)
            mirror(sample.image.channel(ci), out.image.channel(ci));
        for (size_t i = 0; i < sample.instance_masks.size(); ++i) {
            mirror(sample.instance_masks[i].channel(0), out.instance_masks[i].channel(0));
            out.boxes[i] = tight_box(out.instance_masks[i]);
        }
        return out;
    }

    const AffineMap m = make_map(params, side);
    for (int ci = 0; ci < sample.image.c; ++ci)
        warp_plane(sample.image.channel(ci), out.image.channel(ci), side, m, Interp::linear);
    out.boxes.clear();
    out.instance_masks.clear();
    for (const auto& mask : sample.instance_masks) {
        Tensor warped(1, side, side);
        warp_plane(mask.channel(0), warped.channel(0), side, m, Interp::nearest);
        Box b = tight_box(warped);
        if (b.empty()) continue; // caller decides whether to reject
        out.boxes.push_back(b);
        out.instance_masks.push_back(std::move(warped));
    }
    return out;
}

PatchSample augment(const PatchSample& sample, const AugmentParams& params, Rng& rng) {
    const int side = sample.image.h;
    const int native_side = 64;
    const float px_per_voxel = float(side) / native_side;
    for (int attempt = 0; attempt < 10; ++attempt) {
        AffineParams p;
        p.rotate_deg = static_cast<float>(rng.uniform(-params.max_rotate_deg, params.max_rotate_deg));
        p.scale = static_cast<float>(rng.uniform(params.scale_min, params.scale_max));
        p.translate_row = static_cast<float>(
            rng.uniform(-params.max_translate, params.max_translate) * px_per_voxel);
        p.translate_col = static_cast<float>(
            rng.uniform(-params.max_translate, params.max_translate) * px_per_voxel);
        p.flip = rng.bernoulli(params.flip_prob);
        PatchSample out = apply_affine(sample, p);
        if (out.instance_masks.size() == sample.instance_masks.size()) return out;
    }
    return sample;
}

// ---------------------------------------------------------------------
// tiny fully-convolutional backend

namespace {

constexpr uint32_t kDetectorMagic = 0x434D4244u; // "CMBD"
constexpr int kInternalPool = 4;

class TinyFcnBackend final : public DetectorBackend {
public:
    TinyFcnBackend(const std::vector<int>& widths, uint64_t seed, float instance_threshold)
        : net_(3, widths, seed), instance_threshold_(instance_threshold) {}

    explicit TinyFcnBackend(std::istream& is) {
        is.ignore(4); // magic already checked
        uint32_t thr_bits = 0;
        is.read(reinterpret_cast<char*>(&thr_bits), 4);
        std::memcpy(&instance_threshold_, &thr_bits, 4);
        net_ = nn::UNet::load(is);
    }

    float train_batch(std::span<const PatchSample> batch, float lr) override {
        if (batch.empty()) throw BackendFailure("empty training batch");
        net_.zero_grad();
        double loss = 0.0;
        for (const auto& sample : batch) {
            nn::UNet::Workspace ws;
            Tensor x = nn::avgpool(sample.image, kInternalPool);
            Tensor target = pooled_target(sample);
            Tensor logits = net_.forward(x, ws);
            Tensor dlogits;
            loss += nn::weighted_bce_with_logits(logits, target, batch_pos_weight(target),
                                                 &dlogits);
            // mean over the batch
            for (float& g : dlogits.v) g /= float(batch.size());
            net_.backward(dlogits, ws);
        }
        adam_.step(net_, lr);
        return static_cast<float>(loss / double(batch.size()));
    }

    float eval_batch_loss(std::span<const PatchSample> batch) const override {
        double loss = 0.0;
        for (const auto& sample : batch) {
            Tensor x = nn::avgpool(sample.image, kInternalPool);
            Tensor target = pooled_target(sample);
            Tensor logits = net_.forward(x);
            loss += nn::weighted_bce_with_logits(logits, target, batch_pos_weight(target), nullptr);
        }
        return batch.empty() ? 0.0f : static_cast<float>(loss / double(batch.size()));
    }

    DetectorPrediction predict(const ChannelStack& input) const override {
        if (input.tag != StackTag::detector_input)
            throw BackendFailure("detector backend expects a detector_input stack");
        Tensor prob_small = nn::sigmoid(net_.forward(nn::avgpool(input.data, kInternalPool)));
        Tensor prob = nn::upsample_nearest(prob_small, kInternalPool);

        DetectorPrediction pred;
        pred.score_map = Tensor(1, prob.h, prob.w);

        // instances: connected regions of the thresholded probability map
        Volume bin = Volume::zeros({1, prob.h, prob.w});
        for (size_t i = 0; i < prob.v.size(); ++i)
            bin.data[i] = prob.v[i] >= instance_threshold_ ? 1.0f : 0.0f;
        LesionSet comps = connected_components(bin, 26); // 8-connectivity in-plane

        for (int l = 0; l < comps.count; ++l) {
            DetectedInstance inst;
            inst.mask = Tensor(1, prob.h, prob.w);
            float conf = 0.0f;
            for (size_t idx : comps.voxels[l]) {
                inst.mask.v[idx] = prob.v[idx];
                conf = std::max(conf, prob.v[idx]);
            }
            inst.confidence = conf;
            inst.box = tight_box(inst.mask);
            // per-voxel scores: instance masks weighted by confidence,
            // voxel-wise max across instances
            for (size_t idx : comps.voxels[l])
                pred.score_map.v[idx] =
                    std::max(pred.score_map.v[idx], conf * inst.mask.v[idx]);
            pred.instances.push_back(std::move(inst));
        }
        return pred;
    }

    void save(const std::filesystem::path& path) const override {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write detector weights " + path.string());
        f.write(reinterpret_cast<const char*>(&kDetectorMagic), 4);
        uint32_t thr_bits = 0;
        std::memcpy(&thr_bits, &instance_threshold_, 4);
        f.write(reinterpret_cast<const char*>(&thr_bits), 4);
        net_.save(f);
    }

    std::string describe() const override {
        return "tiny_fcn[pool=4] " + net_.describe();
    }

private:
    static Tensor pooled_target(const PatchSample& sample) {
        Tensor target(1, sample.image.h, sample.image.w);
        for (const auto& m : sample.instance_masks)
            for (size_t i = 0; i < m.v.size(); ++i)
                target.v[i] = std::max(target.v[i], m.v[i]);
        return nn::avgpool(target, kInternalPool);
    }

    static float batch_pos_weight(const Tensor& target) {
        double pos = 0.0;
        for (float t : target.v) pos += t;
        if (pos <= 0.0) return 1.0f;
        const double neg = double(target.size()) - pos;
        return static_cast<float>(std::clamp(neg / pos, 1.0, 1000.0));
    }

    nn::UNet net_;
    nn::Adam adam_;
    float instance_threshold_ = 0.5f;
};

} // namespace

std::unique_ptr<DetectorBackend> make_tiny_detector_backend(const std::vector<int>& widths,
                                                            uint64_t seed,
                                                            float instance_threshold) {
    return std::make_unique<TinyFcnBackend>(widths, seed, instance_threshold);
}

std::unique_ptr<DetectorBackend> load_detector_backend(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingModel("detector weights " + path.string());
    uint32_t magic = 0;
    f.read(reinterpret_cast<char*>(&magic), 4);
    if (magic != kDetectorMagic) throw IoError("bad detector weights file " + path.string());
    f.seekg(0);
    return std::make_unique<TinyFcnBackend>(f);
}

TrainingLog finetune_detector(const std::vector<PatchSample>& train,
                              const std::vector<PatchSample>& val,
                              const DetectorHyperparams& hp, DetectorBackend& backend,
                              uint64_t seed) {
    hp.validate();
    if (train.empty()) throw Error("finetune_detector: empty training set");

    TrainingLog log;
    Rng rng(seed);
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        Rng epoch_rng = rng.fork(uint64_t(epoch));
        epoch_rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += size_t(hp.batch_size)) {
            const size_t stop = std::min(order.size(), start + size_t(hp.batch_size));
            std::vector<PatchSample> batch;
            batch.reserve(stop - start);
            for (size_t i = start; i < stop; ++i)
                batch.push_back(augment(train[order[i]], hp.aug, epoch_rng));
            float loss;
            try {
                loss = backend.train_batch(batch, hp.learning_rate);
            } catch (const Error& e) {
                throw BackendFailure("detector epoch " + std::to_string(epoch) + " batch " +
                                     std::to_string(start / size_t(hp.batch_size)) + ": " +
                                     e.what());
            }
            epoch_loss += double(loss) * double(batch.size());
            seen += batch.size();
            ++log.optimizer_steps;
        }
        log.epoch_train_loss.push_back(static_cast<float>(epoch_loss / double(seen)));

        if (!val.empty()) {
            double val_loss = 0.0;
            for (size_t start = 0; start < val.size(); start += size_t(hp.batch_size)) {
                const size_t stop = std::min(val.size(), start + size_t(hp.batch_size));
                std::span<const PatchSample> batch(val.data() + start, stop - start);
                val_loss += double(backend.eval_batch_loss(batch)) * double(batch.size());
            }
            log.epoch_val_loss.push_back(static_cast<float>(val_loss / double(val.size())));
        }
    }
    return log;
}

std::vector<int> tile_origins(int extent, int window, int stride) {
    if (extent < window) throw ShapeMismatch("tile_origins: extent smaller than window");
    std::vector<int> origins;
    for (int o = 0; o + window <= extent; o += stride) origins.push_back(o);
    if (origins.empty() || origins.back() + window < extent) origins.push_back(extent - window);
    return origins;
}

DetectionResult infer_detector(const DetectorBackend& backend, const Volume& t1, const Volume& t2,
                               const Volume& t2s, int patch_side, int stride, int upsample_factor,
                               int workers) {
    require_same_shape(t1, t2s, "infer_detector");
    require_same_shape(t2, t2s, "infer_detector");
    const int ns = t2s.shape.ns, nr = t2s.shape.nr, nc = t2s.shape.nc;
    const auto rows = tile_origins(nr, patch_side, stride);
    const auto cols = tile_origins(nc, patch_side, stride);

    DetectionResult result;
    result.score_volume = Volume::zeros(t2s.shape, t2s.spacing);
    std::vector<std::vector<SliceInstance>> per_slice(ns);

    auto process_slice = [&](int s) {
        float* plane = result.score_volume.data.data() + size_t(s) * nr * nc;
        for (int row0 : rows) {
            for (int col0 : cols) {
                Tensor native = crop_stack(t1, t2, t2s, s, row0, col0, patch_side);
                ChannelStack stack{StackTag::detector_input,
                                   upsample_patch(native, upsample_factor, Interp::linear)};
                DetectorPrediction pred;
                try {
                    pred = backend.predict(stack);
                } catch (const Error& e) {
                    throw BackendFailure("detector inference slice " + std::to_string(s) + ": " +
                                         e.what());
                }
                Tensor tile_scores = nn::avgpool(pred.score_map, upsample_factor);
                for (int y = 0; y < patch_side; ++y)
                    for (int x = 0; x < patch_side; ++x) {
                        float& dst = plane[size_t(row0 + y) * nc + col0 + x];
                        const float v = std::clamp(tile_scores.at(0, y, x), 0.0f, 1.0f);
                        if (v > dst) dst = v;
                    }
                for (const auto& inst : pred.instances) {
                    SliceInstance si;
                    si.slice = s;
                    si.box = {row0 + inst.box.r0 / upsample_factor,
                              col0 + inst.box.c0 / upsample_factor,
                              row0 + (inst.box.r1 + upsample_factor - 1) / upsample_factor,
                              col0 + (inst.box.c1 + upsample_factor - 1) / upsample_factor};
                    si.confidence = inst.confidence;
                    per_slice[s].push_back(si);
                }
            }
        }
    };

    const int n_workers = std::max(1, std::min(workers, ns));
    if (n_workers == 1 || !backend.thread_safe_inference()) {
        for (int s = 0; s < ns; ++s) process_slice(s);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex err_mu;
        for (int wkr = 0; wkr < n_workers; ++wkr) {
            pool.emplace_back([&, wkr]() {
                try {
                    for (int s = wkr; s < ns; s += n_workers) process_slice(s);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (err) std::rethrow_exception(err);
    }

    for (auto& v : per_slice)
        result.instances.insert(result.instances.end(), v.begin(), v.end());
    return result;
}

DetectionResult infer_detector(const DetectorBackend& backend, const SubjectRecord& preprocessed,
                               int patch_side, int stride, int upsample_factor, int workers) {
    return infer_detector(backend, preprocessed.t1, preprocessed.t2, preprocessed.t2s, patch_side,
                          stride, upsample_factor, workers);
}

} // namespace cmb
