#ifndef CMB_NN_HPP
#define CMB_NN_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmb/rng.hpp"
#include "cmb/tensor.hpp"

namespace cmb::nn {

// 2D convolution, kernel 3x3 (pad 1) or 1x1, bias included. Gradients
// accumulate into gw/gb until the optimizer consumes them.
struct Conv2d {
    int in_c = 0;
    int out_c = 0;
    int k = 3;
    std::vector<float> w;  // [out_c][in_c*k*k]
    std::vector<float> b;  // [out_c]
    std::vector<float> gw;
    std::vector<float> gb;

    void configure(int in_channels, int out_channels, int kernel);
    void init(Rng& rng); // He-normal weights, zero bias
    void zero_grad();

    Tensor forward(const Tensor& x) const;
    // accumulates gw/gb; returns grad w.r.t. x
    Tensor backward(const Tensor& x, const Tensor& gy);
};

Tensor relu(const Tensor& x);
// gradient of relu given the relu *output* (mask out > 0)
void relu_backward_inplace(const Tensor& relu_out, Tensor& g);

Tensor maxpool2(const Tensor& x, std::vector<int32_t>& argmax);
Tensor maxpool2_backward(const Tensor& gy, const std::vector<int32_t>& argmax, int in_h, int in_w);

Tensor avgpool(const Tensor& x, int factor);
Tensor avgpool_backward(const Tensor& gy, int factor, int in_h, int in_w);

Tensor upsample_nearest(const Tensor& x, int factor);
Tensor upsample_nearest_backward(const Tensor& gy, int factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);

// Class-weighted binary cross entropy on logits; target values may be
// soft (in [0, 1]). Mean over all elements. When dlogits is non-null the
// gradient is written there.
double weighted_bce_with_logits(const Tensor& logits, const Tensor& target, float pos_weight,
                                Tensor* dlogits);

float sigmoid(float z);
Tensor sigmoid(const Tensor& logits);

// Encoder-decoder segmentation network. widths.size() resolution levels;
// the last width is the bottleneck. Skip connections concatenate
// (upsampled, skip). Head is a 1x1 conv to a single logit channel.
class UNet {
public:
    UNet() = default;
    UNet(int in_channels, std::vector<int> widths, uint64_t seed);

    int in_channels() const { return in_channels_; }
    const std::vector<int>& widths() const { return widths_; }
    int depth() const { return static_cast<int>(widths_.size()); }

    struct Workspace; // per-call activation cache, owned by the trainer

    // Inference: thread-safe, no state mutated.
    Tensor forward(const Tensor& x) const;

    // Training: caches activations in ws for the matching backward call.
    Tensor forward(const Tensor& x, Workspace& ws) const;
    void backward(const Tensor& dlogits, const Workspace& ws);

    void zero_grad();
    void for_each_param(const std::function<void(std::vector<float>&, std::vector<float>&)>& fn);
    size_t param_count() const;

    void save(std::ostream& os) const;
    static UNet load(std::istream& is);

    std::string describe() const;

private:
    int in_channels_ = 0;
    std::vector<int> widths_;
    struct Block {
        Conv2d c1, c2;
    };
    std::vector<Block> enc_;
    Block bottleneck_;
    std::vector<Block> dec_;
    Conv2d head_;

    void build();
    void check_input(const Tensor& x) const;
};

struct UNet::Workspace {
    std::vector<Tensor> enc_in, enc_mid, enc_out;
    std::vector<std::vector<int32_t>> pool_idx;
    std::vector<std::pair<int, int>> pool_in_hw;
    Tensor bott_in, bott_mid, bott_out;
    std::vector<Tensor> dec_cat, dec_mid, dec_out;
};

// Adam with bias correction; owns first/second moment buffers matching
// the parameter layout produced by for_each_param.
class Adam {
public:
    Adam(float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(UNet& net, float lr);

private:
    float beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

} // namespace cmb::nn

#endif
