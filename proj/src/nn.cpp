#include "cmb/nn.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "cmb/errors.hpp"

namespace cmb::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// col layout: K = in_c*k*k rows, P = h*w columns; row q holds the shifted
// image for one (channel, ky, kx) tap, zero-padded at the borders.
void im2col(const Tensor& x, int k, std::vector<float>& col) {
    const int h = x.h, w = x.w;
    const size_t P = size_t(h) * w;
    const int K = x.c * k * k;
    col.assign(size_t(K) * P, 0.0f);
    if (k == 1) {
        std::memcpy(col.data(), x.v.data(), x.v.size() * sizeof(float));
        return;
    }
    const int pad = k / 2;
    for (int ci = 0; ci < x.c; ++ci) {
        const float* src = x.channel(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* row = col.data() + (size_t(ci) * k * k + size_t(ky) * k + kx) * P;
                const int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue; // stays zero
                    float* dst = row + size_t(y) * w;
                    const float* s = src + size_t(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    if (x1 > x0)
                        std::memcpy(dst + x0, s + x0 + dx, size_t(x1 - x0) * sizeof(float));
                }
            }
        }
    }
}

void col2im_add(const std::vector<float>& col, int c, int h, int w, int k, Tensor& gx) {
    const size_t P = size_t(h) * w;
    if (k == 1) {
        for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += col[i];
        return;
    }
    const int pad = k / 2;
    for (int ci = 0; ci < c; ++ci) {
        float* dst = gx.channel(ci);
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* row = col.data() + (size_t(ci) * k * k + size_t(ky) * k + kx) * P;
                const int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const float* s = row + size_t(y) * w;
                    float* d = dst + size_t(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    for (int x = x0; x < x1; ++x) d[x + dx] += s[x];
                }
            }
        }
    }
}

} // namespace

void Conv2d::configure(int in_channels, int out_channels, int kernel) {
    in_c = in_channels;
    out_c = out_channels;
    k = kernel;
    w.assign(size_t(out_c) * in_c * k * k, 0.0f);
    b.assign(out_c, 0.0f);
    gw.assign(w.size(), 0.0f);
    gb.assign(b.size(), 0.0f);
}

void Conv2d::init(Rng& rng) {
    const double sd = std::sqrt(2.0 / (double(in_c) * k * k));
    for (float& x : w) x = static_cast<float>(rng.normal(0.0, sd));
    std::fill(b.begin(), b.end(), 0.0f);
}

void Conv2d::zero_grad() {
    std::fill(gw.begin(), gw.end(), 0.0f);
    std::fill(gb.begin(), gb.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.c != in_c) throw BackendFailure("conv: expected " + std::to_string(in_c) +
                                          " channels, got " + std::to_string(x.c));
    const size_t P = x.plane();
    const int K = in_c * k * k;
    std::vector<float> col;
    im2col(x, k, col);
    Tensor out(out_c, x.h, x.w);
    ConstMapMat W(w.data(), out_c, K);
    ConstMapMat C(col.data(), K, static_cast<Eigen::Index>(P));
    MapMat O(out.v.data(), out_c, static_cast<Eigen::Index>(P));
    O.noalias() = W * C;
    for (int oc = 0; oc < out_c; ++oc)
        O.row(oc).array() += b[oc];
    return out;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& gy) {
    const size_t P = x.plane();
    const int K = in_c * k * k;
    std::vector<float> col;
    im2col(x, k, col);
    ConstMapMat C(col.data(), K, static_cast<Eigen::Index>(P));
    ConstMapMat Gy(gy.v.data(), out_c, static_cast<Eigen::Index>(P));
    MapMat Gw(gw.data(), out_c, K);
    Gw.noalias() += Gy * C.transpose();
    for (int oc = 0; oc < out_c; ++oc)
        gb[oc] += Gy.row(oc).sum();

    std::vector<float> colgrad(size_t(K) * P);
    ConstMapMat W(w.data(), out_c, K);
    MapMat Cg(colgrad.data(), K, static_cast<Eigen::Index>(P));
    Cg.noalias() = W.transpose() * Gy;
    Tensor gx(in_c, x.h, x.w);
    col2im_add(colgrad, in_c, x.h, x.w, k, gx);
    return gx;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (float& v : out.v)
        if (v < 0) v = 0;
    return out;
}

void relu_backward_inplace(const Tensor& relu_out, Tensor& g) {
    for (size_t i = 0; i < g.v.size(); ++i)
        if (relu_out.v[i] <= 0.0f) g.v[i] = 0.0f;
}

Tensor maxpool2(const Tensor& x, std::vector<int32_t>& argmax) {
    const int oh = x.h / 2, ow = x.w / 2;
    Tensor out(x.c, oh, ow);
    argmax.resize(out.size());
    for (int ci = 0; ci < x.c; ++ci) {
        const float* src = x.channel(ci);
        float* dst = out.channel(ci);
        int32_t* am = argmax.data() + size_t(ci) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
                int best = (2 * y) * x.w + 2 * xx;
                float bv = src[best];
                const int cand[3] = {(2 * y) * x.w + 2 * xx + 1, (2 * y + 1) * x.w + 2 * xx,
                                     (2 * y + 1) * x.w + 2 * xx + 1};
                for (int idx : cand) {
                    if (src[idx] > bv) {
                        bv = src[idx];
                        best = idx;
                    }
                }
                dst[size_t(y) * ow + xx] = bv;
                am[size_t(y) * ow + xx] = best;
            }
        }
    }
    return out;
}

Tensor maxpool2_backward(const Tensor& gy, const std::vector<int32_t>& argmax, int in_h, int in_w) {
    Tensor gx(gy.c, in_h, in_w);
    for (int ci = 0; ci < gy.c; ++ci) {
        const float* g = gy.channel(ci);
        const int32_t* am = argmax.data() + size_t(ci) * gy.plane();
        float* dst = gx.channel(ci);
        for (size_t i = 0; i < gy.plane(); ++i)
            dst[am[i]] += g[i];
    }
    return gx;
}

Tensor avgpool(const Tensor& x, int factor) {
    const int oh = x.h / factor, ow = x.w / factor;
    Tensor out(x.c, oh, ow);
    const float inv = 1.0f / float(factor * factor);
    for (int ci = 0; ci < x.c; ++ci) {
        const float* src = x.channel(ci);
        float* dst = out.channel(ci);
        for (int y = 0; y < oh; ++y) {
            for (int xx = 0; xx < ow; ++xx) {
                float s = 0.0f;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        s += src[size_t(y * factor + dy) * x.w + xx * factor + dx];
                dst[size_t(y) * ow + xx] = s * inv;
            }
        }
    }
    return out;
}

Tensor avgpool_backward(const Tensor& gy, int factor, int in_h, int in_w) {
    Tensor gx(gy.c, in_h, in_w);
    const float inv = 1.0f / float(factor * factor);
    for (int ci = 0; ci < gy.c; ++ci) {
        const float* g = gy.channel(ci);
        float* dst = gx.channel(ci);
        for (int y = 0; y < gy.h; ++y)
            for (int xx = 0; xx < gy.w; ++xx) {
                const float v = g[size_t(y) * gy.w + xx] * inv;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        dst[size_t(y * factor + dy) * in_w + xx * factor + dx] = v;
            }
    }
    return gx;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    Tensor out(x.c, x.h * factor, x.w * factor);
    for (int ci = 0; ci < x.c; ++ci) {
        const float* src = x.channel(ci);
        float* dst = out.channel(ci);
        for (int y = 0; y < out.h; ++y) {
            const float* s = src + size_t(y / factor) * x.w;
            float* d = dst + size_t(y) * out.w;
            for (int xx = 0; xx < out.w; ++xx)
                d[xx] = s[xx / factor];
        }
    }
    return out;
}

Tensor upsample_nearest_backward(const Tensor& gy, int factor) {
    Tensor gx(gy.c, gy.h / factor, gy.w / factor);
    for (int ci = 0; ci < gy.c; ++ci) {
        const float* g = gy.channel(ci);
        float* dst = gx.channel(ci);
        for (int y = 0; y < gy.h; ++y)
            for (int xx = 0; xx < gy.w; ++xx)
                dst[size_t(y / factor) * gx.w + xx / factor] += g[size_t(y) * gy.w + xx];
    }
    return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out(a.c + b.c, a.h, a.w);
    std::memcpy(out.v.data(), a.v.data(), a.v.size() * sizeof(float));
    std::memcpy(out.v.data() + a.v.size(), b.v.data(), b.v.size() * sizeof(float));
    return out;
}

float sigmoid(float z) {
    if (z >= 0) {
        float e = std::exp(-z);
        return 1.0f / (1.0f + e);
    }
    float e = std::exp(z);
    return e / (1.0f + e);
}

Tensor sigmoid(const Tensor& logits) {
    Tensor out = logits;
    for (float& v : out.v) v = sigmoid(v);
    return out;
}

namespace {
inline double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}
} // namespace

double weighted_bce_with_logits(const Tensor& logits, const Tensor& target, float pos_weight,
                                Tensor* dlogits) {
    if (!logits.same_shape(target))
        throw BackendFailure("bce: logits/target shape mismatch");
    const double inv_n = 1.0 / double(logits.size());
    double loss = 0.0;
    if (dlogits && !dlogits->same_shape(logits)) *dlogits = Tensor(logits.c, logits.h, logits.w);
    for (size_t i = 0; i < logits.v.size(); ++i) {
        const double z = logits.v[i];
        const double t = target.v[i];
        loss += pos_weight * t * softplus(-z) + (1.0 - t) * softplus(z);
        if (dlogits) {
            const double s = sigmoid(static_cast<float>(z));
            dlogits->v[i] = static_cast<float>((pos_weight * t * (s - 1.0) + (1.0 - t) * s) * inv_n);
        }
    }
    return loss * inv_n;
}

UNet::UNet(int in_channels, std::vector<int> widths, uint64_t seed)
    : in_channels_(in_channels), widths_(std::move(widths)) {
    if (widths_.empty()) throw BackendFailure("UNet: widths must be nonempty");
    for (int w : widths_)
        if (w < 1) throw BackendFailure("UNet: widths must be positive");
    build();
    Rng rng(Rng::splitmix(seed ^ 0xC0FFEEULL));
    for (auto& blk : enc_) {
        blk.c1.init(rng);
        blk.c2.init(rng);
    }
    bottleneck_.c1.init(rng);
    bottleneck_.c2.init(rng);
    for (auto& blk : dec_) {
        blk.c1.init(rng);
        blk.c2.init(rng);
    }
    head_.init(rng);
}

void UNet::build() {
    const int L = depth();
    enc_.resize(L - 1);
    dec_.resize(L - 1);
    int prev = in_channels_;
    for (int l = 0; l < L - 1; ++l) {
        enc_[l].c1.configure(prev, widths_[l], 3);
        enc_[l].c2.configure(widths_[l], widths_[l], 3);
        prev = widths_[l];
    }
    bottleneck_.c1.configure(prev, widths_[L - 1], 3);
    bottleneck_.c2.configure(widths_[L - 1], widths_[L - 1], 3);
    for (int l = L - 2; l >= 0; --l) {
        int above = (l == L - 2) ? widths_[L - 1] : widths_[l + 1];
        dec_[l].c1.configure(above + widths_[l], widths_[l], 3);
        dec_[l].c2.configure(widths_[l], widths_[l], 3);
    }
    head_.configure(widths_[0], 1, 1);
}

void UNet::check_input(const Tensor& x) const {
    if (x.c != in_channels_)
        throw BackendFailure("UNet: expected " + std::to_string(in_channels_) + " channels, got " +
                             std::to_string(x.c));
    const int div = 1 << (depth() - 1);
    if (x.h % div != 0 || x.w % div != 0 || x.h < div || x.w < div)
        throw BackendFailure("UNet: input " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                             " not divisible by " + std::to_string(div));
}

Tensor UNet::forward(const Tensor& x) const {
    Workspace ws;
    return forward(x, ws);
}

Tensor UNet::forward(const Tensor& x, Workspace& ws) const {
    check_input(x);
    const int L = depth();
    ws.enc_in.resize(L - 1);
    ws.enc_mid.resize(L - 1);
    ws.enc_out.resize(L - 1);
    ws.pool_idx.resize(L - 1);
    ws.pool_in_hw.resize(L - 1);
    ws.dec_cat.resize(L - 1);
    ws.dec_mid.resize(L - 1);
    ws.dec_out.resize(L - 1);

    Tensor cur = x;
    for (int l = 0; l < L - 1; ++l) {
        ws.enc_in[l] = cur;
        ws.enc_mid[l] = relu(enc_[l].c1.forward(cur));
        ws.enc_out[l] = relu(enc_[l].c2.forward(ws.enc_mid[l]));
        ws.pool_in_hw[l] = {ws.enc_out[l].h, ws.enc_out[l].w};
        cur = maxpool2(ws.enc_out[l], ws.pool_idx[l]);
    }
    ws.bott_in = cur;
    ws.bott_mid = relu(bottleneck_.c1.forward(cur));
    ws.bott_out = relu(bottleneck_.c2.forward(ws.bott_mid));
    cur = ws.bott_out;
    for (int l = L - 2; l >= 0; --l) {
        Tensor up = upsample_nearest(cur, 2);
        ws.dec_cat[l] = concat_channels(up, ws.enc_out[l]);
        ws.dec_mid[l] = relu(dec_[l].c1.forward(ws.dec_cat[l]));
        ws.dec_out[l] = relu(dec_[l].c2.forward(ws.dec_mid[l]));
        cur = ws.dec_out[l];
    }
    return head_.forward(cur);
}

void UNet::backward(const Tensor& dlogits, const Workspace& ws) {
    const int L = depth();
    std::vector<Tensor> skip_grad(L - 1);

    Tensor g = head_.backward(ws.dec_out[0], dlogits);
    for (int l = 0; l < L - 1; ++l) {
        relu_backward_inplace(ws.dec_out[l], g);
        Tensor gmid = dec_[l].c2.backward(ws.dec_mid[l], g);
        relu_backward_inplace(ws.dec_mid[l], gmid);
        Tensor gcat = dec_[l].c1.backward(ws.dec_cat[l], gmid);

        const int up_c = gcat.c - ws.enc_out[l].c;
        Tensor gup(up_c, gcat.h, gcat.w);
        std::memcpy(gup.v.data(), gcat.v.data(), gup.v.size() * sizeof(float));
        skip_grad[l] = Tensor(ws.enc_out[l].c, gcat.h, gcat.w);
        std::memcpy(skip_grad[l].v.data(), gcat.v.data() + gup.v.size(),
                    skip_grad[l].v.size() * sizeof(float));
        g = upsample_nearest_backward(gup, 2);
    }

    relu_backward_inplace(ws.bott_out, g);
    Tensor gmid = bottleneck_.c2.backward(ws.bott_mid, g);
    relu_backward_inplace(ws.bott_mid, gmid);
    g = bottleneck_.c1.backward(ws.bott_in, gmid);

    for (int l = L - 2; l >= 0; --l) {
        Tensor ge = maxpool2_backward(g, ws.pool_idx[l], ws.pool_in_hw[l].first,
                                      ws.pool_in_hw[l].second);
        for (size_t i = 0; i < ge.v.size(); ++i) ge.v[i] += skip_grad[l].v[i];
        relu_backward_inplace(ws.enc_out[l], ge);
        Tensor gm = enc_[l].c2.backward(ws.enc_mid[l], ge);
        relu_backward_inplace(ws.enc_mid[l], gm);
        g = enc_[l].c1.backward(ws.enc_in[l], gm);
    }
}

void UNet::zero_grad() {
    for_each_param([](std::vector<float>&, std::vector<float>& g) {
        std::fill(g.begin(), g.end(), 0.0f);
    });
}

void UNet::for_each_param(const std::function<void(std::vector<float>&, std::vector<float>&)>& fn) {
    auto visit = [&](Conv2d& c) {
        fn(c.w, c.gw);
        fn(c.b, c.gb);
    };
    for (auto& blk : enc_) {
        visit(blk.c1);
        visit(blk.c2);
    }
    visit(bottleneck_.c1);
    visit(bottleneck_.c2);
    for (auto& blk : dec_) {
        visit(blk.c1);
        visit(blk.c2);
    }
    visit(head_);
}

size_t UNet::param_count() const {
    size_t n = 0;
    const_cast<UNet*>(this)->for_each_param(
        [&](std::vector<float>& w, std::vector<float>&) { n += w.size(); });
    return n;
}

namespace {
constexpr uint32_t kWeightsMagic = 0x434D424Eu; // "CMBN"
constexpr uint32_t kWeightsVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw IoError("truncated weights stream");
    return v;
}
} // namespace

void UNet::save(std::ostream& os) const {
    write_pod(os, kWeightsMagic);
    write_pod(os, kWeightsVersion);
    write_pod(os, static_cast<uint32_t>(in_channels_));
    write_pod(os, static_cast<uint32_t>(widths_.size()));
    for (int w : widths_) write_pod(os, static_cast<uint32_t>(w));
    const_cast<UNet*>(this)->for_each_param([&](std::vector<float>& w, std::vector<float>&) {
        os.write(reinterpret_cast<const char*>(w.data()),
                 static_cast<std::streamsize>(w.size() * sizeof(float)));
    });
    if (!os) throw IoError("failed writing weights");
}

UNet UNet::load(std::istream& is) {
    if (read_pod<uint32_t>(is) != kWeightsMagic) throw IoError("bad weights magic");
    if (read_pod<uint32_t>(is) != kWeightsVersion) throw IoError("unsupported weights version");
    const int in_c = static_cast<int>(read_pod<uint32_t>(is));
    const uint32_t n = read_pod<uint32_t>(is);
    std::vector<int> widths(n);
    for (auto& w : widths) w = static_cast<int>(read_pod<uint32_t>(is));
    UNet net;
    net.in_channels_ = in_c;
    net.widths_ = widths;
    net.build();
    net.for_each_param([&](std::vector<float>& w, std::vector<float>&) {
        is.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(float)));
        if (!is) throw IoError("truncated weights payload");
    });
    return net;
}

std::string UNet::describe() const {
    std::ostringstream os;
    os << "unet(in=" << in_channels_ << ", widths=";
    for (size_t i = 0; i < widths_.size(); ++i)
        os << (i ? "," : "") << widths_[i];
    os << ", params=" << param_count() << ")";
    return os.str();
}

void Adam::step(UNet& net, float lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(double(beta1_), double(t_));
    const double bc2 = 1.0 - std::pow(double(beta2_), double(t_));
    size_t slot = 0;
    net.for_each_param([&](std::vector<float>& w, std::vector<float>& g) {
        if (slot >= m_.size()) {
            m_.emplace_back(w.size(), 0.0f);
            v_.emplace_back(w.size(), 0.0f);
        }
        auto& m = m_[slot];
        auto& v = v_[slot];
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0f - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0f - beta2_) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
        }
        ++slot;
    });
}

} // namespace cmb::nn
