#include "cmb/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

namespace cmb {

namespace {

// neighbour offsets for 6- and 26-connectivity
std::vector<std::array<int, 3>> neighbour_offsets(int connectivity) {
    if (connectivity != 6 && connectivity != 26)
        throw Error("connectivity must be 6 or 26, got " + std::to_string(connectivity));
    std::vector<std::array<int, 3>> offs;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dz == 0 && dy == 0 && dx == 0) continue;
                if (connectivity == 6 && std::abs(dz) + std::abs(dy) + std::abs(dx) != 1) continue;
                offs.push_back({dz, dy, dx});
            }
    return offs;
}

} // namespace

LesionSet connected_components(const Volume& mask, int connectivity) {
    mask.require_valid("connected_components");
    const auto offs = neighbour_offsets(connectivity);
    const int ns = mask.shape.ns, nr = mask.shape.nr, nc = mask.shape.nc;

    LesionSet out;
    out.shape = mask.shape;
    out.labels.assign(mask.size(), 0);

    std::deque<size_t> queue;
    for (size_t start = 0; start < mask.size(); ++start) {
        if (mask.data[start] == 0.0f || out.labels[start] != 0) continue;
        const int32_t label = ++out.count;
        out.voxels.emplace_back();
        auto& vox = out.voxels.back();
        out.labels[start] = label;
        queue.push_back(start);
        while (!queue.empty()) {
            size_t idx = queue.front();
            queue.pop_front();
            vox.push_back(idx);
            const int s = static_cast<int>(idx / (size_t(nr) * nc));
            const int r = static_cast<int>((idx / nc) % nr);
            const int c = static_cast<int>(idx % nc);
            for (const auto& o : offs) {
                const int zs = s + o[0], zr = r + o[1], zc = c + o[2];
                if (zs < 0 || zs >= ns || zr < 0 || zr >= nr || zc < 0 || zc >= nc) continue;
                const size_t nidx = mask.index(zs, zr, zc);
                if (mask.data[nidx] != 0.0f && out.labels[nidx] == 0) {
                    out.labels[nidx] = label;
                    queue.push_back(nidx);
                }
            }
        }
        std::sort(vox.begin(), vox.end());
    }

    out.centroids.resize(out.count);
    for (int l = 0; l < out.count; ++l) {
        double zs = 0, zr = 0, zc = 0;
        for (size_t idx : out.voxels[l]) {
            zs += double(idx / (size_t(nr) * nc));
            zr += double((idx / nc) % nr);
            zc += double(idx % nc);
        }
        const double n = double(out.voxels[l].size());
        out.centroids[l] = {zs / n, zr / n, zc / n};
    }
    return out;
}

void IntensityThreshold::save(const std::filesystem::path& path) const {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write threshold file " + path.string());
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", double(value));
    f << "value\t" << buf << "\n";
    for (const auto& p : provenance) {
        std::snprintf(buf, sizeof(buf), "%.9g", double(p.lesion_min));
        f << "lesion\t" << p.subject_id << "\t" << p.lesion_id << "\t" << buf << "\n";
    }
}

IntensityThreshold IntensityThreshold::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw MissingFile("threshold file " + path.string());
    IntensityThreshold thr;
    std::string line;
    bool have_value = false;
    while (std::getline(f, line)) {
        std::istringstream is(line);
        std::string kind;
        is >> kind;
        if (kind == "value") {
            is >> thr.value;
            have_value = true;
        } else if (kind == "lesion") {
            ThresholdProvenance p;
            is >> p.subject_id >> p.lesion_id >> p.lesion_min;
            thr.provenance.push_back(p);
        }
    }
    if (!have_value) throw IoError("malformed threshold file " + path.string());
    return thr;
}

IntensityThreshold derive_intensity_threshold(const std::vector<AnnotatedView>& subjects,
                                              int connectivity, float margin) {
    IntensityThreshold thr;
    thr.value = -std::numeric_limits<float>::infinity();
    for (const auto& sub : subjects) {
        if (!sub.t2s_norm || !sub.annotation)
            throw Error("derive_intensity_threshold: subject " + sub.id + " lacks data");
        require_same_shape(*sub.t2s_norm, *sub.annotation, "derive_intensity_threshold " + sub.id);
        LesionSet lesions = connected_components(*sub.annotation, connectivity);
        for (int l = 0; l < lesions.count; ++l) {
            float lesion_min = std::numeric_limits<float>::infinity();
            for (size_t idx : lesions.voxels[l])
                lesion_min = std::min(lesion_min, sub.t2s_norm->data[idx]);
            thr.provenance.push_back({sub.id, l + 1, lesion_min});
            thr.value = std::max(thr.value, lesion_min);
        }
    }
    if (thr.provenance.empty())
        throw NoLesionsInDataset("no annotated lesion voxels across the training subjects");
    thr.value += margin;
    return thr;
}

std::string to_string(FilterMode m) {
    return m == FilterMode::voxel ? "voxel" : "object";
}

FilterMode filter_mode_from_string(const std::string& s) {
    if (s == "voxel") return FilterMode::voxel;
    if (s == "object") return FilterMode::object;
    throw ConfigError("unknown filter mode '" + s + "' (expected voxel or object)");
}

Volume apply_intensity_filter(const Volume& scores, const Volume& t2s_norm,
                              const IntensityThreshold& thr, FilterMode mode, int connectivity) {
    require_same_shape(scores, t2s_norm, "apply_intensity_filter");
    Volume out = scores;
    if (mode == FilterMode::voxel) {
        for (size_t i = 0; i < out.data.size(); ++i)
            if (t2s_norm.data[i] > thr.value) out.data[i] = 0.0f;
        return out;
    }
    // object mode: binarize at zero, label, keep components with at least
    // one surviving voxel
    Volume positive = Volume::zeros(scores.shape, scores.spacing);
    for (size_t i = 0; i < scores.data.size(); ++i)
        positive.data[i] = scores.data[i] > 0.0f ? 1.0f : 0.0f;
    LesionSet comps = connected_components(positive, connectivity);
    std::vector<char> keep(size_t(comps.count) + 1, 0);
    for (int l = 0; l < comps.count; ++l)
        for (size_t idx : comps.voxels[l])
            if (t2s_norm.data[idx] <= thr.value) {
                keep[size_t(l) + 1] = 1;
                break;
            }
    for (size_t i = 0; i < out.data.size(); ++i) {
        const int32_t label = comps.labels[i];
        if (label == 0 || !keep[size_t(label)]) out.data[i] = 0.0f;
    }
    return out;
}

namespace {

// Felzenszwalb-Huttenlocher 1D squared distance transform.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    d.resize(n);
    v.assign(n, 0);
    z.assign(size_t(n) + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = double(q) - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

} // namespace

std::vector<double> squared_distance_to_set(const Volume& mask) {
    const int ns = mask.shape.ns, nr = mask.shape.nr, nc = mask.shape.nc;
    constexpr double kInf = 1e18;
    std::vector<double> dist(mask.size());
    for (size_t i = 0; i < mask.size(); ++i)
        dist[i] = mask.data[i] != 0.0f ? 0.0 : kInf;

    std::vector<double> line, out;
    std::vector<int> v;
    std::vector<double> z;

    // along columns
    line.resize(nc);
    for (int s = 0; s < ns; ++s)
        for (int r = 0; r < nr; ++r) {
            for (int c = 0; c < nc; ++c) line[c] = dist[mask.index(s, r, c)];
            edt_1d(line, out, v, z);
            for (int c = 0; c < nc; ++c) dist[mask.index(s, r, c)] = out[c];
        }
    // along rows
    line.resize(nr);
    for (int s = 0; s < ns; ++s)
        for (int c = 0; c < nc; ++c) {
            for (int r = 0; r < nr; ++r) line[r] = dist[mask.index(s, r, c)];
            edt_1d(line, out, v, z);
            for (int r = 0; r < nr; ++r) dist[mask.index(s, r, c)] = out[r];
        }
    // along slices
    line.resize(ns);
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c < nc; ++c) {
            for (int s = 0; s < ns; ++s) line[s] = dist[mask.index(s, r, c)];
            edt_1d(line, out, v, z);
            for (int s = 0; s < ns; ++s) dist[mask.index(s, r, c)] = out[s];
        }
    return dist;
}

Volume dilate(const Volume& mask, int radius) {
    mask.require_valid("dilate");
    if (radius < 0) throw Error("dilate: radius must be >= 0");
    if (radius == 0) return mask;
    std::vector<double> dist = squared_distance_to_set(mask);
    Volume out = mask;
    const double r2 = double(radius) * radius;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = dist[i] <= r2 ? 1.0f : 0.0f;
    return out;
}

float otsu_threshold(const Volume& v) {
    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (float x : v.data) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (!(hi > lo)) throw EmptyMask("otsu: constant volume has no foreground split");

    constexpr int kBins = 256;
    std::vector<int64_t> hist(kBins, 0);
    const double scale = double(kBins) / (double(hi) - double(lo));
    for (float x : v.data) {
        int bin = static_cast<int>((double(x) - lo) * scale);
        bin = std::clamp(bin, 0, kBins - 1);
        ++hist[bin];
    }

    const double total = double(v.size());
    double sum_all = 0.0;
    for (int i = 0; i < kBins; ++i) sum_all += double(i) * double(hist[i]);

    double best_var = -1.0;
    int best_bin = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < kBins - 1; ++t) {
        w0 += double(hist[t]);
        if (w0 <= 0.0) continue;
        const double w1 = total - w0;
        if (w1 <= 0.0) break;
        sum0 += double(t) * double(hist[t]);
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_bin = t;
        }
    }
    // threshold at the upper edge of the chosen bin
    return static_cast<float>(lo + (double(best_bin) + 1.0) * (double(hi) - lo) / kBins);
}

namespace {

// fill, per slice, background regions not reachable from the slice border
void fill_holes_per_slice(Volume& mask) {
    const int ns = mask.shape.ns, nr = mask.shape.nr, nc = mask.shape.nc;
    std::vector<char> outside(size_t(nr) * nc);
    std::deque<int> queue;
    for (int s = 0; s < ns; ++s) {
        std::fill(outside.begin(), outside.end(), 0);
        queue.clear();
        const size_t base = size_t(s) * nr * nc;
        auto push = [&](int r, int c) {
            const size_t p = size_t(r) * nc + c;
            if (!outside[p] && mask.data[base + p] == 0.0f) {
                outside[p] = 1;
                queue.push_back(static_cast<int>(p));
            }
        };
        for (int r = 0; r < nr; ++r) {
            push(r, 0);
            push(r, nc - 1);
        }
        for (int c = 0; c < nc; ++c) {
            push(0, c);
            push(nr - 1, c);
        }
        while (!queue.empty()) {
            const int p = queue.front();
            queue.pop_front();
            const int r = p / nc, c = p % nc;
            if (r > 0) push(r - 1, c);
            if (r + 1 < nr) push(r + 1, c);
            if (c > 0) push(r, c - 1);
            if (c + 1 < nc) push(r, c + 1);
        }
        for (size_t p = 0; p < size_t(nr) * nc; ++p)
            if (mask.data[base + p] == 0.0f && !outside[p]) mask.data[base + p] = 1.0f;
    }
}

} // namespace

BrainMask compute_brain_mask(const Volume& t2s_norm, int dilation_radius) {
    t2s_norm.require_valid("compute_brain_mask");
    const float split = otsu_threshold(t2s_norm);
    Volume fg = Volume::zeros(t2s_norm.shape, t2s_norm.spacing);
    size_t n_fg = 0;
    for (size_t i = 0; i < t2s_norm.data.size(); ++i) {
        if (t2s_norm.data[i] > split) {
            fg.data[i] = 1.0f;
            ++n_fg;
        }
    }
    if (n_fg == 0) throw EmptyMask("compute_brain_mask: no foreground above intensity split");

    LesionSet comps = connected_components(fg, 26);
    int best = 0;
    size_t best_size = 0;
    for (int l = 0; l < comps.count; ++l)
        if (comps.voxels[l].size() > best_size) {
            best_size = comps.voxels[l].size();
            best = l;
        }
    Volume core = Volume::zeros(t2s_norm.shape, t2s_norm.spacing);
    for (size_t idx : comps.voxels[best]) core.data[idx] = 1.0f;

    fill_holes_per_slice(core);

    BrainMask out;
    out.dilation_radius = dilation_radius;
    out.mask = dilate(core, dilation_radius);
    return out;
}

Volume binarize(const Volume& prob, float threshold) {
    Volume out = prob;
    for (float& v : out.data)
        v = v > threshold ? 1.0f : 0.0f;
    return out;
}

Volume postprocess_pipeline(const Volume& prob, const Volume& t2s_norm,
                            const IntensityThreshold& thr, const BrainMask& brain,
                            FilterMode mode, int connectivity, float binarize_threshold,
                            std::vector<std::string>* stage_log) {
    require_same_shape(prob, t2s_norm, "postprocess_pipeline");
    require_same_shape(prob, brain.mask, "postprocess_pipeline brain mask");

    Volume filtered = apply_intensity_filter(prob, t2s_norm, thr, mode, connectivity);
    if (stage_log) stage_log->push_back("intensity_filter(" + to_string(mode) + ")");

    for (size_t i = 0; i < filtered.data.size(); ++i)
        filtered.data[i] *= brain.mask.data[i];
    if (stage_log) stage_log->push_back("brain_mask");

    Volume out = binarize(filtered, binarize_threshold);
    if (stage_log) stage_log->push_back("binarize");
    return out;
}

} // namespace cmb
