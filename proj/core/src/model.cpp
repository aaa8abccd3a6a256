#include "glowsign/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "glowsign/error.hpp"
#include "glowsign/rng.hpp"

namespace glowsign {

void Architecture::validate() const {
    if (in_channels <= 0 || input_size <= 0 || num_classes < 2)
        throw InvalidInputError("architecture: bad channel/size/class counts");
    if (conv_channels.empty()) throw InvalidInputError("architecture: no conv blocks");
    if (fc_hidden < 0) throw InvalidInputError("architecture: negative hidden width");
    int s = input_size;
    for (size_t i = 0; i < conv_channels.size(); ++i) {
        if (conv_channels[i] <= 0) throw InvalidInputError("architecture: bad conv width");
        if (s % 2 != 0) throw InvalidInputError("architecture: input size not pool-divisible");
        s /= 2;
    }
    if (s <= 0) throw InvalidInputError("architecture: input too small for pool stack");
}

int Architecture::pooled_size() const {
    int s = input_size;
    for (size_t i = 0; i < conv_channels.size(); ++i) s /= 2;
    return s;
}

int Architecture::feature_size() const {
    return conv_channels.back() * pooled_size() * pooled_size();
}

size_t Architecture::param_count() const {
    size_t n = 0;
    int in = in_channels;
    for (int out : conv_channels) {
        n += static_cast<size_t>(out) * in * 9 + out;
        in = out;
    }
    int feat = feature_size();
    if (fc_hidden > 0) {
        n += static_cast<size_t>(fc_hidden) * feat + fc_hidden;
        feat = fc_hidden;
    }
    n += static_cast<size_t>(num_classes) * feat + num_classes;
    return n;
}

std::string Architecture::descriptor() const {
    std::ostringstream ss;
    ss << "in" << in_channels << "x" << input_size << ":";
    for (size_t i = 0; i < conv_channels.size(); ++i)
        ss << (i ? "," : "") << "c" << conv_channels[i];
    ss << ":f" << fc_hidden << ":k" << num_classes;
    return ss.str();
}

Architecture Architecture::from_descriptor(const std::string& text) {
    Architecture arch;
    arch.conv_channels.clear();
    std::istringstream ss(text);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 4 || parts[0].substr(0, 2) != "in")
        throw InvalidInputError("bad architecture descriptor: '" + text + "'");
    const auto x = parts[0].find('x');
    arch.in_channels = std::stoi(parts[0].substr(2, x - 2));
    arch.input_size = std::stoi(parts[0].substr(x + 1));
    std::istringstream convs(parts[1]);
    while (std::getline(convs, part, ',')) {
        if (part.empty() || part[0] != 'c')
            throw InvalidInputError("bad architecture descriptor: '" + text + "'");
        arch.conv_channels.push_back(std::stoi(part.substr(1)));
    }
    if (parts[2].empty() || parts[2][0] != 'f' || parts[3].empty() || parts[3][0] != 'k')
        throw InvalidInputError("bad architecture descriptor: '" + text + "'");
    arch.fc_hidden = std::stoi(parts[2].substr(1));
    arch.num_classes = std::stoi(parts[3].substr(1));
    arch.validate();
    return arch;
}

namespace {

// Offsets of each layer's weights/biases inside the flat parameter vector.
struct ParamLayout {
    struct Conv {
        size_t w = 0, b = 0;
        int in = 0, out = 0, size = 0;  // size = spatial side of the input
    };
    struct Dense {
        size_t w = 0, b = 0;
        int in = 0, out = 0;
    };
    std::vector<Conv> convs;
    bool has_hidden = false;
    Dense hidden;
    Dense head;
    size_t total = 0;
};

ParamLayout make_layout(const Architecture& arch) {
    ParamLayout layout;
    size_t off = 0;
    int in = arch.in_channels;
    int s = arch.input_size;
    for (int out : arch.conv_channels) {
        ParamLayout::Conv conv;
        conv.in = in;
        conv.out = out;
        conv.size = s;
        conv.w = off;
        off += static_cast<size_t>(out) * in * 9;
        conv.b = off;
        off += out;
        layout.convs.push_back(conv);
        in = out;
        s /= 2;
    }
    int feat = arch.feature_size();
    if (arch.fc_hidden > 0) {
        layout.has_hidden = true;
        layout.hidden.in = feat;
        layout.hidden.out = arch.fc_hidden;
        layout.hidden.w = off;
        off += static_cast<size_t>(arch.fc_hidden) * feat;
        layout.hidden.b = off;
        off += arch.fc_hidden;
        feat = arch.fc_hidden;
    }
    layout.head.in = feat;
    layout.head.out = arch.num_classes;
    layout.head.w = off;
    off += static_cast<size_t>(arch.num_classes) * feat;
    layout.head.b = off;
    off += arch.num_classes;
    layout.total = off;
    return layout;
}

// dst += 3x3 stencil declarations below; forward is bias fill plus stencil
// accumulation per (oc, ic) pair.
void stencil9_add(const double* src, int size, const double* k9, double* dst);

void conv3x3_forward(const double* in, int in_ch, int size, const double* w, const double* b,
                     int out_ch, double* out) {
    const size_t plane = static_cast<size_t>(size) * size;
    for (int oc = 0; oc < out_ch; ++oc) {
        double* oplane = out + oc * plane;
        std::fill(oplane, oplane + plane, b[oc]);
        for (int ic = 0; ic < in_ch; ++ic) {
            const double* iplane = in + ic * plane;
            const double* kw = w + (static_cast<size_t>(oc) * in_ch + ic) * 9;
            stencil9_add(iplane, size, kw, oplane);
        }
    }
}

// dst += 3x3 stencil of src with kernel k9 (same pad-1 layout as forward).
void stencil9_add(const double* src, int size, const double* k9, double* dst) {
    for (int y = 0; y < size; ++y) {
        const double* r0 = y > 0 ? src + static_cast<size_t>(y - 1) * size : nullptr;
        const double* r1 = src + static_cast<size_t>(y) * size;
        const double* r2 = y + 1 < size ? src + static_cast<size_t>(y + 1) * size : nullptr;
        double* orow = dst + static_cast<size_t>(y) * size;

        auto edge = [&](int x) {
            double acc = 0.0;
            for (int ky = 0; ky < 3; ++ky) {
                const double* row = ky == 0 ? r0 : ky == 1 ? r1 : r2;
                if (!row) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ix = x + kx - 1;
                    if (ix < 0 || ix >= size) continue;
                    acc += k9[ky * 3 + kx] * row[ix];
                }
            }
            return acc;
        };

        orow[0] += edge(0);
        if (size > 1) orow[size - 1] += edge(size - 1);
        if (r0 && r2) {
            const double w00 = k9[0], w01 = k9[1], w02 = k9[2];
            const double w10 = k9[3], w11 = k9[4], w12 = k9[5];
            const double w20 = k9[6], w21 = k9[7], w22 = k9[8];
            for (int x = 1; x < size - 1; ++x) {
                orow[x] += w00 * r0[x - 1] + w01 * r0[x] + w02 * r0[x + 1] +
                           w10 * r1[x - 1] + w11 * r1[x] + w12 * r1[x + 1] +
                           w20 * r2[x - 1] + w21 * r2[x] + w22 * r2[x + 1];
            }
        } else {
            const double* ra = r0 ? r0 : r1;
            const double* rb = r0 ? r1 : r2;
            const int base = r0 ? 0 : 3;
            const double wa0 = k9[base], wa1 = k9[base + 1], wa2 = k9[base + 2];
            const double wb0 = k9[base + 3], wb1 = k9[base + 4], wb2 = k9[base + 5];
            for (int x = 1; x < size - 1; ++x) {
                orow[x] += wa0 * ra[x - 1] + wa1 * ra[x] + wa2 * ra[x + 1] +
                           wb0 * rb[x - 1] + wb1 * rb[x] + wb2 * rb[x + 1];
            }
        }
    }
}

// Accumulates the 9 kernel-weight gradients for one (oc, ic) plane pair in
// a single fused pass.
void dw9_accumulate(const double* in, const double* dout, int size, double* dw) {
    double acc[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    for (int y = 0; y < size; ++y) {
        const double* r0 = y > 0 ? in + static_cast<size_t>(y - 1) * size : nullptr;
        const double* r1 = in + static_cast<size_t>(y) * size;
        const double* r2 = y + 1 < size ? in + static_cast<size_t>(y + 1) * size : nullptr;
        const double* drow = dout + static_cast<size_t>(y) * size;

        auto edge = [&](int x) {
            const double d = drow[x];
            for (int ky = 0; ky < 3; ++ky) {
                const double* row = ky == 0 ? r0 : ky == 1 ? r1 : r2;
                if (!row) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int ix = x + kx - 1;
                    if (ix < 0 || ix >= size) continue;
                    acc[ky * 3 + kx] += d * row[ix];
                }
            }
        };

        edge(0);
        if (size > 1) edge(size - 1);
        if (r0 && r2) {
            for (int x = 1; x < size - 1; ++x) {
                const double d = drow[x];
                acc[0] += d * r0[x - 1];
                acc[1] += d * r0[x];
                acc[2] += d * r0[x + 1];
                acc[3] += d * r1[x - 1];
                acc[4] += d * r1[x];
                acc[5] += d * r1[x + 1];
                acc[6] += d * r2[x - 1];
                acc[7] += d * r2[x];
                acc[8] += d * r2[x + 1];
            }
        } else {
            const double* ra = r0 ? r0 : r1;
            const double* rb = r0 ? r1 : r2;
            const int base = r0 ? 0 : 3;
            for (int x = 1; x < size - 1; ++x) {
                const double d = drow[x];
                acc[base] += d * ra[x - 1];
                acc[base + 1] += d * ra[x];
                acc[base + 2] += d * ra[x + 1];
                acc[base + 3] += d * rb[x - 1];
                acc[base + 4] += d * rb[x];
                acc[base + 5] += d * rb[x + 1];
            }
        }
    }
    for (int k = 0; k < 9; ++k) dw[k] += acc[k];
}

// Gradients of the 3x3 convolution wrt weights, biases, and (optionally)
// the input; the input gradient is the stencil with the kernel rotated
// 180 degrees.
void conv3x3_backward(const double* in, int in_ch, int size, const double* w, int out_ch,
                      const double* dout, double* dw, double* db, double* din) {
    const size_t plane = static_cast<size_t>(size) * size;
    if (din) std::fill(din, din + static_cast<size_t>(in_ch) * plane, 0.0);
    for (int oc = 0; oc < out_ch; ++oc) {
        const double* dplane = dout + oc * plane;
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) acc += dplane[i];
        db[oc] += acc;
        for (int ic = 0; ic < in_ch; ++ic) {
            const double* iplane = in + ic * plane;
            const size_t koff = (static_cast<size_t>(oc) * in_ch + ic) * 9;
            dw9_accumulate(iplane, dplane, size, dw + koff);
            if (din) {
                double flipped[9];
                for (int k = 0; k < 9; ++k) flipped[k] = w[koff + 8 - k];
                stencil9_add(dplane, size, flipped, din + ic * plane);
            }
        }
    }
}

void relu_inplace(double* a, size_t n) {
    for (size_t i = 0; i < n; ++i) a[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void maxpool2_forward(const double* in, int ch, int size, double* out, int* argmax) {
    const int half = size / 2;
    for (int c = 0; c < ch; ++c) {
        const double* iplane = in + static_cast<size_t>(c) * size * size;
        double* oplane = out + static_cast<size_t>(c) * half * half;
        int* aplane = argmax + static_cast<size_t>(c) * half * half;
        for (int y = 0; y < half; ++y) {
            for (int x = 0; x < half; ++x) {
                const int base = 2 * y * size + 2 * x;
                int best = base;
                double bv = iplane[base];
                for (int k = 1; k < 4; ++k) {
                    const int idx = base + (k / 2) * size + (k % 2);
                    if (iplane[idx] > bv) {
                        bv = iplane[idx];
                        best = idx;
                    }
                }
                oplane[static_cast<size_t>(y) * half + x] = bv;
                aplane[static_cast<size_t>(y) * half + x] = best;
            }
        }
    }
}

void maxpool2_backward(const double* dout, int ch, int size, const int* argmax, double* din) {
    const int half = size / 2;
    std::fill(din, din + static_cast<size_t>(ch) * size * size, 0.0);
    for (int c = 0; c < ch; ++c) {
        const double* dplane = dout + static_cast<size_t>(c) * half * half;
        const int* aplane = argmax + static_cast<size_t>(c) * half * half;
        double* iplane = din + static_cast<size_t>(c) * size * size;
        for (int i = 0; i < half * half; ++i) iplane[aplane[i]] += dplane[i];
    }
}

void dense_forward(const double* in, int n_in, const double* w, const double* b, int n_out,
                   double* out) {
    for (int o = 0; o < n_out; ++o) {
        const double* wr = w + static_cast<size_t>(o) * n_in;
        double acc = b[o];
        for (int i = 0; i < n_in; ++i) acc += wr[i] * in[i];
        out[o] = acc;
    }
}

void dense_backward(const double* in, int n_in, const double* w, int n_out, const double* dout,
                    double* dw, double* db, double* din) {
    if (din) std::fill(din, din + n_in, 0.0);
    for (int o = 0; o < n_out; ++o) {
        const double g = dout[o];
        db[o] += g;
        const double* wr = w + static_cast<size_t>(o) * n_in;
        double* dwr = dw + static_cast<size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) dwr[i] += g * in[i];
        if (din)
            for (int i = 0; i < n_in; ++i) din[i] += wr[i] * g;
    }
}

void softmax_inplace(double* v, int n) {
    double mx = v[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - mx);
        sum += v[i];
    }
    for (int i = 0; i < n; ++i) v[i] /= sum;
}

// Per-sample activation storage, reused across samples on one thread.
struct Workspace {
    // post-ReLU conv activations and pooled outputs per block
    std::vector<std::vector<double>> conv_act;
    std::vector<std::vector<double>> pooled;
    std::vector<std::vector<int>> argmax;
    std::vector<double> hidden_act;
    std::vector<double> probs;
    // backward scratch
    std::vector<double> d_a;
    std::vector<double> d_b;

    explicit Workspace(const Architecture& arch) {
        const ParamLayout layout = make_layout(arch);
        size_t max_plane = 0;
        for (const auto& conv : layout.convs) {
            const size_t n = static_cast<size_t>(conv.out) * conv.size * conv.size;
            conv_act.emplace_back(n);
            pooled.emplace_back(n / 4);
            argmax.emplace_back(n / 4);
            max_plane = std::max(max_plane,
                                 static_cast<size_t>(conv.in) * conv.size * conv.size);
            max_plane = std::max(max_plane, n);
        }
        hidden_act.resize(std::max(arch.fc_hidden, 1));
        probs.resize(arch.num_classes);
        d_a.resize(max_plane);
        d_b.resize(max_plane);
    }
};

// Runs the forward pass, leaving activations in ws; returns the CE loss
// for `label` (or 0 if label < 0) with probabilities in ws.probs.
double forward_pass(const ParamLayout& layout, const std::vector<double>& params,
                    const double* input, int label, Workspace& ws) {
    const double* p = params.data();
    const double* cur = input;
    for (size_t i = 0; i < layout.convs.size(); ++i) {
        const auto& conv = layout.convs[i];
        conv3x3_forward(cur, conv.in, conv.size, p + conv.w, p + conv.b, conv.out,
                        ws.conv_act[i].data());
        relu_inplace(ws.conv_act[i].data(), ws.conv_act[i].size());
        maxpool2_forward(ws.conv_act[i].data(), conv.out, conv.size, ws.pooled[i].data(),
                         ws.argmax[i].data());
        cur = ws.pooled[i].data();
    }
    if (layout.has_hidden) {
        dense_forward(cur, layout.hidden.in, p + layout.hidden.w, p + layout.hidden.b,
                      layout.hidden.out, ws.hidden_act.data());
        relu_inplace(ws.hidden_act.data(), ws.hidden_act.size());
        cur = ws.hidden_act.data();
    }
    dense_forward(cur, layout.head.in, p + layout.head.w, p + layout.head.b, layout.head.out,
                  ws.probs.data());
    softmax_inplace(ws.probs.data(), layout.head.out);
    if (label < 0) return 0.0;
    const double prob = std::max(ws.probs[label], 1e-300);
    return -std::log(prob);
}

// Backward pass for one sample's CE loss; accumulates into grad.
void backward_pass(const ParamLayout& layout, const std::vector<double>& params,
                   const double* input, int label, Workspace& ws, double* grad) {
    const double* p = params.data();
    const int classes = layout.head.out;

    // d(loss)/d(logits) = probs - onehot
    std::vector<double> dlogits(ws.probs);
    dlogits[label] -= 1.0;

    const double* head_in =
        layout.has_hidden ? ws.hidden_act.data()
                          : (layout.convs.empty() ? input : ws.pooled.back().data());
    double* d_head_in = ws.d_a.data();
    dense_backward(head_in, layout.head.in, p + layout.head.w, classes, dlogits.data(),
                   grad + layout.head.w, grad + layout.head.b, d_head_in);

    double* d_cur = d_head_in;
    if (layout.has_hidden) {
        for (int i = 0; i < layout.hidden.out; ++i)
            if (ws.hidden_act[i] <= 0.0) d_cur[i] = 0.0;
        const double* hid_in = layout.convs.empty() ? input : ws.pooled.back().data();
        dense_backward(hid_in, layout.hidden.in, p + layout.hidden.w, layout.hidden.out, d_cur,
                       grad + layout.hidden.w, grad + layout.hidden.b, ws.d_b.data());
        d_cur = ws.d_b.data();
    }

    for (size_t i = layout.convs.size(); i-- > 0;) {
        const auto& conv = layout.convs[i];
        double* d_act = d_cur == ws.d_a.data() ? ws.d_b.data() : ws.d_a.data();
        maxpool2_backward(d_cur, conv.out, conv.size, ws.argmax[i].data(), d_act);
        const size_t n = static_cast<size_t>(conv.out) * conv.size * conv.size;
        for (size_t k = 0; k < n; ++k)
            if (ws.conv_act[i][k] <= 0.0) d_act[k] = 0.0;
        const double* block_in = i == 0 ? input : ws.pooled[i - 1].data();
        double* d_in = d_act == ws.d_a.data() ? ws.d_b.data() : ws.d_a.data();
        conv3x3_backward(block_in, conv.in, conv.size, p + conv.w, conv.out, d_act,
                         grad + conv.w, grad + conv.b, i == 0 ? nullptr : d_in);
        d_cur = d_in;
    }
}

}  // namespace

ConvNet::ConvNet(Architecture arch, uint64_t init_seed) : arch_(std::move(arch)) {
    arch_.validate();
    const ParamLayout layout = make_layout(arch_);
    params_.assign(layout.total, 0.0);
    Rng rng(init_seed);
    // He-normal weights, zero biases.
    for (const auto& conv : layout.convs) {
        const double std_dev = std::sqrt(2.0 / (conv.in * 9.0));
        const size_t n = static_cast<size_t>(conv.out) * conv.in * 9;
        for (size_t i = 0; i < n; ++i) params_[conv.w + i] = std_dev * rng.normal();
    }
    if (layout.has_hidden) {
        const double std_dev = std::sqrt(2.0 / layout.hidden.in);
        const size_t n = static_cast<size_t>(layout.hidden.out) * layout.hidden.in;
        for (size_t i = 0; i < n; ++i) params_[layout.hidden.w + i] = std_dev * rng.normal();
    }
    const double std_dev = std::sqrt(2.0 / layout.head.in);
    const size_t n = static_cast<size_t>(layout.head.out) * layout.head.in;
    for (size_t i = 0; i < n; ++i) params_[layout.head.w + i] = std_dev * rng.normal();
}

std::vector<double> ConvNet::forward(const double* chw) const {
    const ParamLayout layout = make_layout(arch_);
    Workspace ws(arch_);
    forward_pass(layout, params_, chw, -1, ws);
    return ws.probs;
}

double ConvNet::batch_cross_entropy(const BatchView& batch, double weight,
                                    std::vector<double>* grad) const {
    if (batch.empty()) throw InvalidInputError("batch_cross_entropy: empty batch");
    const ParamLayout layout = make_layout(arch_);
    const size_t n = batch.size();
    std::vector<double> losses(n, 0.0);

    // Per-sample gradient buffers reduced in sample order keep the result
    // independent of thread count.
    std::vector<std::vector<double>> sample_grads;
    if (grad) sample_grads.assign(n, std::vector<double>());

#ifdef _OPENMP
#pragma omp parallel
#endif
    {
        Workspace ws(arch_);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (long i = 0; i < static_cast<long>(n); ++i) {
            const double* x = batch.inputs[i];
            const int label = batch.labels[i];
            losses[i] = forward_pass(layout, params_, x, label, ws);
            if (grad) {
                sample_grads[i].assign(layout.total, 0.0);
                backward_pass(layout, params_, x, label, ws, sample_grads[i].data());
            }
        }
    }

    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += losses[i];
    const double mean = total / static_cast<double>(n);
    if (grad) {
        if (grad->size() != layout.total)
            throw InvalidInputError("gradient buffer has wrong length");
        const double scale = weight / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) {
            const double* g = sample_grads[i].data();
            double* out = grad->data();
            for (size_t k = 0; k < layout.total; ++k) out[k] += scale * g[k];
        }
    }
    return mean;
}

void TrainingConfig::validate() const {
    if (!(lambda_mix >= 0.0 && lambda_mix <= 1.0))
        throw InvalidInputError("lambda_mix must be in [0, 1]");
    if (epochs <= 0 || batch_size <= 0 || crop_size <= 0)
        throw InvalidInputError("training counts must be positive");
    if (!(learning_rate > 0.0)) throw InvalidInputError("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw InvalidInputError("momentum must be in [0, 1)");
}

double mixed_loss(const ConvNet& net, const BatchView& clean, const BatchView& backdoor,
                  double lambda, std::vector<double>* grad,
                  const DetectionTermBackend* terms) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw InvalidInputError("lambda must be in [0, 1]");
    if (lambda > 0.0 && clean.empty())
        throw InvalidInputError("mixed_loss: clean batch empty with lambda > 0");
    if (lambda < 1.0 && backdoor.empty())
        throw InvalidInputError("mixed_loss: backdoor batch empty with lambda < 1");

    double loss = 0.0;
    if (lambda > 0.0) loss += lambda * net.batch_cross_entropy(clean, lambda, grad);
    if (lambda < 1.0)
        loss += (1.0 - lambda) * net.batch_cross_entropy(backdoor, 1.0 - lambda, grad);
    if (terms) {
        if (lambda > 0.0)
            loss += lambda * (terms->objectness_loss(clean) + terms->location_loss(clean));
        if (lambda < 1.0)
            loss += (1.0 - lambda) *
                    (terms->objectness_loss(backdoor) + terms->location_loss(backdoor));
    }
    return loss;
}

namespace {

std::vector<int> map_labels(const std::vector<Crop>& crops,
                            const std::unordered_map<std::string, int>& vocab,
                            int crop_size) {
    std::vector<int> out;
    out.reserve(crops.size());
    for (const auto& crop : crops) {
        const auto it = vocab.find(crop.label);
        if (it == vocab.end())
            throw InvalidInputError("class-vocabulary mismatch: label '" + crop.label +
                                    "' not in vocabulary");
        if (crop.size != crop_size)
            throw InvalidInputError("crop size mismatch: expected " +
                                    std::to_string(crop_size));
        out.push_back(it->second);
    }
    return out;
}

}  // namespace

ConvNet train(const std::vector<Crop>& clean, const std::vector<Crop>& backdoor,
              const std::vector<std::string>& class_vocab, const TrainingConfig& config,
              TrainLog* log) {
    config.validate();
    if (class_vocab.size() < 2) throw InvalidInputError("vocabulary needs at least 2 classes");
    std::unordered_map<std::string, int> vocab;
    for (size_t i = 0; i < class_vocab.size(); ++i)
        vocab[class_vocab[i]] = static_cast<int>(i);
    if (vocab.size() != class_vocab.size())
        throw InvalidInputError("duplicate labels in class vocabulary");

    const std::vector<int> clean_labels = map_labels(clean, vocab, config.crop_size);
    const std::vector<int> backdoor_labels = map_labels(backdoor, vocab, config.crop_size);

    const double lambda = config.lambda_mix;
    if (lambda > 0.0 && clean.empty())
        throw InvalidInputError("train: clean dataset empty with lambda > 0");
    if (lambda < 1.0 && backdoor.empty())
        throw InvalidInputError("train: backdoor dataset empty with lambda < 1");

    Architecture arch;
    arch.input_size = config.crop_size;
    arch.num_classes = static_cast<int>(class_vocab.size());
    ConvNet net(arch, Rng::mix(config.seed, 0xC0DE));
    net.class_names() = class_vocab;

    const size_t n_params = net.params().size();
    std::vector<double> grad(n_params), velocity(n_params, 0.0);

    // The pass structure follows the larger non-zero-weighted side; the
    // other side cycles through its own shuffled order.
    const bool drive_clean = lambda > 0.0 || backdoor.empty();
    const std::vector<Crop>& driver = drive_clean ? clean : backdoor;
    const std::vector<Crop>& rider = drive_clean ? backdoor : clean;
    const std::vector<int>& driver_labels = drive_clean ? clean_labels : backdoor_labels;
    const std::vector<int>& rider_labels = drive_clean ? backdoor_labels : clean_labels;

    Rng rng(Rng::mix(config.seed, 0x7EA1));
    std::vector<size_t> driver_idx(driver.size()), rider_idx(rider.size());
    std::iota(driver_idx.begin(), driver_idx.end(), 0);
    std::iota(rider_idx.begin(), rider_idx.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(driver_idx);
        rng.shuffle(rider_idx);
        size_t rider_cursor = 0;
        // Step the rate down for the final quarter of the schedule.
        const double lr = epoch * 4 >= config.epochs * 3 ? config.learning_rate * 0.1
                                                         : config.learning_rate;
        double epoch_loss = 0.0;
        size_t steps = 0;

        for (size_t start = 0; start < driver_idx.size();
             start += static_cast<size_t>(config.batch_size)) {
            const size_t stop =
                std::min(driver_idx.size(), start + static_cast<size_t>(config.batch_size));
            BatchView driver_batch;
            for (size_t i = start; i < stop; ++i) {
                const size_t k = driver_idx[i];
                driver_batch.push(driver[k].chw.data(), driver_labels[k]);
            }
            BatchView rider_batch;
            if (!rider.empty()) {
                for (int i = 0; i < config.batch_size; ++i) {
                    const size_t k = rider_idx[rider_cursor];
                    rider_cursor = (rider_cursor + 1) % rider_idx.size();
                    rider_batch.push(rider[k].chw.data(), rider_labels[k]);
                }
            }
            const BatchView& clean_batch = drive_clean ? driver_batch : rider_batch;
            const BatchView& backdoor_batch = drive_clean ? rider_batch : driver_batch;

            std::fill(grad.begin(), grad.end(), 0.0);
            epoch_loss += mixed_loss(net, clean_batch, backdoor_batch, lambda, &grad);
            ++steps;

            double* p = net.params().data();
            for (size_t k = 0; k < n_params; ++k) {
                velocity[k] = config.momentum * velocity[k] - lr * grad[k];
                p[k] += velocity[k];
            }
        }
        if (log) log->epoch_loss.push_back(steps ? epoch_loss / steps : 0.0);
    }
    return net;
}

Prediction predict(const ConvNet& net, const Crop& crop) {
    if (crop.size != net.arch().input_size ||
        crop.chw.size() != static_cast<size_t>(3) * crop.size * crop.size)
        throw InvalidInputError("predict: crop shape does not match model input");
    Prediction out;
    out.probs = net.forward(crop.chw.data());
    out.class_index = static_cast<int>(
        std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
    if (out.class_index < static_cast<int>(net.class_names().size()))
        out.label = net.class_names()[out.class_index];
    return out;
}

std::vector<int> predict_batch(const ConvNet& net, const std::vector<Crop>& crops) {
    std::vector<int> out(crops.size(), -1);
    const ParamLayout layout = make_layout(net.arch());
#ifdef _OPENMP
#pragma omp parallel
#endif
    {
        Workspace ws(net.arch());
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (long i = 0; i < static_cast<long>(crops.size()); ++i) {
            forward_pass(layout, net.params(), crops[i].chw.data(), -1, ws);
            out[i] = static_cast<int>(
                std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin());
        }
    }
    return out;
}

double accuracy(const ConvNet& net, const std::vector<Crop>& crops) {
    if (crops.empty()) throw InvalidInputError("accuracy: empty crop set");
    const std::vector<int> preds = predict_batch(net, crops);
    size_t hits = 0;
    for (size_t i = 0; i < crops.size(); ++i)
        if (net.class_names()[preds[i]] == crops[i].label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(crops.size());
}

}  // namespace glowsign
