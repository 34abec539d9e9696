#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "csv.hpp"

namespace evcs::forecast {

/// Twelve past samples in, seven future samples out.
inline constexpr int kInputLen = 12;
inline constexpr int kOutputLen = 7;

using Output = std::array<double, kOutputLen>;

enum class Activation : std::uint8_t { tanh, identity };

struct ModelShape {
    int gru_layers = 6;
    int hidden = 32;
    int fc_hidden = 32;
    Activation fc_activation = Activation::tanh;

    void validate() const {
        if (gru_layers < 0 || hidden < 1 || fc_hidden < 1) throw ConfigError("forecast: bad model shape");
    }
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 0.005;
    double grad_moving_avg = 0.9;  // first-moment decay
    double sq_grad_moving_avg = 0.999;
    double epsilon = 1e-8;
    double dropout = 0.2;
    double grad_clip = 1.0;        // per-sample L2 norm
    double train_fraction = 0.8;

    /// Full training regimen (1000 epochs, batch 200).
    static TrainConfig full() {
        TrainConfig c;
        c.epochs = 1000;
        c.batch_size = 200;
        return c;
    }
    /// Short regimen for CI and interactive runs.
    static TrainConfig desk() { return TrainConfig{}; }

    void validate() const {
        if (epochs < 1 || batch_size < 1) throw ConfigError("forecast: epochs and batch size must be positive");
        if (!(learning_rate > 0.0) || !(grad_clip > 0.0) || !(epsilon > 0.0)) {
            throw ConfigError("forecast: learning rate, clip threshold and epsilon must be positive");
        }
        if (!(grad_moving_avg > 0.0 && grad_moving_avg < 1.0) ||
            !(sq_grad_moving_avg > 0.0 && sq_grad_moving_avg < 1.0)) {
            throw ConfigError("forecast: moment decays must lie in (0, 1)");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("forecast: dropout must lie in [0, 1)");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
            throw ConfigError("forecast: train fraction must lie in (0, 1)");
        }
    }
};

/// z-score scaling fitted on the training split. A zero-variance series
/// maps to 0 and back to its constant.
struct Normalizer {
    double mean = 0.0;
    double scale = 1.0;

    static Normalizer fit(std::span<const double> xs) {
        Normalizer n;
        if (xs.empty()) return n;
        n.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - n.mean) * (x - n.mean);
        n.scale = std::sqrt(ss / static_cast<double>(xs.size()));
        if (n.scale < 1e-12 * std::max(1.0, std::abs(n.mean))) n.scale = 0.0;
        return n;
    }

    double normalize(double x) const { return scale > 0.0 ? (x - mean) / scale : x - mean; }
    double denormalize(double y) const { return mean + scale * y; }
};

/// Location of one named parameter array inside the flat parameter vector.
struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b  (W is rows x cols, row-major)
inline void affine(const double* w, const double* b, const double* x, double* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* wi = w + static_cast<std::size_t>(i) * cols;
        double acc = b ? b[i] : 0.0;
        for (int j = 0; j < cols; ++j) acc += wi[j] * x[j];
        y[i] = acc;
    }
}

// y += W x
inline void matvec_add(const double* w, const double* x, double* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* wi = w + static_cast<std::size_t>(i) * cols;
        double acc = 0.0;
        for (int j = 0; j < cols; ++j) acc += wi[j] * x[j];
        y[i] += acc;
    }
}

// dW += d x^T ; dx += W^T d
inline void backprop_affine(const double* w, double* dw, const double* d, const double* x, double* dx, int rows,
                            int cols) {
    for (int i = 0; i < rows; ++i) {
        const double di = d[i];
        if (di == 0.0) continue;
        const double* wi = w + static_cast<std::size_t>(i) * cols;
        double* dwi = dw + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) {
            dwi[j] += di * x[j];
            if (dx) dx[j] += wi[j] * di;
        }
    }
}

} // namespace detail

/// Stacked GRU encoder followed by three dense layers (the last linear,
/// width 7). The GRU layers consume the window one sample per step; the
/// dense head reads the top layer's final hidden state. With zero GRU
/// layers the head reads the raw window.
class ForecastModel {
public:
    ForecastModel() : ForecastModel(ModelShape{}, 0) {}

    explicit ForecastModel(ModelShape shape, std::uint64_t seed = 0) : shape_(shape) {
        shape_.validate();
        layout();
        std::mt19937_64 rng(seed);
        initialize(rng);
    }

    const ModelShape& shape() const { return shape_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    Normalizer& normalizer() { return norm_; }
    const Normalizer& normalizer() const { return norm_; }

    const ParamBlock& block(std::string_view name) const {
        for (const auto& b : blocks_) {
            if (b.name == name) return b;
        }
        throw UsageError("forecast: no parameter block '" + std::string(name) + "'");
    }

    /// Physical-unit forecast for a physical-unit window (inference mode).
    Output forward(std::span<const double> window) const {
        if (window.size() != static_cast<std::size_t>(kInputLen)) {
            throw UsageError("forecast: window must have exactly 12 samples");
        }
        std::array<double, kInputLen> x{};
        for (int i = 0; i < kInputLen; ++i) x[static_cast<std::size_t>(i)] = norm_.normalize(window[static_cast<std::size_t>(i)]);
        Output y = forward_normalized(x);
        for (auto& v : y) v = norm_.denormalize(v);
        return y;
    }

    /// Forecast in normalised units for a normalised window.
    Output forward_normalized(std::span<const double> window) const {
        if (window.size() != static_cast<std::size_t>(kInputLen)) {
            throw UsageError("forecast: window must have exactly 12 samples");
        }
        Workspace ws(*this);
        run(ws, window, false, nullptr, 0.0);
        Output y{};
        std::copy(ws.out.begin(), ws.out.end(), y.begin());
        return y;
    }

    /// Per-sample loss (mean squared error over the seven outputs, in
    /// normalised units) and its gradient, accumulated into `grad`.
    /// Dropout is active only when `rng` is given.
    double loss_and_gradient(std::span<const double> window, std::span<const double> target,
                             std::span<double> grad, std::mt19937_64* rng = nullptr, double dropout = 0.0) const {
        Workspace ws(*this);
        return loss_and_gradient(ws, window, target, grad, rng, dropout);
    }

    double loss(std::span<const double> window, std::span<const double> target) const {
        Workspace ws(*this);
        run(ws, window, false, nullptr, 0.0);
        double l = 0.0;
        for (int k = 0; k < kOutputLen; ++k) {
            const double e = ws.out[static_cast<std::size_t>(k)] - target[static_cast<std::size_t>(k)];
            l += e * e;
        }
        return l / kOutputLen;
    }

    /// Scratch buffers reused across samples.
    struct Workspace {
        // GRU caches, index [layer][step]
        std::vector<std::vector<double>> x, hprev, z, r, n, rh, h, mask;
        std::vector<double> feat, pre1, y1, m1, y1m, pre2, y2, m2, y2m, out;
        // backward scratch
        std::vector<double> dh, dhp, dz, dr, dn, drh, dfeat, dy1, dy2, dout;
        std::vector<std::vector<double>> dx;

        explicit Workspace(const ForecastModel& m) {
            const auto& s = m.shape_;
            const std::size_t steps = static_cast<std::size_t>(s.gru_layers) * kInputLen;
            const auto hsz = static_cast<std::size_t>(s.hidden);
            for (auto* v : {&x, &hprev, &z, &r, &n, &rh, &h, &mask, &dx}) v->assign(steps, {});
            for (std::size_t i = 0; i < steps; ++i) {
                const std::size_t in = (i < kInputLen) ? 1 : hsz;
                x[i].assign(in, 0.0);
                dx[i].assign(in, 0.0);
                for (auto* v : {&hprev, &z, &r, &n, &rh, &h, &mask}) (*v)[i].assign(hsz, 1.0);
            }
            const auto fin = static_cast<std::size_t>(m.feature_width());
            const auto fh = static_cast<std::size_t>(s.fc_hidden);
            feat.assign(fin, 0.0);
            dfeat.assign(fin, 0.0);
            for (auto* v : {&pre1, &y1, &m1, &y1m, &pre2, &y2, &m2, &y2m, &dy1, &dy2}) v->assign(fh, 1.0);
            out.assign(kOutputLen, 0.0);
            dout.assign(kOutputLen, 0.0);
            for (auto* v : {&dh, &dhp, &dz, &dr, &dn, &drh}) v->assign(hsz, 0.0);
        }
    };

    double loss_and_gradient(Workspace& ws, std::span<const double> window, std::span<const double> target,
                             std::span<double> grad, std::mt19937_64* rng, double dropout) const {
        if (grad.size() != params_.size()) throw UsageError("forecast: gradient buffer size mismatch");
        run(ws, window, rng != nullptr, rng, dropout);
        double l = 0.0;
        for (int k = 0; k < kOutputLen; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const double e = ws.out[ku] - target[ku];
            l += e * e;
            ws.dout[ku] = 2.0 * e / kOutputLen;
        }
        backward(ws, grad);
        return l / kOutputLen;
    }

    /// Text checkpoint: header, shape, normaliser, then every named array.
    void save(std::ostream& os) const {
        os << "evcs-gru-checkpoint 1\n";
        os << "shape " << shape_.gru_layers << ' ' << shape_.hidden << ' ' << shape_.fc_hidden << ' '
           << (shape_.fc_activation == Activation::tanh ? "tanh" : "identity") << '\n';
        os << "normalizer " << csv::fmt(norm_.mean) << ' ' << csv::fmt(norm_.scale) << '\n';
        for (const auto& b : blocks_) {
            os << "param " << b.name << ' ' << b.rows << ' ' << b.cols << '\n';
            for (std::size_t i = 0; i < b.size(); ++i) {
                os << csv::fmt(params_[b.offset + i]) << (i + 1 == b.size() ? '\n' : ' ');
            }
        }
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw ConfigError("cannot write checkpoint '" + path + "'");
        save(os);
        if (!os) throw ConfigError("error writing checkpoint '" + path + "'");
    }

    static ForecastModel load(std::istream& is, std::string_view source = "checkpoint") {
        const auto fail = [&](const std::string& what) {
            return ConfigError(std::string(source) + ": " + what);
        };
        std::string tag;
        int version = 0;
        if (!(is >> tag >> version) || tag != "evcs-gru-checkpoint" || version != 1) throw fail("bad header");
        ModelShape shape;
        std::string act;
        if (!(is >> tag >> shape.gru_layers >> shape.hidden >> shape.fc_hidden >> act) || tag != "shape") {
            throw fail("bad shape line");
        }
        if (act == "tanh") {
            shape.fc_activation = Activation::tanh;
        } else if (act == "identity") {
            shape.fc_activation = Activation::identity;
        } else {
            throw fail("unknown activation '" + act + "'");
        }
        ForecastModel m(shape, 0);
        if (!(is >> tag >> m.norm_.mean >> m.norm_.scale) || tag != "normalizer") throw fail("bad normalizer line");
        for (const auto& b : m.blocks_) {
            std::string name;
            int rows = 0;
            int cols = 0;
            if (!(is >> tag >> name >> rows >> cols) || tag != "param") throw fail("bad param header");
            if (name != b.name || rows != b.rows || cols != b.cols) {
                throw fail("parameter '" + name + "' does not match the declared shape");
            }
            for (std::size_t i = 0; i < b.size(); ++i) {
                if (!(is >> m.params_[b.offset + i])) throw fail("truncated parameter '" + name + "'");
            }
        }
        return m;
    }

    static ForecastModel load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open checkpoint '" + path + "'");
        return load(is, path);
    }

private:
    struct GruOffsets {
        std::size_t wz, wr, wn, uz, ur, un, bz, br, bn;
        int in;
    };

    int feature_width() const { return shape_.gru_layers > 0 ? shape_.hidden : kInputLen; }

    void add_block(std::string name, int rows, int cols) {
        ParamBlock b{std::move(name), params_.size(), rows, cols};
        params_.resize(params_.size() + b.size(), 0.0);
        blocks_.push_back(std::move(b));
    }

    void layout() {
        const int h = shape_.hidden;
        for (int l = 0; l < shape_.gru_layers; ++l) {
            const int in = l == 0 ? 1 : h;
            const std::string p = "gru" + std::to_string(l) + ".";
            GruOffsets g{};
            g.in = in;
            g.wz = params_.size(); add_block(p + "w_update", h, in);
            g.wr = params_.size(); add_block(p + "w_reset", h, in);
            g.wn = params_.size(); add_block(p + "w_candidate", h, in);
            g.uz = params_.size(); add_block(p + "u_update", h, h);
            g.ur = params_.size(); add_block(p + "u_reset", h, h);
            g.un = params_.size(); add_block(p + "u_candidate", h, h);
            g.bz = params_.size(); add_block(p + "b_update", h, 1);
            g.br = params_.size(); add_block(p + "b_reset", h, 1);
            g.bn = params_.size(); add_block(p + "b_candidate", h, 1);
            gru_.push_back(g);
        }
        const int fh = shape_.fc_hidden;
        fc_w_[0] = params_.size(); add_block("fc0.weight", fh, feature_width());
        fc_b_[0] = params_.size(); add_block("fc0.bias", fh, 1);
        fc_w_[1] = params_.size(); add_block("fc1.weight", fh, fh);
        fc_b_[1] = params_.size(); add_block("fc1.bias", fh, 1);
        fc_w_[2] = params_.size(); add_block("fc2.weight", kOutputLen, fh);
        fc_b_[2] = params_.size(); add_block("fc2.bias", kOutputLen, 1);
    }

    void initialize(std::mt19937_64& rng) {
        for (const auto& b : blocks_) {
            if (b.cols == 1) continue; // biases start at zero
            double limit = 0.0;
            if (b.name.rfind("gru", 0) == 0) {
                limit = 1.0 / std::sqrt(static_cast<double>(shape_.hidden));
            } else {
                limit = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
            }
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (std::size_t i = 0; i < b.size(); ++i) params_[b.offset + i] = dist(rng);
        }
    }

    double act(double v) const { return shape_.fc_activation == Activation::tanh ? std::tanh(v) : v; }
    double act_grad(double y) const { return shape_.fc_activation == Activation::tanh ? 1.0 - y * y : 1.0; }

    void run(Workspace& ws, std::span<const double> window, bool training, std::mt19937_64* rng,
             double dropout) const {
        const double* p = params_.data();
        const int h = shape_.hidden;
        const auto hsz = static_cast<std::size_t>(h);
        const double keep = 1.0 - dropout;
        std::bernoulli_distribution coin(keep);
        const auto draw_mask = [&](std::vector<double>& m) {
            if (!training || dropout <= 0.0) {
                std::fill(m.begin(), m.end(), 1.0);
                return;
            }
            for (auto& v : m) v = coin(*rng) ? 1.0 / keep : 0.0;
        };

        for (int l = 0; l < shape_.gru_layers; ++l) {
            const auto& g = gru_[static_cast<std::size_t>(l)];
            for (int t = 0; t < kInputLen; ++t) {
                const auto idx = static_cast<std::size_t>(l * kInputLen + t);
                auto& x = ws.x[idx];
                if (l == 0) {
                    x[0] = window[static_cast<std::size_t>(t)];
                } else {
                    const auto& below = ws.h[idx - kInputLen];
                    const auto& bm = ws.mask[idx - kInputLen];
                    for (std::size_t i = 0; i < hsz; ++i) x[i] = below[i] * bm[i];
                }
                auto& hp = ws.hprev[idx];
                if (t == 0) {
                    std::fill(hp.begin(), hp.end(), 0.0);
                } else {
                    hp = ws.h[idx - 1];
                }
                auto& z = ws.z[idx];
                auto& r = ws.r[idx];
                auto& n = ws.n[idx];
                auto& rh = ws.rh[idx];
                auto& hn = ws.h[idx];
                detail::affine(p + g.wz, p + g.bz, x.data(), z.data(), h, g.in);
                detail::matvec_add(p + g.uz, hp.data(), z.data(), h, h);
                detail::affine(p + g.wr, p + g.br, x.data(), r.data(), h, g.in);
                detail::matvec_add(p + g.ur, hp.data(), r.data(), h, h);
                for (std::size_t i = 0; i < hsz; ++i) {
                    z[i] = detail::sigmoid(z[i]);
                    r[i] = detail::sigmoid(r[i]);
                    rh[i] = r[i] * hp[i];
                }
                detail::affine(p + g.wn, p + g.bn, x.data(), n.data(), h, g.in);
                detail::matvec_add(p + g.un, rh.data(), n.data(), h, h);
                for (std::size_t i = 0; i < hsz; ++i) {
                    n[i] = std::tanh(n[i]);
                    hn[i] = z[i] * hp[i] + (1.0 - z[i]) * n[i];
                }
                draw_mask(ws.mask[idx]);
            }
        }

        if (shape_.gru_layers > 0) {
            const auto top = static_cast<std::size_t>((shape_.gru_layers - 1) * kInputLen + kInputLen - 1);
            for (std::size_t i = 0; i < hsz; ++i) ws.feat[i] = ws.h[top][i] * ws.mask[top][i];
        } else {
            for (int i = 0; i < kInputLen; ++i) ws.feat[static_cast<std::size_t>(i)] = window[static_cast<std::size_t>(i)];
        }

        const int fh = shape_.fc_hidden;
        detail::affine(p + fc_w_[0], p + fc_b_[0], ws.feat.data(), ws.pre1.data(), fh, feature_width());
        draw_mask(ws.m1);
        for (std::size_t i = 0; i < ws.y1.size(); ++i) ws.y1[i] = act(ws.pre1[i]);
        for (std::size_t i = 0; i < ws.y1m.size(); ++i) ws.y1m[i] = ws.y1[i] * ws.m1[i];
        detail::affine(p + fc_w_[1], p + fc_b_[1], ws.y1m.data(), ws.pre2.data(), fh, fh);
        draw_mask(ws.m2);
        for (std::size_t i = 0; i < ws.y2.size(); ++i) ws.y2[i] = act(ws.pre2[i]);
        for (std::size_t i = 0; i < ws.y2m.size(); ++i) ws.y2m[i] = ws.y2[i] * ws.m2[i];
        detail::affine(p + fc_w_[2], p + fc_b_[2], ws.y2m.data(), ws.out.data(), kOutputLen, fh);
    }

    void backward(Workspace& ws, std::span<double> grad) const {
        const double* p = params_.data();
        double* gp = grad.data();
        const int fh = shape_.fc_hidden;
        const auto fhz = static_cast<std::size_t>(fh);

        // Dense head.
        std::fill(ws.dy2.begin(), ws.dy2.end(), 0.0);
        for (int k = 0; k < kOutputLen; ++k) gp[fc_b_[2] + static_cast<std::size_t>(k)] += ws.dout[static_cast<std::size_t>(k)];
        detail::backprop_affine(p + fc_w_[2], gp + fc_w_[2], ws.dout.data(), ws.y2m.data(), ws.dy2.data(), kOutputLen, fh);
        for (std::size_t i = 0; i < fhz; ++i) ws.dy2[i] *= ws.m2[i] * act_grad(ws.y2[i]);

        std::fill(ws.dy1.begin(), ws.dy1.end(), 0.0);
        for (std::size_t i = 0; i < fhz; ++i) gp[fc_b_[1] + i] += ws.dy2[i];
        detail::backprop_affine(p + fc_w_[1], gp + fc_w_[1], ws.dy2.data(), ws.y1m.data(), ws.dy1.data(), fh, fh);
        for (std::size_t i = 0; i < fhz; ++i) ws.dy1[i] *= ws.m1[i] * act_grad(ws.y1[i]);

        std::fill(ws.dfeat.begin(), ws.dfeat.end(), 0.0);
        for (std::size_t i = 0; i < fhz; ++i) gp[fc_b_[0] + i] += ws.dy1[i];
        detail::backprop_affine(p + fc_w_[0], gp + fc_w_[0], ws.dy1.data(), ws.feat.data(),
                                shape_.gru_layers > 0 ? ws.dfeat.data() : nullptr, fh, feature_width());

        if (shape_.gru_layers == 0) return;

        // Recurrent stack, top layer first. `upstream[t]` is dLoss/dh_t from above.
        const int h = shape_.hidden;
        const auto hsz = static_cast<std::size_t>(h);
        std::vector<std::vector<double>> upstream(kInputLen, std::vector<double>(hsz, 0.0));
        {
            const auto top = static_cast<std::size_t>((shape_.gru_layers - 1) * kInputLen + kInputLen - 1);
            for (std::size_t i = 0; i < hsz; ++i) upstream[kInputLen - 1][i] = ws.dfeat[i] * ws.mask[top][i];
        }
        std::vector<double> da_z(hsz), da_r(hsz), da_n(hsz);
        for (int l = shape_.gru_layers - 1; l >= 0; --l) {
            const auto& g = gru_[static_cast<std::size_t>(l)];
            std::vector<double> dh_next(hsz, 0.0);
            for (int t = kInputLen - 1; t >= 0; --t) {
                const auto idx = static_cast<std::size_t>(l * kInputLen + t);
                const auto& x = ws.x[idx];
                const auto& hp = ws.hprev[idx];
                const auto& z = ws.z[idx];
                const auto& r = ws.r[idx];
                const auto& n = ws.n[idx];
                const auto& rh = ws.rh[idx];
                auto& dx = ws.dx[idx];
                std::fill(dx.begin(), dx.end(), 0.0);

                for (std::size_t i = 0; i < hsz; ++i) {
                    const double dh = upstream[static_cast<std::size_t>(t)][i] + dh_next[i];
                    ws.dhp[i] = dh * z[i];
                    da_z[i] = dh * (hp[i] - n[i]) * z[i] * (1.0 - z[i]);
                    da_n[i] = dh * (1.0 - z[i]) * (1.0 - n[i] * n[i]);
                    gp[g.bn + i] += da_n[i];
                    gp[g.bz + i] += da_z[i];
                }
                std::fill(ws.drh.begin(), ws.drh.end(), 0.0);
                detail::backprop_affine(p + g.wn, gp + g.wn, da_n.data(), x.data(), dx.data(), h, g.in);
                detail::backprop_affine(p + g.un, gp + g.un, da_n.data(), rh.data(), ws.drh.data(), h, h);
                for (std::size_t i = 0; i < hsz; ++i) {
                    ws.dhp[i] += ws.drh[i] * r[i];
                    da_r[i] = ws.drh[i] * hp[i] * r[i] * (1.0 - r[i]);
                    gp[g.br + i] += da_r[i];
                }
                detail::backprop_affine(p + g.wr, gp + g.wr, da_r.data(), x.data(), dx.data(), h, g.in);
                detail::backprop_affine(p + g.ur, gp + g.ur, da_r.data(), hp.data(), ws.dhp.data(), h, h);
                detail::backprop_affine(p + g.wz, gp + g.wz, da_z.data(), x.data(), dx.data(), h, g.in);
                detail::backprop_affine(p + g.uz, gp + g.uz, da_z.data(), hp.data(), ws.dhp.data(), h, h);
                dh_next = ws.dhp;
            }
            if (l > 0) {
                for (int t = 0; t < kInputLen; ++t) {
                    const auto idx = static_cast<std::size_t>(l * kInputLen + t);
                    const auto& below_mask = ws.mask[idx - kInputLen];
                    for (std::size_t i = 0; i < hsz; ++i) upstream[static_cast<std::size_t>(t)][i] = ws.dx[idx][i] * below_mask[i];
                }
            }
        }
    }

    ModelShape shape_;
    std::vector<double> params_;
    std::vector<ParamBlock> blocks_;
    std::vector<GruOffsets> gru_;
    std::array<std::size_t, 3> fc_w_{};
    std::array<std::size_t, 3> fc_b_{};
    Normalizer norm_;
};

/// Number of (12 -> 7) windows a series of `n` samples yields.
inline std::size_t window_count(std::size_t n) {
    return n >= static_cast<std::size_t>(kInputLen + kOutputLen) ? n - (kInputLen + kOutputLen) + 1 : 0;
}

/// RMSE in physical units over windows [first, last).
inline double rmse(const ForecastModel& model, std::span<const double> series, std::size_t first, std::size_t last) {
    if (last <= first) return 0.0;
    double ss = 0.0;
    std::size_t count = 0;
    for (std::size_t w = first; w < last; ++w) {
        const auto y = model.forward(series.subspan(w, kInputLen));
        for (int k = 0; k < kOutputLen; ++k) {
            const double e = y[static_cast<std::size_t>(k)] - series[w + kInputLen + static_cast<std::size_t>(k)];
            ss += e * e;
            ++count;
        }
    }
    return std::sqrt(ss / static_cast<double>(count));
}

/// Chronological 80/20 split of the window indices.
struct Split {
    std::size_t train_windows = 0;
    std::size_t total_windows = 0;
};

inline Split split_windows(std::size_t series_len, double train_fraction) {
    Split s;
    s.total_windows = window_count(series_len);
    s.train_windows = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(s.total_windows)));
    return s;
}

struct TrainResult {
    ForecastModel model;
    double rmse_train = 0.0;
    double rmse_valid = 0.0;
    double rmse_valid_initial = 0.0; // same split, before the first update
    std::vector<double> epoch_loss;  // mean normalised training loss per epoch
};

/// Gradient-moment (Adam) training with per-sample clipping and dropout.
inline TrainResult train(std::span<const double> series, const ModelShape& shape, const TrainConfig& cfg,
                         std::uint64_t seed) {
    cfg.validate();
    const Split split = split_windows(series.size(), cfg.train_fraction);
    if (split.train_windows < static_cast<std::size_t>(cfg.batch_size) || split.total_windows <= split.train_windows) {
        throw ConfigError("forecast: series of " + std::to_string(series.size()) +
                          " samples is too short for one training batch plus validation");
    }

    TrainResult result{ForecastModel(shape, seed), 0.0, 0.0, 0.0, {}};
    auto& model = result.model;
    const std::size_t train_span = split.train_windows - 1 + kInputLen + kOutputLen;
    model.normalizer() = Normalizer::fit(series.subspan(0, train_span));
    const Normalizer norm = model.normalizer();
    result.rmse_valid_initial = rmse(model, series, split.train_windows, split.total_windows);

    std::vector<double> z(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) z[i] = norm.normalize(series[i]);

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const std::size_t np = model.params().size();
    std::vector<double> m(np, 0.0), v(np, 0.0), batch_grad(np), sample_grad(np);
    std::vector<std::size_t> order(split.train_windows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    ForecastModel::Workspace ws(model);

    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t w = order[b];
                std::fill(sample_grad.begin(), sample_grad.end(), 0.0);
                const std::span<const double> zs(z);
                epoch_loss += model.loss_and_gradient(ws, zs.subspan(w, kInputLen), zs.subspan(w + kInputLen, kOutputLen),
                                                      sample_grad, &rng, cfg.dropout);
                double norm2 = 0.0;
                for (double gval : sample_grad) norm2 += gval * gval;
                const double gnorm = std::sqrt(norm2);
                const double scale = gnorm > cfg.grad_clip ? cfg.grad_clip / gnorm : 1.0;
                for (std::size_t i = 0; i < np; ++i) batch_grad[i] += scale * sample_grad[i];
            }
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            ++step;
            const double b1 = cfg.grad_moving_avg;
            const double b2 = cfg.sq_grad_moving_avg;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
            auto& params = model.params();
            for (std::size_t i = 0; i < np; ++i) {
                const double gval = batch_grad[i] * inv_b;
                m[i] = b1 * m[i] + (1.0 - b1) * gval;
                v[i] = b2 * v[i] + (1.0 - b2) * gval * gval;
                params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
            }
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    }

    result.rmse_train = rmse(model, series, 0, split.train_windows);
    result.rmse_valid = rmse(model, series, split.train_windows, split.total_windows);
    return result;
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences (step 1e-5) over every parameter, in inference mode.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
inline double grad_check(const ForecastModel& model, std::span<const double> window, std::span<const double> target) {
    if (window.size() != static_cast<std::size_t>(kInputLen) || target.size() != static_cast<std::size_t>(kOutputLen)) {
        throw UsageError("grad_check: window must have 12 samples and target 7");
    }
    std::vector<double> analytic(model.params().size(), 0.0);
    model.loss_and_gradient(window, target, analytic);

    ForecastModel probe = model;
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double saved = probe.params()[i];
        probe.params()[i] = saved + h;
        const double up = probe.loss(window, target);
        probe.params()[i] = saved - h;
        const double down = probe.loss(window, target);
        probe.params()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

/// Reads a `slot,value_kw` training series.
inline std::vector<double> read_series_csv(const std::string& path) { return csv::read_series(path, "value_kw"); }

} // namespace evcs::forecast
