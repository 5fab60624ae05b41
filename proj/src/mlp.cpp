// SPDX-License-Identifier: Apache-2.0

#include "rfsolve/mlp.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace rfsolve {

MlpField::MlpField(std::size_t data_dim, const std::vector<std::size_t>& hidden, Rng& rng)
    : data_dim_(data_dim) {
    std::vector<std::size_t> widths;
    widths.push_back(data_dim + 1);
    for (std::size_t h : hidden) widths.push_back(h);
    widths.push_back(data_dim);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        MlpLayer layer;
        layer.in = widths[l];
        layer.out = widths[l + 1];
        layer.weight.resize(layer.in * layer.out);
        layer.bias.assign(layer.out, 0.0);
        double s = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& w : layer.weight) w = s * rng.normal();
        layers_.push_back(std::move(layer));
    }
}

MlpField::MlpField(std::size_t data_dim, std::vector<MlpLayer> layers)
    : data_dim_(data_dim), layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("mlp: no layers");
    if (layers_.front().in != data_dim + 1 || layers_.back().out != data_dim)
        throw std::invalid_argument("mlp: layer shapes do not chain to data dim");
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
        if (layers_[l].out != layers_[l + 1].in)
            throw std::invalid_argument("mlp: layer shapes do not chain");
}

std::size_t MlpField::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

namespace {

void dense_forward(const MlpLayer& layer, const double* in, double* out) {
    for (std::size_t o = 0; o < layer.out; ++o) {
        double acc = layer.bias[o];
        const double* wrow = layer.weight.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) acc += wrow[i] * in[i];
        out[o] = acc;
    }
}

}  // namespace

Tensor MlpField::evaluate(const Tensor& state, double t, std::optional<ConditionId>) const {
    check_state(state);
    std::vector<double> cur(state.data.begin(), state.data.end());
    cur.push_back(t);
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        next.assign(layers_[l].out, 0.0);
        dense_forward(layers_[l], cur.data(), next.data());
        if (l + 1 < layers_.size())
            for (double& v : next) v = std::tanh(v);
        cur.swap(next);
    }
    Tensor out(state.shape, std::move(cur));
    if (!out.all_finite()) throw std::runtime_error("mlp: non-finite output");
    return out;
}

MlpGradients MlpGradients::zeros_like(const MlpField& f) {
    MlpGradients g;
    for (const auto& l : f.layers()) {
        MlpLayer gl;
        gl.in = l.in;
        gl.out = l.out;
        gl.weight.assign(l.weight.size(), 0.0);
        gl.bias.assign(l.bias.size(), 0.0);
        g.layers.push_back(std::move(gl));
    }
    return g;
}

void MlpGradients::scale_in_place(double s) {
    for (auto& l : layers) {
        for (double& w : l.weight) w *= s;
        for (double& b : l.bias) b *= s;
    }
}

LossAndGrad rf_loss_batch(const MlpField& field, const Tensor& x0, const Tensor& x1,
                          const std::vector<double>& t) {
    if (!x0.same_shape(x1)) throw std::invalid_argument("rf_loss_batch: x0/x1 shape mismatch");
    if (x0.shape.size() != 2) throw std::invalid_argument("rf_loss_batch: batch must be rank 2");
    std::size_t batch = x0.shape[0];
    std::size_t d = x0.shape[1];
    if (d != field.dim()) throw std::invalid_argument("rf_loss_batch: dim mismatch");
    if (t.size() != batch) throw std::invalid_argument("rf_loss_batch: t length mismatch");

    const auto& layers = field.layers();
    std::size_t depth = layers.size();

    LossAndGrad out;
    out.grad = MlpGradients::zeros_like(field);

    // Per-sample activations: a[0] is the input, a[l+1] the post-activation
    // output of layer l (post-linear for the last layer).
    std::vector<std::vector<double>> a(depth + 1), pre(depth);
    double loss_acc = 0.0;

    for (std::size_t s = 0; s < batch; ++s) {
        const double* z0 = x0.data.data() + s * d;
        const double* z1 = x1.data.data() + s * d;
        double ts = t[s];

        a[0].assign(d + 1, 0.0);
        for (std::size_t j = 0; j < d; ++j) a[0][j] = ts * z1[j] + (1.0 - ts) * z0[j];
        a[0][d] = ts;

        for (std::size_t l = 0; l < depth; ++l) {
            pre[l].assign(layers[l].out, 0.0);
            dense_forward(layers[l], a[l].data(), pre[l].data());
            a[l + 1] = pre[l];
            if (l + 1 < depth)
                for (double& v : a[l + 1]) v = std::tanh(v);
        }

        // residual r = (x1 - x0) - v; loss contribution ||r||^2
        std::vector<double> delta(d);
        for (std::size_t j = 0; j < d; ++j) {
            double r = (z1[j] - z0[j]) - a[depth][j];
            loss_acc += r * r;
            delta[j] = -2.0 * r;  // dL/dv
        }

        for (std::size_t l = depth; l-- > 0;) {
            const auto& layer = layers[l];
            auto& gl = out.grad.layers[l];
            // delta holds dL/d(post-activation of layer l); map to pre-activation.
            if (l + 1 < depth)
                for (std::size_t o = 0; o < layer.out; ++o) {
                    double th = a[l + 1][o];
                    delta[o] *= (1.0 - th * th);
                }
            for (std::size_t o = 0; o < layer.out; ++o) {
                gl.bias[o] += delta[o];
                double* grow = gl.weight.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) grow[i] += delta[o] * a[l][i];
            }
            if (l > 0) {
                std::vector<double> prev(layer.in, 0.0);
                for (std::size_t o = 0; o < layer.out; ++o) {
                    const double* wrow = layer.weight.data() + o * layer.in;
                    for (std::size_t i = 0; i < layer.in; ++i) prev[i] += wrow[i] * delta[o];
                }
                delta.swap(prev);
            }
        }
    }

    double inv_b = 1.0 / static_cast<double>(batch);
    out.loss = loss_acc * inv_b;
    out.grad.scale_in_place(inv_b);
    if (!std::isfinite(out.loss)) throw std::runtime_error("rf_loss_batch: non-finite loss");
    return out;
}

ToyDistribution ToyDistribution::gaussian_mixture(std::vector<GaussComponent> components) {
    if (components.empty()) throw std::invalid_argument("mixture: no components");
    double wsum = 0.0;
    std::size_t d = components.front().mean.size();
    for (const auto& c : components) {
        if (c.mean.size() != d || c.std.size() != d)
            throw std::invalid_argument("mixture: component size mismatch");
        for (double s : c.std)
            if (!(s > 0.0)) throw std::invalid_argument("mixture: std must be positive");
        wsum += c.weight;
    }
    ToyDistribution dist;
    dist.kind_ = Kind::Mixture;
    dist.dim_ = d;
    dist.components_ = std::move(components);
    for (auto& c : dist.components_) c.weight /= wsum;
    return dist;
}

ToyDistribution ToyDistribution::two_moons(double noise) {
    ToyDistribution dist;
    dist.kind_ = Kind::TwoMoons;
    dist.noise_ = noise;
    return dist;
}

ToyDistribution ToyDistribution::checkerboard(int cells) {
    if (cells < 2) throw std::invalid_argument("checkerboard: need at least 2 cells");
    ToyDistribution dist;
    dist.kind_ = Kind::Checkerboard;
    dist.cells_ = cells;
    return dist;
}

void ToyDistribution::sample(Rng& rng, Tensor& out, std::size_t row) const {
    double* p = out.data.data() + row * dim_;
    switch (kind_) {
        case Kind::Mixture: {
            double u = rng.uniform();
            const GaussComponent* pick = &components_.back();
            double acc = 0.0;
            for (const auto& c : components_) {
                acc += c.weight;
                if (u < acc) {
                    pick = &c;
                    break;
                }
            }
            for (std::size_t j = 0; j < dim_; ++j)
                p[j] = pick->mean[j] + pick->std[j] * rng.normal();
            break;
        }
        case Kind::TwoMoons: {
            double th = std::numbers::pi * rng.uniform();
            if (rng.uniform() < 0.5) {
                p[0] = std::cos(th);
                p[1] = std::sin(th) - 0.25;
            } else {
                p[0] = 1.0 - std::cos(th);
                p[1] = 0.25 - std::sin(th);
            }
            p[0] += noise_ * rng.normal();
            p[1] += noise_ * rng.normal();
            break;
        }
        case Kind::Checkerboard: {
            // rejection on [-2, 2]^2, keep cells with even parity
            double cell = 4.0 / cells_;
            for (;;) {
                double x = rng.uniform(-2.0, 2.0);
                double y = rng.uniform(-2.0, 2.0);
                int ix = static_cast<int>(std::floor((x + 2.0) / cell));
                int iy = static_cast<int>(std::floor((y + 2.0) / cell));
                if ((ix + iy) % 2 == 0) {
                    p[0] = x;
                    p[1] = y;
                    break;
                }
            }
            break;
        }
    }
}

Tensor ToyDistribution::sample_batch(Rng& rng, std::size_t n) const {
    Tensor out = Tensor::zeros({n, dim_});
    for (std::size_t s = 0; s < n; ++s) sample(rng, out, s);
    return out;
}

TrainResult train(MlpField& field, const ToyDistribution& dist0, const TrainConfig& config) {
    if (config.batch_size == 0 || config.steps == 0)
        throw std::invalid_argument("train: batch_size and steps must be positive");
    if (dist0.dim() != field.dim()) throw std::invalid_argument("train: dim mismatch");

    Rng rng(config.seed);
    std::size_t d = field.dim();
    TrainResult result;
    result.loss_curve.reserve(config.steps);

    MlpGradients m = MlpGradients::zeros_like(field);
    MlpGradients v = MlpGradients::zeros_like(field);

    for (std::size_t step = 0; step < config.steps; ++step) {
        Tensor x0 = dist0.sample_batch(rng, config.batch_size);
        Tensor x1 = Tensor::zeros({config.batch_size, d});
        for (double& x : x1.data) x = rng.normal();
        std::vector<double> t(config.batch_size);
        for (double& ts : t) ts = rng.uniform();

        LossAndGrad lg = rf_loss_batch(field, x0, x1, t);
        result.loss_curve.push_back(lg.loss);
        if (lg.loss > 1e6) throw std::runtime_error("train: divergence at step " + std::to_string(step));

        auto& layers = field.layers();
        if (config.optimizer == Optimizer::SGD) {
            for (std::size_t l = 0; l < layers.size(); ++l) {
                for (std::size_t i = 0; i < layers[l].weight.size(); ++i)
                    layers[l].weight[i] -= config.learning_rate * lg.grad.layers[l].weight[i];
                for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
                    layers[l].bias[i] -= config.learning_rate * lg.grad.layers[l].bias[i];
            }
        } else {
            double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step + 1));
            double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step + 1));
            auto adam = [&](double& p, double& mi, double& vi, double g) {
                mi = config.beta1 * mi + (1.0 - config.beta1) * g;
                vi = config.beta2 * vi + (1.0 - config.beta2) * g * g;
                p -= config.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + config.eps);
            };
            for (std::size_t l = 0; l < layers.size(); ++l) {
                for (std::size_t i = 0; i < layers[l].weight.size(); ++i)
                    adam(layers[l].weight[i], m.layers[l].weight[i], v.layers[l].weight[i],
                         lg.grad.layers[l].weight[i]);
                for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
                    adam(layers[l].bias[i], m.layers[l].bias[i], v.layers[l].bias[i],
                         lg.grad.layers[l].bias[i]);
            }
        }
    }
    return result;
}

void save_mlp(const MlpField& field, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.txt", std::ios::trunc);
    if (!manifest) throw std::runtime_error("save_mlp: cannot open manifest in " + dir);
    manifest << "data_dim " << field.dim() << "\n";
    manifest << "layers " << field.layers().size() << "\n";
    for (std::size_t l = 0; l < field.layers().size(); ++l) {
        const auto& layer = field.layers()[l];
        manifest << "layer " << l << " " << layer.in << " " << layer.out << "\n";
        write_tensor(Tensor({layer.out, layer.in}, layer.weight),
                     (fs::path(dir) / ("layer" + std::to_string(l) + "-weight.rft")).string());
        write_tensor(Tensor({layer.out}, layer.bias),
                     (fs::path(dir) / ("layer" + std::to_string(l) + "-bias.rft")).string());
    }
}

MlpField load_mlp(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw std::runtime_error("load_mlp: cannot open manifest in " + dir);
    std::string key;
    std::size_t data_dim = 0, n_layers = 0;
    manifest >> key >> data_dim;
    if (key != "data_dim") throw std::runtime_error("load_mlp: bad manifest");
    manifest >> key >> n_layers;
    if (key != "layers") throw std::runtime_error("load_mlp: bad manifest");
    std::vector<MlpLayer> layers;
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::size_t idx, in, out;
        manifest >> key >> idx >> in >> out;
        if (key != "layer" || idx != l) throw std::runtime_error("load_mlp: bad manifest");
        Tensor w = read_tensor((fs::path(dir) / ("layer" + std::to_string(l) + "-weight.rft")).string());
        Tensor b = read_tensor((fs::path(dir) / ("layer" + std::to_string(l) + "-bias.rft")).string());
        if (w.shape != std::vector<std::size_t>{out, in} || b.shape != std::vector<std::size_t>{out})
            throw std::runtime_error("load_mlp: tensor shape disagrees with manifest");
        MlpLayer layer;
        layer.in = in;
        layer.out = out;
        layer.weight = std::move(w.data);
        layer.bias = std::move(b.data);
        layers.push_back(std::move(layer));
    }
    return MlpField(data_dim, std::move(layers));
}

}  // namespace rfsolve
