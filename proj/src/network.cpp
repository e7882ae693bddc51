#include "driftcast/nn/network.hpp"

#include "driftcast/errors.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

namespace driftcast::nn {

namespace {

std::uint64_t next_network_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const LayerModulation* active_mod(const Modulation* mod, int param) {
    if (mod == nullptr || param >= static_cast<int>(mod->size())) return nullptr;
    const auto& m = (*mod)[static_cast<std::size_t>(param)];
    return m.active ? &m : nullptr;
}

void check_mod(const LayerModulation& m, const ParamTensor& p, Eigen::Index rows) {
    if (m.beta.rows() != rows || m.beta.cols() != p.shape.d_out) throw ShapeMismatch(p.name + " (beta)");
    if (p.shape.kind != ParamKind::Bias && (m.alpha.rows() != rows || m.alpha.cols() != p.shape.d_in))
        throw ShapeMismatch(p.name + " (alpha)");
}

/// Pre-beta output of a causal convolution for one row.
Matrix conv_row(const ParamTensor& p, const Eigen::Ref<const Matrix>& xin, int length) {
    const int dk = p.shape.d_k;
    Matrix out = Matrix::Zero(length, p.shape.d_out);
    for (int k = 0; k < dk; ++k) {
        const int delay = dk - 1 - k;
        if (delay >= length) continue;
        out.bottomRows(length - delay).noalias() += xin.topRows(length - delay) * p.matrix(k);
    }
    return out;
}

}  // namespace

Network::Network() : id_(next_network_id()) {}

Network::Network(ParamStore params, Wiring wiring)
    : params_(std::move(params)), wiring_(std::move(wiring)), id_(next_network_id()) {
    validate();
}

Network::Network(const Network& other)
    : params_(other.params_), wiring_(other.wiring_), output_dim_(other.output_dim_),
      id_(next_network_id()) {}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        params_ = other.params_;
        wiring_ = other.wiring_;
        output_dim_ = other.output_dim_;
        id_ = next_network_id();
    }
    return *this;
}

void Network::validate() {
    int dim = wiring_.input_dim;
    if (dim < 1) throw ShapeMismatch("input");
    const auto param_at = [&](int i) -> const ParamTensor& {
        if (i < 0 || i >= static_cast<int>(params_.size())) throw ShapeMismatch("param #" + std::to_string(i));
        return params_[static_cast<std::size_t>(i)];
    };
    for (const auto& op : wiring_.ops) {
        std::visit(overloaded{
                       [&](const LinearOp& o) {
                           const auto& p = param_at(o.param);
                           if (p.shape.kind != ParamKind::Linear || p.shape.d_in != dim) throw ShapeMismatch(p.name);
                           dim = p.shape.d_out;
                       },
                       [&](const BiasOp& o) {
                           const auto& p = param_at(o.param);
                           if (p.shape.kind != ParamKind::Bias || p.shape.d_out != dim) throw ShapeMismatch(p.name);
                       },
                       [&](const Conv1dOp& o) {
                           const auto& p = param_at(o.param);
                           if (p.shape.kind != ParamKind::ConvFilter || o.length < 1 ||
                               p.shape.d_in * o.length != dim)
                               throw ShapeMismatch(p.name);
                           dim = p.shape.d_out * o.length;
                       },
                       [&](const GeluOp&) {},
                   },
                   op);
    }
    output_dim_ = dim;
}

double gelu(double x) noexcept {
    constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) noexcept {
    constexpr double c = 0.7978845608028654;
    const double u = c * (x + 0.044715 * x * x * x);
    const double th = std::tanh(u);
    const double du = c * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}

ForwardCache forward(const Network& net, const Matrix& x, const Modulation* modulation) {
    if (x.cols() != net.input_dim()) throw ShapeMismatch("input");
    const auto& params = net.params();
    ForwardCache cache;
    cache.network_id = net.id();
    cache.generation = params.generation();
    cache.inputs.reserve(net.wiring().ops.size());
    if (modulation != nullptr) cache.modulation = *modulation;
    const Eigen::Index rows = x.rows();

    Matrix h = x;
    for (const auto& op : net.wiring().ops) {
        cache.inputs.push_back(h);
        std::visit(overloaded{
                       [&](const LinearOp& o) {
                           const auto& p = params[static_cast<std::size_t>(o.param)];
                           const auto* m = active_mod(modulation, o.param);
                           if (m == nullptr) {
                               h = h * p.matrix();
                               return;
                           }
                           check_mod(*m, p, rows);
                           h = ((h.array() * m->alpha.array()).matrix() * p.matrix()).array() * m->beta.array();
                       },
                       [&](const BiasOp& o) {
                           const auto& p = params[static_cast<std::size_t>(o.param)];
                           const auto* m = active_mod(modulation, o.param);
                           if (m == nullptr) {
                               h.rowwise() += p.values.transpose();
                               return;
                           }
                           check_mod(*m, p, rows);
                           h.array() += m->beta.array().rowwise() * p.values.transpose().array();
                       },
                       [&](const Conv1dOp& o) {
                           const auto& p = params[static_cast<std::size_t>(o.param)];
                           const auto* m = active_mod(modulation, o.param);
                           if (m != nullptr) check_mod(*m, p, rows);
                           const int din = p.shape.d_in;
                           const int dout = p.shape.d_out;
                           Matrix out(rows, static_cast<Eigen::Index>(o.length) * dout);
                           for (Eigen::Index r = 0; r < rows; ++r) {
                               Matrix xin = Eigen::Map<const Matrix>(h.row(r).data(), o.length, din);
                               if (m != nullptr) xin.array().rowwise() *= m->alpha.row(r).array();
                               Matrix y = conv_row(p, xin, o.length);
                               if (m != nullptr) y.array().rowwise() *= m->beta.row(r).array();
                               out.row(r) = Eigen::Map<const RowVector>(y.data(), y.size());
                           }
                           h = std::move(out);
                       },
                       [&](const GeluOp&) { h = h.unaryExpr([](double v) { return gelu(v); }); },
                   },
                   op);
    }
    cache.output = std::move(h);
    return cache;
}

Matrix backward(Network& net, const ForwardCache& cache, const Matrix& upstream, Modulation* dmod) {
    if (cache.network_id != net.id() || cache.generation != net.params().generation() ||
        cache.inputs.size() != net.wiring().ops.size())
        throw StaleCache();
    if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
        throw ShapeMismatch("upstream gradient");

    auto& params = net.params();
    const Modulation* mod = cache.modulation.empty() ? nullptr : &cache.modulation;
    if (dmod != nullptr) {
        dmod->assign(params.size(), LayerModulation{});
        if (mod != nullptr)
            for (std::size_t i = 0; i < mod->size(); ++i) {
                if (!(*mod)[i].active) continue;
                (*dmod)[i].active = true;
                (*dmod)[i].alpha = Matrix::Zero((*mod)[i].alpha.rows(), (*mod)[i].alpha.cols());
                (*dmod)[i].beta = Matrix::Zero((*mod)[i].beta.rows(), (*mod)[i].beta.cols());
            }
    }

    Matrix g = upstream;
    const auto& ops = net.wiring().ops;
    for (std::size_t idx = ops.size(); idx-- > 0;) {
        const Matrix& x = cache.inputs[idx];
        std::visit(
            overloaded{
                [&](const LinearOp& o) {
                    const auto pi = static_cast<std::size_t>(o.param);
                    const auto& p = params[pi];
                    const auto* m = active_mod(mod, o.param);
                    Eigen::Map<Matrix> dw(params.grad(pi).data(), p.shape.d_in, p.shape.d_out);
                    if (m == nullptr) {
                        dw.noalias() += x.transpose() * g;
                        g = g * p.matrix().transpose();
                        return;
                    }
                    const Matrix u = x.array() * m->alpha.array();
                    const Matrix dv = g.array() * m->beta.array();
                    if (dmod != nullptr) {
                        const Matrix v = u * p.matrix();
                        (*dmod)[pi].beta.array() += g.array() * v.array();
                    }
                    dw.noalias() += u.transpose() * dv;
                    const Matrix du = dv * p.matrix().transpose();
                    if (dmod != nullptr) (*dmod)[pi].alpha.array() += du.array() * x.array();
                    g = du.array() * m->alpha.array();
                },
                [&](const BiasOp& o) {
                    const auto pi = static_cast<std::size_t>(o.param);
                    const auto& p = params[pi];
                    const auto* m = active_mod(mod, o.param);
                    if (m == nullptr) {
                        params.grad(pi) += g.colwise().sum().transpose();
                        return;
                    }
                    params.grad(pi) += (g.array() * m->beta.array()).matrix().colwise().sum().transpose();
                    if (dmod != nullptr)
                        (*dmod)[pi].beta.array() += g.array().rowwise() * p.values.transpose().array();
                },
                [&](const Conv1dOp& o) {
                    const auto pi = static_cast<std::size_t>(o.param);
                    const auto& p = params[pi];
                    const auto* m = active_mod(mod, o.param);
                    const int din = p.shape.d_in;
                    const int dout = p.shape.d_out;
                    const int dk = p.shape.d_k;
                    const int len = o.length;
                    Matrix gx(x.rows(), x.cols());
                    for (Eigen::Index r = 0; r < x.rows(); ++r) {
                        const Matrix xr = Eigen::Map<const Matrix>(x.row(r).data(), len, din);
                        Matrix xin = xr;
                        if (m != nullptr) xin.array().rowwise() *= m->alpha.row(r).array();
                        Matrix dy = Eigen::Map<const Matrix>(g.row(r).data(), len, dout);
                        if (m != nullptr) {
                            if (dmod != nullptr) {
                                const Matrix v = conv_row(p, xin, len);
                                (*dmod)[pi].beta.row(r) += (dy.array() * v.array()).matrix().colwise().sum();
                            }
                            dy.array().rowwise() *= m->beta.row(r).array();
                        }
                        Matrix dxin = Matrix::Zero(len, din);
                        for (int k = 0; k < dk; ++k) {
                            const int delay = dk - 1 - k;
                            if (delay >= len) continue;
                            Eigen::Map<Matrix> dw(params.grad(pi).data() + static_cast<std::int64_t>(k) * din * dout,
                                                  din, dout);
                            dw.noalias() += xin.topRows(len - delay).transpose() * dy.bottomRows(len - delay);
                            dxin.topRows(len - delay).noalias() +=
                                dy.bottomRows(len - delay) * p.matrix(k).transpose();
                        }
                        if (m != nullptr) {
                            if (dmod != nullptr)
                                (*dmod)[pi].alpha.row(r) += (dxin.array() * xr.array()).matrix().colwise().sum();
                            dxin.array().rowwise() *= m->alpha.row(r).array();
                        }
                        gx.row(r) = Eigen::Map<const RowVector>(dxin.data(), dxin.size());
                    }
                    g = std::move(gx);
                },
                [&](const GeluOp&) { g.array() *= x.unaryExpr([](double v) { return gelu_grad(v); }).array(); },
            },
            ops[idx]);
    }
    return g;
}

void init_default(ParamTensor& tensor, std::mt19937_64& rng) {
    if (tensor.shape.kind == ParamKind::Bias) {
        tensor.values.setZero();
        return;
    }
    const double fan_in = static_cast<double>(tensor.shape.d_in) * tensor.shape.d_k;
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < tensor.values.size(); ++i) tensor.values(i) = u(rng);
}

}  // namespace driftcast::nn
