#include "lfe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace lfe {

std::string Shape::str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

void check_shape_positive(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
        throw TensorError("negative dimension in shape " + s.str());
    }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor::Tensor(Shape s, bool requires_grad) : impl_(std::make_shared<Impl>()) {
    check_shape_positive(s);
    impl_->shape = s;
    impl_->data.assign(s.numel(), 0.0);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape s, bool requires_grad) {
    return Tensor(s, requires_grad);
}

Tensor Tensor::full(Shape s, double value, bool requires_grad) {
    Tensor t(s, requires_grad);
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
}

Tensor Tensor::from_data(Shape s, std::vector<double> values,
                         bool requires_grad) {
    if (values.size() != s.numel()) {
        throw TensorError("data length " + std::to_string(values.size()) +
                          " does not match shape " + s.str());
    }
    Tensor t(s, requires_grad);
    t.impl_->data = std::move(values);
    return t;
}

Tensor Tensor::randn(Shape s, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
    Tensor t(s, requires_grad);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.impl_->data) v = dist(rng);
    return t;
}

double& Tensor::at(int n, int c, int y, int x) {
    const Shape& s = impl_->shape;
    return impl_->data[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
}

double Tensor::at(int n, int c, int y, int x) const {
    const Shape& s = impl_->shape;
    return impl_->data[((static_cast<std::size_t>(n) * s.c + c) * s.h + y) * s.w + x];
}

void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }

void Tensor::zero_grad() {
    impl_->grad.assign(impl_->shape.numel(), 0.0);
}

double Tensor::item() const {
    if (!is_scalar()) {
        throw TensorError("item() on non-scalar tensor " + impl_->shape.str());
    }
    return impl_->data[0];
}

void Tensor::check_finite(const std::string& context) const {
    for (double v : impl_->data) {
        if (!std::isfinite(v)) {
            throw TensorError("non-finite value in " + context);
        }
    }
}

// --- op plumbing ---

Tensor make_op_result(Shape shape,
                      std::vector<std::shared_ptr<Tensor::Impl>> parents,
                      std::function<void(Tensor::Impl&)> backward_fn) {
    Tensor out(shape);
    if (g_grad_enabled) {
        bool tracked = false;
        for (const auto& p : parents) {
            if (p->requires_grad || p->has_tape) {
                tracked = true;
                break;
            }
        }
        if (tracked) {
            out.impl()->has_tape = true;
            out.impl()->parents = std::move(parents);
            out.impl()->backward_fn = std::move(backward_fn);
        }
    }
    return out;
}

namespace {

using Impl = Tensor::Impl;

void ensure_grad(Impl& node) {
    if (node.grad.size() != node.shape.numel()) {
        node.grad.assign(node.shape.numel(), 0.0);
    }
}

}  // namespace

void backward(const Tensor& loss) {
    if (!loss.is_scalar()) {
        throw TensorError("backward requires a scalar loss, got " +
                          loss.shape().str());
    }
    // Topological order via iterative post-order DFS.
    std::vector<Impl*> order;
    std::unordered_set<Impl*> visited;
    std::vector<std::pair<Impl*, std::size_t>> stack;
    stack.emplace_back(loss.impl().get(), 0);
    visited.insert(loss.impl().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Impl* parent = node->parents[idx++].get();
            if (!visited.count(parent) &&
                (parent->has_tape || parent->requires_grad)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Impl* node : order) ensure_grad(*node);
    loss.impl()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Impl* node = *it;
        if (node->backward_fn) node->backward_fn(*node);
    }
}

// --- parameter factories ---

ConvParams make_conv(int in_ch, int out_ch, int k, int stride, int padding,
                     std::mt19937_64& rng) {
    if (k != 1 && k != 3) {
        throw TensorError("unsupported kernel size " + std::to_string(k));
    }
    ConvParams p;
    const double fan_in = static_cast<double>(in_ch) * k * k;
    p.kernel = Tensor::randn({out_ch, in_ch, k, k}, rng,
                             std::sqrt(2.0 / fan_in), true);
    p.bias = Tensor::zeros({1, out_ch, 1, 1}, true);
    p.stride = stride;
    p.padding = padding;
    return p;
}

BatchNormParams make_batch_norm(int channels) {
    BatchNormParams p;
    p.gamma = Tensor::full({1, channels, 1, 1}, 1.0, true);
    p.beta = Tensor::zeros({1, channels, 1, 1}, true);
    p.running_mean = Tensor::zeros({1, channels, 1, 1});
    p.running_var = Tensor::full({1, channels, 1, 1}, 1.0);
    return p;
}

// --- conv2d ---

Tensor conv2d(const Tensor& input, ConvParams& params) {
    const Shape in_s = input.shape();
    const Shape k_s = params.kernel.shape();
    if (in_s.c != k_s.c) {
        throw TensorError("conv2d channel mismatch: input " + in_s.str() +
                          " vs kernel " + k_s.str());
    }
    const int k = k_s.h;
    const int stride = params.stride;
    const int pad = params.padding;
    const int out_h = (in_s.h + 2 * pad - k) / stride + 1;
    const int out_w = (in_s.w + 2 * pad - k) / stride + 1;
    if (out_h <= 0 || out_w <= 0) {
        throw TensorError("conv2d output would be empty for input " +
                          in_s.str() + " with kernel " + k_s.str());
    }
    const Shape out_s{in_s.n, k_s.n, out_h, out_w};

    auto in_impl = input.impl();
    auto kern_impl = params.kernel.impl();
    auto bias_impl = params.bias.impl();

    Tensor out = make_op_result(
        out_s, {in_impl, kern_impl, bias_impl},
        [in_impl, kern_impl, bias_impl, in_s, k_s, out_s, k, stride,
         pad](Impl& self) {
            ensure_grad(*in_impl);
            ensure_grad(*kern_impl);
            ensure_grad(*bias_impl);
            const double* gout = self.grad.data();
            const double* kern = kern_impl->data.data();
            const double* in = in_impl->data.data();
            double* gin = in_impl->grad.data();
            double* gk = kern_impl->grad.data();
            double* gb = bias_impl->grad.data();
            const int N = in_s.n, IC = in_s.c, IH = in_s.h, IW = in_s.w;
            const int OC = out_s.c, OH = out_s.h, OW = out_s.w;
            // input gradient, gather form
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
            for (int n = 0; n < N; ++n) {
                for (int ic = 0; ic < IC; ++ic) {
                    for (int iy = 0; iy < IH; ++iy) {
                        for (int ix = 0; ix < IW; ++ix) {
                            double acc = 0.0;
                            for (int ky = 0; ky < k; ++ky) {
                                int num_y = iy + pad - ky;
                                if (num_y < 0 || num_y % stride) continue;
                                int oy = num_y / stride;
                                if (oy >= OH) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    int num_x = ix + pad - kx;
                                    if (num_x < 0 || num_x % stride) continue;
                                    int ox = num_x / stride;
                                    if (ox >= OW) continue;
                                    for (int oc = 0; oc < OC; ++oc) {
                                        acc += kern[((static_cast<std::size_t>(oc) * IC + ic) * k + ky) * k + kx] *
                                               gout[((static_cast<std::size_t>(n) * OC + oc) * OH + oy) * OW + ox];
                                    }
                                }
                            }
                            gin[((static_cast<std::size_t>(n) * IC + ic) * IH + iy) * IW + ix] += acc;
                        }
                    }
                }
            }
            // kernel gradient, gather form
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
            for (int oc = 0; oc < OC; ++oc) {
                for (int ic = 0; ic < IC; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        for (int kx = 0; kx < k; ++kx) {
                            double acc = 0.0;
                            for (int n = 0; n < N; ++n) {
                                for (int oy = 0; oy < OH; ++oy) {
                                    int iy = oy * stride - pad + ky;
                                    if (iy < 0 || iy >= IH) continue;
                                    for (int ox = 0; ox < OW; ++ox) {
                                        int ix = ox * stride - pad + kx;
                                        if (ix < 0 || ix >= IW) continue;
                                        acc += in[((static_cast<std::size_t>(n) * IC + ic) * IH + iy) * IW + ix] *
                                               gout[((static_cast<std::size_t>(n) * OC + oc) * OH + oy) * OW + ox];
                                    }
                                }
                            }
                            gk[((static_cast<std::size_t>(oc) * IC + ic) * k + ky) * k + kx] += acc;
                        }
                    }
                }
            }
            for (int oc = 0; oc < OC; ++oc) {
                double acc = 0.0;
                for (int n = 0; n < N; ++n) {
                    for (int oy = 0; oy < OH; ++oy) {
                        for (int ox = 0; ox < OW; ++ox) {
                            acc += gout[((static_cast<std::size_t>(n) * OC + oc) * OH + oy) * OW + ox];
                        }
                    }
                }
                gb[oc] += acc;
            }
        });

    const double* in = input.data();
    const double* kern = params.kernel.data();
    const double* bias = params.bias.data();
    double* o = out.data();
    const int N = in_s.n, IC = in_s.c, IH = in_s.h, IW = in_s.w;
    const int OC = out_s.c, OH = out_s.h, OW = out_s.w;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < N; ++n) {
        for (int oc = 0; oc < OC; ++oc) {
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) {
                    double acc = bias[oc];
                    for (int ic = 0; ic < IC; ++ic) {
                        for (int ky = 0; ky < k; ++ky) {
                            int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= IH) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= IW) continue;
                                acc += in[((static_cast<std::size_t>(n) * IC + ic) * IH + iy) * IW + ix] *
                                       kern[((static_cast<std::size_t>(oc) * IC + ic) * k + ky) * k + kx];
                            }
                        }
                    }
                    o[((static_cast<std::size_t>(n) * OC + oc) * OH + oy) * OW + ox] = acc;
                }
            }
        }
    }
    return out;
}

// --- batch_norm ---

Tensor batch_norm(const Tensor& input, BatchNormParams& params) {
    const Shape s = input.shape();
    if (s.c != params.channels()) {
        throw TensorError("batch_norm channel mismatch: input " + s.str() +
                          " vs " + std::to_string(params.channels()) +
                          " channels");
    }
    const std::size_t per_ch = static_cast<std::size_t>(s.n) * s.h * s.w;
    if (params.training && per_ch <= 1) {
        throw TensorError(
            "batch_norm in training mode needs batch*H*W > 1 per channel");
    }

    auto in_impl = input.impl();
    auto gamma_impl = params.gamma.impl();
    auto beta_impl = params.beta.impl();
    const int C = s.c;
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;

    std::vector<double> mean(C), inv_std(C);
    if (params.training) {
        const double* in = input.data();
        for (int c = 0; c < C; ++c) {
            double m = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const double* p = in + (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) m += p[i];
            }
            m /= static_cast<double>(per_ch);
            double var = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const double* p = in + (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - m;
                    var += d * d;
                }
            }
            var /= static_cast<double>(per_ch);
            mean[c] = m;
            inv_std[c] = 1.0 / std::sqrt(var + params.epsilon);
            // running stats track the unbiased variance
            const double unbiased =
                var * static_cast<double>(per_ch) / static_cast<double>(per_ch - 1);
            params.running_mean.data()[c] =
                (1.0 - params.momentum) * params.running_mean.data()[c] +
                params.momentum * m;
            params.running_var.data()[c] =
                (1.0 - params.momentum) * params.running_var.data()[c] +
                params.momentum * unbiased;
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = params.running_mean.data()[c];
            inv_std[c] = 1.0 / std::sqrt(params.running_var.data()[c] + params.epsilon);
        }
    }

    auto xhat = std::make_shared<std::vector<double>>(s.numel());
    {
        const double* in = input.data();
        double* xh = xhat->data();
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < C; ++c) {
                const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    xh[base + i] = (in[base + i] - mean[c]) * inv_std[c];
                }
            }
        }
    }

    const bool training = params.training;
    Tensor out = make_op_result(
        s, {in_impl, gamma_impl, beta_impl},
        [in_impl, gamma_impl, beta_impl, s, C, plane, per_ch, inv_std, xhat,
         training](Impl& self) {
            ensure_grad(*in_impl);
            ensure_grad(*gamma_impl);
            ensure_grad(*beta_impl);
            const double* gout = self.grad.data();
            const double* xh = xhat->data();
            const double* gamma = gamma_impl->data.data();
            for (int c = 0; c < C; ++c) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (int n = 0; n < s.n; ++n) {
                    const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum_g += gout[base + i];
                        sum_gx += gout[base + i] * xh[base + i];
                    }
                }
                gamma_impl->grad[c] += sum_gx;
                beta_impl->grad[c] += sum_g;
                const double scale_c = gamma[c] * inv_std[c];
                if (training) {
                    const double inv_n = 1.0 / static_cast<double>(per_ch);
                    for (int n = 0; n < s.n; ++n) {
                        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i) {
                            in_impl->grad[base + i] +=
                                scale_c * (gout[base + i] - inv_n * sum_g -
                                           xh[base + i] * inv_n * sum_gx);
                        }
                    }
                } else {
                    for (int n = 0; n < s.n; ++n) {
                        const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i) {
                            in_impl->grad[base + i] += scale_c * gout[base + i];
                        }
                    }
                }
            }
        });

    const double* gamma = params.gamma.data();
    const double* beta = params.beta.data();
    const double* xh = xhat->data();
    double* o = out.data();
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                o[base + i] = gamma[c] * xh[base + i] + beta[c];
            }
        }
    }
    return out;
}

// --- elementwise activations ---

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(const Tensor& input, Fwd fwd, Bwd bwd) {
    auto in_impl = input.impl();
    Tensor out = make_op_result(
        input.shape(), {in_impl}, [in_impl, bwd](Impl& self) {
            ensure_grad(*in_impl);
            for (std::size_t i = 0; i < self.data.size(); ++i) {
                in_impl->grad[i] +=
                    self.grad[i] * bwd(in_impl->data[i], self.data[i]);
            }
        });
    const double* in = input.data();
    double* o = out.data();
    for (std::size_t i = 0; i < input.numel(); ++i) o[i] = fwd(in[i]);
    return out;
}

}  // namespace

Tensor relu(const Tensor& input) {
    return elementwise_unary(
        input, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& input, double slope) {
    return elementwise_unary(
        input, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& input) {
    return elementwise_unary(
        input,
        [](double x) {
            // stable in both tails
            if (x >= 0.0) {
                return 1.0 / (1.0 + std::exp(-x));
            }
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor log_op(const Tensor& input) {
    return elementwise_unary(
        input, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor abs_op(const Tensor& input) {
    return elementwise_unary(
        input, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// --- pooling / upsampling ---

Tensor max_pool2(const Tensor& input) {
    const Shape s = input.shape();
    if (s.h % 2 || s.w % 2) {
        throw TensorError("max_pool2 requires even H and W, got " + s.str());
    }
    const Shape out_s{s.n, s.c, s.h / 2, s.w / 2};
    auto in_impl = input.impl();
    auto argmax = std::make_shared<std::vector<std::size_t>>(out_s.numel());

    Tensor out = make_op_result(out_s, {in_impl}, [in_impl, argmax](Impl& self) {
        ensure_grad(*in_impl);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            in_impl->grad[(*argmax)[i]] += self.grad[i];
        }
    });

    const double* in = input.data();
    double* o = out.data();
    std::size_t oi = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) *
                                     s.h * s.w;
            for (int oy = 0; oy < out_s.h; ++oy) {
                for (int ox = 0; ox < out_s.w; ++ox, ++oi) {
                    double best = -1e300;
                    std::size_t best_idx = 0;
                    // ties keep the first element in row-major order
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t idx =
                                base + static_cast<std::size_t>(2 * oy + dy) * s.w +
                                (2 * ox + dx);
                            if (in[idx] > best) {
                                best = in[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    o[oi] = best;
                    (*argmax)[oi] = best_idx;
                }
            }
        }
    }
    return out;
}

Tensor upsample2(const Tensor& input) {
    const Shape s = input.shape();
    const Shape out_s{s.n, s.c, s.h * 2, s.w * 2};
    auto in_impl = input.impl();

    Tensor out = make_op_result(out_s, {in_impl}, [in_impl, s, out_s](Impl& self) {
        ensure_grad(*in_impl);
        std::size_t ii = 0;
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) *
                                         out_s.h * out_s.w;
                for (int y = 0; y < s.h; ++y) {
                    for (int x = 0; x < s.w; ++x, ++ii) {
                        double acc = 0.0;
                        for (int dy = 0; dy < 2; ++dy) {
                            for (int dx = 0; dx < 2; ++dx) {
                                acc += self.grad[base +
                                                 static_cast<std::size_t>(2 * y + dy) * out_s.w +
                                                 (2 * x + dx)];
                            }
                        }
                        in_impl->grad[ii] += acc;
                    }
                }
            }
        }
    });

    const double* in = input.data();
    double* o = out.data();
    std::size_t ii = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) *
                                     out_s.h * out_s.w;
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x, ++ii) {
                    const double v = in[ii];
                    o[base + static_cast<std::size_t>(2 * y) * out_s.w + 2 * x] = v;
                    o[base + static_cast<std::size_t>(2 * y) * out_s.w + 2 * x + 1] = v;
                    o[base + static_cast<std::size_t>(2 * y + 1) * out_s.w + 2 * x] = v;
                    o[base + static_cast<std::size_t>(2 * y + 1) * out_s.w + 2 * x + 1] = v;
                }
            }
        }
    }
    return out;
}

// --- binary elementwise ---

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw TensorError(std::string(op) + " shape mismatch: " +
                          a.shape().str() + " vs " + b.shape().str());
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto ai = a.impl(), bi = b.impl();
    Tensor out = make_op_result(a.shape(), {ai, bi}, [ai, bi](Impl& self) {
        ensure_grad(*ai);
        ensure_grad(*bi);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ai->grad[i] += self.grad[i];
            bi->grad[i] += self.grad[i];
        }
    });
    const double* pa = a.data();
    const double* pb = b.data();
    double* o = out.data();
    for (std::size_t i = 0; i < a.numel(); ++i) o[i] = pa[i] + pb[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto ai = a.impl(), bi = b.impl();
    Tensor out = make_op_result(a.shape(), {ai, bi}, [ai, bi](Impl& self) {
        ensure_grad(*ai);
        ensure_grad(*bi);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ai->grad[i] += self.grad[i];
            bi->grad[i] -= self.grad[i];
        }
    });
    const double* pa = a.data();
    const double* pb = b.data();
    double* o = out.data();
    for (std::size_t i = 0; i < a.numel(); ++i) o[i] = pa[i] - pb[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto ai = a.impl(), bi = b.impl();
    Tensor out = make_op_result(a.shape(), {ai, bi}, [ai, bi](Impl& self) {
        ensure_grad(*ai);
        ensure_grad(*bi);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ai->grad[i] += self.grad[i] * bi->data[i];
            bi->grad[i] += self.grad[i] * ai->data[i];
        }
    });
    const double* pa = a.data();
    const double* pb = b.data();
    double* o = out.data();
    for (std::size_t i = 0; i < a.numel(); ++i) o[i] = pa[i] * pb[i];
    return out;
}

Tensor scale(const Tensor& a, double factor) {
    auto ai = a.impl();
    Tensor out = make_op_result(a.shape(), {ai}, [ai, factor](Impl& self) {
        ensure_grad(*ai);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            ai->grad[i] += self.grad[i] * factor;
        }
    });
    const double* pa = a.data();
    double* o = out.data();
    for (std::size_t i = 0; i < a.numel(); ++i) o[i] = pa[i] * factor;
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape sa = a.shape();
    const Shape sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw TensorError("concat_channels spatial mismatch: " + sa.str() +
                          " vs " + sb.str());
    }
    const Shape out_s{sa.n, sa.c + sb.c, sa.h, sa.w};
    auto ai = a.impl(), bi = b.impl();
    const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;

    Tensor out = make_op_result(out_s, {ai, bi}, [ai, bi, sa, sb, plane](Impl& self) {
        ensure_grad(*ai);
        ensure_grad(*bi);
        const std::size_t a_block = static_cast<std::size_t>(sa.c) * plane;
        const std::size_t b_block = static_cast<std::size_t>(sb.c) * plane;
        for (int n = 0; n < sa.n; ++n) {
            const double* g = self.grad.data() + static_cast<std::size_t>(n) * (a_block + b_block);
            double* ga = ai->grad.data() + static_cast<std::size_t>(n) * a_block;
            double* gb = bi->grad.data() + static_cast<std::size_t>(n) * b_block;
            for (std::size_t i = 0; i < a_block; ++i) ga[i] += g[i];
            for (std::size_t i = 0; i < b_block; ++i) gb[i] += g[a_block + i];
        }
    });

    const std::size_t a_block = static_cast<std::size_t>(sa.c) * plane;
    const std::size_t b_block = static_cast<std::size_t>(sb.c) * plane;
    for (int n = 0; n < sa.n; ++n) {
        double* o = out.data() + static_cast<std::size_t>(n) * (a_block + b_block);
        std::memcpy(o, a.data() + static_cast<std::size_t>(n) * a_block,
                    a_block * sizeof(double));
        std::memcpy(o + a_block, b.data() + static_cast<std::size_t>(n) * b_block,
                    b_block * sizeof(double));
    }
    return out;
}

// --- reductions ---

Tensor global_avg_pool(const Tensor& a) {
    const Shape s = a.shape();
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const double inv = 1.0 / static_cast<double>(plane);
    auto ai = a.impl();
    Tensor out = make_op_result({s.n, s.c, 1, 1}, {ai}, [ai, s, plane, inv](Impl& self) {
        ensure_grad(*ai);
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                const double g = self.grad[static_cast<std::size_t>(n) * s.c + c] * inv;
                double* gp = ai->grad.data() +
                             (static_cast<std::size_t>(n) * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) gp[i] += g;
            }
        }
    });
    const double* in = a.data();
    double* o = out.data();
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const double* p = in + (static_cast<std::size_t>(n) * s.c + c) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            o[static_cast<std::size_t>(n) * s.c + c] = acc * inv;
        }
    }
    return out;
}

Tensor sum_all(const Tensor& a) {
    auto ai = a.impl();
    Tensor out = make_op_result({1, 1, 1, 1}, {ai}, [ai](Impl& self) {
        ensure_grad(*ai);
        const double g = self.grad[0];
        for (double& v : ai->grad) v += g;
    });
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    out.data()[0] = acc;
    return out;
}

Tensor mean_all(const Tensor& a) {
    const double inv_n = 1.0 / static_cast<double>(a.numel());
    auto ai = a.impl();
    Tensor out = make_op_result({1, 1, 1, 1}, {ai}, [ai, inv_n](Impl& self) {
        ensure_grad(*ai);
        const double g = self.grad[0] * inv_n;
        for (double& v : ai->grad) v += g;
    });
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    out.data()[0] = acc * inv_n;
    return out;
}

Tensor mean_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mean_abs_diff");
    const double inv_n = 1.0 / static_cast<double>(a.numel());
    auto ai = a.impl(), bi = b.impl();
    Tensor out = make_op_result({1, 1, 1, 1}, {ai, bi}, [ai, bi, inv_n](Impl& self) {
        ensure_grad(*ai);
        ensure_grad(*bi);
        const double g = self.grad[0] * inv_n;
        for (std::size_t i = 0; i < ai->data.size(); ++i) {
            const double d = ai->data[i] - bi->data[i];
            const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            ai->grad[i] += g * sgn;
            bi->grad[i] -= g * sgn;
        }
    });
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.numel(); ++i) acc += std::fabs(pa[i] - pb[i]);
    out.data()[0] = acc * inv_n;
    return out;
}

// --- checkpoint I/O ---

namespace {

constexpr char kMagic[4] = {'L', 'F', 'P', 'F'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    if (!is) throw TensorError("checkpoint truncated while reading u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64_le(std::ostream& os, const double* vals, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &vals[i], 8);
        unsigned char buf[8];
        for (int j = 0; j < 8; ++j) buf[j] = static_cast<unsigned char>(bits >> (8 * j));
        os.write(reinterpret_cast<const char*>(buf), 8);
    }
}

void read_f64_le(std::istream& is, double* vals, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char buf[8];
        is.read(reinterpret_cast<char*>(buf), 8);
        if (!is) throw TensorError("checkpoint truncated while reading payload");
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(buf[j]) << (8 * j);
        std::memcpy(&vals[i], &bits, 8);
    }
}

}  // namespace

void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw TensorError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    for (const auto& p : params) {
        write_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const Shape s = p.tensor.shape();
        write_u32(os, static_cast<std::uint32_t>(s.n));
        write_u32(os, static_cast<std::uint32_t>(s.c));
        write_u32(os, static_cast<std::uint32_t>(s.h));
        write_u32(os, static_cast<std::uint32_t>(s.w));
        write_f64_le(os, p.tensor.data(), p.tensor.numel());
    }
    if (!os) throw TensorError("write failure on checkpoint: " + path);
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TensorError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw TensorError("bad checkpoint magic in " + path);
    }
    const std::uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw TensorError("unsupported checkpoint version " +
                          std::to_string(version));
    }
    std::vector<NamedTensor> out;
    while (true) {
        is.peek();
        if (is.eof()) break;
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw TensorError("checkpoint truncated in name");
        Shape s;
        s.n = static_cast<int>(read_u32(is));
        s.c = static_cast<int>(read_u32(is));
        s.h = static_cast<int>(read_u32(is));
        s.w = static_cast<int>(read_u32(is));
        Tensor t(s);
        read_f64_le(is, t.data(), t.numel());
        out.push_back({std::move(name), std::move(t)});
    }
    return out;
}

void load_checkpoint_into(const std::string& path,
                          std::vector<NamedTensor>& params) {
    auto loaded = read_checkpoint(path);
    for (auto& p : params) {
        bool found = false;
        for (auto& l : loaded) {
            if (l.name == p.name) {
                if (l.tensor.shape() != p.tensor.shape()) {
                    throw TensorError("checkpoint shape mismatch for " + p.name +
                                      ": " + l.tensor.shape().str() + " vs " +
                                      p.tensor.shape().str());
                }
                p.tensor.values() = l.tensor.values();
                found = true;
                break;
            }
        }
        if (!found) {
            throw TensorError("checkpoint missing parameter " + p.name);
        }
    }
}

}  // namespace lfe
