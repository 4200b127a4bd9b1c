#include "lfe/gradcheck.hpp"

#include "lfe/discriminator.hpp"
#include "lfe/generator.hpp"

#include <algorithm>
#include <cmath>

namespace lfe {

double max_gradient_error(const std::function<Tensor()>& loss_fn,
                          std::vector<Tensor>& params, double h,
                          int max_samples, std::uint64_t sample_seed) {
    for (auto& p : params) p.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(p.grad());

    std::mt19937_64 rng(sample_seed);
    double max_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        const std::size_t n = p.numel();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        if (static_cast<int>(n) > max_samples) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(max_samples);
        }
        for (std::size_t j : idx) {
            const double saved = p.data()[j];
            p.data()[j] = saved + h;
            const double f_plus = loss_fn().item();
            p.data()[j] = saved - h;
            const double f_minus = loss_fn().item();
            p.data()[j] = saved;
            const double fd = (f_plus - f_minus) / (2.0 * h);
            const double a = analytic[pi].empty() ? 0.0 : analytic[pi][j];
            const double err =
                std::fabs(a - fd) / std::max({1.0, std::fabs(a), std::fabs(fd)});
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

namespace {

// Random tensor with every element at least `margin` from zero, keeping
// finite differences away from activation kinks.
Tensor randn_margin(Shape s, std::mt19937_64& rng, double margin) {
    Tensor t = Tensor::randn(s, rng, 1.0, true);
    for (double& v : t.values()) {
        if (std::fabs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
    }
    return t;
}

Tensor squared_sum(const Tensor& t) { return sum_all(mul(t, t)); }

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(int seeds, double tol_ops,
                                                 double tol_nets) {
    std::vector<GradCheckReport> reports;
    auto record = [&](const std::string& name, double err, double tol) {
        for (auto& r : reports) {
            if (r.name == name) {
                r.max_err = std::max(r.max_err, err);
                r.pass = r.max_err <= tol;
                return;
            }
        }
        reports.push_back({name, err, tol, err <= tol});
    };

    for (int seed = 0; seed < seeds; ++seed) {
        std::mt19937_64 rng(0x5eedULL + seed);

        {  // conv2d w.r.t. input, kernel and bias
            Tensor x = Tensor::randn({1, 2, 5, 5}, rng, 1.0, true);
            ConvParams conv = make_conv(2, 3, 3, 1, 1, rng);
            std::vector<Tensor> params{x, conv.kernel, conv.bias};
            record("conv2d",
                   max_gradient_error(
                       [&] { return squared_sum(conv2d(x, conv)); }, params,
                       1e-5, 64, seed),
                   tol_ops);
        }
        {  // batch_norm, training mode
            Tensor x = Tensor::randn({2, 3, 4, 4}, rng, 1.0, true);
            BatchNormParams bn = make_batch_norm(3);
            bn.training = true;
            std::vector<Tensor> params{x, bn.gamma, bn.beta};
            record("batch_norm",
                   max_gradient_error(
                       [&] { return squared_sum(batch_norm(x, bn)); }, params,
                       1e-5, 64, seed),
                   tol_ops);
        }
        {
            Tensor x = randn_margin({1, 2, 4, 4}, rng, 1e-2);
            std::vector<Tensor> params{x};
            record("relu",
                   max_gradient_error([&] { return squared_sum(relu(x)); },
                                      params, 1e-5, 64, seed),
                   tol_ops);
            record("leaky_relu",
                   max_gradient_error(
                       [&] { return squared_sum(leaky_relu(x, 0.2)); }, params,
                       1e-5, 64, seed),
                   tol_ops);
            record("sigmoid",
                   max_gradient_error([&] { return squared_sum(sigmoid(x)); },
                                      params, 1e-5, 64, seed),
                   tol_ops);
        }
        {
            Tensor x = Tensor::randn({1, 1, 6, 6}, rng, 1.0, true);
            std::vector<Tensor> params{x};
            record("max_pool2",
                   max_gradient_error(
                       [&] { return squared_sum(max_pool2(x)); }, params, 1e-5,
                       64, seed),
                   tol_ops);
            record("upsample2",
                   max_gradient_error(
                       [&] { return squared_sum(upsample2(x)); }, params, 1e-5,
                       64, seed),
                   tol_ops);
        }
        {
            Tensor a = Tensor::randn({1, 2, 3, 3}, rng, 1.0, true);
            Tensor b = Tensor::randn({1, 2, 3, 3}, rng, 1.0, true);
            std::vector<Tensor> params{a, b};
            record("add",
                   max_gradient_error([&] { return squared_sum(add(a, b)); },
                                      params, 1e-5, 64, seed),
                   tol_ops);
            record("sub",
                   max_gradient_error([&] { return squared_sum(sub(a, b)); },
                                      params, 1e-5, 64, seed),
                   tol_ops);
            record("mul",
                   max_gradient_error([&] { return squared_sum(mul(a, b)); },
                                      params, 1e-5, 64, seed),
                   tol_ops);
            record("concat_channels",
                   max_gradient_error(
                       [&] { return squared_sum(concat_channels(a, b)); },
                       params, 1e-5, 64, seed),
                   tol_ops);
            record("mean_abs_diff",
                   max_gradient_error([&] { return mean_abs_diff(a, b); },
                                      params, 1e-5, 64, seed),
                   tol_ops);
            record("global_avg_pool",
                   max_gradient_error(
                       [&] { return squared_sum(global_avg_pool(a)); }, params,
                       1e-5, 64, seed),
                   tol_ops);
        }
        {  // log over strictly positive inputs
            Tensor x = Tensor::randn({1, 1, 4, 4}, rng, 1.0, true);
            for (double& v : x.values()) v = std::fabs(v) + 0.5;
            std::vector<Tensor> params{x};
            record("log",
                   max_gradient_error([&] { return sum_all(log_op(x)); },
                                      params, 1e-5, 64, seed),
                   tol_ops);
        }
        {  // miniature generator (shallow so the deepest feature map keeps
           // enough elements for stable batch-norm statistics), L1 loss
            GeneratorParams gen = make_generator({2, 2, {}}, 0x9e1ceULL + seed);
            gen.set_training(true);
            Tensor x = Tensor::randn({2, 1, 16, 16}, rng, 0.5, true);
            // target kept outside (0,1) so the L1 term never sits on the
            // |.| kink against the sigmoid-bounded output
            Tensor target = Tensor::randn({2, 1, 16, 16}, rng, 0.25);
            for (double& v : target.values()) v = -0.5 - std::fabs(v);
            std::vector<Tensor> params{x};
            for (auto& p : gen.named_parameters()) params.push_back(p.tensor);
            record("generator",
                   max_gradient_error(
                       [&] {
                           return mean_abs_diff(generator_forward(x, gen),
                                                target);
                       },
                       params, 1e-5, 8, seed),
                   tol_nets);
        }
        {  // miniature discriminator
            DiscriminatorParams disc =
                make_discriminator({2, 4, 128, 0.2}, 0xd15cULL + seed);
            disc.set_training(true);
            Tensor x = Tensor::randn({2, 2, 16, 16}, rng, 0.5, true);
            std::vector<Tensor> params{x};
            for (auto& p : disc.named_parameters()) params.push_back(p.tensor);
            record("discriminator",
                   max_gradient_error(
                       [&] {
                           Tensor score = discriminator_forward(x, disc);
                           Tensor eps = Tensor::full(score.shape(), 1e-12);
                           return scale(sum_all(log_op(add(score, eps))), -1.0);
                       },
                       params, 1e-5, 8, seed),
                   tol_nets);
        }
    }
    return reports;
}

}  // namespace lfe
