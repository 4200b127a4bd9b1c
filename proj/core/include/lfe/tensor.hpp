#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfe {

struct Shape {
    int n = 1;  // batch
    int c = 1;  // channels
    int h = 1;
    int w = 1;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    std::string str() const;
};

class TensorError : public std::runtime_error {
public:
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where finite ones were required (NaN gradients,
/// diverged losses).
class NumericError : public TensorError {
public:
    explicit NumericError(const std::string& msg) : TensorError(msg) {}
};

/// Rank-4 tensor (batch, channels, height, width) of f64 with an optional
/// reverse-mode gradient tape. Ops record parents and a backward closure;
/// the tape is rebuilt on every forward pass.
class Tensor {
public:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
        bool has_tape = false;  // interior node of a recorded graph
        std::vector<std::shared_ptr<Impl>> parents;
        std::function<void(Impl&)> backward_fn;
    };

    Tensor() : impl_(std::make_shared<Impl>()) {
        impl_->data.resize(1, 0.0);
    }
    explicit Tensor(Shape s, bool requires_grad = false);

    static Tensor zeros(Shape s, bool requires_grad = false);
    static Tensor full(Shape s, double value, bool requires_grad = false);
    static Tensor from_data(Shape s, std::vector<double> values,
                            bool requires_grad = false);
    static Tensor randn(Shape s, std::mt19937_64& rng, double stddev,
                        bool requires_grad = false);

    const Shape& shape() const { return impl_->shape; }
    std::size_t numel() const { return impl_->shape.numel(); }
    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& values() { return impl_->data; }
    const std::vector<double>& values() const { return impl_->data; }

    double& at(int n, int c, int y, int x);
    double at(int n, int c, int y, int x) const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v);

    /// Gradient buffer; valid after backward() for tensors with
    /// requires_grad set.
    const std::vector<double>& grad() const { return impl_->grad; }
    std::vector<double>& grad() { return impl_->grad; }
    void zero_grad();

    bool is_scalar() const {
        const Shape& s = impl_->shape;
        return s.n == 1 && s.c == 1 && s.h == 1 && s.w == 1;
    }
    double item() const;

    void check_finite(const std::string& context) const;

    std::shared_ptr<Impl> impl() const { return impl_; }

private:
    std::shared_ptr<Impl> impl_;
    friend Tensor make_op_result(Shape, std::vector<std::shared_ptr<Impl>>,
                                 std::function<void(Impl&)>);
};

/// Scoped guard that disables tape recording (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

struct ConvParams {
    Tensor kernel;  // (out_ch, in_ch, k, k)
    Tensor bias;    // (1, out_ch, 1, 1)
    int stride = 1;
    int padding = 0;

    int out_channels() const { return kernel.shape().n; }
    int in_channels() const { return kernel.shape().c; }
    int kernel_size() const { return kernel.shape().h; }
};

/// Makes a ConvParams with He-normal kernel init and zero bias.
ConvParams make_conv(int in_ch, int out_ch, int k, int stride, int padding,
                     std::mt19937_64& rng);

struct BatchNormParams {
    Tensor gamma;         // (1, C, 1, 1)
    Tensor beta;          // (1, C, 1, 1)
    Tensor running_mean;  // (1, C, 1, 1), not trained
    Tensor running_var;   // (1, C, 1, 1), not trained
    double epsilon = 1e-5;
    double momentum = 0.1;
    bool training = true;

    int channels() const { return gamma.shape().c; }
};

BatchNormParams make_batch_norm(int channels);

// --- operator set used by the networks ---

Tensor conv2d(const Tensor& input, ConvParams& params);
Tensor batch_norm(const Tensor& input, BatchNormParams& params);
Tensor relu(const Tensor& input);
Tensor leaky_relu(const Tensor& input, double slope);
Tensor sigmoid(const Tensor& input);
Tensor max_pool2(const Tensor& input);
Tensor upsample2(const Tensor& input);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor log_op(const Tensor& a);
Tensor abs_op(const Tensor& a);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor global_avg_pool(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mean_abs_diff(const Tensor& a, const Tensor& b);

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// requires_grad tensor reachable on the tape; repeated calls without
/// zero_grad accumulate.
void backward(const Tensor& loss);

// --- checkpoint container ---

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Flat binary container: magic "LFPF", version u32, then per-parameter
/// records (u32 name length, UTF-8 name, shape as four u32, little-endian
/// f64 payload). Bit-exact round-trip.
void write_checkpoint(const std::string& path,
                      const std::vector<NamedTensor>& params);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

/// Loads values by name into an existing parameter list; every name must be
/// present with a matching shape.
void load_checkpoint_into(const std::string& path,
                          std::vector<NamedTensor>& params);

}  // namespace lfe
