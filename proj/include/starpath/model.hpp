#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starpath/dataio.hpp"
#include "starpath/error.hpp"
#include "starpath/hash.hpp"
#include "starpath/numcore.hpp"
#include "starpath/problems.hpp"
#include "starpath/rng.hpp"

namespace starpath {

enum class Activation { relu, tanh };
enum class LossKind { mse, softmax_crossentropy };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
inline std::string to_string(LossKind l) {
    return l == LossKind::mse ? "mse" : "crossentropy";
}

/// Fully connected network [d_in, h_1, ..., h_m, C]; hidden layers use
/// `activation`, the output layer is linear (logits for crossentropy).
///
/// Parameters are flattened layer by layer: the weight matrix of layer l
/// (d_{l+1} x d_l, row-major, one row per output unit) followed by its bias.
struct MlpSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::relu;
    LossKind loss = LossKind::softmax_crossentropy;
    std::uint64_t init_seed = 0;

    void validate() const {
        if (layer_sizes.size() < 2) throw InputError("MlpSpec: need at least 2 layer sizes");
        for (auto s : layer_sizes)
            if (s == 0) throw InputError("MlpSpec: layer sizes must be positive");
    }

    std::size_t num_layers() const { return layer_sizes.size() - 1; }
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }

    std::size_t param_count() const {
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
            total += (layer_sizes[l] + 1) * layer_sizes[l + 1];
        return total;
    }

    /// Offset of layer l's weight block in the flat parameter vector.
    std::size_t layer_offset(std::size_t l) const {
        std::size_t off = 0;
        for (std::size_t i = 0; i < l; ++i) off += (layer_sizes[i] + 1) * layer_sizes[i + 1];
        return off;
    }

    void hash_into(Fnv1a& h) const {
        h.u64(layer_sizes.size());
        for (auto s : layer_sizes) h.u64(s);
        h.u64(static_cast<std::uint64_t>(activation)).u64(static_cast<std::uint64_t>(loss));
        h.u64(init_seed);
    }
};

/// Non-owning view of b samples. Crossentropy reads `labels`; mse reads
/// `targets` (b x C row-major) when present, otherwise one-hot labels.
struct Batch {
    std::span<const double> inputs;
    std::size_t rows = 0;
    std::span<const std::uint32_t> labels;
    std::span<const double> targets;

    static Batch of(const Dataset& ds, std::size_t first, std::size_t count) {
        Batch b;
        b.inputs = {ds.inputs.data() + first * ds.input_dim, count * ds.input_dim};
        b.rows = count;
        b.labels = {ds.labels.data() + first, count};
        return b;
    }
};

/// Glorot-uniform weights in [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases.
inline ParamVector init_params(const MlpSpec& spec) {
    spec.validate();
    ParamVector params(spec.param_count());
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
        const double s = std::sqrt(6.0 / static_cast<double>(in + out));
        CounterRng rng(spec.init_seed, Stream::init, l);
        for (std::size_t j = 0; j < in * out; ++j) params[off + j] = rng.uniform(-s, s);
        off += in * out + out;
    }
    return params;
}

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

class MlpPass {
public:
    MlpPass(const MlpSpec& spec, const ParamVector& params, const Batch& batch)
        : spec_(spec), params_(params), batch_(batch) {
        spec.validate();
        if (params.dim() != spec.param_count())
            throw InputError("MLP: parameter vector has " + std::to_string(params.dim()) +
                             " entries, spec needs " + std::to_string(spec.param_count()));
        if (batch.rows == 0) throw InputError("MLP: empty batch");
        if (batch.inputs.size() != batch.rows * spec.input_dim())
            throw InputError("MLP: batch inputs do not match the input layer width");
        const std::size_t C = spec.output_dim();
        if (spec.loss == LossKind::softmax_crossentropy || batch.targets.empty()) {
            if (batch.labels.size() != batch.rows)
                throw InputError("MLP: batch needs one class label per row");
            for (auto y : batch.labels)
                if (y >= C) throw InputError("MLP: class label out of range");
        } else if (batch.targets.size() != batch.rows * C) {
            throw InputError("MLP: mse targets must be rows x output width");
        }
        forward();
    }

    double loss() const {
        const auto& Z = acts_.back();
        const std::size_t b = batch_.rows, C = spec_.output_dim();
        double total = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            if (spec_.loss == LossKind::softmax_crossentropy) {
                const std::uint32_t y = batch_.labels[r];
                double m = Z(r, 0);
                for (std::size_t c = 1; c < C; ++c) m = std::max(m, Z(r, c));
                if (Z(r, y) == m) {
                    // log1p keeps the loss positive when the true class dominates.
                    double rest = 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        if (c != y) rest += std::exp(Z(r, c) - m);
                    total += std::log1p(rest);
                } else {
                    double sum = 0.0;
                    for (std::size_t c = 0; c < C; ++c) sum += std::exp(Z(r, c) - m);
                    total += m - Z(r, y) + std::log(sum);
                }
            } else {
                double sq = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    const double d = Z(r, c) - target(r, c);
                    sq += d * d;
                }
                total += 0.5 * sq;
            }
        }
        return total / static_cast<double>(b);
    }

    ParamVector gradient() const {
        const std::size_t L = spec_.num_layers();
        const std::size_t b = batch_.rows, C = spec_.output_dim();
        const double inv_b = 1.0 / static_cast<double>(b);

        RowMatrix delta = acts_.back();
        for (std::size_t r = 0; r < b; ++r) {
            if (spec_.loss == LossKind::softmax_crossentropy) {
                const double m = delta.row(r).maxCoeff();
                double sum = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    delta(r, c) = std::exp(delta(r, c) - m);
                    sum += delta(r, c);
                }
                for (std::size_t c = 0; c < C; ++c) delta(r, c) /= sum;
                delta(r, batch_.labels[r]) -= 1.0;
            } else {
                for (std::size_t c = 0; c < C; ++c) delta(r, c) -= target(r, c);
            }
        }
        delta *= inv_b;

        ParamVector grad(params_.dim());
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t in = spec_.layer_sizes[l], out = spec_.layer_sizes[l + 1];
            const std::size_t off = spec_.layer_offset(l);
            MatrixMap gW(grad.data() + off, out, in);
            if (l == 0)
                gW.noalias() = delta.transpose() * batch_inputs();
            else
                gW.noalias() = delta.transpose() * acts_[l - 1];
            Eigen::Map<Eigen::VectorXd> gb(grad.data() + off + in * out, out);
            gb = delta.colwise().sum().transpose();
            if (l == 0) break;
            RowMatrix back = delta * weights(l);
            const RowMatrix& H = acts_[l - 1];
            if (spec_.activation == Activation::relu)
                back = back.cwiseProduct((H.array() > 0.0).cast<double>().matrix());
            else
                back = back.cwiseProduct((1.0 - H.array().square()).matrix());
            delta = std::move(back);
        }
        return grad;
    }

private:
    ConstMatrixMap weights(std::size_t l) const {
        return {params_.data() + spec_.layer_offset(l), static_cast<Eigen::Index>(spec_.layer_sizes[l + 1]),
                static_cast<Eigen::Index>(spec_.layer_sizes[l])};
    }

    Eigen::Map<const Eigen::RowVectorXd> bias(std::size_t l) const {
        const std::size_t in = spec_.layer_sizes[l], out = spec_.layer_sizes[l + 1];
        return {params_.data() + spec_.layer_offset(l) + in * out, static_cast<Eigen::Index>(out)};
    }

    ConstMatrixMap batch_inputs() const {
        return {batch_.inputs.data(), static_cast<Eigen::Index>(batch_.rows),
                static_cast<Eigen::Index>(spec_.input_dim())};
    }

    double target(std::size_t r, std::size_t c) const {
        if (!batch_.targets.empty()) return batch_.targets[r * spec_.output_dim() + c];
        return batch_.labels[r] == c ? 1.0 : 0.0;
    }

    // acts_[l] is the output of layer l: activated for hidden layers, raw for the last.
    void forward() {
        const std::size_t L = spec_.num_layers();
        acts_.resize(L);
        for (std::size_t l = 0; l < L; ++l) {
            RowMatrix Z = l == 0 ? RowMatrix(batch_inputs() * weights(l).transpose())
                                 : RowMatrix(acts_[l - 1] * weights(l).transpose());
            Z.rowwise() += bias(l);
            if (l + 1 < L) {
                if (spec_.activation == Activation::relu)
                    Z = Z.cwiseMax(0.0);
                else
                    Z = Z.array().tanh().matrix();
            }
            if (!Z.allFinite()) throw NumericError("MLP: non-finite activation", l);
            acts_[l] = std::move(Z);
        }
    }

    const MlpSpec& spec_;
    const ParamVector& params_;
    const Batch& batch_;
    std::vector<RowMatrix> acts_;
};

}  // namespace detail

/// Mean per-sample loss over the batch. Crossentropy uses a max-shifted softmax;
/// mse is 0.5 * ||output - target||^2 per sample.
inline double batch_loss(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    return detail::MlpPass(spec, params, batch).loss();
}

/// Exact gradient of batch_loss by backpropagation; relu'(0) = 0.
inline ParamVector batch_grad(const MlpSpec& spec, const ParamVector& params, const Batch& batch) {
    return detail::MlpPass(spec, params, batch).gradient();
}

inline std::pair<double, ParamVector> batch_loss_grad(const MlpSpec& spec, const ParamVector& params,
                                                      const Batch& batch) {
    detail::MlpPass pass(spec, params, batch);
    return {pass.loss(), pass.gradient()};
}

/// Finite sum whose component i is the loss on the i-th contiguous block of
/// `batch_size` samples. Reshuffling permutes blocks, never their contents.
class MlpProblem final : public FiniteSumProblem {
public:
    MlpProblem(MlpSpec spec, std::shared_ptr<const Dataset> data, std::size_t batch_size)
        : spec_(std::move(spec)), data_(std::move(data)), batch_size_(batch_size) {
        spec_.validate();
        if (!data_) throw InputError("MlpProblem: dataset required");
        if (batch_size_ == 0 || data_->count % batch_size_ != 0)
            throw InputError("MlpProblem: batch_size " + std::to_string(batch_size_) +
                             " does not divide dataset size " + std::to_string(data_->count));
        if (data_->input_dim != spec_.input_dim())
            throw InputError("MlpProblem: dataset input width " + std::to_string(data_->input_dim) +
                             " does not match input layer " + std::to_string(spec_.input_dim()));
        if (data_->num_classes > spec_.output_dim())
            throw InputError("MlpProblem: dataset has more classes than output units");
        Fnv1a h;
        h.str("mlp");
        spec_.hash_into(h);
        h.u64(data_->checksum).u64(batch_size_);
        fingerprint_ = h.value();
    }

    std::uint64_t n() const override { return data_->count / batch_size_; }
    std::size_t dim() const override { return spec_.param_count(); }
    std::string name() const override { return "mlp"; }
    std::uint64_t fingerprint() const override { return fingerprint_; }

    const MlpSpec& spec() const { return spec_; }
    const Dataset& dataset() const { return *data_; }
    std::size_t batch_size() const { return batch_size_; }

    Batch block(std::uint64_t i) const { return Batch::of(*data_, i * batch_size_, batch_size_); }
    Batch whole() const { return Batch::of(*data_, 0, data_->count); }

protected:
    double value(std::uint64_t i, const ParamVector& x) const override {
        return batch_loss(spec_, x, block(i));
    }
    ParamVector gradient(std::uint64_t i, const ParamVector& x) const override {
        return batch_grad(spec_, x, block(i));
    }
    std::pair<double, ParamVector> value_and_gradient(std::uint64_t i,
                                                      const ParamVector& x) const override {
        return batch_loss_grad(spec_, x, block(i));
    }

private:
    MlpSpec spec_;
    std::shared_ptr<const Dataset> data_;
    std::size_t batch_size_;
    std::uint64_t fingerprint_ = 0;
};

inline std::unique_ptr<MlpProblem> as_finite_sum(const MlpSpec& spec,
                                                 std::shared_ptr<const Dataset> dataset,
                                                 std::size_t batch_size) {
    return std::make_unique<MlpProblem>(spec, std::move(dataset), batch_size);
}

}  // namespace starpath
