#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trajdiff/network.hpp"

namespace trajdiff {

/// A trainable model of f(x, sigma) = sigma * score(x, sigma) over [dim, B] column batches.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual std::size_t param_count() const = 0;
    virtual std::size_t input_dim() const = 0;
    virtual void init(std::uint64_t seed, std::span<float> w) const = 0;

    /// f for each column of x at the matching entry of sigma.
    virtual Eigen::MatrixXf forward(std::span<const float> w, const Eigen::MatrixXf& x,
                                    const Eigen::VectorXf& sigma, Tape<float>* tape = nullptr) const = 0;

    /// Adds d(loss)/dw given d(loss)/df; consumes the tape of the matching forward.
    virtual void backward(std::span<const float> w, Tape<float>& tape, const Eigen::MatrixXf& grad_f,
                          std::span<float> grad_w) const = 0;
};

/// The encoder-decoder network; sigma enters only through s = f / sigma.
class UNetScoreModel final : public ScoreModel {
public:
    explicit UNetScoreModel(NetworkConfig config) : net_(std::move(config)) {}

    const ScoreNet<float>& net() const { return net_; }
    std::size_t param_count() const override { return net_.param_count(); }
    std::size_t input_dim() const override { return net_.config().input_dim(); }
    void init(std::uint64_t seed, std::span<float> w) const override { init_uniform(net_.layout(), seed, w); }

    Eigen::MatrixXf forward(std::span<const float> w, const Eigen::MatrixXf& x, const Eigen::VectorXf& sigma,
                            Tape<float>* tape = nullptr) const override;
    void backward(std::span<const float> w, Tape<float>& tape, const Eigen::MatrixXf& grad_f,
                  std::span<float> grad_w) const override;

private:
    ScoreNet<float> net_;
};

/// Scalar MLP for one-dimensional data: inputs (x, log sigma), two SiLU hidden
/// layers, output a denoised estimate D; f = (D - x) / sigma.
class ToyScoreModel final : public ScoreModel {
public:
    explicit ToyScoreModel(std::size_t hidden = 64) : hidden_(hidden) {}

    std::size_t param_count() const override;
    std::size_t input_dim() const override { return 1; }
    void init(std::uint64_t seed, std::span<float> w) const override;

    Eigen::MatrixXf forward(std::span<const float> w, const Eigen::MatrixXf& x, const Eigen::VectorXf& sigma,
                            Tape<float>* tape = nullptr) const override;
    void backward(std::span<const float> w, Tape<float>& tape, const Eigen::MatrixXf& grad_f,
                  std::span<float> grad_w) const override;

    std::vector<TensorSpec> layout() const;

private:
    std::size_t hidden_;
};

}  // namespace trajdiff
