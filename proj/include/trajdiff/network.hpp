#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajdiff/io.hpp"

namespace trajdiff {

/// Encoder-decoder over a [1, 6, n] grid. Level l has base_width * multipliers[l]
/// channels at width n / 2^l; the bottom level is l = depth.
struct NetworkConfig {
    std::string preset = "S1";
    std::size_t base_width = 8;
    std::size_t depth = 3;
    std::vector<std::size_t> multipliers{1, 2, 4, 4};
    std::size_t n = 16;
    std::size_t height = 6;

    /// S1..S4 have base widths 8, 16, 32, 64.
    static NetworkConfig from_preset(std::string_view preset, std::size_t n);

    /// Throws std::invalid_argument unless n is divisible by 2^depth and the
    /// multiplier list has depth + 1 entries.
    void validate() const;
    std::size_t channels(std::size_t level) const { return base_width * multipliers.at(level); }
    std::size_t width(std::size_t level) const { return n >> level; }
    std::size_t input_dim() const { return height * n; }
};

json to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const json& j);

/// A named slice of the flat parameter vector. Conv weights are column-major
/// [c_out, 9 c_in] with column (kh * 3 + kw) * c_in + c; biases are [c_out, 1].
struct TensorSpec {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t fan_in = 0;

    std::size_t size() const { return rows * cols; }
};

json to_json(const std::vector<TensorSpec>& layout);

std::vector<TensorSpec> parameter_layout(const NetworkConfig& config);
std::size_t count_params(const NetworkConfig& config);

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every tensor, biases included.
void init_uniform(const std::vector<TensorSpec>& layout, std::uint64_t seed, std::span<float> out);

/// Saved activations for one forward pass, consumed by backward.
template <typename S>
using Tape = std::vector<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>>;

/// The unconditional network f. Inputs and outputs are [6 n, B] column batches
/// (one example per column, row-major [6, n] within a column).
template <typename S>
class ScoreNet {
public:
    using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

    explicit ScoreNet(NetworkConfig config);

    const NetworkConfig& config() const { return config_; }
    const std::vector<TensorSpec>& layout() const { return layout_; }
    std::size_t param_count() const { return count_; }

    /// Throws std::invalid_argument on a shape mismatch and NonFiniteError if the
    /// output is not finite.
    Matrix forward(std::span<const S> w, const Matrix& x, Tape<S>* tape = nullptr) const;

    /// Adds d(loss)/dw to grad_w given d(loss)/d(output). Consumes the tape.
    void backward(std::span<const S> w, Tape<S>& tape, const Matrix& grad_out, std::span<S> grad_w) const;

private:
    struct Conv {
        std::size_t w = 0, b = 0, ci = 0, co = 0, stride = 1;
    };
    struct ResBlock {
        Conv c1, c2;
    };

    Matrix conv(std::span<const S> w, const Conv& c, const Matrix& in, std::size_t batch, std::size_t width,
                Tape<S>* tape) const;
    Matrix conv_back(std::span<const S> w, const Conv& c, Tape<S>& tape, const Matrix& g, std::size_t batch,
                     std::size_t width, std::span<S> grad_w) const;
    Matrix res(std::span<const S> w, const ResBlock& r, const Matrix& in, std::size_t batch, std::size_t width,
               Tape<S>* tape) const;
    Matrix res_back(std::span<const S> w, const ResBlock& r, Tape<S>& tape, const Matrix& g, std::size_t batch,
                    std::size_t width, std::span<S> grad_w) const;

    NetworkConfig config_;
    std::vector<TensorSpec> layout_;
    std::size_t count_ = 0;
    Conv in_, out_;
    std::vector<ResBlock> enc_, dec_;
    std::vector<Conv> down_, up_, merge_;
    ResBlock mid_;
};

extern template class ScoreNet<float>;
extern template class ScoreNet<double>;

}  // namespace trajdiff
