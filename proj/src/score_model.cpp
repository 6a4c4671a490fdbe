#include "trajdiff/score_model.hpp"

#include <cmath>
#include <stdexcept>

#include "trajdiff/errors.hpp"

namespace trajdiff {

Eigen::MatrixXf UNetScoreModel::forward(std::span<const float> w, const Eigen::MatrixXf& x,
                                        const Eigen::VectorXf& sigma, Tape<float>* tape) const
{
    if (sigma.size() != x.cols()) throw std::invalid_argument("one sigma per column required");
    if ((sigma.array() <= 0.0f).any()) throw std::invalid_argument("sigma must be positive");
    return net_.forward(w, x, tape);
}

void UNetScoreModel::backward(std::span<const float> w, Tape<float>& tape, const Eigen::MatrixXf& grad_f,
                              std::span<float> grad_w) const
{
    net_.backward(w, tape, grad_f, grad_w);
}

namespace {

Eigen::ArrayXXf sigmoid(const Eigen::ArrayXXf& a) { return 1.0f / (1.0f + (-a).exp()); }

}  // namespace

std::vector<TensorSpec> ToyScoreModel::layout() const
{
    std::vector<TensorSpec> out;
    std::size_t off = 0;
    auto add = [&](const char* name, std::size_t rows, std::size_t cols, std::size_t fan_in) {
        out.push_back({name, off, rows, cols, fan_in});
        off += rows * cols;
    };
    add("l1.weight", hidden_, 2, 2);
    add("l1.bias", hidden_, 1, 2);
    add("l2.weight", hidden_, hidden_, hidden_);
    add("l2.bias", hidden_, 1, hidden_);
    add("l3.weight", 1, hidden_, hidden_);
    add("l3.bias", 1, 1, hidden_);
    return out;
}

std::size_t ToyScoreModel::param_count() const { return 4 * hidden_ + hidden_ * hidden_ + hidden_ + 1; }

void ToyScoreModel::init(std::uint64_t seed, std::span<float> w) const { init_uniform(layout(), seed, w); }

Eigen::MatrixXf ToyScoreModel::forward(std::span<const float> w, const Eigen::MatrixXf& x,
                                       const Eigen::VectorXf& sigma, Tape<float>* tape) const
{
    if (x.rows() != 1 || sigma.size() != x.cols()) throw std::invalid_argument("toy model takes [1, B] inputs");
    if (w.size() != param_count()) throw std::invalid_argument("parameter vector has the wrong length");
    const auto h = static_cast<Eigen::Index>(hidden_);
    const float* p = w.data();
    const Eigen::Map<const Eigen::MatrixXf> w1(p, h, 2);
    const Eigen::Map<const Eigen::VectorXf> b1(p + 2 * h, h);
    const Eigen::Map<const Eigen::MatrixXf> w2(p + 3 * h, h, h);
    const Eigen::Map<const Eigen::VectorXf> b2(p + 3 * h + h * h, h);
    const Eigen::Map<const Eigen::MatrixXf> w3(p + 4 * h + h * h, 1, h);
    const float b3 = p[5 * h + h * h];

    Eigen::MatrixXf in(2, x.cols());
    in.row(0) = x;
    in.row(1) = sigma.transpose().array().log().matrix();
    Eigen::MatrixXf z1 = w1 * in;
    z1.colwise() += b1;
    const Eigen::MatrixXf a1 = (z1.array() * sigmoid(z1.array())).matrix();
    Eigen::MatrixXf z2 = w2 * a1;
    z2.colwise() += b2;
    const Eigen::MatrixXf a2 = (z2.array() * sigmoid(z2.array())).matrix();
    Eigen::MatrixXf d = w3 * a2;
    d.array() += b3;
    Eigen::MatrixXf f = ((d - x).array() / sigma.transpose().array()).matrix();
    if (!f.allFinite()) throw NonFiniteError("toy model produced a non-finite output");
    if (tape) {
        tape->push_back(in);
        tape->push_back(z1);
        tape->push_back(a1);
        tape->push_back(z2);
        tape->push_back(a2);
        tape->push_back(sigma.transpose());
    }
    return f;
}

void ToyScoreModel::backward(std::span<const float> w, Tape<float>& tape, const Eigen::MatrixXf& grad_f,
                             std::span<float> grad_w) const
{
    if (tape.size() != 6) throw std::logic_error("toy tape has the wrong length");
    const auto h = static_cast<Eigen::Index>(hidden_);
    const float* p = w.data();
    float* g = grad_w.data();
    const Eigen::Map<const Eigen::MatrixXf> w2(p + 3 * h, h, h);
    const Eigen::Map<const Eigen::MatrixXf> w3(p + 4 * h + h * h, 1, h);
    const Eigen::MatrixXf& in = tape[0];
    const Eigen::MatrixXf& z1 = tape[1];
    const Eigen::MatrixXf& a1 = tape[2];
    const Eigen::MatrixXf& z2 = tape[3];
    const Eigen::MatrixXf& a2 = tape[4];
    const Eigen::MatrixXf& sig = tape[5];

    const Eigen::MatrixXf gd = (grad_f.array() / sig.array()).matrix();  // d f / d D = 1 / sigma
    Eigen::Map<Eigen::MatrixXf>(g + 4 * h + h * h, 1, h).noalias() += gd * a2.transpose();
    g[5 * h + h * h] += gd.sum();
    auto silu_grad = [](const Eigen::MatrixXf& z) -> Eigen::ArrayXXf {
        const Eigen::ArrayXXf s = sigmoid(z.array());
        return s * (1.0f + z.array() * (1.0f - s));
    };
    const Eigen::MatrixXf gz2 = ((w3.transpose() * gd).array() * silu_grad(z2)).matrix();
    Eigen::Map<Eigen::MatrixXf>(g + 3 * h, h, h).noalias() += gz2 * a1.transpose();
    Eigen::Map<Eigen::VectorXf>(g + 3 * h + h * h, h) += Eigen::VectorXf(gz2.rowwise().sum());
    const Eigen::MatrixXf gz1 = ((w2.transpose() * gz2).array() * silu_grad(z1)).matrix();
    Eigen::Map<Eigen::MatrixXf>(g, h, 2).noalias() += gz1 * in.transpose();
    Eigen::Map<Eigen::VectorXf>(g + 2 * h, h) += Eigen::VectorXf(gz1.rowwise().sum());
    tape.clear();
}

}  // namespace trajdiff
