#include "trajdiff/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "trajdiff/errors.hpp"
#include "trajdiff/rng.hpp"

namespace trajdiff {

NetworkConfig NetworkConfig::from_preset(std::string_view preset, std::size_t n)
{
    NetworkConfig c;
    c.preset = std::string(preset);
    if (preset == "S1") c.base_width = 8;
    else if (preset == "S2") c.base_width = 16;
    else if (preset == "S3") c.base_width = 32;
    else if (preset == "S4") c.base_width = 64;
    else throw std::invalid_argument("unknown preset '" + std::string(preset) + "' (expected S1..S4)");
    c.n = n;
    c.validate();
    return c;
}

void NetworkConfig::validate() const
{
    if (base_width == 0 || height == 0) throw std::invalid_argument("network width and height must be positive");
    if (multipliers.size() != depth + 1) throw std::invalid_argument("need depth + 1 channel multipliers");
    for (auto m : multipliers)
        if (m == 0) throw std::invalid_argument("channel multipliers must be positive");
    if (n == 0 || n % 2 != 0 || n % (std::size_t{1} << depth) != 0)
        throw std::invalid_argument("n must be even and divisible by 2^depth");
}

json to_json(const NetworkConfig& c)
{
    return {{"preset", c.preset}, {"base_width", c.base_width}, {"depth", c.depth},
            {"multipliers", c.multipliers}, {"n", c.n}, {"height", c.height}};
}

NetworkConfig network_config_from_json(const json& j)
{
    NetworkConfig c;
    if (j.contains("preset") && !j.contains("base_width"))
        c = NetworkConfig::from_preset(j.at("preset").get<std::string>(), j.value("n", c.n));
    c.preset = j.value("preset", c.preset);
    c.base_width = j.value("base_width", c.base_width);
    c.depth = j.value("depth", c.depth);
    c.multipliers = j.value("multipliers", c.multipliers);
    c.n = j.value("n", c.n);
    c.height = j.value("height", c.height);
    c.validate();
    return c;
}

json to_json(const std::vector<TensorSpec>& layout)
{
    json out = json::array();
    for (const auto& t : layout)
        out.push_back({{"name", t.name}, {"offset", t.offset}, {"shape", {t.rows, t.cols}}});
    return out;
}

std::vector<TensorSpec> parameter_layout(const NetworkConfig& config) { return ScoreNet<float>(config).layout(); }

std::size_t count_params(const NetworkConfig& config) { return ScoreNet<float>(config).param_count(); }

void init_uniform(const std::vector<TensorSpec>& layout, std::uint64_t seed, std::span<float> out)
{
    std::mt19937_64 rng(derive_seed(seed, stream::kInit, 0));
    for (const auto& t : layout) {
        if (t.offset + t.size() > out.size()) throw std::invalid_argument("parameter buffer too small");
        const float bound = 1.0f / std::sqrt(static_cast<float>(t.fan_in));
        std::uniform_real_distribution<float> u(-bound, bound);
        for (std::size_t i = 0; i < t.size(); ++i) out[t.offset + i] = u(rng);
    }
}

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
Mat<S> silu(const Mat<S>& x)
{
    return (x.array() / (S(1) + (-x.array()).exp())).matrix();
}

// g * d silu(x) / dx
template <typename S>
Mat<S> silu_back(const Mat<S>& x, const Mat<S>& g)
{
    const auto sig = (S(1) / (S(1) + (-x.array()).exp())).eval();
    return (g.array() * sig * (S(1) + x.array() * (S(1) - sig))).matrix();
}

// [ci, B H win] -> [9 ci, B H wout], zero padding of one on each side.
template <typename S>
void im2col(const Mat<S>& in, std::size_t ci, std::size_t rows, std::size_t win, std::size_t stride, Mat<S>& cols)
{
    const std::size_t wout = win / stride;
    const std::size_t height = rows;
    const std::size_t batch = static_cast<std::size_t>(in.cols()) / (height * win);
    cols.resize(static_cast<Eigen::Index>(9 * ci), static_cast<Eigen::Index>(batch * height * wout));
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < height; ++h) {
            for (std::size_t wo = 0; wo < wout; ++wo) {
                const auto j = static_cast<Eigen::Index>((b * height + h) * wout + wo);
                for (std::size_t kh = 0; kh < 3; ++kh) {
                    const bool row_in = h + kh >= 1 && h + kh - 1 < height;
                    const std::size_t hi = h + kh - 1;
                    for (std::size_t kw = 0; kw < 3; ++kw) {
                        const std::size_t wpos = wo * stride + kw;
                        auto dst = cols.col(j).segment(static_cast<Eigen::Index>((kh * 3 + kw) * ci),
                                                       static_cast<Eigen::Index>(ci));
                        if (!row_in || wpos < 1 || wpos - 1 >= win) {
                            dst.setZero();
                            continue;
                        }
                        dst = in.col(static_cast<Eigen::Index>((b * height + hi) * win + wpos - 1));
                    }
                }
            }
        }
    }
}

template <typename S>
Mat<S> col2im(const Mat<S>& dcols, std::size_t ci, std::size_t height, std::size_t batch, std::size_t win,
              std::size_t stride)
{
    const std::size_t wout = win / stride;
    Mat<S> dx = Mat<S>::Zero(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(batch * height * win));
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < height; ++h) {
            for (std::size_t wo = 0; wo < wout; ++wo) {
                const auto j = static_cast<Eigen::Index>((b * height + h) * wout + wo);
                for (std::size_t kh = 0; kh < 3; ++kh) {
                    if (h + kh < 1 || h + kh - 1 >= height) continue;
                    const std::size_t hi = h + kh - 1;
                    for (std::size_t kw = 0; kw < 3; ++kw) {
                        const std::size_t wpos = wo * stride + kw;
                        if (wpos < 1 || wpos - 1 >= win) continue;
                        const auto dst = static_cast<Eigen::Index>((b * height + hi) * win + wpos - 1);
                        dx.col(dst) += dcols.col(j).segment(static_cast<Eigen::Index>((kh * 3 + kw) * ci),
                                                            static_cast<Eigen::Index>(ci));
                    }
                }
            }
        }
    }
    return dx;
}

// Nearest-neighbour doubling along the width axis.
template <typename S>
Mat<S> upsample(const Mat<S>& in, std::size_t win)
{
    const std::size_t lines = static_cast<std::size_t>(in.cols()) / win;
    Mat<S> out(in.rows(), static_cast<Eigen::Index>(lines * 2 * win));
    for (std::size_t l = 0; l < lines; ++l)
        for (std::size_t w = 0; w < 2 * win; ++w)
            out.col(static_cast<Eigen::Index>(l * 2 * win + w)) = in.col(static_cast<Eigen::Index>(l * win + w / 2));
    return out;
}

template <typename S>
Mat<S> upsample_back(const Mat<S>& g, std::size_t win)
{
    const std::size_t lines = static_cast<std::size_t>(g.cols()) / (2 * win);
    Mat<S> out(g.rows(), static_cast<Eigen::Index>(lines * win));
    for (std::size_t l = 0; l < lines; ++l)
        for (std::size_t w = 0; w < win; ++w)
            out.col(static_cast<Eigen::Index>(l * win + w)) = g.col(static_cast<Eigen::Index>(l * 2 * win + 2 * w)) +
                                                              g.col(static_cast<Eigen::Index>(l * 2 * win + 2 * w + 1));
    return out;
}

template <typename S>
Mat<S> pop(Tape<S>& tape)
{
    if (tape.empty()) throw std::logic_error("tape exhausted in backward pass");
    Mat<S> m = std::move(tape.back());
    tape.pop_back();
    return m;
}

}  // namespace

template <typename S>
ScoreNet<S>::ScoreNet(NetworkConfig config) : config_(std::move(config))
{
    config_.validate();
    auto add = [&](const std::string& name, std::size_t ci, std::size_t co, std::size_t stride) {
        Conv c{count_, 0, ci, co, stride};
        layout_.push_back({name + ".weight", count_, co, 9 * ci, 9 * ci});
        count_ += 9 * ci * co;
        c.b = count_;
        layout_.push_back({name + ".bias", count_, co, 1, 9 * ci});
        count_ += co;
        return c;
    };
    auto add_res = [&](const std::string& name, std::size_t ch) {
        ResBlock r;
        r.c1 = add(name + ".conv1", ch, ch, 1);
        r.c2 = add(name + ".conv2", ch, ch, 1);
        return r;
    };
    const std::size_t depth = config_.depth;
    in_ = add("conv_in", 1, config_.channels(0), 1);
    for (std::size_t l = 0; l < depth; ++l) {
        const std::string p = "enc" + std::to_string(l);
        enc_.push_back(add_res(p + ".res", config_.channels(l)));
        down_.push_back(add(p + ".down", config_.channels(l), config_.channels(l + 1), 2));
    }
    mid_ = add_res("mid.res", config_.channels(depth));
    up_.resize(depth);
    merge_.resize(depth);
    dec_.resize(depth);
    for (std::size_t l = depth; l-- > 0;) {
        const std::string p = "dec" + std::to_string(l);
        up_[l] = add(p + ".up", config_.channels(l + 1), config_.channels(l), 1);
        merge_[l] = add(p + ".merge", 2 * config_.channels(l), config_.channels(l), 1);
        dec_[l] = add_res(p + ".res", config_.channels(l));
    }
    out_ = add("conv_out", config_.channels(0), 1, 1);
}

template <typename S>
typename ScoreNet<S>::Matrix ScoreNet<S>::conv(std::span<const S> w, const Conv& c, const Matrix& in,
                                               std::size_t /*batch*/, std::size_t width, Tape<S>* tape) const
{
    Matrix cols;
    im2col<S>(in, c.ci, config_.height, width, c.stride, cols);
    const Eigen::Map<const Matrix> weight(w.data() + c.w, static_cast<Eigen::Index>(c.co), static_cast<Eigen::Index>(9 * c.ci));
    const Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bias(w.data() + c.b, static_cast<Eigen::Index>(c.co));
    Matrix out = weight * cols;
    out.colwise() += bias;
    if (tape) tape->push_back(std::move(cols));
    return out;
}

template <typename S>
typename ScoreNet<S>::Matrix ScoreNet<S>::conv_back(std::span<const S> w, const Conv& c, Tape<S>& tape,
                                                    const Matrix& g, std::size_t batch, std::size_t width,
                                                    std::span<S> grad_w) const
{
    const Matrix cols = pop(tape);
    const auto co = static_cast<Eigen::Index>(c.co);
    const auto k = static_cast<Eigen::Index>(9 * c.ci);
    const Eigen::Map<const Matrix> weight(w.data() + c.w, co, k);
    Eigen::Map<Matrix> gw(grad_w.data() + c.w, co, k);
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> gb(grad_w.data() + c.b, co);
    gw.noalias() += g * cols.transpose();
    // Row sums go through an owned temporary: a lazy sum into the mapped buffer changes
    // its summation order with the buffer's address.
    const Eigen::Matrix<S, Eigen::Dynamic, 1> row_sum = g.rowwise().sum();
    gb += row_sum;
    const Matrix dcols = weight.transpose() * g;
    return col2im<S>(dcols, c.ci, config_.height, batch, width, c.stride);
}

template <typename S>
typename ScoreNet<S>::Matrix ScoreNet<S>::res(std::span<const S> w, const ResBlock& r, const Matrix& in,
                                              std::size_t batch, std::size_t width, Tape<S>* tape) const
{
    if (tape) tape->push_back(in);
    Matrix h1 = conv(w, r.c1, silu<S>(in), batch, width, tape);
    if (tape) tape->push_back(h1);
    const Matrix h2 = conv(w, r.c2, silu<S>(h1), batch, width, tape);
    return in + h2;
}

template <typename S>
typename ScoreNet<S>::Matrix ScoreNet<S>::res_back(std::span<const S> w, const ResBlock& r, Tape<S>& tape,
                                                   const Matrix& g, std::size_t batch, std::size_t width,
                                                   std::span<S> grad_w) const
{
    Matrix ga2 = conv_back(w, r.c2, tape, g, batch, width, grad_w);
    const Matrix h1 = pop(tape);
    Matrix ga1 = conv_back(w, r.c1, tape, silu_back<S>(h1, ga2), batch, width, grad_w);
    const Matrix in = pop(tape);
    return g + silu_back<S>(in, ga1);
}

template <typename S>
typename ScoreNet<S>::Matrix ScoreNet<S>::forward(std::span<const S> w, const Matrix& x, Tape<S>* tape) const
{
    if (w.size() != count_) throw std::invalid_argument("parameter vector has the wrong length");
    if (static_cast<std::size_t>(x.rows()) != config_.input_dim() || x.cols() == 0)
        throw std::invalid_argument("input must be [6 n, B] with B >= 1");
    const std::size_t batch = static_cast<std::size_t>(x.cols());
    const std::size_t depth = config_.depth;
    const Matrix x1 = Eigen::Map<const Matrix>(x.data(), 1, x.size());

    Matrix h = conv(w, in_, x1, batch, config_.n, tape);
    std::vector<Matrix> skips;
    for (std::size_t l = 0; l < depth; ++l) {
        h = res(w, enc_[l], h, batch, config_.width(l), tape);
        skips.push_back(h);
        if (tape) tape->push_back(h);
        h = conv(w, down_[l], silu<S>(h), batch, config_.width(l), tape);
    }
    h = res(w, mid_, h, batch, config_.width(depth), tape);
    for (std::size_t l = depth; l-- > 0;) {
        if (tape) tape->push_back(h);
        h = conv(w, up_[l], upsample<S>(silu<S>(h), config_.width(l + 1)), batch, config_.width(l), tape);
        Matrix cat(2 * h.rows(), h.cols());
        cat.topRows(h.rows()) = h;
        cat.bottomRows(h.rows()) = skips[l];
        if (tape) tape->push_back(cat);
        h = conv(w, merge_[l], silu<S>(cat), batch, config_.width(l), tape);
        h = res(w, dec_[l], h, batch, config_.width(l), tape);
    }
    if (tape) tape->push_back(h);
    Matrix out = conv(w, out_, silu<S>(h), batch, config_.n, tape);
    if (!out.allFinite()) throw NonFiniteError("score network produced a non-finite output");
    return Eigen::Map<const Matrix>(out.data(), x.rows(), x.cols());
}

template <typename S>
void ScoreNet<S>::backward(std::span<const S> w, Tape<S>& tape, const Matrix& grad_out, std::span<S> grad_w) const
{
    if (grad_w.size() != count_) throw std::invalid_argument("gradient vector has the wrong length");
    const std::size_t batch = static_cast<std::size_t>(grad_out.cols());
    const std::size_t depth = config_.depth;
    Matrix g = Eigen::Map<const Matrix>(grad_out.data(), 1, grad_out.size());

    g = conv_back(w, out_, tape, g, batch, config_.n, grad_w);
    g = silu_back<S>(pop(tape), g);
    std::vector<Matrix> gskip(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        g = res_back(w, dec_[l], tape, g, batch, config_.width(l), grad_w);
        g = conv_back(w, merge_[l], tape, g, batch, config_.width(l), grad_w);
        g = silu_back<S>(pop(tape), g);
        const auto ch = static_cast<Eigen::Index>(config_.channels(l));
        gskip[l] = g.bottomRows(ch);
        Matrix gh = g.topRows(ch);
        g = upsample_back<S>(conv_back(w, up_[l], tape, gh, batch, config_.width(l), grad_w), config_.width(l + 1));
        g = silu_back<S>(pop(tape), g);
    }
    g = res_back(w, mid_, tape, g, batch, config_.width(depth), grad_w);
    for (std::size_t l = depth; l-- > 0;) {
        g = conv_back(w, down_[l], tape, g, batch, config_.width(l), grad_w);
        g = silu_back<S>(pop(tape), g);
        g += gskip[l];
        g = res_back(w, enc_[l], tape, g, batch, config_.width(l), grad_w);
    }
    conv_back(w, in_, tape, g, batch, config_.n, grad_w);
    if (!tape.empty()) throw std::logic_error("tape not fully consumed");
}

template class ScoreNet<float>;
template class ScoreNet<double>;

}  // namespace trajdiff
