#include "vfm/layers.hpp"

#include "vfm/errors.hpp"

#include <cmath>
#include <numbers>

namespace vfm {

namespace {

void init_uniform(Mat& m, double bound, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    }
}

void require_cols(const Mat& x, Eigen::Index cols, const std::string& who) {
    if (x.cols() != cols) {
        throw ShapeError(who + ": expected " + std::to_string(cols) + " channels, got " + std::to_string(x.cols()));
    }
}

} // namespace

Linear::Linear(const std::string& name, int in, int out) {
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.resize(out, in);
    bias.resize(1, out);
}

void Linear::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
    init_uniform(weight.value, bound, rng);
    init_uniform(bias.value, bound, rng);
}

Mat Linear::forward(const Mat& x) {
    require_cols(x, weight.value.cols(), weight.name);
    x_ = x;
    Mat y = x * weight.value.transpose();
    y.rowwise() += bias.value.row(0);
    return y;
}

Mat Linear::backward(const Mat& dy) {
    weight.grad.noalias() += dy.transpose() * x_;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value;
}

void Linear::collect(ParamList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, int dim, double eps) : eps_(eps) {
    gain.name = name + ".gain";
    bias.name = name + ".bias";
    gain.resize(1, dim);
    gain.value.setOnes();
    bias.resize(1, dim);
}

Mat LayerNorm::forward(const Mat& x) {
    require_cols(x, gain.value.cols(), gain.name);
    const Eigen::Index n = x.cols();
    xhat_.resize(x.rows(), n);
    inv_std_.resize(x.rows());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        const double mean = x.row(t).mean();
        const double var = (x.row(t).array() - mean).square().sum() / static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_(t) = inv;
        xhat_.row(t) = (x.row(t).array() - mean) * inv;
    }
    Mat y = xhat_.array().rowwise() * gain.value.row(0).array();
    y.rowwise() += bias.value.row(0);
    return y;
}

Mat LayerNorm::backward(const Mat& dy) {
    gain.grad.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
    bias.grad.row(0) += dy.colwise().sum();
    const double n = static_cast<double>(dy.cols());
    Mat dxhat = dy.array().rowwise() * gain.value.row(0).array();
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index t = 0; t < dy.rows(); ++t) {
        const double s1 = dxhat.row(t).sum();
        const double s2 = dxhat.row(t).dot(xhat_.row(t));
        dx.row(t) = (inv_std_(t) / n) * (n * dxhat.row(t).array() - s1 - xhat_.row(t).array() * s2);
    }
    return dx;
}

void LayerNorm::collect(ParamList& out) {
    out.push_back(&gain);
    out.push_back(&bias);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

Mat Gelu::forward(const Mat& x) {
    x_ = x;
    return x.unaryExpr([](double v) { return gelu(v); });
}

Mat Gelu::backward(const Mat& dy) const {
    return dy.array() * x_.unaryExpr([](double v) { return gelu_derivative(v); }).array();
}

Mat Dropout::forward(const Mat& x, bool training, Rng* rng) {
    active_ = training && p_ > 0.0;
    if (!active_) return x;
    if (rng == nullptr) throw ConfigError("dropout in training mode needs a random stream");
    const double keep = 1.0 - p_;
    mask_.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) mask_(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    return x.cwiseProduct(mask_);
}

Mat Dropout::backward(const Mat& dy) const {
    if (!active_) return dy;
    return dy.cwiseProduct(mask_);
}

CausalConv1d::CausalConv1d(const std::string& name, int in, int out, int kernel, int dilation)
    : in_(in), kernel_(kernel), dilation_(dilation) {
    if (kernel < 1 || dilation < 1) throw ConfigError(name + ": kernel and dilation must be >= 1");
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.resize(out, kernel * in);
    bias.resize(1, out);
}

void CausalConv1d::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel_ * in_));
    init_uniform(weight.value, bound, rng);
    init_uniform(bias.value, bound, rng);
}

Mat CausalConv1d::forward(const Mat& x) {
    require_cols(x, in_, weight.name);
    const Eigen::Index T = x.rows();
    cols_ = Mat::Zero(T, static_cast<Eigen::Index>(kernel_) * in_);
    for (int j = 0; j < kernel_; ++j) {
        const Eigen::Index shift = static_cast<Eigen::Index>(kernel_ - 1 - j) * dilation_;
        if (shift >= T) continue;
        cols_.block(shift, static_cast<Eigen::Index>(j) * in_, T - shift, in_) = x.topRows(T - shift);
    }
    Mat y = cols_ * weight.value.transpose();
    y.rowwise() += bias.value.row(0);
    return y;
}

Mat CausalConv1d::backward(const Mat& dy) {
    weight.grad.noalias() += dy.transpose() * cols_;
    bias.grad.row(0) += dy.colwise().sum();
    const Mat dcols = dy * weight.value;
    const Eigen::Index T = dy.rows();
    Mat dx = Mat::Zero(T, in_);
    for (int j = 0; j < kernel_; ++j) {
        const Eigen::Index shift = static_cast<Eigen::Index>(kernel_ - 1 - j) * dilation_;
        if (shift >= T) continue;
        dx.topRows(T - shift) += dcols.block(shift, static_cast<Eigen::Index>(j) * in_, T - shift, in_);
    }
    return dx;
}

void CausalConv1d::collect(ParamList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

DenseBlock::DenseBlock(const std::string& name, int in, int out)
    : fc(name + ".fc", in, out), norm(name + ".norm", out) {}

Mat DenseBlock::forward(const Mat& x) { return act.forward(norm.forward(fc.forward(x))); }

Mat DenseBlock::backward(const Mat& dy) { return fc.backward(norm.backward(act.backward(dy))); }

void DenseBlock::collect(ParamList& out) {
    fc.collect(out);
    norm.collect(out);
}

MlpHead::MlpHead(const std::string& name, int in, int hidden, int out)
    : fc1(name + ".fc1", in, hidden), fc2(name + ".fc2", hidden, out) {}

void MlpHead::init(Rng& rng) {
    fc1.init(rng);
    fc2.init(rng);
}

Mat MlpHead::forward(const Mat& x) { return fc2.forward(act.forward(fc1.forward(x))); }

Mat MlpHead::backward(const Mat& dy) { return fc1.backward(act.backward(fc2.backward(dy))); }

void MlpHead::collect(ParamList& out) {
    fc1.collect(out);
    fc2.collect(out);
}

std::size_t count_parameters(const ParamList& params) {
    std::size_t n = 0;
    for (const Param* p : params) n += static_cast<std::size_t>(p->value.size());
    return n;
}

void zero_grad(const ParamList& params) {
    for (Param* p : params) p->grad.setZero();
}

} // namespace vfm
