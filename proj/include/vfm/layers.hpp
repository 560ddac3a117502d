#pragma once

#include "vfm/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace vfm {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using Vec = Eigen::VectorXd;

/// A trainable tensor with its accumulated gradient.
struct Param {
    std::string name;
    Mat value;
    Mat grad;

    void resize(Eigen::Index rows, Eigen::Index cols) {
        value = Mat::Zero(rows, cols);
        grad = Mat::Zero(rows, cols);
    }
};

using ParamList = std::vector<Param*>;

/// Sequences are [T, channels]; every layer caches what its backward pass needs from the
/// most recent forward call.
class Linear {
public:
    Linear() = default;
    Linear(const std::string& name, int in, int out);

    /// Fan-in scaled uniform U(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
    void init(Rng& rng);
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    void collect(ParamList& out);

    int in_features() const { return static_cast<int>(weight.value.cols()); }
    int out_features() const { return static_cast<int>(weight.value.rows()); }

    Param weight; // [out, in]
    Param bias;   // [1, out]

private:
    Mat x_;
};

/// Layer normalisation over the channel dimension of each row.
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(const std::string& name, int dim, double eps = 1e-5);

    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    void collect(ParamList& out);

    Param gain; // [1, dim]
    Param bias; // [1, dim]

private:
    double eps_ = 1e-5;
    Mat xhat_;
    Vec inv_std_;
};

/// Exact (erf) GELU.
class Gelu {
public:
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy) const;

private:
    Mat x_;
};

double gelu(double x);
double gelu_derivative(double x);

/// Inverted dropout. Identity when not training or p == 0.
class Dropout {
public:
    explicit Dropout(double p = 0.0) : p_(p) {}

    Mat forward(const Mat& x, bool training, Rng* rng);
    Mat backward(const Mat& dy) const;
    double rate() const { return p_; }

private:
    double p_;
    bool active_ = false;
    Mat mask_;
};

/// Causal dilated 1-D convolution: y_t = b + sum_j W_j x_{t-(k-1-j)*dilation}, zero left padding.
class CausalConv1d {
public:
    CausalConv1d() = default;
    CausalConv1d(const std::string& name, int in, int out, int kernel, int dilation);

    void init(Rng& rng);
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    void collect(ParamList& out);

    int kernel() const { return kernel_; }
    int dilation() const { return dilation_; }

    Param weight; // [out, kernel*in], tap j occupies columns [j*in, (j+1)*in)
    Param bias;   // [1, out]

private:
    int in_ = 0;
    int kernel_ = 1;
    int dilation_ = 1;
    Mat cols_;
};

/// Linear -> LayerNorm -> GELU.
class DenseBlock {
public:
    DenseBlock() = default;
    DenseBlock(const std::string& name, int in, int out);

    void init(Rng& rng) { fc.init(rng); }
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    void collect(ParamList& out);

    Linear fc;
    LayerNorm norm;
    Gelu act;
};

/// Linear -> GELU -> Linear.
class MlpHead {
public:
    MlpHead() = default;
    MlpHead(const std::string& name, int in, int hidden, int out);

    void init(Rng& rng);
    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    void collect(ParamList& out);

    Linear fc1;
    Gelu act;
    Linear fc2;
};

std::size_t count_parameters(const ParamList& params);
void zero_grad(const ParamList& params);

} // namespace vfm
