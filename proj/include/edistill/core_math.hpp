// SPDX-License-Identifier: Apache-2.0
//
// Dense forward/backward primitives shared by the encoder and the classifier.
// Everything is a free function templated on the scalar so the same code runs
// in float (training, storage) and double (gradient checking).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "edistill/errors.hpp"

namespace edistill {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using VectorF = Vector<float>;
using MatrixD = Matrix<double>;
using VectorD = Vector<double>;

using Rng = std::mt19937_64;

/// Smallest probability fed to log() by cross_entropy.
inline constexpr double kLogClamp = 1e-12;

/// A value together with its accumulated gradient.
template <typename T>
struct GradPair {
    T value;
    T grad;

    explicit GradPair(T v) : value(std::move(v)), grad(T::Zero(value.rows(), value.cols())) {}
    void zero_grad() { grad.setZero(); }
};

namespace detail {

inline std::string shape(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

} // namespace detail

template <typename Scalar>
Vector<Scalar> affine_forward(const Matrix<Scalar>& w, const Vector<Scalar>& x,
                              const Vector<Scalar>& b) {
    if (w.cols() != x.size())
        throw DimensionError("affine_forward: W is " + detail::shape(w.rows(), w.cols()) +
                             " but x has dim " + std::to_string(x.size()));
    if (b.size() != w.rows())
        throw DimensionError("affine_forward: W is " + detail::shape(w.rows(), w.cols()) +
                             " but b has dim " + std::to_string(b.size()));
    Vector<Scalar> out = b;
    out.noalias() += w * x;
    return out;
}

template <typename Scalar>
struct AffineGrads {
    Matrix<Scalar> w;
    Vector<Scalar> x;
    Vector<Scalar> b;
};

template <typename Scalar>
AffineGrads<Scalar> affine_backward(const Matrix<Scalar>& w, const Vector<Scalar>& x,
                                    const Vector<Scalar>& b, const Vector<Scalar>& upstream) {
    if (w.cols() != x.size() || b.size() != w.rows())
        throw DimensionError("affine_backward: W is " + detail::shape(w.rows(), w.cols()) +
                             ", x has dim " + std::to_string(x.size()) + ", b has dim " +
                             std::to_string(b.size()));
    if (upstream.size() != w.rows())
        throw DimensionError("affine_backward: upstream has dim " +
                             std::to_string(upstream.size()) + ", expected " +
                             std::to_string(w.rows()));
    AffineGrads<Scalar> g;
    g.w.noalias() = upstream * x.transpose();
    g.x.noalias() = w.transpose() * upstream;
    g.b = upstream;
    return g;
}

template <typename Derived>
auto tanh_forward(const Eigen::MatrixBase<Derived>& x) {
    return x.array().tanh().matrix().eval();
}

/// Gradient of tanh given its output `y_out`.
template <typename DerivedY, typename DerivedU>
auto tanh_backward(const Eigen::MatrixBase<DerivedY>& y_out,
                   const Eigen::MatrixBase<DerivedU>& upstream) {
    if (y_out.rows() != upstream.rows() || y_out.cols() != upstream.cols())
        throw DimensionError("tanh_backward: output is " + detail::shape(y_out.rows(), y_out.cols()) +
                             " but upstream is " + detail::shape(upstream.rows(), upstream.cols()));
    using Scalar = typename DerivedY::Scalar;
    return (upstream.array() * (Scalar(1) - y_out.array().square())).matrix().eval();
}

/// Softmax of z / temperature, stabilised by subtracting max(z).
template <typename Scalar>
Vector<Scalar> softmax_t(const Vector<Scalar>& z, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw ParameterError("softmax_t: temperature must be positive, got " +
                             std::to_string(temperature));
    if (z.size() == 0)
        throw DimensionError("softmax_t: empty input");
    const Scalar inv_t = Scalar(1.0 / temperature);
    Vector<Scalar> e = ((z.array() - z.maxCoeff()) * inv_t).exp().matrix();
    e /= e.sum();
    return e;
}

/// -sum_i t_i log y_i with y clamped below at kLogClamp. Terms with t_i = 0
/// are skipped, so y_i = 0 there never produces 0 * inf.
template <typename Scalar>
double cross_entropy(const Vector<Scalar>& y, const Vector<Scalar>& t) {
    if (y.size() != t.size())
        throw DimensionError("cross_entropy: y has dim " + std::to_string(y.size()) +
                             " but t has dim " + std::to_string(t.size()));
    double loss = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double ti = static_cast<double>(t[i]);
        if (ti == 0.0)
            continue;
        loss -= ti * std::log(std::max(static_cast<double>(y[i]), kLogClamp));
    }
    return loss;
}

/// d/dz cross_entropy(softmax_t(z, T), t) = (softmax_t(z, T) - t) / T.
/// Only valid for targets that are distributions; anything else is rejected.
template <typename Scalar>
Vector<Scalar> softmax_ce_backward(const Vector<Scalar>& z, const Vector<Scalar>& t,
                                   double temperature) {
    if (z.size() != t.size())
        throw DimensionError("softmax_ce_backward: z has dim " + std::to_string(z.size()) +
                             " but t has dim " + std::to_string(t.size()));
    const double mass = t.template cast<double>().sum();
    if (std::abs(mass - 1.0) > 1e-6 || (t.array() < Scalar(0)).any())
        throw ParameterError("softmax_ce_backward: target is not a distribution (sum " +
                             std::to_string(mass) + ")");
    Vector<Scalar> g = softmax_t(z, temperature) - t;
    g *= Scalar(1.0 / temperature);
    return g;
}

/// Inverted-dropout mask: 0 with probability `rate`, else 1 / (1 - rate).
template <typename Scalar>
Vector<Scalar> dropout_mask(std::size_t dim, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ParameterError("dropout_mask: rate must be in [0, 1), got " + std::to_string(rate));
    Vector<Scalar> mask = Vector<Scalar>::Ones(static_cast<Eigen::Index>(dim));
    if (rate == 0.0)
        return mask;
    const Scalar keep = Scalar(1.0 / (1.0 - rate));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask[i] = u(rng) < rate ? Scalar(0) : keep;
    return mask;
}

template <typename Scalar>
Vector<Scalar> one_hot(std::size_t dim, std::size_t hot) {
    if (hot >= dim)
        throw IndexError("one_hot: index " + std::to_string(hot) + " out of range for dim " +
                         std::to_string(dim));
    Vector<Scalar> v = Vector<Scalar>::Zero(static_cast<Eigen::Index>(dim));
    v[static_cast<Eigen::Index>(hot)] = Scalar(1);
    return v;
}

/// Index of the first maximal entry.
template <typename Derived>
std::size_t argmax(const Eigen::MatrixBase<Derived>& v) {
    Eigen::Index idx = 0;
    v.maxCoeff(&idx);
    return static_cast<std::size_t>(idx);
}

} // namespace edistill
