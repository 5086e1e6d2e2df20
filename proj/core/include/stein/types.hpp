#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stein {

// Ambient coordinates never exceed this; keeps small vectors off the heap.
inline constexpr int kMaxAmbient = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;

enum class ErrorKind {
    SingularCoefficient,
    CutLocus,
    NoConvergence,
    Unsupported,
    StepTooLarge,
    NotContractive,
    ExcessiveCutLocus,
    MissingConstants,
    UnboundedCurvature,
    DimensionUnsupported,
    NonCompact,
    OutOfDomain,
    InvalidArgument,
};

const char* error_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    const char* name() const { return error_name(kind_); }

private:
    ErrorKind kind_;
};

// Dense tensor of fixed rank over an n-dimensional frame, row-major.
class Tensor {
public:
    Tensor() = default;
    Tensor(int n, int rank) : n_(n), rank_(rank), data_(size_for(n, rank), 0.0) {}

    int dim() const { return n_; }
    int rank() const { return rank_; }
    std::size_t size() const { return data_.size(); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& operator()(int a, int b, int c) { return data_[(std::size_t(a) * n_ + b) * n_ + c]; }
    double operator()(int a, int b, int c) const { return data_[(std::size_t(a) * n_ + b) * n_ + c]; }
    double& operator()(int a, int b, int c, int d) { return data_[((std::size_t(a) * n_ + b) * n_ + c) * n_ + d]; }
    double operator()(int a, int b, int c, int d) const { return data_[((std::size_t(a) * n_ + b) * n_ + c) * n_ + d]; }
    double& operator()(int a, int b, int c, int d, int e) {
        return data_[(((std::size_t(a) * n_ + b) * n_ + c) * n_ + d) * n_ + e];
    }
    double operator()(int a, int b, int c, int d, int e) const {
        return data_[(((std::size_t(a) * n_ + b) * n_ + c) * n_ + d) * n_ + e];
    }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
    double max_abs() const;
    double frobenius() const;
    bool is_zero() const { return max_abs() == 0.0; }

    static std::size_t size_for(int n, int rank) {
        std::size_t s = 1;
        for (int i = 0; i < rank; ++i) s *= std::size_t(n);
        return s;
    }

private:
    int n_ = 0;
    int rank_ = 0;
    std::vector<double> data_;
};

}  // namespace stein
