#include "stein/types.hpp"

#include <cmath>

namespace stein {

const char* error_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::SingularCoefficient: return "SingularCoefficient";
        case ErrorKind::CutLocus: return "CutLocus";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::StepTooLarge: return "StepTooLarge";
        case ErrorKind::NotContractive: return "NotContractive";
        case ErrorKind::ExcessiveCutLocus: return "ExcessiveCutLocus";
        case ErrorKind::MissingConstants: return "MissingConstants";
        case ErrorKind::UnboundedCurvature: return "UnboundedCurvature";
        case ErrorKind::DimensionUnsupported: return "DimensionUnsupported";
        case ErrorKind::NonCompact: return "NonCompact";
        case ErrorKind::OutOfDomain: return "OutOfDomain";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

double Tensor::frobenius() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

}  // namespace stein
