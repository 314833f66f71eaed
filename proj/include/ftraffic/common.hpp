#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ftraffic {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A position x in a coordinate patch of R^n.
using Point = Eigen::VectorXd;
/// Components y^i of a tangent vector at some base point.
using Components = Eigen::VectorXd;

/// Raised when a geometric or algebraic precondition fails
/// (zero tangent vector, invalid Randers coefficients, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The congestion field reached ||w||_g >= 1 - margin at `where`.
class CongestionSaturation : public DomainError {
public:
    CongestionSaturation(Point where, double norm, double margin);

    [[nodiscard]] const Point& where() const noexcept { return where_; }
    [[nodiscard]] double norm() const noexcept { return norm_; }

private:
    Point where_;
    double norm_;
};

/// Malformed input document: wrong type, missing or unknown field, bad syntax.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

[[nodiscard]] std::string format_point(const Point& x);

}  // namespace ftraffic
