#ifndef RHEM_BSPLINE_HPP
#define RHEM_BSPLINE_HPP

#include "rhem/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace rhem {

/*
 * B-spline basis of a given degree on equally spaced knots spanning
 * [lower, upper]. Inside that range the basis is a partition of unity.
 */
template <typename Scalar>
class BSplineBasis {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    BSplineBasis() = default;

    BSplineBasis(Scalar lower, Scalar upper, int num_basis, int degree)
        : lower_(lower), upper_(upper), num_basis_(num_basis), degree_(degree)
    {
        if (degree < 0) throw InvalidInput("B-spline degree must be nonnegative");
        if (num_basis < degree + 2) throw InvalidInput("B-spline needs num_basis >= degree + 2");
        if (!(upper > lower)) throw DegenerateInput("B-spline range is empty (constant covariate)");
        const Scalar h = (upper - lower) / static_cast<Scalar>(num_basis - degree);
        knots_.resize(static_cast<std::size_t>(num_basis + degree + 1));
        for (std::size_t j = 0; j < knots_.size(); ++j)
            knots_[j] = lower + (static_cast<Scalar>(j) - static_cast<Scalar>(degree)) * h;
        // pin the range ends so rounding cannot push a point past its span
        knots_[static_cast<std::size_t>(degree)] = lower;
        knots_[static_cast<std::size_t>(num_basis)] = upper;
    }

    /// Range taken from the data.
    static BSplineBasis from_data(const Vector& x, int num_basis, int degree)
    {
        if (x.size() == 0) throw DegenerateInput("B-spline: no data");
        if (!x.allFinite()) throw InvalidInput("B-spline: non-finite covariate values");
        return BSplineBasis(x.minCoeff(), x.maxCoeff(), num_basis, degree);
    }

    int num_basis() const { return num_basis_; }
    int degree() const { return degree_; }
    Scalar lower() const { return lower_; }
    Scalar upper() const { return upper_; }
    const std::vector<Scalar>& knots() const { return knots_; }

    bool inside(Scalar x) const { return x >= lower_ && x <= upper_; }

    /// Basis rows; points outside [lower, upper] are clamped to the range.
    Matrix evaluate(const Vector& x) const
    {
        Matrix out = Matrix::Zero(x.size(), num_basis_);
        std::vector<Scalar> values(static_cast<std::size_t>(degree_ + 1));
        std::vector<Scalar> left(static_cast<std::size_t>(degree_ + 1)), right(static_cast<std::size_t>(degree_ + 1));
        for (Eigen::Index row = 0; row < x.size(); ++row) {
            const Scalar u = std::clamp(x(row), lower_, upper_);
            const int span = find_span(u);
            values[0] = Scalar(1);
            for (int j = 1; j <= degree_; ++j) {
                left[static_cast<std::size_t>(j)] = u - knots_[static_cast<std::size_t>(span + 1 - j)];
                right[static_cast<std::size_t>(j)] = knots_[static_cast<std::size_t>(span + j)] - u;
                Scalar saved = Scalar(0);
                for (int r = 0; r < j; ++r) {
                    const Scalar temp = values[static_cast<std::size_t>(r)] /
                                        (right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)]);
                    values[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
                    saved = left[static_cast<std::size_t>(j - r)] * temp;
                }
                values[static_cast<std::size_t>(j)] = saved;
            }
            for (int r = 0; r <= degree_; ++r) out(row, span - degree_ + r) = values[static_cast<std::size_t>(r)];
        }
        return out;
    }

    /// D^T D with D the second-order difference operator on coefficients.
    Matrix difference_penalty() const { return second_difference_penalty(num_basis_); }

    static Matrix second_difference_penalty(int num_basis)
    {
        Matrix d = Matrix::Zero(std::max(num_basis - 2, 0), num_basis);
        for (int i = 0; i + 2 < num_basis; ++i) {
            d(i, i) = Scalar(1);
            d(i, i + 1) = Scalar(-2);
            d(i, i + 2) = Scalar(1);
        }
        return d.transpose() * d;
    }

private:
    // knot span index in [degree, num_basis - 1] holding u
    int find_span(Scalar u) const
    {
        if (u >= upper_) return num_basis_ - 1;
        const Scalar h = knots_[1] - knots_[0];
        int span = degree_ + static_cast<int>(std::floor((u - lower_) / h));
        span = std::clamp(span, degree_, num_basis_ - 1);
        while (span > degree_ && u < knots_[static_cast<std::size_t>(span)]) --span;
        while (span < num_basis_ - 1 && u >= knots_[static_cast<std::size_t>(span + 1)]) ++span;
        return span;
    }

    Scalar lower_ = Scalar(0);
    Scalar upper_ = Scalar(1);
    int num_basis_ = 0;
    int degree_ = 0;
    std::vector<Scalar> knots_;
};

template <typename Scalar>
struct BasisWithPenalty {
    typename BSplineBasis<Scalar>::Matrix basis;
    typename BSplineBasis<Scalar>::Matrix penalty;
    BSplineBasis<Scalar> spline;
};

template <typename Derived>
BasisWithPenalty<typename Derived::Scalar> bspline_basis(const Eigen::MatrixBase<Derived>& x,
                                                         int num_basis, int degree)
{
    using Scalar = typename Derived::Scalar;
    const typename BSplineBasis<Scalar>::Vector values = x;
    auto spline = BSplineBasis<Scalar>::from_data(values, num_basis, degree);
    return {spline.evaluate(values), spline.difference_penalty(), spline};
}

} // namespace rhem

#endif
