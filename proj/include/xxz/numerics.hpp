#ifndef XXZ_NUMERICS_HPP
#define XXZ_NUMERICS_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "error.hpp"
#include "types.hpp"

namespace xxz {

// Finite-difference weights for derivative `order` at x0 on nodes x (Fornberg).
inline std::vector<double> fd_weights(const std::vector<double>& x, double x0, int order)
{
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
    double c1 = 1.0, c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, order);
        double c2 = 1.0, c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][order];
    return w;
}

// Half-width of the second-order central stencil for an m-th derivative.
inline int central_half_width(int m) { return (m + 1) / 2; }

struct RichardsonResult {
    cplx value;
    double error;
};

// Central differences at h, h/2, h/4 combined by two Richardson levels (h^2, h^4).
inline RichardsonResult richardson_derivative(const std::function<cplx(double)>& f, int m, double h)
{
    const int p = central_half_width(m);
    auto diff = [&](double step) {
        std::vector<double> nodes;
        for (int j = -p; j <= p; ++j) nodes.push_back(j * step);
        auto w = fd_weights(nodes, 0.0, m);
        cplx acc = 0.0;
        for (int j = -p; j <= p; ++j)
            if (w[j + p] != 0.0) acc += w[j + p] * f(j * step);
        return acc;
    };
    cplx d0 = diff(h), d1 = diff(h / 2), d2 = diff(h / 4);
    cplx r0 = (4.0 * d1 - d0) / 3.0;
    cplx r1 = (4.0 * d2 - d1) / 3.0;
    cplx r2 = (16.0 * r1 - r0) / 15.0;
    return {r2, std::abs(r2 - r1)};
}

struct LinearFit {
    CVec coef;
    double residual;  // rms of the fit residuals
    double condition; // ratio of extreme singular values of the design matrix
};

inline LinearFit least_squares(const CMat& a, const CVec& y)
{
    Eigen::JacobiSVD<CMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1)
                                        : std::numeric_limits<double>::infinity();
    CVec coef = svd.solve(y);
    double res = (a * coef - y).norm() / std::sqrt(static_cast<double>(y.size()));
    return {coef, res, cond};
}

// Coefficients c0..c_deg of a real polynomial fit in (x - shift).
inline RVec polyfit(const std::vector<double>& x, const std::vector<double>& y, int deg,
                    double shift = 0.0)
{
    if (x.size() != y.size() || static_cast<int>(x.size()) <= deg)
        throw Error(ErrorKind::FitFailure, "numerics", "too few points for polynomial fit");
    RMat a(x.size(), deg + 1);
    RVec b(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double t = 1.0;
        for (int k = 0; k <= deg; ++k) {
            a(i, k) = t;
            t *= x[i] - shift;
        }
        b(i) = y[i];
    }
    return a.colPivHouseholderQr().solve(b);
}

inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw Error(ErrorKind::FitFailure, "numerics", "degenerate abscissae");
    return sxy / sxx;
}

} // namespace xxz

#endif
