#ifndef XXZ_TYPES_HPP
#define XXZ_TYPES_HPP

#include <complex>
#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace xxz {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cplx>;

inline constexpr cplx I1{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

inline double max_abs(const CMat& m)
{
    return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

inline CMat commutator(const CMat& a, const CMat& b) { return a * b - b * a; }

} // namespace xxz

#endif
