#ifndef XXZ_FCS_HPP
#define XXZ_FCS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Eigenvalues>

#include "error.hpp"
#include "ness.hpp"
#include "numerics.hpp"
#include "oracle.hpp"
#include "qlax.hpp"
#include "types.hpp"

namespace xxz {

inline CMat sector_tilted(const LindbladModel& m, double chi, const DiagonalSector& sec)
{
    return sec.restrict(build_tilted(m, chi));
}

// Eigenvalue of maximal real part.
inline cplx leading_eigenvalue(const CMat& tilted)
{
    CVec ev = Eigen::ComplexEigenSolver<CMat>(tilted, false).eigenvalues();
    Eigen::Index k;
    ev.real().maxCoeff(&k);
    return ev(k);
}

// Follows the eigenvalue that is leading at chi = 0 by eigenvector overlap.
class EigenTracker {
public:
    explicit EigenTracker(LindbladModel m, double max_step = 0.05)
        : model_(std::move(m)), sector_(model_.n), max_step_(max_step)
    {
        solve(0.0);
        const CVec& ev = es_.eigenvalues();
        std::vector<int> order(ev.size());
        for (int i = 0; i < ev.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return ev(a).real() > ev(b).real(); });
        if (ev.size() > 1 && ev(order[0]).real() - ev(order[1]).real() <= 1e-10 * std::max(1.0, model_.eps))
            throw Error(ErrorKind::GapCollapse, "fcs-engine", "no spectral gap below the leading eigenvalue");
        origin_value_ = ev(order[0]);
        origin_vec_ = es_.eigenvectors().col(order[0]).normalized();
    }

    const LindbladModel& model() const { return model_; }

    cplx at(double chi)
    {
        if (chi == 0.0) return origin_value_;
        auto hit = cache_.find(chi);
        if (hit != cache_.end()) return hit->second.first;
        double from = 0.0;
        cplx val = origin_value_;
        CVec vec = origin_vec_;
        for (const auto& [c, state] : cache_)
            if (c * chi > 0.0 && std::abs(c) < std::abs(chi) && std::abs(c) > std::abs(from)) {
                from = c;
                val = state.first;
                vec = state.second;
            }
        const double span = chi - from;
        const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(span) / max_step_ - 1e-12)));
        for (int k = 1; k <= steps; ++k) step_to(from + span * k / steps, from + span * (k - 1) / steps, vec, val, 0);
        cache_[chi] = {val, vec};
        return val;
    }

    std::vector<cplx> scan(const std::vector<double>& chis)
    {
        std::vector<cplx> out;
        for (double c : chis) out.push_back(at(c));
        return out;
    }

private:
    void solve(double chi) { es_.compute(sector_tilted(model_, chi, sector_), true); }

    void step_to(double target, double from, CVec& vec, cplx& val, int depth)
    {
        solve(target);
        const CMat& vs = es_.eigenvectors();
        double best = -1, second = -1;
        int bi = -1;
        for (int i = 0; i < vs.cols(); ++i) {
            double o = std::abs(vec.dot(vs.col(i))) / vs.col(i).norm();
            if (o > best) {
                second = best;
                best = o;
                bi = i;
            } else if (o > second) {
                second = o;
            }
        }
        if (best >= 0.5 && second > 0.9 * best) {
            // Nearly parallel candidates: decide by eigenvalue continuity when it is unambiguous.
            const CVec& ev = es_.eigenvalues();
            double near = 1e300, next = 1e300;
            int ni = -1;
            for (int i = 0; i < vs.cols(); ++i) {
                double o = std::abs(vec.dot(vs.col(i))) / vs.col(i).norm();
                if (o < 0.9 * best) continue;
                double dist = std::abs(ev(i) - val);
                if (dist < near) {
                    next = near;
                    near = dist;
                    ni = i;
                } else if (dist < next) {
                    next = dist;
                }
            }
            if (near < 0.25 * next) {
                bi = ni;
                second = 0.0;
            }
        }
        if (best < 0.5 || second > 0.9 * best) {
            if (depth >= 8)
                throw Error(ErrorKind::GapCollapse, "fcs-engine", "eigenvalue branches cannot be separated");
            double mid = 0.5 * (target + from);
            step_to(mid, from, vec, val, depth + 1);
            step_to(target, mid, vec, val, depth + 1);
            return;
        }
        CVec v = vs.col(bi).normalized();
        cplx ph = v.dot(vec);
        vec = v * (std::abs(ph) > 0 ? std::conj(ph) / std::abs(ph) : 1.0);
        val = es_.eigenvalues()(bi);
    }

    LindbladModel model_;
    DiagonalSector sector_;
    double max_step_;
    Eigen::ComplexEigenSolver<CMat> es_;
    cplx origin_value_;
    CVec origin_vec_;
    std::map<double, std::pair<cplx, CVec>> cache_;
};

struct Cumulant {
    int order;
    double value;
    double error;
    double imag;  // residual imaginary part, should vanish
};

struct TiltedSpectrum {
    std::vector<double> chi_grid;
    std::vector<cplx> lambda_values;
    std::vector<Cumulant> cumulants;
    int order = 0;
};

// kappa_m = (1/2) d^m lambda / d(-i chi)^m at chi = 0, by Richardson-extrapolated central differences.
inline std::vector<Cumulant> cumulants_numeric(EigenTracker& tr, int max_order, double h = 0.02,
                                               double rel_tol = 1e-3)
{
    if (max_order < 1 || max_order > 6)
        throw Error(ErrorKind::InvalidArgument, "fcs-engine", "cumulant order must be in [1, 6]");
    std::vector<Cumulant> out;
    auto f = [&](double chi) { return tr.at(chi); };
    for (int m = 1; m <= max_order; ++m) {
        RichardsonResult r = richardson_derivative(f, m, h);
        cplx k = 0.5 * std::pow(I1, m) * r.value;
        Cumulant c{m, k.real(), 0.5 * r.error, k.imag()};
        if (c.error > rel_tol * std::max(std::abs(c.value), 1e-300))
            throw Error(ErrorKind::StencilTooCoarse, "fcs-engine",
                        "Richardson levels disagree at order " + std::to_string(m));
        out.push_back(c);
    }
    return out;
}

// Lambda on a chi grid plus cumulants up to `order` (0 skips the cumulants).
inline TiltedSpectrum scan_lambda(EigenTracker& tr, const std::vector<double>& grid, int order, double h = 0.02)
{
    TiltedSpectrum sp;
    sp.chi_grid = grid;
    sp.lambda_values = tr.scan(grid);
    sp.order = order;
    if (order > 0) sp.cumulants = cumulants_numeric(tr, order, h);
    return sp;
}

namespace detail {

// Follows a root of a chi-dependent quadratic continuously from chi = 0, refining the step
// until the continued root is unambiguous. A linear predictor carries the root through
// analytic crossings; a square-root branch point keeps the step refining until it throws.
template <class RootsAt>
void continue_root(double from, double to, cplx& cur, cplx& slope, RootsAt& roots_at, int depth)
{
    auto [r1, r2] = roots_at(to);
    const cplx pred = cur + slope * (to - from);
    double d1 = std::abs(r1 - pred), d2 = std::abs(r2 - pred);
    if (std::min(d1, d2) < 0.5 * std::max(d1, d2) || std::abs(r1 - r2) <= 1e-15 * (1.0 + std::abs(r1))) {
        cplx next = d1 <= d2 ? r1 : r2;
        slope = (next - cur) / (to - from);
        cur = next;
        return;
    }
    if (depth >= 40) throw Error(ErrorKind::BranchAmbiguity, "fcs-engine", "branch point on the chi path");
    double mid = 0.5 * (from + to);
    continue_root(from, mid, cur, slope, roots_at, depth + 1);
    continue_root(mid, to, cur, slope, roots_at, depth + 1);
}

template <class RootsAt>
cplx track_root(double chi, cplx start, RootsAt roots_at)
{
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(chi) / 0.01)));
    cplx cur = start, slope = 0.0;
    for (int k = 1; k <= steps; ++k)
        continue_root(chi * (k - 1) / steps, chi * k / steps, cur, slope, roots_at, 0);
    return cur;
}

} // namespace detail

// First-order eigenvalue (units of eps) for boundary rates (a,b,c,d).
inline cplx lambda1_closed(double chi, const DrivingRates& r)
{
    const double sig = r.sum();
    auto roots = [&](double x) {
        cplx rad = sig * sig + 4.0 * r.a * r.d * (std::exp(-2.0 * I1 * x) - 1.0) +
                   4.0 * r.b * r.c * (std::exp(2.0 * I1 * x) - 1.0);
        cplx q = std::sqrt(rad);
        return std::pair<cplx, cplx>{q, -q};
    };
    cplx root = detail::track_root(chi, cplx(sig), roots);
    return 0.5 * (root - sig);
}

// Per-site polarization of the zeroth-order state, from p_down/p_up = t with
// alpha t^2 + kappa t - beta = 0.
inline cplx nu_closed(double chi, const DrivingRates& r)
{
    auto roots = [&](double x) {
        cplx em = std::exp(-I1 * x), ep = std::exp(I1 * x);
        cplx alpha = r.a * em + r.c * ep;
        cplx beta = r.b * ep + r.d * em;
        cplx kappa = r.a + r.c - r.b - r.d;
        cplx disc = std::sqrt(kappa * kappa + 4.0 * alpha * beta);
        return std::pair<cplx, cplx>{(-kappa + disc) / (2.0 * alpha), (-kappa - disc) / (2.0 * alpha)};
    };
    if (r.a + r.c <= 0.0)
        throw Error(ErrorKind::InvalidArgument, "fcs-engine", "no up-pumping channel");
    cplx t0 = (r.b + r.d) / (r.a + r.c);
    cplx t = detail::track_root(chi, t0, roots);
    return (1.0 - t) / (1.0 + t);
}

// Closed form of nu at chi != 0 through lambda1; singular at chi = 0.
inline cplx nu_from_lambda1(double chi, const DrivingRates& r)
{
    cplx em = std::exp(-I1 * chi) - 1.0, ep = std::exp(I1 * chi) - 1.0;
    cplx den = em * (r.d - r.a) + ep * (r.b - r.c);
    if (std::abs(den) < 1e-14) return 0.0;
    return (2.0 * lambda1_closed(chi, r) - em * (r.a + r.d) - ep * (r.b + r.c)) / den;
}

inline CMat zeroth_order_state(cplx nu, int n)
{
    const int dim = 1 << n;
    CMat rho = CMat::Zero(dim, dim);
    for (int x = 0; x < dim; ++x) {
        cplx p = 1.0;
        for (int j = 1; j <= n; ++j) p *= spin_bit(x, j, n) ? 1.0 - nu : 1.0 + nu;
        rho(x, x) = p / double(dim);
    }
    return rho;
}

inline CMat boundary_imbalance(int n) { return site_op(Pauli::Z, 1, n) - site_op(Pauli::Z, n, n); }

// Pseudo-inverse and kernel of ad H = [H, .] in the eigenbasis of H.
class AdjointH {
public:
    explicit AdjointH(const CMat& h, double tol = 1e-9) : tol_(tol)
    {
        Eigen::SelfAdjointEigenSolver<CMat> es(h);
        u_ = es.eigenvectors();
        e_ = es.eigenvalues();
        const int n = static_cast<int>(e_.size());
        for (int i = 0; i < n;) {
            int j = i;
            while (j + 1 < n && e_(j + 1) - e_(i) < tol_) ++j;
            std::vector<int> g;
            for (int k = i; k <= j; ++k) g.push_back(k);
            groups_.push_back(g);
            i = j + 1;
        }
    }

    CMat to_eigen(const CMat& x) const { return u_.adjoint() * x * u_; }
    CMat from_eigen(const CMat& x) const { return u_ * x * u_.adjoint(); }
    bool degenerate(int a, int b) const { return std::abs(e_(a) - e_(b)) < tol_; }

    CMat pinv(const CMat& x) const
    {
        CMat t = to_eigen(x);
        for (int a = 0; a < t.rows(); ++a)
            for (int b = 0; b < t.cols(); ++b) t(a, b) = degenerate(a, b) ? 0.0 : t(a, b) / (e_(a) - e_(b));
        return from_eigen(t);
    }
    // Largest component of x inside the kernel (obstruction to solving [H, y] = x).
    double kernel_component(const CMat& x) const
    {
        CMat t = to_eigen(x);
        double m = 0;
        for (int a = 0; a < t.rows(); ++a)
            for (int b = 0; b < t.cols(); ++b)
                if (degenerate(a, b)) m = std::max(m, std::abs(t(a, b)));
        return m;
    }
    // Orthonormal kernel basis |a><b| for degenerate a, b.
    std::vector<CMat> kernel_basis() const
    {
        std::vector<CMat> basis;
        for (const auto& g : groups_)
            for (int a : g)
                for (int b : g) basis.push_back(u_.col(a) * u_.col(b).adjoint());
        return basis;
    }

private:
    double tol_;
    CMat u_;
    RVec e_;
    std::vector<std::vector<int>> groups_;
};

struct ZOperator {
    CMat matrix;
    double residual = 0.0;
};

// Minimal-norm solution of [H, Z] = s^z_1 - s^z_n.
inline ZOperator build_z_operator(const CMat& h, int n)
{
    AdjointH ad(h);
    CMat a = boundary_imbalance(n);
    if (ad.kernel_component(a) > 1e-9)
        throw Error(ErrorKind::NoSolution, "fcs-engine", "boundary imbalance overlaps the kernel of ad H");
    ZOperator z{ad.pinv(a), 0.0};
    z.residual = max_abs(commutator(h, z.matrix) - a);
    return z;
}

inline ZOperator build_z_operator(int n, double delta)
{
    if (n < 2 || n > 8) throw Error(ErrorKind::InvalidArgument, "fcs-engine", "Z operator needs 2 <= n <= 8");
    return build_z_operator(build_xxz(n, delta), n);
}

// Z from the s-derivative of the MPO at s = 0, phi = pi/2, divided by 2 gamma sin(gamma).
inline ZOperator build_z_from_mpo(int n, double delta)
{
    if (n < 2 || n > 8) throw Error(ErrorKind::InvalidArgument, "fcs-engine", "Z operator needs 2 <= n <= 8");
    cplx g = gamma_from_delta(delta);
    CMat z;
    if (std::abs(g) < rational_limit) {
        z = CMat::Zero(1 << n, 1 << n);
        for (int i = 1; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j) z += site_op(Pauli::Minus, i, n) * site_op(Pauli::Plus, j, n);
    } else {
        QContext ctx{delta, g, 0.0, pi / 2, n + 1};
        z = build_S_dense_derivative(n, build_lax(ctx), lax_s_derivative(ctx)) / (2.0 * g * std::sin(g));
    }
    ZOperator out{z, 0.0};
    out.residual = max_abs(commutator(build_xxz(n, delta), z) - boundary_imbalance(n));
    return out;
}

// Coefficients of the symmetric-driving expansion.
inline cplx lambda1_symmetric(double chi, double mu) { return -1.0 + std::cos(chi) - I1 * mu * std::sin(chi); }
inline cplx first_order_coefficient(double chi, double mu)
{
    return 0.5 * (-mu - mu * std::cos(chi) + I1 * std::sin(chi));
}
inline cplx imbalance_coefficient(double chi, double mu)
{
    return 0.5 * (mu - mu * std::cos(chi) + I1 * std::sin(chi));
}
inline cplx commutator_coefficient(double chi, double mu)
{
    return 0.5 * (std::cos(chi) - I1 * mu * std::sin(chi));
}

struct ThirdOrder {
    cplx lambda1;
    cplx lambda3;          // -tr((D - lambda1) rho2)
    cplx lambda3_reduced;  // -g tr((s^z_1 - s^z_n) rho2), g the imbalance coefficient
    double solvability_residual = 0.0;
    CMat rho1, rho2;
};

// Third-order eigenvalue for symmetric driving at unit coupling. The first-order correction is
// either solved by pseudo-inversion or, if z is given, built from (Z - Z^+); the kernel part is then
// fixed by solvability of the second-order equation and tr rho1 = 0.
inline ThirdOrder third_order(const CMat& h, int n, double mu, double chi, const CMat* z = nullptr)
{
    LindbladModel unit;
    unit.n = n;
    unit.hamiltonian = h;
    {
        LindbladModel tmp = boundary_driven(n, 1.0, DrivingRates::symmetric(mu), 1.0);
        unit.jumps = tmp.jumps;
        unit.rates = tmp.rates;
        unit.eps = 1.0;
    }
    const int dim = 1 << n;
    AdjointH ad(h);
    auto dis = [&](const CMat& x) { return apply_generator(unit, x, chi, false); };
    ThirdOrder out;
    out.lambda1 = lambda1_symmetric(chi, mu);
    const cplx l1 = out.lambda1;
    CMat rho0 = CMat::Identity(dim, dim) / double(dim);
    CMat rhs = l1 * rho0 - dis(rho0);
    CMat rho1p;
    if (z) {
        CMat a = boundary_imbalance(n);
        cplx k = (a.adjoint() * rhs).trace() / (a.adjoint() * a).trace();
        if (max_abs(rhs - k * a) > 1e-10)
            throw Error(ErrorKind::NoSolution, "fcs-engine", "first-order source is not along the imbalance");
        rho1p = 0.5 * k * (*z - z->adjoint());
    } else {
        rho1p = ad.pinv(rhs);
    }
    std::vector<CMat> ker = ad.kernel_basis();
    const int nk = static_cast<int>(ker.size());
    std::vector<CMat> img(nk);
    for (int i = 0; i < nk; ++i) img[i] = l1 * ker[i] - dis(ker[i]);
    CMat sys(nk + 1, nk);
    CVec b(nk + 1);
    CMat src = l1 * rho1p - dis(rho1p);
    for (int j = 0; j < nk; ++j) {
        for (int i = 0; i < nk; ++i) sys(j, i) = (ker[j].adjoint() * img[i]).trace();
        b(j) = -(ker[j].adjoint() * src).trace();
    }
    for (int i = 0; i < nk; ++i) sys(nk, i) = ker[i].trace();
    b(nk) = -rho1p.trace();
    CVec coef = sys.completeOrthogonalDecomposition().solve(b);
    out.solvability_residual = (sys * coef - b).cwiseAbs().maxCoeff();
    CMat rho1 = rho1p;
    for (int i = 0; i < nk; ++i) rho1 += coef(i) * ker[i];
    CMat rho2 = ad.pinv(l1 * rho1 - dis(rho1));
    out.rho1 = rho1;
    out.rho2 = rho2;
    out.lambda3 = -(dis(rho2) - l1 * rho2).trace();
    out.lambda3_reduced = -imbalance_coefficient(chi, mu) * (boundary_imbalance(n) * rho2).trace();
    return out;
}

inline cplx lambda3(double chi, double mu, int n, double delta)
{
    CMat h = build_xxz(n, delta);
    ZOperator z = build_z_operator(h, n);
    return third_order(h, n, mu, chi, &z.matrix).lambda3;
}

// t(n) = -tr((s^z_1 - s^z_n) [Z, Z^+]) / 2^n.
inline double ansatz_trace(const CMat& z, int n)
{
    CMat c = z * z.adjoint() - z.adjoint() * z;
    return -(boundary_imbalance(n) * c).trace().real() / double(1 << n);
}

// Closed form lambda3 = -(1/4) g c1 c2 t(n) for the MPO-derived Z.
inline cplx lambda3_ansatz(double chi, double mu, double t)
{
    return -0.25 * imbalance_coefficient(chi, mu) * first_order_coefficient(chi, mu) *
           commutator_coefficient(chi, mu) * t;
}

// Ansatz with independent c1, c21, c22 prefactors; gauge dependent, kept for comparison reports.
inline cplx lambda3_free_coefficients(double chi, double mu, const CMat& z, int n)
{
    const double dim = double(1 << n);
    cplx c1 = first_order_coefficient(chi, mu);
    cplx c21 = 0.5 * c1;
    cplx c22 = commutator_coefficient(chi, mu);
    CMat d = z - z.adjoint();
    CMat rho2 = (c1 * c21 * d * d - c1 * c22 * (z * z.adjoint() - z.adjoint() * z)) / dim;
    cplx pre = -mu + mu * std::cos(chi) + I1 * std::sin(chi);
    return pre * (-boundary_imbalance(n) * rho2).trace();
}

inline double f_isotropic(int n) { return n - 1.0; }

inline double f_delta_half(int n)
{
    double sgn = (n % 2) ? -1.0 : 1.0;
    return sgn * std::pow(8.0, 1 - n) *
           (5.0 * std::pow(-8.0, n) - 6.0 * std::pow(-5.0, n) + 10.0) / 45.0;
}

// m-th cumulant of the third-order term for symmetric driving with chain factor f.
inline double third_order_cumulant(int m, double mu, double f)
{
    if (m % 2 == 0) {
        int k = m / 2;
        return -f * (std::pow(9.0, k) - 1.0) * (3 * mu * mu + 1) / 256.0;
    }
    int k = (m - 1) / 2;
    return -f * mu * (std::pow(9.0, k + 1) - 1.0 + 3.0 * (std::pow(9.0, k) - 1.0) * mu * mu) / 256.0;
}

// Chain factor from the first third-order cumulant: kappa1 = -f mu / 32.
inline double f_from_first_cumulant(double kappa1, double mu) { return -32.0 * kappa1 / mu; }

struct PerturbativeFit {
    cplx lambda1;
    cplx lambda3;
    double residual;
    double condition;
};

// Odd-in-eps fit lambda = eps l1 + eps^3 l3 + eps^5 l5 of tracked eigenvalues.
inline PerturbativeFit fit_odd_series(const std::vector<double>& eps, const std::vector<cplx>& lam)
{
    if (eps.size() < 4 || eps.size() != lam.size())
        throw Error(ErrorKind::IllConditionedFit, "fcs-engine", "need at least 4 couplings");
    CMat a(eps.size(), 3);
    CVec y(eps.size());
    for (size_t i = 0; i < eps.size(); ++i) {
        double e = eps[i];
        if (!(e > 0.0 && e <= 0.2))
            throw Error(ErrorKind::IllConditionedFit, "fcs-engine", "couplings must lie in (0, 0.2]");
        a(i, 0) = 1.0;
        a(i, 1) = e * e;
        a(i, 2) = e * e * e * e;
        y(i) = lam[i] / e;
    }
    LinearFit f = least_squares(a, y);
    if (!(f.condition < 1e12))
        throw Error(ErrorKind::IllConditionedFit, "fcs-engine", "design matrix is ill conditioned");
    return {f.coef(0), f.coef(1), f.residual, f.condition};
}

using ModelFactory = std::function<LindbladModel(double eps)>;

inline std::vector<cplx> eigenvalues_over_eps(const ModelFactory& make, double chi, const std::vector<double>& eps)
{
    std::vector<cplx> lam;
    for (double e : eps) {
        EigenTracker tr(make(e));
        lam.push_back(tr.at(chi));
    }
    return lam;
}

inline PerturbativeFit perturbative_extraction(const ModelFactory& make, double chi, const std::vector<double>& eps)
{
    return fit_odd_series(eps, eigenvalues_over_eps(make, chi, eps));
}

struct ChainFactor {
    double value;
    double kappa1;  // first third-order cumulant per eps^3
    double error;
};

// Chain factor f(n) from the chi-slope of fitted third-order eigenvalues.
inline ChainFactor chain_factor_from_fit(const ModelFactory& make, double mu, const std::vector<double>& eps,
                                         double h = 0.02)
{
    auto l3 = [&](double chi) { return perturbative_extraction(make, chi, eps).lambda3; };
    RichardsonResult d = richardson_derivative(l3, 1, h);
    double k1 = (0.5 * I1 * d.value).real();
    return {f_from_first_cumulant(k1, mu), k1, 0.5 * d.error};
}

} // namespace xxz

#endif
