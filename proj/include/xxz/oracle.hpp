#ifndef XXZ_ORACLE_HPP
#define XXZ_ORACLE_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "error.hpp"
#include "types.hpp"

namespace xxz {

// Basis state x: site j (1-based) is bit n-j of x, bit value 0 = spin up.
enum class Pauli { Z, Plus, Minus };

inline int spin_bit(int x, int j, int n) { return (x >> (n - j)) & 1; }

inline CMat site_op(Pauli op, int j, int n)
{
    const int dim = 1 << n;
    CMat m = CMat::Zero(dim, dim);
    const int mask = 1 << (n - j);
    for (int x = 0; x < dim; ++x) {
        const bool down = x & mask;
        switch (op) {
        case Pauli::Z: m(x, x) = down ? -1.0 : 1.0; break;
        case Pauli::Plus:
            if (down) m(x ^ mask, x) = 1.0;
            break;
        case Pauli::Minus:
            if (!down) m(x ^ mask, x) = 1.0;
            break;
        }
    }
    return m;
}

inline CMat magnetization(int n)
{
    CMat m = CMat::Zero(1 << n, 1 << n);
    for (int j = 1; j <= n; ++j) m += site_op(Pauli::Z, j, n);
    return m;
}

inline CMat build_xxz(int n, double delta)
{
    if (n < 2 || n > 12)
        throw Error(ErrorKind::InvalidArgument, "liouville-oracle", "chain length must be in [2, 12]");
    const int dim = 1 << n;
    CMat h = CMat::Zero(dim, dim);
    for (int x = 0; x < dim; ++x)
        for (int j = 1; j < n; ++j) {
            int a = spin_bit(x, j, n), b = spin_bit(x, j + 1, n);
            h(x, x) += delta * (a == b ? 1.0 : -1.0);
            if (a != b) h(x ^ (1 << (n - j)) ^ (1 << (n - j - 1)), x) += 2.0;
        }
    return h;
}

inline CMat build_staggered(int n, double delta, double field)
{
    CMat h = build_xxz(n, delta);
    for (int j = 1; j <= n; ++j) h += field * (j % 2 ? -1.0 : 1.0) * site_op(Pauli::Z, j, n);
    return h;
}

// Site reversal j -> n+1-j and the global spin flip.
inline CMat reversal_op(int n)
{
    const int dim = 1 << n;
    CMat p = CMat::Zero(dim, dim);
    for (int x = 0; x < dim; ++x) {
        int y = 0;
        for (int j = 1; j <= n; ++j) y |= spin_bit(x, j, n) << (j - 1);
        p(y, x) = 1.0;
    }
    return p;
}

inline CMat flip_op(int n)
{
    const int dim = 1 << n;
    CMat p = CMat::Zero(dim, dim);
    for (int x = 0; x < dim; ++x) p(x ^ (dim - 1), x) = 1.0;
    return p;
}

struct Jump {
    CMat op;
    double rate = 0.0;
    // Sign of the magnetization change: +1 raises, -1 lowers, 0 unknown.
    int direction = 0;
    // Exponent k of the counting phase exp(i k chi); 0 marks an uncounted jump.
    int count = 0;
    std::string label;
};

struct DrivingRates {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static DrivingRates symmetric(double mu)
    {
        return {(1 + mu) / 2, (1 - mu) / 2, (1 - mu) / 2, (1 + mu) / 2};
    }
    double sum() const { return a + b + c + d; }
};

struct LindbladModel {
    int n = 0;
    CMat hamiltonian;
    std::vector<Jump> jumps;
    DrivingRates rates;
    double eps = 0.0;
    double field = 0.0;
};

// +1 if [M, L] = L, -1 if [M, L] = -L, 0 otherwise.
inline int magnetization_direction(const CMat& op, int n)
{
    CMat m = magnetization(n);
    CMat c = commutator(m, op);
    double scale = std::max(1.0, max_abs(op));
    if (max_abs(c - 2.0 * op) <= 1e-12 * scale) return +1;
    if (max_abs(c + 2.0 * op) <= 1e-12 * scale) return -1;
    return 0;
}

// Counting phase convention: transfers from the left bath into the right bath count positive.
inline int counting_exponent(int direction, bool left_boundary)
{
    return left_boundary ? -direction : direction;
}

inline Jump make_boundary_jump(Pauli p, int site, int n, double rate, const std::string& label)
{
    Jump j{site_op(p, site, n), rate, 0, 0, label};
    j.direction = magnetization_direction(j.op, n);
    j.count = counting_exponent(j.direction, site == 1);
    return j;
}

// Four boundary channels sqrt(eps a) s+_1, sqrt(eps b) s-_1, sqrt(eps c) s+_n, sqrt(eps d) s-_n.
inline LindbladModel boundary_driven(int n, double delta, const DrivingRates& r, double eps,
                                     double field = 0.0)
{
    if (r.a < 0 || r.b < 0 || r.c < 0 || r.d < 0 || eps < 0)
        throw Error(ErrorKind::InvalidArgument, "liouville-oracle", "rates must be nonnegative");
    LindbladModel m;
    m.n = n;
    m.hamiltonian = field == 0.0 ? build_xxz(n, delta) : build_staggered(n, delta, field);
    m.rates = r;
    m.eps = eps;
    m.field = field;
    m.jumps.push_back(make_boundary_jump(Pauli::Plus, 1, n, eps * r.a, "a:s+_1"));
    m.jumps.push_back(make_boundary_jump(Pauli::Minus, 1, n, eps * r.b, "b:s-_1"));
    m.jumps.push_back(make_boundary_jump(Pauli::Plus, n, n, eps * r.c, "c:s+_n"));
    m.jumps.push_back(make_boundary_jump(Pauli::Minus, n, n, eps * r.d, "d:s-_n"));
    return m;
}

// Maximally driven chain at coupling eps: D = eps (2 L rho L+ - {L+L, rho}) for L = s+_1, s-_n.
inline LindbladModel max_driven(int n, double delta, double eps)
{
    return boundary_driven(n, delta, DrivingRates{1.0, 0.0, 0.0, 1.0}, 2.0 * eps);
}

// Row-major vectorization: vec(A X B) = (A kron B^T) vec(X).
inline SpMat build_tilted(const LindbladModel& m, double chi)
{
    const int dim = 1 << m.n;
    SpMat id(dim, dim);
    id.setIdentity();
    SpMat h = m.hamiltonian.sparseView();
    SpMat ht = SpMat(m.hamiltonian.transpose().sparseView());
    SpMat l = cplx(0, -1) * (SpMat(Eigen::kroneckerProduct(h, id)) - SpMat(Eigen::kroneckerProduct(id, ht)));
    for (const Jump& j : m.jumps) {
        if (j.rate == 0.0) continue;
        if (chi != 0.0 && j.count == 0)
            throw Error(ErrorKind::UnlabeledJump, "fcs-engine", "jump '" + j.label + "' has no counting label");
        SpMat op = j.op.sparseView();
        SpMat opc = SpMat(j.op.conjugate().sparseView());
        CMat ldl = j.op.adjoint() * j.op;
        SpMat ldls = ldl.sparseView();
        SpMat ldlt = SpMat(ldl.transpose().sparseView());
        cplx phase = std::exp(I1 * double(j.count) * chi);
        l += j.rate * (phase * SpMat(Eigen::kroneckerProduct(op, opc)) -
                       0.5 * SpMat(Eigen::kroneckerProduct(ldls, id)) -
                       0.5 * SpMat(Eigen::kroneckerProduct(id, ldlt)));
    }
    l.prune(cplx(0.0));
    return l;
}

inline SpMat build_liouvillean(const LindbladModel& m) { return build_tilted(m, 0.0); }

// Action of the (tilted) generator on an operator, without forming the superoperator.
inline CMat apply_generator(const LindbladModel& m, const CMat& rho, double chi = 0.0,
                            bool include_hamiltonian = true, double rate_scale = 1.0)
{
    CMat out = CMat::Zero(rho.rows(), rho.cols());
    if (include_hamiltonian) out = cplx(0, -1) * commutator(m.hamiltonian, rho);
    for (const Jump& j : m.jumps) {
        if (j.rate == 0.0) continue;
        CMat ldl = j.op.adjoint() * j.op;
        cplx phase = std::exp(I1 * double(j.count) * chi);
        out += rate_scale * j.rate *
               (phase * j.op * rho * j.op.adjoint() - 0.5 * (ldl * rho + rho * ldl));
    }
    return out;
}

inline CMat vec_to_mat(const CVec& v, int dim)
{
    CMat m(dim, dim);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) m(a, b) = v(a * dim + b);
    return m;
}

inline CVec mat_to_vec(const CMat& m)
{
    const int dim = static_cast<int>(m.rows());
    CVec v(dim * dim);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) v(a * dim + b) = m(a, b);
    return v;
}

// Operators rho_ab with equal magnetization on both legs; every generator here maps it to itself.
struct DiagonalSector {
    int n = 0;
    std::vector<int> index;   // positions a*dim+b in the full vectorization
    std::vector<int> lookup;  // inverse map, -1 outside the sector

    explicit DiagonalSector(int n_) : n(n_)
    {
        const int dim = 1 << n;
        lookup.assign(dim * dim, -1);
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b)
                if (std::popcount(unsigned(a)) == std::popcount(unsigned(b))) {
                    lookup[a * dim + b] = static_cast<int>(index.size());
                    index.push_back(a * dim + b);
                }
    }
    int size() const { return static_cast<int>(index.size()); }

    CMat restrict(const SpMat& full) const
    {
        CMat r = CMat::Zero(size(), size());
        for (int k = 0; k < full.outerSize(); ++k)
            for (SpMat::InnerIterator it(full, k); it; ++it) {
                int i = lookup[it.row()], j = lookup[it.col()];
                if (i >= 0 && j >= 0) r(i, j) += it.value();
            }
        return r;
    }
    CVec restrict_vec(const CVec& full) const
    {
        CVec r(size());
        for (int i = 0; i < size(); ++i) r(i) = full(index[i]);
        return r;
    }
    CVec embed(const CVec& v) const
    {
        const int dim = 1 << n;
        CVec full = CVec::Zero(dim * dim);
        for (int i = 0; i < size(); ++i) full(index[i]) = v(i);
        return full;
    }
    CVec project(const CVec& full) const
    {
        CVec v(size());
        for (int i = 0; i < size(); ++i) v(i) = full(index[i]);
        return v;
    }
};

struct SteadyState {
    CMat rho;
    double residual = 0.0;  // max-norm of L(rho)
    double rcond = 0.0;     // reciprocal condition of the bordered null-space system
    double second_mode = 0.0;  // estimate of the second-smallest |eigenvalue| of the generator
};

// Adding rho tr^T moves the zero mode of the generator to tr(rho) = 1 and leaves the rest of
// the spectrum in place; inverse iteration then finds the slowest remaining mode.
inline double second_mode_magnitude(const CMat& gen, const CVec& rho, const DiagonalSector& sec, int dim)
{
    CVec tr = CVec::Zero(sec.size());
    for (int x = 0; x < dim; ++x) tr(sec.lookup[x * dim + x]) = 1.0;
    CMat b = gen + rho * tr.transpose();
    Eigen::PartialPivLU<CMat> lu(b);
    CVec x = CVec::Ones(sec.size()) / std::sqrt(double(sec.size()));
    double est = 0.0;
    for (int it = 0; it < 40; ++it) {
        CVec y = lu.solve(x);
        double ny = y.norm();
        if (!std::isfinite(ny) || ny == 0.0) return 0.0;
        x = y / ny;
        est = (b * x).norm();
    }
    return est;
}

// Null vector of the generator: one diagonal row of the sector block is replaced by the trace.
inline SteadyState steady_state_full(const LindbladModel& m)
{
    const int dim = 1 << m.n;
    DiagonalSector sec(m.n);
    SpMat full = build_liouvillean(m);
    CMat a = sec.restrict(full);
    const CMat gen = a;
    const int row0 = sec.lookup[0];
    a.row(row0).setZero();
    for (int x = 0; x < dim; ++x) a(row0, sec.lookup[x * dim + x]) = 1.0;
    CVec rhs = CVec::Zero(sec.size());
    rhs(row0) = 1.0;
    Eigen::PartialPivLU<CMat> lu(a);
    SteadyState ss;
    ss.rcond = lu.rcond();
    if (!(ss.rcond > 1e-12))
        throw Error(ErrorKind::DegenerateSteadyState, "liouville-oracle",
                    "generator null space is not one-dimensional");
    CMat rho = vec_to_mat(sec.embed(lu.solve(rhs)), dim);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace();
    ss.rho = rho;
    ss.residual = max_abs(apply_generator(m, rho));
    ss.second_mode = second_mode_magnitude(gen, sec.restrict_vec(mat_to_vec(rho)), sec, dim);
    if (!(ss.second_mode >= 1e-8))
        throw Error(ErrorKind::DegenerateSteadyState, "liouville-oracle",
                    "second zero mode, |lambda| ~ " + std::to_string(ss.second_mode));
    return ss;
}

inline CMat steady_state(const LindbladModel& m) { return steady_state_full(m).rho; }

// Full spectrum of the generator; dense, intended for small chains.
inline CVec liouvillean_spectrum(const LindbladModel& m)
{
    CMat l = CMat(build_liouvillean(m));
    return Eigen::ComplexEigenSolver<CMat>(l, false).eigenvalues();
}

inline cplx observable(const CMat& rho, const CMat& op) { return (op * rho).trace() / rho.trace(); }

// Bond current i<s+_k s-_{k+1} - s-_k s+_{k+1}>.
inline CMat current_operator(int k, int n)
{
    return I1 * (site_op(Pauli::Plus, k, n) * site_op(Pauli::Minus, k + 1, n) -
                 site_op(Pauli::Minus, k, n) * site_op(Pauli::Plus, k + 1, n));
}

inline double current_oracle(const CMat& rho, int k, int n)
{
    return observable(rho, current_operator(k, n)).real();
}

inline std::vector<double> profile_oracle(const CMat& rho, int n)
{
    std::vector<double> p;
    for (int j = 1; j <= n; ++j) p.push_back(observable(rho, site_op(Pauli::Z, j, n)).real());
    return p;
}

} // namespace xxz

#endif
