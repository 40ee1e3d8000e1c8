#ifndef XXZ_NESS_HPP
#define XXZ_NESS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "error.hpp"
#include "numerics.hpp"
#include "qlax.hpp"
#include "types.hpp"

namespace xxz {

// Solution point of the maximally driven chain at coupling eps (see max_driven).
inline QContext ness_context(double delta, double eps, int cutoff)
{
    cplx g = gamma_from_delta(delta);
    return {delta, g, s_from_epsilon(2.0 * eps, g), 0.0, cutoff};
}

// Lax operator on the physical basis (index 0 = spin up) used for the steady state.
inline LaxOperator physical_lax(const QContext& ctx) { return build_lax_normalized(ctx).flipped(); }

// Smallest m with gamma = pi l / m, or 0 if gamma is not such a rational angle.
inline int rational_order(cplx gamma, int max_m = 24)
{
    if (std::abs(gamma.imag()) > 1e-14 || std::abs(gamma.real()) < rational_limit) return 0;
    double r = gamma.real() / pi;
    for (int m = 2; m <= max_m; ++m) {
        double l = r * m;
        if (std::abs(l - std::round(l)) < 1e-12) return m;
    }
    return 0;
}

// S = <0| P(p1,q1) ... P(pn,qn) |0> as a 2^n x 2^n matrix (site 1 most significant).
inline CMat build_S_dense(int n, const LaxOperator& lax)
{
    if (n < 1 || n > 12)
        throw Error(ErrorKind::InvalidArgument, "mpo-ness", "dense S requires 1 <= n <= 12");
    const int dim = 1 << n;
    const int d = lax.cutoff;
    CMat s = CMat::Zero(dim, dim);
    std::vector<Eigen::RowVectorXcd> stack(n + 1);
    stack[0] = Eigen::RowVectorXcd::Zero(d);
    stack[0](0) = 1.0;
    auto rec = [&](auto&& self, int depth, int p, int q) -> void {
        if (depth == n) {
            s(p, q) = stack[n](0);
            return;
        }
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                stack[depth + 1] = stack[depth] * lax.block(a, b);
                if (stack[depth + 1].squaredNorm() == 0.0) continue;
                self(self, depth + 1, (p << 1) | a, (q << 1) | b);
            }
    };
    rec(rec, 0, 0, 0);
    return s;
}

// Derivative of build_S_dense along a one-parameter family with block derivatives dlax.
inline CMat build_S_dense_derivative(int n, const LaxOperator& lax, const LaxOperator& dlax)
{
    const int dim = 1 << n;
    const int d = lax.cutoff;
    CMat ds = CMat::Zero(dim, dim);
    std::vector<Eigen::RowVectorXcd> v(n + 1), dv(n + 1);
    v[0] = Eigen::RowVectorXcd::Zero(d);
    v[0](0) = 1.0;
    dv[0] = Eigen::RowVectorXcd::Zero(d);
    auto rec = [&](auto&& self, int depth, int p, int q) -> void {
        if (depth == n) {
            ds(p, q) = dv[n](0);
            return;
        }
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                v[depth + 1] = v[depth] * lax.block(a, b);
                dv[depth + 1] = dv[depth] * lax.block(a, b) + v[depth] * dlax.block(a, b);
                if (v[depth + 1].squaredNorm() == 0.0 && dv[depth + 1].squaredNorm() == 0.0) continue;
                self(self, depth + 1, (p << 1) | a, (q << 1) | b);
            }
    };
    rec(rec, 0, 0, 0);
    return ds;
}

inline CMat ness_density_dense(int n, const QContext& ctx)
{
    CMat s = build_S_dense(n, physical_lax(ctx));
    CMat rho = s * s.adjoint();
    return rho / rho.trace();
}

// Doubled Lax: block (p,p') = sum_q P(p,q) (x) conj(P(p',q)) on the D^2 auxiliary space.
struct DoubleLax {
    std::array<SpMat, 4> blocks;
    int cutoff = 0;
    const SpMat& block(int p, int pp) const { return blocks[2 * p + pp]; }
};

inline DoubleLax build_double_lax(const LaxOperator& lax)
{
    DoubleLax dl;
    dl.cutoff = lax.cutoff;
    std::array<SpMat, 4> sp, spc;
    for (int i = 0; i < 4; ++i) {
        sp[i] = lax.blocks[i].sparseView();
        spc[i] = SpMat(lax.blocks[i].conjugate().sparseView());
    }
    for (int p = 0; p < 2; ++p)
        for (int pp = 0; pp < 2; ++pp) {
            SpMat acc = SpMat(Eigen::kroneckerProduct(sp[2 * p], spc[2 * pp])) +
                        SpMat(Eigen::kroneckerProduct(sp[2 * p + 1], spc[2 * pp + 1]));
            acc.prune(cplx(0.0));
            dl.blocks[2 * p + pp] = acc;
        }
    return dl;
}

struct TransferFamily {
    SpMat T, V, W;
    CVec bra0, ket0;
    int cutoff = 0;
};

// Contraction of a two-site operator O (4x4, standard basis) through two doubled Lax layers.
inline SpMat two_site_transfer(const DoubleLax& dl, const Eigen::Matrix4cd& o)
{
    const int d2 = dl.cutoff * dl.cutoff;
    SpMat w(d2, d2);
    for (int i = 0; i < 4; ++i)
        for (int ip = 0; ip < 4; ++ip) {
            cplx c = o(ip, i);
            if (c == 0.0) continue;
            w += c * SpMat(dl.block(i >> 1, ip >> 1) * dl.block(i & 1, ip & 1));
        }
    w.prune(cplx(0.0));
    return w;
}

inline Eigen::Matrix4cd bond_current_matrix()
{
    Eigen::Matrix4cd o = Eigen::Matrix4cd::Zero();
    // basis |s1 s2> with 0 = up: s+_1 s-_2 maps |down,up> (2) to |up,down> (1)
    o(1, 2) = I1;
    o(2, 1) = -I1;
    return o;
}

inline TransferFamily build_transfer(const LaxOperator& lax)
{
    DoubleLax dl = build_double_lax(lax);
    TransferFamily f;
    f.cutoff = lax.cutoff;
    f.T = dl.block(0, 0) + dl.block(1, 1);
    f.V = dl.block(0, 0) - dl.block(1, 1);
    f.W = two_site_transfer(dl, bond_current_matrix());
    const int d2 = lax.cutoff * lax.cutoff;
    f.bra0 = CVec::Zero(d2);
    f.ket0 = CVec::Zero(d2);
    f.bra0(0) = 1.0;
    f.ket0(0) = 1.0;
    return f;
}

inline TransferFamily build_transfer(const QContext& ctx, cplx scale = 1.0)
{
    return build_transfer(physical_lax(ctx).scaled(scale));
}

// Mean current per unit Z_{n-1}/Z_n for the normalized Lax at coupling eps.
inline double current_prefactor(const QContext& ctx, double eps)
{
    return eps * std::norm(q_number(ctx.s, ctx.gamma));
}

// A value stored as mantissa * exp(log_scale).
struct LogValue {
    cplx mantissa = 0.0;
    double log_scale = 0.0;

    double log_abs() const { return std::log(std::abs(mantissa)) + log_scale; }
    friend cplx ratio(const LogValue& a, const LogValue& b)
    {
        return a.mantissa / b.mantissa * std::exp(a.log_scale - b.log_scale);
    }
};

// Left/right transfer powers, renormalized each step so long chains stay representable.
class NessModel {
public:
    NessModel(const QContext& ctx, double eps, int n, cplx scale = 1.0)
        : ctx_(ctx), eps_(eps), n_(n), scale_(scale), family_(build_transfer(ctx, scale))
    {
        if (n < 1) throw Error(ErrorKind::InvalidArgument, "mpo-ness", "n must be >= 1");
        prefactor_ = current_prefactor(ctx, eps) * std::norm(scale);
        SpMat tt = family_.T.transpose();
        propagate(tt, family_.bra0, left_, left_log_);
        propagate(family_.T, family_.ket0, right_, right_log_);
    }

    int n() const { return n_; }
    double eps() const { return eps_; }
    const QContext& context() const { return ctx_; }
    const TransferFamily& family() const { return family_; }
    double prefactor() const { return prefactor_; }

    LogValue partition(int k) const
    {
        check_range(k, 0, n_);
        int a = (k + 1) / 2, b = k / 2;
        return {left_[a].cwiseProduct(right_[b]).sum(), left_log_[a] + right_log_[b]};
    }
    cplx partition_value(int k) const
    {
        LogValue z = partition(k);
        return z.mantissa * std::exp(z.log_scale);
    }

    // <<0| T^a X T^b |0>> for a + b <= n.
    LogValue sandwich(const SpMat& x, int a, int b) const
    {
        check_range(a, 0, n_);
        check_range(b, 0, n_);
        cplx v = left_[a].cwiseProduct(x * right_[b]).sum();
        return {v, left_log_[a] + right_log_[b]};
    }

    cplx z_ratio(int k) const { return ratio(partition(k - 1), checked_partition(k)); }

    // <sigma^z_j> on a chain of length len (default n).
    cplx spin_profile_complex(int j, int len = -1) const
    {
        if (len < 0) len = n_;
        check_range(len, 1, n_);
        check_range(j, 1, len);
        return ratio(sandwich(family_.V, j - 1, len - j), checked_partition(len));
    }
    double spin_profile(int j, int len = -1) const { return spin_profile_complex(j, len).real(); }

    std::vector<double> profile(int len = -1) const
    {
        if (len < 0) len = n_;
        std::vector<double> p;
        for (int j = 1; j <= len; ++j) p.push_back(spin_profile(j, len));
        return p;
    }
    double profile_imag_max(int len = -1) const
    {
        if (len < 0) len = n_;
        double m = 0;
        for (int j = 1; j <= len; ++j) m = std::max(m, std::abs(spin_profile_complex(j, len).imag()));
        return m;
    }

    cplx current_complex(int len = -1) const
    {
        if (len < 0) len = n_;
        check_range(len, 2, n_);
        return prefactor_ * z_ratio(len);
    }
    double current(int len = -1) const { return current_complex(len).real(); }

    // Mean current from the two-site current insertion on bond (k, k+1).
    cplx bond_current(int k, int len = -1) const
    {
        if (len < 0) len = n_;
        check_range(k, 1, len - 1);
        return ratio(sandwich(family_.W, k - 1, len - k - 1), checked_partition(len));
    }

    double log_abs_current(int len) const
    {
        check_range(len, 2, n_);
        return std::log(prefactor_) + partition(len - 1).log_abs() - checked_partition(len).log_abs();
    }

private:
    void check_range(int k, int lo, int hi) const
    {
        if (k < lo || k > hi)
            throw Error(ErrorKind::InvalidArgument, "mpo-ness", "index out of range");
    }
    LogValue checked_partition(int k) const
    {
        LogValue z = partition(k);
        if (!(std::abs(z.mantissa) > 0.0) || !std::isfinite(std::abs(z.mantissa)))
            throw Error(ErrorKind::ZeroPartition, "mpo-ness", "partition function vanished");
        return z;
    }
    void propagate(const SpMat& op, const CVec& start, std::vector<CVec>& vecs, std::vector<double>& logs)
    {
        vecs.assign(n_ + 1, CVec());
        logs.assign(n_ + 1, 0.0);
        vecs[0] = start;
        for (int k = 1; k <= n_; ++k) {
            CVec v = op * vecs[k - 1];
            double m = v.cwiseAbs().maxCoeff();
            if (!(m > 0.0) || !std::isfinite(m)) {
                vecs[k] = CVec::Zero(v.size());
                logs[k] = logs[k - 1];
                continue;
            }
            vecs[k] = v / m;
            logs[k] = logs[k - 1] + std::log(m);
        }
    }

    QContext ctx_;
    double eps_;
    int n_;
    cplx scale_;
    TransferFamily family_;
    double prefactor_ = 0.0;
    std::vector<CVec> left_, right_;
    std::vector<double> left_log_, right_log_;
};

// Default auxiliary dimension: exact for chains up to length n.
inline int default_cutoff(int n) { return n + 1; }

// Builds the chain model; for rational gamma = pi l/m starts at m+1 and doubles until stable.
inline NessModel make_ness(double delta, double eps, int n, int cutoff = 0)
{
    if (cutoff > 0) return NessModel(ness_context(delta, eps, cutoff), eps, n);
    int m = rational_order(gamma_from_delta(delta));
    int full = default_cutoff(n);
    if (m == 0 || m + 1 >= full) return NessModel(ness_context(delta, eps, full), eps, n);
    int d = m + 1;
    NessModel cur(ness_context(delta, eps, d), eps, n);
    while (true) {
        int d2 = std::min(2 * d, full);
        NessModel next(ness_context(delta, eps, d2), eps, n);
        double dz = std::abs(cur.partition(n).log_abs() - next.partition(n).log_abs());
        double dj = n >= 2 ? std::abs(cur.current() - next.current()) : 0.0;
        if ((dz <= 1e-12 && dj <= 1e-12) || d2 == full) return next;
        d = d2;
        cur = next;
    }
}

struct TruncationReport {
    double partition_change;  // relative change of Z_n
    double profile_change;
    double current_change;
};

inline TruncationReport truncation_change(double delta, double eps, int n, int cutoff)
{
    NessModel a(ness_context(delta, eps, cutoff), eps, n);
    NessModel b(ness_context(delta, eps, 2 * cutoff), eps, n);
    TruncationReport r{};
    r.partition_change = std::abs(ratio(a.partition(n), b.partition(n)) - 1.0);
    for (int j = 1; j <= n; ++j)
        r.profile_change = std::max(r.profile_change, std::abs(a.spin_profile(j) - b.spin_profile(j)));
    r.current_change = n >= 2 ? std::abs(a.current() - b.current()) : 0.0;
    return r;
}

// Continuity check: <<0|T^a W T^b|0>> = c Z_{a+b+1}; max relative mismatch over a+b <= n-2.
inline double continuity_residual(const NessModel& m)
{
    double worst = 0.0;
    for (int len = 2; len <= m.n(); ++len)
        for (int a = 0; a + 2 <= len; ++a) {
            int b = len - 2 - a;
            LogValue lhs = m.sandwich(m.family().W, a, b);
            LogValue rhs = m.partition(len - 1);
            rhs.mantissa *= m.prefactor();
            worst = std::max(worst, std::abs(ratio(lhs, rhs) - 1.0));
        }
    return worst;
}

// Elementwise distance of W from c T on the interior block (diagnostic only; not an identity).
inline double continuity_elementwise(const TransferFamily& f, double c)
{
    const int d = f.cutoff;
    CMat diff = CMat(f.W) - c * CMat(f.T);
    double m = 0;
    for (int i = 0; i < d * d; ++i)
        for (int j = 0; j < d * d; ++j)
            if (i / d < d - 2 && i % d < d - 2 && j / d < d - 2 && j % d < d - 2)
                m = std::max(m, std::abs(diff(i, j)));
    return m;
}

inline void require_continuity(const NessModel& m, double tol = 1e-8)
{
    double r = continuity_residual(m);
    if (!(r <= tol))
        throw Error(ErrorKind::ContinuityViolation, "mpo-ness",
                    "current insertion disagrees with c Z_{n-1} (residual " + std::to_string(r) + ")");
}

struct DecayFit {
    double slope;
    double reference;  // -arcosh(delta)
    std::vector<int> sizes;
    std::vector<double> log_current;
};

inline DecayFit decay_rate_easy_axis(double delta, double eps, int n_min, int n_max)
{
    if (!(delta > 1.0))
        throw Error(ErrorKind::InvalidArgument, "mpo-ness", "easy-axis fit needs delta > 1");
    if (n_max - n_min + 1 < 10)
        throw Error(ErrorKind::InvalidArgument, "mpo-ness", "fit needs at least 10 sizes");
    NessModel m(ness_context(delta, eps, default_cutoff(n_max)), eps, n_max);
    DecayFit f{0.0, -std::acosh(delta), {}, {}};
    std::vector<double> x;
    for (int n = n_min; n <= n_max; ++n) {
        double lj = m.log_abs_current(n);
        if (!std::isfinite(lj))
            throw Error(ErrorKind::FitFailure, "mpo-ness", "current underflow at n=" + std::to_string(n));
        f.sizes.push_back(n);
        x.push_back(n);
        f.log_current.push_back(lj);
    }
    f.slope = fit_slope(x, f.log_current);
    return f;
}

// Indices (k1,k2) of the doubled auxiliary space kept away from the cutoff by `margin`.
inline std::vector<int> interior_indices(int d, int margin)
{
    std::vector<int> idx;
    for (int k1 = 0; k1 < d - margin; ++k1)
        for (int k2 = 0; k2 < d - margin; ++k2) idx.push_back(k1 * d + k2);
    return idx;
}

inline double interior_max(const CMat& m, int d, int margin)
{
    auto idx = interior_indices(d, margin);
    double r = 0;
    for (int i : idx)
        for (int j : idx) r = std::max(r, std::abs(m(i, j)));
    return r;
}

// Isotropic-point transfer operators for spin parameter s.
inline TransferFamily rational_transfer(cplx s, int cutoff)
{
    QContext ctx{1.0, 0.0, s, 0.0, cutoff};
    return build_transfer(ctx);
}

// [T,[T,V]] + 2{T,V} - 8 s_coef^2 V with T, V built at s_lax.
inline ResidualReport vt_algebra_residual(cplx s_lax, cplx s_coef, int cutoff)
{
    TransferFamily f = rational_transfer(s_lax, cutoff);
    CMat t = CMat(f.T), v = CMat(f.V);
    CMat r = t * (t * v - v * t) - (t * v - v * t) * t + 2.0 * (t * v + v * t) - 8.0 * s_coef * s_coef * v;
    ResidualReport rep;
    rep.value = interior_max(r, cutoff, 3);
    return rep;
}

// Norms of <<0|(T-V)/Z1 - <<0| and (T+V)/Z1 |0>> - |0>> at the isotropic point.
inline std::pair<double, double> boundary_residual(cplx s, int cutoff, double t_scale = 1.0)
{
    TransferFamily f = rational_transfer(s, cutoff);
    SpMat t = t_scale * f.T;
    cplx z1 = (f.bra0.transpose() * (f.T * f.ket0))(0);
    CVec left = (SpMat(t - f.V).transpose() * f.bra0) / z1 - f.bra0;
    CVec right = (SpMat(t + f.V) * f.ket0) / z1 - f.ket0;
    return {left.norm(), right.norm()};
}

struct GrowthFit {
    double quadratic;
    double reference;  // eps^2 / (2 pi^2)
};

// Leading quadratic growth of Z_n / (Z_1 Z_{n-1}) at the isotropic point.
inline GrowthFit partition_growth(double eps, int n_lo, int n_hi)
{
    NessModel m(ness_context(1.0, eps, default_cutoff(n_hi)), eps, n_hi);
    double z1 = m.partition_value(1).real();
    std::vector<double> x, y;
    for (int n = n_lo; n <= n_hi; ++n) {
        x.push_back(n);
        y.push_back(ratio(m.partition(n), m.partition(n - 1)).real() / z1);
    }
    RVec c = polyfit(x, y, 2, 0.5 * (n_lo + n_hi));
    return {c(2), eps * eps / (2.0 * pi * pi)};
}

} // namespace xxz

#endif
