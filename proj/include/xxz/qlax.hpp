#ifndef XXZ_QLAX_HPP
#define XXZ_QLAX_HPP

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "error.hpp"
#include "types.hpp"

namespace xxz {

inline constexpr double rational_limit = 1e-8;

// Deformation angle with cos(gamma) = delta; imaginary for delta > 1.
inline cplx gamma_from_delta(double delta)
{
    if (std::abs(delta) <= 1.0) return {std::acos(delta), 0.0};
    if (delta > 1.0) return {0.0, std::acosh(delta)};
    return {pi, -std::acosh(-delta)};
}

struct QContext {
    double delta = 1.0;
    cplx gamma = 0.0;
    cplx s = 0.0;
    cplx phi = 0.0;
    int cutoff = 2;

    cplx q() const { return std::exp(I1 * gamma); }
    bool is_rational() const { return std::abs(gamma) < rational_limit; }

    static QContext make(double delta, cplx s, cplx phi, int cutoff)
    {
        return {delta, gamma_from_delta(delta), s, phi, cutoff};
    }
};

// [x]_q = sin(gamma x) / sin(gamma), continuous at gamma -> 0.
inline cplx q_number(cplx x, cplx gamma)
{
    if (std::abs(gamma) < rational_limit) return x;
    return std::sin(gamma * x) / std::sin(gamma);
}

struct VermaOps {
    CMat sz, sp, sm;
    cplx spin;
    int cutoff;
};

inline VermaOps build_verma(const QContext& ctx)
{
    if (ctx.cutoff < 2)
        throw Error(ErrorKind::InvalidArgument, "qlax-core", "cutoff must be >= 2");
    const int d = ctx.cutoff;
    VermaOps v{CMat::Zero(d, d), CMat::Zero(d, d), CMat::Zero(d, d), ctx.s, d};
    for (int k = 0; k < d; ++k) v.sz(k, k) = ctx.s - double(k);
    for (int k = 0; k + 1 < d; ++k) {
        v.sp(k, k + 1) = q_number(double(k + 1), ctx.gamma);
        v.sm(k + 1, k) = q_number(2.0 * ctx.s - double(k), ctx.gamma);
    }
    return v;
}

// Interior-block residual of [s+,s-] = [2 sz]_q and [sz, s±] = ±s±.
inline double algebra_residual(const VermaOps& v, cplx gamma)
{
    const int m = v.cutoff - 2;
    CMat q2sz = CMat::Zero(v.cutoff, v.cutoff);
    for (int k = 0; k < v.cutoff; ++k) q2sz(k, k) = q_number(2.0 * v.sz(k, k), gamma);
    CMat r1 = commutator(v.sp, v.sm) - q2sz;
    CMat r2 = commutator(v.sz, v.sp) - v.sp;
    CMat r3 = commutator(v.sz, v.sm) + v.sm;
    return std::max({max_abs(r1.topLeftCorner(m, m)), max_abs(r2.topLeftCorner(m, m)),
                     max_abs(r3.topLeftCorner(m, m))});
}

// 2x2 physical blocks of DxD auxiliary matrices.
struct LaxOperator {
    std::array<CMat, 4> blocks;
    int cutoff = 0;

    CMat& block(int i, int j) { return blocks[2 * i + j]; }
    const CMat& block(int i, int j) const { return blocks[2 * i + j]; }

    LaxOperator scaled(cplx c) const
    {
        LaxOperator r = *this;
        for (auto& b : r.blocks) b *= c;
        return r;
    }
    // Relabels the physical index p -> 1 - p on both legs.
    LaxOperator flipped() const
    {
        LaxOperator r = *this;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.block(i, j) = block(1 - i, 1 - j);
        return r;
    }
};

inline LaxOperator build_lax(const QContext& ctx)
{
    VermaOps v = build_verma(ctx);
    const int d = ctx.cutoff;
    LaxOperator l;
    l.cutoff = d;
    l.block(0, 0) = CMat::Zero(d, d);
    l.block(1, 1) = CMat::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        l.block(0, 0)(k, k) = std::sin(ctx.phi + ctx.gamma * v.sz(k, k));
        l.block(1, 1)(k, k) = std::sin(ctx.phi - ctx.gamma * v.sz(k, k));
    }
    l.block(0, 1) = std::sin(ctx.gamma) * v.sm;
    l.block(1, 0) = std::sin(ctx.gamma) * v.sp;
    return l;
}

inline LaxOperator lax_phi_derivative(const QContext& ctx)
{
    VermaOps v = build_verma(ctx);
    const int d = ctx.cutoff;
    LaxOperator l;
    l.cutoff = d;
    for (auto& b : l.blocks) b = CMat::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        l.block(0, 0)(k, k) = std::cos(ctx.phi + ctx.gamma * v.sz(k, k));
        l.block(1, 1)(k, k) = std::cos(ctx.phi - ctx.gamma * v.sz(k, k));
    }
    return l;
}

// Derivative of build_lax with respect to the spin parameter s.
inline LaxOperator lax_s_derivative(const QContext& ctx)
{
    const int d = ctx.cutoff;
    LaxOperator l;
    l.cutoff = d;
    for (auto& b : l.blocks) b = CMat::Zero(d, d);
    const cplx g = ctx.gamma;
    for (int k = 0; k < d; ++k) {
        cplx sz = ctx.s - double(k);
        l.block(0, 0)(k, k) = g * std::cos(ctx.phi + g * sz);
        l.block(1, 1)(k, k) = -g * std::cos(ctx.phi - g * sz);
    }
    for (int k = 0; k + 1 < d; ++k)
        l.block(0, 1)(k + 1, k) = 2.0 * g * std::cos(g * (2.0 * ctx.s - double(k)));
    return l;
}

// L / sin(gamma). In the rational limit phi is read as the rescaled parameter phi/gamma.
inline LaxOperator build_lax_normalized(const QContext& ctx)
{
    if (!ctx.is_rational()) return build_lax(ctx).scaled(1.0 / std::sin(ctx.gamma));
    VermaOps v = build_verma(ctx);
    const int d = ctx.cutoff;
    LaxOperator l;
    l.cutoff = d;
    l.block(0, 0) = ctx.phi * CMat::Identity(d, d) + v.sz;
    l.block(1, 1) = ctx.phi * CMat::Identity(d, d) - v.sz;
    l.block(0, 1) = v.sm;
    l.block(1, 0) = v.sp;
    return l;
}

struct ResidualReport {
    double value = 0.0;
    int row = -1;
    int col = -1;
    std::string where;
};

// Two-site XXZ density 2(s+s- + s-s+) + delta sz sz on the 4-dim physical space.
inline Eigen::Matrix4cd xxz_bond(double delta)
{
    Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
    h(0, 0) = delta;
    h(3, 3) = delta;
    h(1, 1) = -delta;
    h(2, 2) = -delta;
    h(1, 2) = 2.0;
    h(2, 1) = 2.0;
    return h;
}

// Max-norm of [h, L(x)L] - 2 sin(gamma) (L(x)L_phi - L_phi(x)L) on interior auxiliary rows/cols.
inline ResidualReport sutherland_residual(const QContext& ctx)
{
    if (ctx.cutoff < 3)
        throw Error(ErrorKind::InvalidArgument, "qlax-core", "cutoff too small for interior check");
    LaxOperator l = build_lax(ctx);
    LaxOperator lp = lax_phi_derivative(ctx);
    Eigen::Matrix4cd h = xxz_bond(ctx.delta);
    const int d = ctx.cutoff;
    const int m = d - 2;
    auto prod = [&](const LaxOperator& a, const LaxOperator& b, int i, int j) -> CMat {
        return a.block(i / 2, j / 2) * b.block(i % 2, j % 2);
    };
    std::array<CMat, 16> ll, mixed;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            ll[4 * i + j] = prod(l, l, i, j);
            mixed[4 * i + j] = prod(l, lp, i, j) - prod(lp, l, i, j);
        }
    const cplx sg = std::sin(ctx.gamma);
    ResidualReport rep;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CMat r = -2.0 * sg * mixed[4 * i + j];
            for (int k = 0; k < 4; ++k) {
                if (h(i, k) != 0.0) r += h(i, k) * ll[4 * k + j];
                if (h(k, j) != 0.0) r -= h(k, j) * ll[4 * i + k];
            }
            CMat inner = r.topLeftCorner(m, m);
            Eigen::Index rr, cc;
            double v = inner.cwiseAbs().maxCoeff(&rr, &cc);
            if (v > rep.value) {
                rep.value = v;
                rep.row = static_cast<int>(rr);
                rep.col = static_cast<int>(cc);
                std::ostringstream os;
                os << "physical (" << i << "," << j << ") auxiliary (" << rr << "," << cc << ")";
                rep.where = os.str();
            }
        }
    return rep;
}

inline cplx epsilon_from_s(cplx s, cplx gamma)
{
    cplx qs = q_number(s, gamma);
    if (std::abs(qs) < 1e-300)
        throw Error(ErrorKind::InvalidArgument, "qlax-core", "[s]_q vanishes (pole of the coupling)");
    if (std::abs(gamma) < rational_limit) return 4.0 * I1 / s;
    return 4.0 * I1 * std::cos(gamma * s) / qs;
}

namespace detail {

inline cplx depsilon_ds(cplx s, cplx gamma)
{
    if (std::abs(gamma) < rational_limit) return -4.0 * I1 / (s * s);
    cplx sn = std::sin(gamma * s);
    return -4.0 * I1 * std::sin(gamma) * gamma / (sn * sn);
}

// Closed-form inverse used to seed Newton on a definite branch.
inline bool analytic_seed(double eps, cplx gamma, cplx& s)
{
    if (std::abs(gamma) < rational_limit) {
        s = 4.0 * I1 / eps;
        return true;
    }
    if (std::abs(gamma.imag()) < 1e-14 && gamma.real() > 0 && gamma.real() < pi) {
        double g = gamma.real();
        double r = eps / (4.0 * std::sin(g));
        if (std::abs(r - 1.0) < 1e-12) return false;
        if (r < 1.0)
            s = cplx(pi / 2.0, std::atanh(r)) / g;
        else
            s = cplx(0.0, std::atanh(1.0 / r)) / g;
        return true;
    }
    if (std::abs(gamma.real()) < 1e-14 && gamma.imag() > 0) {
        double eta = gamma.imag();
        s = cplx(0.0, std::atan(4.0 * std::sinh(eta) / eps) / eta);
        return true;
    }
    return false;
}

inline bool newton(double eps, cplx gamma, cplx& s)
{
    for (int it = 0; it < 200; ++it) {
        cplx f = epsilon_from_s(s, gamma) - eps;
        if (std::abs(f) <= 1e-12 * std::max(1.0, eps)) return true;
        cplx step = f / depsilon_ds(s, gamma);
        double damp = 1.0;
        double f0 = std::abs(f);
        for (int k = 0; k < 30; ++k) {
            cplx trial = s - damp * step;
            cplx qs = q_number(trial, gamma);
            if (std::abs(qs) > 1e-300 && std::abs(epsilon_from_s(trial, gamma) - eps) < f0) break;
            damp *= 0.5;
        }
        s -= damp * step;
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
    }
    return std::abs(epsilon_from_s(s, gamma) - eps) <= 1e-10;
}

} // namespace detail

// Solves epsilon_from_s(s, gamma) = eps.
inline cplx s_from_epsilon(double eps, cplx gamma)
{
    if (!(eps > 0.0))
        throw Error(ErrorKind::InvalidArgument, "qlax-core", "coupling must be positive");
    cplx s;
    if (detail::analytic_seed(eps, gamma, s) && detail::newton(eps, gamma, s)) return s;
    s = 4.0 * I1 / eps;
    if (detail::newton(eps, gamma, s)) return s;
    throw Error(ErrorKind::NoConvergence, "qlax-core",
                "Newton inversion of the coupling failed; supply s directly");
}

using KeyValues = std::map<std::string, std::string>;

inline KeyValues to_key_values(const QContext& c)
{
    auto num = [](double x) {
        std::ostringstream os;
        os.precision(17);
        os << x;
        return os.str();
    };
    return {{"delta", num(c.delta)},         {"gamma_re", num(c.gamma.real())},
            {"gamma_im", num(c.gamma.imag())}, {"s_re", num(c.s.real())},
            {"s_im", num(c.s.imag())},         {"phi_re", num(c.phi.real())},
            {"phi_im", num(c.phi.imag())},     {"cutoff", std::to_string(c.cutoff)}};
}

inline QContext from_key_values(const KeyValues& kv)
{
    auto get = [&](const char* k, double dflt) {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidArgument, "qlax-core", std::string("bad number for ") + k);
        }
    };
    auto it = kv.find("delta");
    if (it == kv.end()) throw Error(ErrorKind::InvalidArgument, "qlax-core", "missing key delta");
    QContext c;
    c.delta = get("delta", 1.0);
    if (kv.count("gamma_re") || kv.count("gamma_im"))
        c.gamma = {get("gamma_re", 0.0), get("gamma_im", 0.0)};
    else
        c.gamma = gamma_from_delta(c.delta);
    c.s = {get("s_re", 0.0), get("s_im", 0.0)};
    c.phi = {get("phi_re", 0.0), get("phi_im", 0.0)};
    c.cutoff = static_cast<int>(get("cutoff", 2));
    if (c.cutoff < 2) throw Error(ErrorKind::InvalidArgument, "qlax-core", "cutoff must be >= 2");
    if (std::abs(std::cos(c.gamma) - c.delta) > 1e-12)
        throw Error(ErrorKind::InvalidArgument, "qlax-core", "cos(gamma) disagrees with delta");
    return c;
}

inline std::string serialize(const QContext& c)
{
    std::ostringstream os;
    for (const auto& [k, v] : to_key_values(c)) os << k << " = " << v << "\n";
    return os.str();
}

// Parses "key = value" lines; '#' starts a comment, [section] headers are skipped.
inline KeyValues parse_key_values(const std::string& text)
{
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        s.erase(0, s.find_first_not_of(ws));
        s.erase(s.find_last_not_of(ws) + 1);
        return s;
    };
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::InvalidArgument, "qlax-core", "expected key = value: " + line);
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

} // namespace xxz

#endif
