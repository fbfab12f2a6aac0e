// evolve.hpp - noise-averaged correlation-matrix dynamics and Liouvillian spectrum
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "model.hpp"

namespace noisesync {

struct CorrelationMatrix {
    Eigen::MatrixXcd z;
    double time = 0.0;
};

enum class Sector { even, odd };

// Orthonormal real basis of Hermitian N x N matrices, split by the symmetry
// S(Z) = P Z^T P with P = diag((-1)^x). S commutes with the averaged generator
// for any noise placement; S-odd matrices have zero diagonal, so only the even
// sector carries magnetization.
class HermitianBasis {
public:
    enum class Kind { diagonal, symmetric, antisymmetric };
    struct Element {
        int x, y;  // 0-based, x <= y
        Kind kind;
        Sector sector;
    };

    explicit HermitianBasis(int n) : n_(n) {
        std::vector<Element> all;
        for (int x = 0; x < n; ++x) all.push_back({x, x, Kind::diagonal, Sector::even});
        for (int x = 0; x < n; ++x)
            for (int y = x + 1; y < n; ++y) {
                const bool even_sum = (x + y) % 2 == 0;
                all.push_back({x, y, Kind::symmetric, even_sum ? Sector::even : Sector::odd});
                all.push_back({x, y, Kind::antisymmetric, even_sum ? Sector::odd : Sector::even});
            }
        for (const auto& e : all)
            if (e.sector == Sector::even) elements_.push_back(e);
        n_even_ = int(elements_.size());
        for (const auto& e : all)
            if (e.sector == Sector::odd) elements_.push_back(e);
    }

    int n() const { return n_; }
    int dim() const { return n_ * n_; }
    int offset(Sector s) const { return s == Sector::even ? 0 : n_even_; }
    int size(Sector s) const { return s == Sector::even ? n_even_ : dim() - n_even_; }
    const Element& element(int i) const { return elements_[i]; }

    // Coordinates of a Hermitian matrix.
    Eigen::VectorXd coords(const Eigen::MatrixXcd& z) const {
        Eigen::VectorXd c(dim());
        for (int i = 0; i < dim(); ++i) c(i) = coord(elements_[i], z);
        return c;
    }

    double coord(const Element& e, const Eigen::MatrixXcd& z) const {
        switch (e.kind) {
            case Kind::diagonal: return z(e.x, e.x).real();
            case Kind::symmetric: return std::numbers::sqrt2 * 0.5 * (z(e.x, e.y) + z(e.y, e.x)).real();
            case Kind::antisymmetric: return std::numbers::sqrt2 * 0.5 * (z(e.x, e.y) - z(e.y, e.x)).imag();
        }
        return 0.0;
    }

    // Sum_i c_i B_i for complex coefficients; Hermitian when c is real.
    template <class Vec>
    Eigen::MatrixXcd matrix(const Vec& c, Sector s) const {
        Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(n_, n_);
        const int off = offset(s);
        for (int i = 0; i < size(s); ++i) add_element(z, elements_[off + i], cplx(c(i)));
        return z;
    }

    Eigen::MatrixXcd element_matrix(int i) const {
        Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(n_, n_);
        add_element(z, elements_[i], 1.0);
        return z;
    }

private:
    static void add_element(Eigen::MatrixXcd& z, const Element& e, cplx c) {
        const double r = 1.0 / std::numbers::sqrt2;
        switch (e.kind) {
            case Kind::diagonal: z(e.x, e.x) += c; break;
            case Kind::symmetric:
                z(e.x, e.y) += c * r;
                z(e.y, e.x) += c * r;
                break;
            case Kind::antisymmetric:
                z(e.x, e.y) += c * cplx(0, r);
                z(e.y, e.x) -= c * cplx(0, r);
                break;
        }
    }

    int n_;
    int n_even_ = 0;
    std::vector<Element> elements_;
};

// dZ/dtau = i[Omega/J, Z] - 2 gamma D o Z (elementwise dephasing weights D).
class JwGenerator {
public:
    JwGenerator(const ChainSpec& chain, const NoiseSpec& noise)
        : chain_(chain), noise_(noise), basis_(chain.n_sites) {
        chain.validate();
        noise.validate(chain);
        omega_ = build_jw_matrix(chain).cast<cplx>();
        damping_ = 2.0 * noise.gamma * dephasing_weights(noise, chain);
        for (Sector s : {Sector::even, Sector::odd}) {
            const int off = basis_.offset(s), m = basis_.size(s);
            Eigen::MatrixXd& g = (s == Sector::even) ? even_ : odd_;
            g.resize(m, m);
            for (int j = 0; j < m; ++j) {
                const Eigen::MatrixXcd lz = apply(basis_.element_matrix(off + j));
                for (int i = 0; i < m; ++i) g(i, j) = basis_.coord(basis_.element(off + i), lz);
            }
        }
    }

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& z) const {
        const cplx i1(0, 1);
        Eigen::MatrixXcd out = i1 * (omega_ * z - z * omega_);
        out.array() -= damping_.array().cast<cplx>() * z.array();
        return out;
    }

    const Eigen::MatrixXd& block(Sector s) const { return s == Sector::even ? even_ : odd_; }
    const HermitianBasis& basis() const { return basis_; }
    const ChainSpec& chain() const { return chain_; }
    const NoiseSpec& noise() const { return noise_; }
    int n_sites() const { return chain_.n_sites; }

private:
    ChainSpec chain_;
    NoiseSpec noise_;
    HermitianBasis basis_;
    Eigen::MatrixXcd omega_;
    Eigen::MatrixXd damping_;
    Eigen::MatrixXd even_, odd_;
};

struct LiouvilleMode {
    double mu = 0.0;      // decay part
    double lambda = 0.0;  // frequency part
    Sector sector = Sector::even;
    double magnetization_overlap = 0.0;  // norm of the diagonal of the normalized mode
    Eigen::VectorXcd vector;             // Z of the mode, row-major N^2 vector, unit norm
};

struct LiouvilleSpectrum {
    int n_sites = 0;
    double gamma = 0.0;
    std::vector<LiouvilleMode> modes;
};

struct SpectrumOptions {
    bool keep_vectors = true;
    bool odd_sector = true;
};

inline LiouvilleSpectrum liouville_spectrum(const JwGenerator& gen, const SpectrumOptions& opt = {}) {
    LiouvilleSpectrum spec;
    spec.n_sites = gen.n_sites();
    spec.gamma = gen.noise().gamma;
    const int n = gen.n_sites();
    for (Sector s : {Sector::even, Sector::odd}) {
        if (s == Sector::odd && !opt.odd_sector) continue;
        const Eigen::MatrixXd& g = gen.block(s);
        if (g.rows() == 0) continue;
        // Odd modes have no diagonal, so their vectors are only needed on request.
        const bool vectors = s == Sector::even || opt.keep_vectors;
        Eigen::EigenSolver<Eigen::MatrixXd> es(g, vectors);
        if (es.info() != Eigen::Success) throw NumericalError("liouville_spectrum: eigensolver failed");
        for (int i = 0; i < g.rows(); ++i) {
            LiouvilleMode m;
            m.mu = -es.eigenvalues()(i).real();
            m.lambda = es.eigenvalues()(i).imag();
            m.sector = s;
            if (vectors) {
                const Eigen::MatrixXcd z = gen.basis().matrix(es.eigenvectors().col(i), s);
                const double nrm = z.norm();
                m.magnetization_overlap = z.diagonal().norm() / nrm;
                if (opt.keep_vectors) m.vector = Eigen::Map<const Eigen::VectorXcd>(Eigen::MatrixXcd(z.transpose() / nrm).data(), n * n);
            }
            spec.modes.push_back(std::move(m));
        }
    }
    return spec;
}

enum class PropagationMethod { spectral, exponential };

inline const char* to_string(PropagationMethod m) {
    return m == PropagationMethod::spectral ? "spectral" : "exponential";
}

struct PropagateOptions {
    PropagationMethod method = PropagationMethod::spectral;
    double condition_limit = 1e6;  // eigenvector-basis condition number beyond which spectral falls back
};

struct Propagation {
    std::vector<CorrelationMatrix> states;
    PropagationMethod method = PropagationMethod::spectral;
    bool fallback = false;  // spectral requested, exponential used
    double condition = 1.0;
};

inline void check_time_grid(std::span<const double> grid) {
    if (grid.empty()) throw PreconditionError("time grid is empty");
    if (grid.front() != 0.0) throw PreconditionError("time grid must start at 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw PreconditionError("time grid must be strictly increasing");
}

inline std::vector<double> uniform_grid(double t_max, double dt) {
    if (!(dt > 0.0) || !(t_max >= 0.0)) throw PreconditionError("grid: need dt > 0 and t_max >= 0");
    const long n = std::lround(std::floor(t_max / dt + 1e-9));
    std::vector<double> g(n + 1);
    for (long i = 0; i <= n; ++i) g[i] = double(i) * dt;
    return g;
}

namespace detail {

inline double norm1_condition(const Eigen::MatrixXcd& v, const Eigen::MatrixXcd& vinv) {
    return v.cwiseAbs().colwise().sum().maxCoeff() * vinv.cwiseAbs().colwise().sum().maxCoeff();
}

// Block trajectory x(t) for every grid time; columns are times.
inline Eigen::MatrixXd evolve_block_exponential(const Eigen::MatrixXd& g, const Eigen::VectorXd& x0,
                                                std::span<const double> grid) {
    Eigen::MatrixXd out(g.rows(), grid.size());
    out.col(0) = x0;
    Eigen::MatrixXd step;
    double step_dt = -1.0;
    for (std::size_t t = 1; t < grid.size(); ++t) {
        const double dt = grid[t] - grid[t - 1];
        if (std::abs(dt - step_dt) > 1e-13 * std::max(1.0, grid.back())) {
            step = (g * dt).exp();
            step_dt = dt;
        }
        out.col(t) = step * out.col(t - 1);
    }
    return out;
}

}  // namespace detail

inline Propagation propagate(const JwGenerator& gen, const InitialState& initial, std::span<const double> grid,
                             const PropagateOptions& opt = {}) {
    initial.validate(gen.n_sites());
    check_time_grid(grid);
    const auto& basis = gen.basis();
    const Eigen::VectorXd x0 = basis.coords(initial.correlation);

    Propagation res;
    res.method = opt.method;
    std::vector<Eigen::MatrixXd> traj(2);
    for (Sector s : {Sector::even, Sector::odd}) {
        const int off = basis.offset(s), m = basis.size(s);
        Eigen::MatrixXd& out = traj[s == Sector::even ? 0 : 1];
        const Eigen::VectorXd xs = x0.segment(off, m);
        if (m == 0) {
            out.resize(0, grid.size());
            continue;
        }
        if (xs.norm() == 0.0) {
            out = Eigen::MatrixXd::Zero(m, grid.size());
            continue;
        }
        const Eigen::MatrixXd& g = gen.block(s);
        bool done = false;
        if (opt.method == PropagationMethod::spectral) {
            Eigen::EigenSolver<Eigen::MatrixXd> es(g);
            if (es.info() == Eigen::Success) {
                const Eigen::MatrixXcd v = es.eigenvectors();
                Eigen::PartialPivLU<Eigen::MatrixXcd> lu(v);
                const Eigen::MatrixXcd vinv = lu.inverse();
                const double cond = detail::norm1_condition(v, vinv);
                res.condition = std::max(res.condition, cond);
                if (std::isfinite(cond) && cond <= opt.condition_limit) {
                    const Eigen::VectorXcd c = vinv * xs.cast<cplx>();
                    const Eigen::VectorXcd ev = es.eigenvalues();
                    out.resize(m, grid.size());
                    for (std::size_t t = 0; t < grid.size(); ++t) {
                        const Eigen::VectorXcd w = (ev * grid[t]).array().exp() * c.array();
                        out.col(t) = (v * w).real();
                    }
                    done = true;
                }
            }
            if (!done) res.fallback = true;
        }
        if (!done) out = detail::evolve_block_exponential(g, xs, grid);
    }
    if (res.fallback) res.method = PropagationMethod::exponential;

    res.states.reserve(grid.size());
    for (std::size_t t = 0; t < grid.size(); ++t) {
        Eigen::MatrixXcd z = basis.matrix(traj[0].col(t), Sector::even);
        if (traj[1].rows() > 0) z += basis.matrix(traj[1].col(t), Sector::odd);
        if (!z.allFinite()) throw NumericalError("propagate: non-finite state at grid index " + std::to_string(t));
        res.states.push_back({std::move(z), grid[t]});
    }
    return res;
}

struct RateOptions {
    double lambda_tol = 1e-9;   // oscillating-mode test
    double mu_tol = 1e-12;      // strict-inequality guard
    double overlap_tol = 1e-8;  // magnetization filter threshold
    bool filter = true;
    double factor = 5.0;        // tau_s = factor / r
};

struct SyncTiming {
    double mu_s = 0.0;
    double r = 0.0;
    double tau_s = std::numeric_limits<double>::infinity();
    // Same quantities without the magnetization filter (NaN if undefined).
    double mu_s_unfiltered = std::numeric_limits<double>::quiet_NaN();
    double r_unfiltered = std::numeric_limits<double>::quiet_NaN();
    double tau_s_unfiltered = std::numeric_limits<double>::quiet_NaN();
    bool filtered = true;
};

namespace detail {

struct RatePair {
    bool ok = false;
    bool any_oscillating = false;
    double mu_s = 0.0, r = 0.0;
};

inline RatePair rate_pair(const LiouvilleSpectrum& spec, const RateOptions& opt, bool filter) {
    RatePair p;
    double mu_s = std::numeric_limits<double>::infinity();
    for (const auto& m : spec.modes) {
        if (std::abs(m.lambda) <= opt.lambda_tol) continue;
        if (filter && m.magnetization_overlap <= opt.overlap_tol) continue;
        p.any_oscillating = true;
        mu_s = std::min(mu_s, m.mu);
    }
    if (!p.any_oscillating) return p;
    double r = std::numeric_limits<double>::infinity();
    for (const auto& m : spec.modes) {
        if (std::abs(m.lambda) <= opt.lambda_tol) continue;
        if (filter && m.magnetization_overlap <= opt.overlap_tol) continue;
        if (m.mu > mu_s + opt.mu_tol) r = std::min(r, m.mu);
    }
    p.mu_s = mu_s;
    p.r = r;
    p.ok = std::isfinite(r);
    return p;
}

}  // namespace detail

inline SyncTiming extract_rate(const LiouvilleSpectrum& spec, const RateOptions& opt = {}) {
    if (!(spec.gamma > 0.0)) throw PreconditionError("extract_rate: spectrum must be computed at gamma > 0");
    const auto main = detail::rate_pair(spec, opt, opt.filter);
    if (!main.any_oscillating)
        throw NumericalError("extract_rate: fully damped spectrum, no oscillating mode (deep Zeno regime)");
    if (!main.ok) throw NumericalError("extract_rate: no decaying oscillating mode beyond the slowest one");
    SyncTiming t;
    t.filtered = opt.filter;
    t.mu_s = main.mu_s;
    t.r = main.r;
    t.tau_s = opt.factor / main.r;
    const auto other = detail::rate_pair(spec, opt, false);
    if (other.ok) {
        t.mu_s_unfiltered = other.mu_s;
        t.r_unfiltered = other.r;
        t.tau_s_unfiltered = opt.factor / other.r;
    }
    return t;
}

// Convenience: r and tau_s for one configuration.
inline SyncTiming sync_timing(const ChainSpec& chain, const NoiseSpec& noise, const RateOptions& opt = {}) {
    JwGenerator gen(chain, noise);
    return extract_rate(liouville_spectrum(gen, {false, true}), opt);
}

inline Eigen::VectorXd magnetizations(const Eigen::MatrixXcd& z) {
    return 2.0 * z.diagonal().real().array() - 1.0;
}

}  // namespace noisesync
