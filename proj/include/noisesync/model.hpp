// model.hpp - chain/noise specs, Jordan-Wigner single-particle matrices
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace noisesync {

using cplx = std::complex<double>;

// Open XY chain H0 = (J/2) sum (XX + YY) + h sum Z.
struct ChainSpec {
    int n_sites = 5;
    double coupling = 1.0;  // J
    double field = 1.0;     // h

    void validate() const {
        if (n_sites < 2)
            throw PreconditionError("chain: N must be >= 2, got " + std::to_string(n_sites));
        if (!(coupling > 0.0) || !std::isfinite(coupling))
            throw PreconditionError("chain: J must be > 0");
        if (!std::isfinite(field)) throw PreconditionError("chain: h must be finite");
    }

    bool operator==(const ChainSpec&) const = default;
};

// Shared: one noise process couples to the site sum V = sum_u Z_u.
// Independent: one process per site.
enum class NoiseCoupling { shared, independent };

inline std::string to_string(NoiseCoupling c) {
    return c == NoiseCoupling::shared ? "shared" : "independent";
}

struct NoiseSpec {
    std::vector<int> sites;  // 1-based
    double gamma = 0.0;      // Gamma / J
    NoiseCoupling coupling = NoiseCoupling::shared;

    void validate(const ChainSpec& chain) const {
        for (std::size_t a = 0; a < sites.size(); ++a) {
            if (sites[a] < 1 || sites[a] > chain.n_sites)
                throw PreconditionError("noise: site index " + std::to_string(sites[a]) +
                                        " out of range [1," + std::to_string(chain.n_sites) + "]");
            for (std::size_t b = 0; b < a; ++b)
                if (sites[a] == sites[b])
                    throw PreconditionError("noise: duplicate site " + std::to_string(sites[a]));
        }
        if (!(gamma >= 0.0) || !std::isfinite(gamma))
            throw PreconditionError("noise: gamma must be >= 0");
    }

    bool operator==(const NoiseSpec&) const = default;
};

struct SingleParticleEigensystem {
    Eigen::VectorXd lambdas;  // lambdas(k-1) = Lambda_k
    Eigen::MatrixXd vectors;  // column k-1 = phi_k
};

// Omega / J: diagonal 2h/J, off-diagonals 1. Time is tau = J t throughout.
inline Eigen::MatrixXd build_jw_matrix(const ChainSpec& chain) {
    chain.validate();
    const int n = chain.n_sites;
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        omega(j, j) = 2.0 * chain.field / chain.coupling;
        if (j + 1 < n) omega(j, j + 1) = omega(j + 1, j) = 1.0;
    }
    return omega;
}

inline double toeplitz_eigenvalue(const ChainSpec& chain, int k) {
    return 2.0 * chain.field / chain.coupling +
           2.0 * std::cos(k * std::numbers::pi / (chain.n_sites + 1));
}

// phi_k(j) for 1-based k, j.
inline double toeplitz_component(int n, int k, int j) {
    return std::sqrt(2.0 / (n + 1)) * std::sin(double(j) * k * std::numbers::pi / (n + 1));
}

inline SingleParticleEigensystem toeplitz_eigensystem(const ChainSpec& chain) {
    chain.validate();
    const int n = chain.n_sites;
    SingleParticleEigensystem es;
    es.lambdas.resize(n);
    es.vectors.resize(n, n);
    for (int k = 1; k <= n; ++k) {
        es.lambdas(k - 1) = toeplitz_eigenvalue(chain, k);
        for (int j = 1; j <= n; ++j) es.vectors(j - 1, k - 1) = toeplitz_component(n, k, j);
    }
    return es;
}

// Sum of site dyads e_u e_u^T over the noisy sites.
inline Eigen::MatrixXd noise_projector(const NoiseSpec& noise, const ChainSpec& chain) {
    noise.validate(chain);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(chain.n_sites, chain.n_sites);
    for (int u : noise.sites) y(u - 1, u - 1) = 1.0;
    return y;
}

// Averaged dephasing acts elementwise on Z: dZ_xy/dtau gets -2 gamma D_xy Z_xy.
// Shared noise gives D_xy = (y_x - y_y)^2 with y the noisy-site indicator,
// independent channels give the number of channels that separate x and y.
// Either way D_xy is 0 or 1 for one site; two shared sites never count twice.
inline Eigen::MatrixXd dephasing_weights(const NoiseSpec& noise, const ChainSpec& chain) {
    noise.validate(chain);
    const int n = chain.n_sites;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    if (noise.coupling == NoiseCoupling::shared) {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
        for (int u : noise.sites) y(u - 1) = 1.0;
        for (int x = 0; x < n; ++x)
            for (int z = 0; z < n; ++z) d(x, z) = (y(x) - y(z)) * (y(x) - y(z));
    } else {
        for (int u : noise.sites)
            for (int x = 0; x < n; ++x)
                for (int z = 0; z < n; ++z) {
                    const double dx = (x == u - 1) - (z == u - 1);
                    d(x, z) += dx * dx;
                }
    }
    return d;
}

// Z_jk = <c_j^dag c_k>.
struct InitialState {
    Eigen::MatrixXcd correlation;

    static InitialState from_populations(const std::vector<double>& p) {
        InitialState s;
        s.correlation = Eigen::MatrixXcd::Zero(p.size(), p.size());
        for (std::size_t j = 0; j < p.size(); ++j) s.correlation(j, j) = p[j];
        s.validate(int(p.size()));
        return s;
    }

    static InitialState excitation_on(int site, int n) {
        if (site < 1 || site > n)
            throw PreconditionError("initial: site index " + std::to_string(site) +
                                    " out of range [1," + std::to_string(n) + "]");
        std::vector<double> p(n, 0.0);
        p[site - 1] = 1.0;
        return from_populations(p);
    }

    static InitialState from_matrix(const Eigen::MatrixXcd& z) {
        InitialState s{z};
        s.validate(int(z.rows()));
        return s;
    }

    int size() const { return int(correlation.rows()); }

    bool is_diagonal() const {
        const Eigen::MatrixXcd off = correlation - Eigen::MatrixXcd(correlation.diagonal().asDiagonal());
        return off.norm() == 0.0;
    }

    std::vector<double> populations() const {
        std::vector<double> p(size());
        for (int j = 0; j < size(); ++j) p[j] = correlation(j, j).real();
        return p;
    }

    void validate(int n) const {
        if (correlation.rows() != n || correlation.cols() != n)
            throw PreconditionError("initial: Z(0) must be " + std::to_string(n) + "x" +
                                    std::to_string(n));
        if ((correlation - correlation.adjoint()).norm() > 1e-10)
            throw PreconditionError("initial: Z(0) must be Hermitian");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(correlation, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10 || es.eigenvalues().maxCoeff() > 1.0 + 1e-10)
            throw PreconditionError("initial: eigenvalues of Z(0) must lie in [0,1]");
    }
};

}  // namespace noisesync
