// reference.hpp - brute-force 2^N density-matrix oracle with dephasing noise
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "evolve.hpp"
#include "model.hpp"

namespace noisesync {

constexpr int kReferenceSiteCap = 6;

// Local basis (|0>, |1>) with |1> excited: sz = diag(-1, +1). Site 1 is the
// most significant factor of every tensor product.
namespace pauli {

inline Eigen::Matrix2cd identity() { return Eigen::Matrix2cd::Identity(); }
inline Eigen::Matrix2cd x() {
    Eigen::Matrix2cd m;
    m << 0, 1, 1, 0;
    return m;
}
inline Eigen::Matrix2cd y() {
    Eigen::Matrix2cd m;
    m << 0, cplx(0, 1), cplx(0, -1), 0;
    return m;
}
inline Eigen::Matrix2cd z() {
    Eigen::Matrix2cd m;
    m << -1, 0, 0, 1;
    return m;
}

// op acting on a 1-based site of an n-site chain.
inline Eigen::MatrixXcd on_site(const Eigen::Matrix2cd& op, int site, int n) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (int s = 1; s <= n; ++s) {
        Eigen::MatrixXcd next = Eigen::kroneckerProduct(out, s == site ? Eigen::MatrixXcd(op) : Eigen::MatrixXcd(identity()));
        out = std::move(next);
    }
    return out;
}

}  // namespace pauli

inline void check_reference_cap(const ChainSpec& chain, int cap) {
    chain.validate();
    if (chain.n_sites > cap)
        throw PreconditionError("reference engine: N = " + std::to_string(chain.n_sites) + " exceeds the cap of " +
                                std::to_string(cap) + " sites (the density matrix has 4^N entries)");
}

// H0 in raw energy units.
inline Eigen::MatrixXcd build_spin_hamiltonian(const ChainSpec& chain, int cap = kReferenceSiteCap) {
    check_reference_cap(chain, cap);
    const int n = chain.n_sites;
    const int dim = 1 << n;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (int j = 1; j < n; ++j) {
        h += 0.5 * chain.coupling * pauli::on_site(pauli::x(), j, n) * pauli::on_site(pauli::x(), j + 1, n);
        h += 0.5 * chain.coupling * pauli::on_site(pauli::y(), j, n) * pauli::on_site(pauli::y(), j + 1, n);
    }
    for (int j = 1; j <= n; ++j) h += chain.field * pauli::on_site(pauli::z(), j, n);
    return h;
}

// Eigenvalue of sz_site on basis state a.
inline int spin_sign(int a, int site, int n) { return ((a >> (n - site)) & 1) ? 1 : -1; }

// Population-only product state: site j excited with probability p_j.
inline Eigen::MatrixXcd product_state(const std::vector<double>& p) {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Identity(1, 1);
    for (double pj : p) {
        if (pj < 0.0 || pj > 1.0) throw PreconditionError("product_state: populations must lie in [0,1]");
        Eigen::Matrix2cd local = Eigen::Matrix2cd::Zero();
        local(0, 0) = 1.0 - pj;
        local(1, 1) = pj;
        Eigen::MatrixXcd next = Eigen::kroneckerProduct(rho, Eigen::MatrixXcd(local));
        rho = std::move(next);
    }
    return rho;
}

struct DensityMatrix {
    Eigen::MatrixXcd rho;
    double time = 0.0;
};

// drho/dtau = -i[H0/J, rho] - R o rho. Shared noise: R_ab = (gamma/2)(v_a - v_b)^2
// with v = sum_u sz_u. Independent channels: the sum of one-site terms.
class LindbladReference {
public:
    LindbladReference(const ChainSpec& chain, const NoiseSpec& noise, int cap = kReferenceSiteCap)
        : n_(chain.n_sites) {
        check_reference_cap(chain, cap);
        noise.validate(chain);
        const Eigen::MatrixXcd h = build_spin_hamiltonian(chain, cap) / chain.coupling;
        h_ = h.sparseView(1e-300);
        h_.makeCompressed();
        const int dim = 1 << n_;
        rates_ = Eigen::MatrixXd::Zero(dim, dim);
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                double r = 0.0;
                if (noise.coupling == NoiseCoupling::shared) {
                    double va = 0.0, vb = 0.0;
                    for (int u : noise.sites) {
                        va += spin_sign(a, u, n_);
                        vb += spin_sign(b, u, n_);
                    }
                    r = 0.5 * noise.gamma * (va - vb) * (va - vb);
                } else {
                    for (int u : noise.sites) {
                        const double dv = spin_sign(a, u, n_) - spin_sign(b, u, n_);
                        r += 0.5 * noise.gamma * dv * dv;
                    }
                }
                rates_(a, b) = r;
            }
        double hnorm = 0.0;
        for (int c = 0; c < dim; ++c) hnorm = std::max(hnorm, h.col(c).cwiseAbs().sum());
        norm_bound_ = 2.0 * hnorm + rates_.maxCoeff();
    }

    int n_sites() const { return n_; }
    int dim() const { return 1 << n_; }

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rho) const {
        const cplx i1(0, 1);
        Eigen::MatrixXcd out = -i1 * (h_ * rho - rho * h_);
        out.array() -= rates_.array().cast<cplx>() * rho.array();
        return out;
    }

    // rho <- exp(L dt) rho by Taylor series on substeps with ||L|| h <= 1.
    void advance(Eigen::MatrixXcd& rho, double dt) const {
        if (dt <= 0.0) return;
        const int sub = std::max(1, int(std::ceil(dt * norm_bound_)));
        const double h = dt / sub;
        for (int s = 0; s < sub; ++s) {
            Eigen::MatrixXcd term = rho;
            Eigen::MatrixXcd sum = rho;
            for (int k = 1; k <= 60; ++k) {
                term = apply(term) * (h / k);
                sum += term;
                if (term.norm() <= 1e-17 * sum.norm()) break;
            }
            rho = std::move(sum);
        }
        if (!rho.allFinite()) throw NumericalError("reference: non-finite density matrix");
    }

private:
    int n_;
    Eigen::SparseMatrix<cplx> h_;
    Eigen::MatrixXd rates_;
    double norm_bound_ = 0.0;
};

inline void check_density_matrix(const Eigen::MatrixXcd& rho, int n) {
    if (rho.rows() != (1 << n) || rho.cols() != (1 << n))
        throw PreconditionError("density matrix must be 2^N x 2^N");
    if (std::abs(rho.trace() - 1.0) > 1e-10) throw PreconditionError("density matrix must have unit trace");
    if ((rho - rho.adjoint()).norm() > 1e-10) throw PreconditionError("density matrix must be Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8) throw PreconditionError("density matrix must be positive semidefinite");
}

inline void lindblad_evolve(const ChainSpec& chain, const NoiseSpec& noise, const Eigen::MatrixXcd& rho0,
                            std::span<const double> grid, const std::function<void(const DensityMatrix&)>& observer,
                            int cap = kReferenceSiteCap) {
    LindbladReference ref(chain, noise, cap);
    check_density_matrix(rho0, chain.n_sites);
    check_time_grid(grid);
    DensityMatrix state{rho0, grid[0]};
    observer(state);
    for (std::size_t t = 1; t < grid.size(); ++t) {
        ref.advance(state.rho, grid[t] - grid[t - 1]);
        state.time = grid[t];
        observer(state);
    }
}

inline std::vector<DensityMatrix> lindblad_evolve(const ChainSpec& chain, const NoiseSpec& noise,
                                                  const Eigen::MatrixXcd& rho0, std::span<const double> grid,
                                                  int cap = kReferenceSiteCap) {
    std::vector<DensityMatrix> out;
    lindblad_evolve(chain, noise, rho0, grid, [&](const DensityMatrix& d) { out.push_back(d); }, cap);
    return out;
}

inline Eigen::VectorXd spin_magnetizations(const Eigen::MatrixXcd& rho, int n) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    for (int a = 0; a < rho.rows(); ++a)
        for (int j = 1; j <= n; ++j) m(j - 1) += spin_sign(a, j, n) * rho(a, a).real();
    return m;
}

// Partial trace onto sites (i, j); the 4x4 index is 2 b_i + b_j.
inline Eigen::Matrix4cd reduced_two_qubit(const Eigen::MatrixXcd& rho, int n, int i, int j) {
    if (i == j) throw PreconditionError("reduced_two_qubit: sites must differ");
    for (int s : {i, j})
        if (s < 1 || s > n)
            throw PreconditionError("reduced_two_qubit: site index " + std::to_string(s) + " out of range [1," +
                                    std::to_string(n) + "]");
    const int si = n - i, sj = n - j;
    const int mask = (1 << si) | (1 << sj);
    Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
    for (int a = 0; a < rho.rows(); ++a) {
        const int ra = ((a >> si) & 1) * 2 + ((a >> sj) & 1);
        for (int rb = 0; rb < 4; ++rb) {
            const int b = (a & ~mask) | ((rb >> 1) << si) | ((rb & 1) << sj);
            out(ra, rb) += rho(a, b);
        }
    }
    return out;
}

// Generator restricted to coherences |x><y| between single-excitation states.
// Row/column index (x-1) N + (y-1).
inline Eigen::MatrixXcd single_excitation_block(const ChainSpec& chain, const NoiseSpec& noise,
                                                int cap = kReferenceSiteCap) {
    LindbladReference ref(chain, noise, cap);
    const int n = chain.n_sites, dim = 1 << n;
    auto state = [n](int site) { return 1 << (n - site); };
    Eigen::MatrixXcd block(n * n, n * n);
    for (int xp = 1; xp <= n; ++xp)
        for (int yp = 1; yp <= n; ++yp) {
            Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(dim, dim);
            e(state(xp), state(yp)) = 1.0;
            const Eigen::MatrixXcd le = ref.apply(e);
            for (int x = 1; x <= n; ++x)
                for (int y = 1; y <= n; ++y)
                    block((x - 1) * n + (y - 1), (xp - 1) * n + (yp - 1)) = le(state(x), state(y));
        }
    return block;
}

}  // namespace noisesync
