// diagnostics.hpp - Pearson synchronization measure, concurrence, two-qubit solution
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evolve.hpp"
#include "model.hpp"

namespace noisesync {

struct SampledSeries {
    std::span<const double> time;
    std::span<const double> values;
};

struct PearsonSeries {
    std::pair<int, int> pair{0, 0};
    double window = 0.0;
    // nullopt marks a gap: incomplete window or variance below threshold
    std::vector<std::optional<double>> values;
};

constexpr double kPearsonVarianceFloor = 1e-14;

// Trailing-window correlation: the value at tau uses samples in [tau - window, tau].
inline PearsonSeries pearson(const SampledSeries& a, const SampledSeries& b, double window,
                             std::pair<int, int> pair = {0, 0}) {
    if (a.time.size() != b.time.size() || !std::equal(a.time.begin(), a.time.end(), b.time.begin()))
        throw PreconditionError("pearson: series must share the same time grid");
    if (a.values.size() != a.time.size() || b.values.size() != b.time.size())
        throw PreconditionError("pearson: values and grid differ in length");
    const std::size_t n = a.time.size();
    double spacing = 0.0;
    for (std::size_t t = 1; t < n; ++t) spacing = std::max(spacing, a.time[t] - a.time[t - 1]);
    if (n < 3 || !(window >= 2.0 * spacing))
        throw PreconditionError("pearson: window must span at least 2 sample intervals");

    PearsonSeries out;
    out.pair = pair;
    out.window = window;
    out.values.resize(n);
    std::size_t start = 0;
    const double eps = 1e-9 * spacing;
    for (std::size_t t = 0; t < n; ++t) {
        while (a.time[start] < a.time[t] - window - eps) ++start;
        if (a.time[t] - a.time[0] < window - eps) continue;
        const std::size_t m = t - start + 1;
        double ma = 0, mb = 0;
        for (std::size_t s = start; s <= t; ++s) {
            ma += a.values[s];
            mb += b.values[s];
        }
        ma /= m;
        mb /= m;
        double va = 0, vb = 0, cov = 0;
        for (std::size_t s = start; s <= t; ++s) {
            const double da = a.values[s] - ma, db = b.values[s] - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
        va /= m;
        vb /= m;
        cov /= m;
        if (va < kPearsonVarianceFloor || vb < kPearsonVarianceFloor) continue;
        out.values[t] = std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
    }
    return out;
}

struct ConcurrenceSeries {
    std::pair<int, int> pair{0, 0};
    std::vector<double> values;
};

namespace detail {

inline Eigen::Matrix4cd sigma_yy() {
    Eigen::Matrix2cd sy;
    sy << 0, cplx(0, 1), cplx(0, -1), 0;
    Eigen::Matrix4cd out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) out(2 * a + c, 2 * b + d) = sy(a, b) * sy(c, d);
    return out;
}

}  // namespace detail

// C = max(0, sqrt(k1) - sqrt(k2) - sqrt(k3) - sqrt(k4)) with k the descending
// eigenvalues of rho (sy x sy) rho* (sy x sy).
inline double concurrence_wootters(const Eigen::Matrix4cd& rho, double tol = 1e-8) {
    if (std::abs(rho.trace() - 1.0) > tol) throw PreconditionError("concurrence: state must have unit trace");
    if ((rho - rho.adjoint()).norm() > tol) throw PreconditionError("concurrence: state must be Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho);
    if (es.eigenvalues().minCoeff() < -tol) throw PreconditionError("concurrence: state is not positive semidefinite");
    const Eigen::Vector4d lam = es.eigenvalues().cwiseMax(0.0);
    const Eigen::Matrix4cd root = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
    // sqrt(k_i) are the singular values of A = sqrt(rho) yy sqrt(rho)^*, as A A^dag = sqrt(rho) rho~ sqrt(rho)
    // has the same spectrum; the SVD avoids square roots of eigenvalues near zero
    const Eigen::Matrix4cd a = root * detail::sigma_yy() * root.conjugate();
    Eigen::JacobiSVD<Eigen::Matrix4cd> svd(a);
    const Eigen::Vector4d k = svd.singularValues();
    return std::max(0.0, k(0) - k(1) - k(2) - k(3));
}

// Two-site state of a single-excitation Z on sites (i, j); index 2 b_i + b_j.
inline Eigen::Matrix4cd pair_state_from_z(const Eigen::MatrixXcd& z, int i, int j) {
    const int n = int(z.rows());
    if (i == j) throw PreconditionError("pair state: sites must differ");
    for (int s : {i, j})
        if (s < 1 || s > n)
            throw PreconditionError("pair state: site index " + std::to_string(s) + " out of range [1," +
                                    std::to_string(n) + "]");
    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    rho(1, 1) = z(j - 1, j - 1).real();
    rho(2, 2) = z(i - 1, i - 1).real();
    rho(0, 0) = 1.0 - rho(1, 1).real() - rho(2, 2).real();
    rho(2, 1) = z(j - 1, i - 1);
    rho(1, 2) = z(i - 1, j - 1);
    return rho;
}

inline double concurrence_from_z(const Eigen::MatrixXcd& z, int i, int j) {
    if (std::abs(z.trace().real() - 1.0) > 1e-8)
        throw PreconditionError("concurrence: Z is not confined to the single-excitation sector (trace " +
                                std::to_string(z.trace().real()) + "); use the reference engine instead");
    const double fast = 2.0 * std::abs(z(i - 1, j - 1));
    const double general = concurrence_wootters(pair_state_from_z(z, i, j));
    if (std::abs(fast - general) > 1e-10)
        throw NumericalError("concurrence: fast and general paths disagree by " + std::to_string(std::abs(fast - general)));
    return fast;
}

enum class DampingRegime { underdamped, critical, overdamped };

inline const char* to_string(DampingRegime r) {
    switch (r) {
        case DampingRegime::underdamped: return "underdamped";
        case DampingRegime::critical: return "critical";
        case DampingRegime::overdamped: return "overdamped";
    }
    return "?";
}

// Two qubits, dephasing Gamma on qubit 1, raw time t:
// <sz_{1/2}> = p1 + p2 - 1 +/- D(t), D'' + 2 Gamma D' + 4 J^2 D = 0,
// D(0) = p1 - p2, D'(0) = 0.
struct TwoQubitSolution {
    double J = 1.0, Gamma = 0.0, p1 = 1.0, p2 = 0.0;
    DampingRegime regime = DampingRegime::underdamped;
    std::vector<double> time, sz1, sz2;

    double difference(double t) const {
        const double d0 = p1 - p2;
        const double env = std::exp(-Gamma * t);
        switch (regime) {
            case DampingRegime::underdamped: {
                const double w = std::sqrt(4 * J * J - Gamma * Gamma);
                return d0 * env * (std::cos(w * t) + Gamma / w * std::sin(w * t));
            }
            case DampingRegime::critical: return d0 * env * (1.0 + Gamma * t);
            case DampingRegime::overdamped: {
                const double w = std::sqrt(Gamma * Gamma - 4 * J * J);
                return d0 * env * (std::cosh(w * t) + Gamma / w * std::sinh(w * t));
            }
        }
        return 0.0;
    }
    double magnetization(int qubit, double t) const {
        return p1 + p2 - 1.0 + (qubit == 1 ? 1.0 : -1.0) * difference(t);
    }
};

inline DampingRegime damping_regime(double J, double Gamma) {
    const double gap = 2 * J - Gamma;
    if (std::abs(gap) <= 1e-12 * std::max(2 * J, Gamma)) return DampingRegime::critical;
    return gap > 0 ? DampingRegime::underdamped : DampingRegime::overdamped;
}

inline TwoQubitSolution two_qubit_analytic(double J, double Gamma, double p1, double p2, std::span<const double> grid) {
    if (!(J > 0)) throw PreconditionError("twoqubit: J must be > 0");
    if (!(Gamma >= 0)) throw PreconditionError("twoqubit: Gamma must be >= 0");
    if (p1 < 0 || p1 > 1 || p2 < 0 || p2 > 1) throw PreconditionError("twoqubit: populations must lie in [0,1]");
    TwoQubitSolution s{J, Gamma, p1, p2, damping_regime(J, Gamma), {}, {}, {}};
    for (double t : grid) {
        s.time.push_back(t);
        s.sz1.push_back(s.magnetization(1, t));
        s.sz2.push_back(s.magnetization(2, t));
    }
    return s;
}

}  // namespace noisesync
