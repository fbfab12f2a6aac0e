// perturbation.hpp - first-order decay constants, mode table, sync condition
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "model.hpp"
#include "rational.hpp"

namespace noisesync {

enum class Degeneracy { nondegenerate, partner, accidental };

inline const char* to_string(Degeneracy d) {
    switch (d) {
        case Degeneracy::nondegenerate: return "nondegenerate";
        case Degeneracy::partner: return "partner";
        case Degeneracy::accidental: return "accidental";
    }
    return "?";
}

using ModePair = std::pair<int, int>;

// (r,s) and (N+1-s, N+1-r) always share a frequency.
inline ModePair partner_of(int n, ModePair p) { return {n + 1 - p.second, n + 1 - p.first}; }

inline void check_mode_pair(int n, int k, int l) {
    if (k < 1 || l > n || k >= l)
        throw PreconditionError("mode pair (" + std::to_string(k) + "," + std::to_string(l) +
                                ") must satisfy 1 <= k < l <= " + std::to_string(n));
}

inline double mode_frequency(const ChainSpec& chain, int k, int l) {
    return toeplitz_eigenvalue(chain, k) - toeplitz_eigenvalue(chain, l);
}

// The degenerate flag doubles the cross term (slower, magnetization-visible branch).
inline double decay_one_site(const ChainSpec& chain, int u, int k, int l, bool degenerate) {
    const int n = chain.n_sites;
    if (u < 1 || u > n)
        throw PreconditionError("decay_one_site: site index " + std::to_string(u) +
                                " out of range [1," + std::to_string(n) + "]");
    check_mode_pair(n, k, l);
    const double q = std::numbers::pi / (n + 1);
    const double sk = std::pow(std::sin(u * k * q), 2);
    const double sl = std::pow(std::sin(u * l * q), 2);
    const double f = degenerate ? 2.0 : 1.0;
    return 4.0 / (n + 1) * (sk + sl) - f * 16.0 / double((n + 1) * (n + 1)) * sk * sl;
}

inline std::optional<Rational> decay_one_site_exact(const ChainSpec& chain, int u, int k, int l,
                                                    bool degenerate) {
    const int n = chain.n_sites;
    check_mode_pair(n, k, l);
    const auto sk = rational_sin_squared(std::int64_t(u) * k, n + 1);
    const auto sl = rational_sin_squared(std::int64_t(u) * l, n + 1);
    if (!sk || !sl) return std::nullopt;
    const Rational f(degenerate ? 2 : 1);
    return Rational(4, n + 1) * (*sk + *sl) - f * Rational(16, (n + 1) * (n + 1)) * *sk * *sl;
}

// Two noisy sites. For the degenerate branch the cross term carries the
// site-parity sign (-1)^(u+v) coming from phi_{N+1-k}(j) = (-1)^(j+1) phi_k(j).
inline double decay_two_site(const ChainSpec& chain, int u, int v, int k, int l, bool degenerate,
                             NoiseCoupling coupling = NoiseCoupling::shared) {
    const int n = chain.n_sites;
    if (u == v) throw PreconditionError("decay_two_site: sites must differ");
    for (int s : {u, v})
        if (s < 1 || s > n)
            throw PreconditionError("decay_two_site: site index " + std::to_string(s) +
                                    " out of range [1," + std::to_string(n) + "]");
    check_mode_pair(n, k, l);
    const double q = std::numbers::pi / (n + 1);
    auto s = [&](int site, int mode) { return std::sin(site * mode * q); };
    const double c4 = 4.0 / (n + 1), c16 = 16.0 / double((n + 1) * (n + 1));
    const double ak = s(u, k) * s(u, k) + s(v, k) * s(v, k);
    const double al = s(u, l) * s(u, l) + s(v, l) * s(v, l);
    if (coupling == NoiseCoupling::shared) {
        const double non = c4 * (ak + al) - c16 * ak * al;
        if (!degenerate) return non;
        const double sign = ((u + v) % 2 == 0) ? 1.0 : -1.0;
        const double x = s(u, k) * s(u, l) + sign * s(v, k) * s(v, l);
        return non - c16 * x * x;
    }
    double m = 0.0;
    for (int site : {u, v}) {
        const double sk = s(site, k) * s(site, k), sl = s(site, l) * s(site, l);
        m += c4 * (sk + sl) - (degenerate ? 2.0 : 1.0) * c16 * sk * sl;
    }
    return m;
}

// Modes sharing one frequency, with first-order rates from diagonalizing the
// dephasing perturbation inside the cluster.
struct PerturbationCluster {
    double frequency = 0.0;
    std::vector<ModePair> pairs;
    std::vector<double> rates;     // ascending
    std::vector<bool> visible;     // nonzero magnetization content
    Eigen::MatrixXd coefficients;  // column i: combination of pairs for rates[i]
};

inline std::vector<PerturbationCluster> perturbation_clusters(const ChainSpec& chain,
                                                              const NoiseSpec& noise,
                                                              double freq_tol = 1e-9) {
    chain.validate();
    noise.validate(chain);
    const int n = chain.n_sites;
    const auto es = toeplitz_eigensystem(chain);
    const Eigen::MatrixXd d = dephasing_weights(noise, chain);

    // Partner classes first, by the exact index relation.
    std::vector<std::vector<ModePair>> classes;
    for (int k = 1; k <= n; ++k)
        for (int l = k + 1; l <= n; ++l) {
            const ModePair p{k, l}, q = partner_of(n, p);
            if (q < p) continue;
            classes.push_back(q == p ? std::vector<ModePair>{p} : std::vector<ModePair>{p, q});
        }
    std::vector<double> freq(classes.size());
    for (std::size_t c = 0; c < classes.size(); ++c)
        freq[c] = mode_frequency(chain, classes[c][0].first, classes[c][0].second);
    std::vector<std::size_t> order(classes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return freq[a] < freq[b]; });

    // Then merge classes whose frequencies coincide anyway.
    std::vector<PerturbationCluster> clusters;
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
        const std::size_t c = order[idx];
        if (!clusters.empty() && std::abs(freq[c] - clusters.back().frequency) <= freq_tol) {
            auto& back = clusters.back().pairs;
            back.insert(back.end(), classes[c].begin(), classes[c].end());
        } else {
            clusters.push_back({freq[c], classes[c], {}, {}, {}});
        }
    }

    for (auto& cl : clusters) {
        std::sort(cl.pairs.begin(), cl.pairs.end());
        const int m = int(cl.pairs.size());
        std::vector<Eigen::MatrixXd> a(m);
        for (int i = 0; i < m; ++i)
            a[i] = es.vectors.col(cl.pairs[i].first - 1) * es.vectors.col(cl.pairs[i].second - 1).transpose();
        Eigen::MatrixXd pert(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j <= i; ++j)
                pert(i, j) = pert(j, i) = 2.0 * (d.array() * a[i].array() * a[j].array()).sum();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sol(pert);
        cl.coefficients = sol.eigenvectors();
        for (int i = 0; i < m; ++i) {
            // rounding floor: exact zeros come out at ~1e-17
            const double rate = sol.eigenvalues()(i);
            cl.rates.push_back(rate < 1e-14 ? 0.0 : rate);
            Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
            for (int j = 0; j < m; ++j) diag += cl.coefficients(j, i) * a[j].diagonal();
            cl.visible.push_back(diag.norm() > 1e-8);
        }
    }
    return clusters;
}

struct ModeEntry {
    int k = 0, l = 0;
    double frequency = 0.0;  // Lambda_k - Lambda_l > 0
    Degeneracy degeneracy = Degeneracy::nondegenerate;
    std::optional<ModePair> partner;
    double decay = 0.0;  // m_kl, slowest magnetization-visible rate of the cluster
    std::optional<Rational> decay_exact;
    std::vector<double> cluster_rates;  // every first-order rate sharing the frequency
    Eigen::VectorXd mode_vector;        // eps_j = 2 phi_k(j) phi_l(j)
    cplx amplitude;                     // c_kl = phi_k^T Z(0) phi_l
};

// With the entries above, <sz_j>(tau) at gamma = 0 equals
// sum_j-independent constant + sum_{k<l} 2 eps_j Re(c_kl exp(i Lambda~_kl tau)).
struct ModeTable {
    int n_sites = 0;
    std::vector<ModeEntry> entries;
    std::vector<PerturbationCluster> clusters;
    int partner_classes = 0;       // floor(N^2/4)
    int distinct_frequencies = 0;  // after merging accidental coincidences

    const ModeEntry& at(int k, int l) const {
        for (const auto& e : entries)
            if (e.k == k && e.l == l) return e;
        throw PreconditionError("mode table: no pair (" + std::to_string(k) + "," +
                                std::to_string(l) + ")");
    }
};

inline ModeTable mode_table(const ChainSpec& chain, const NoiseSpec& noise, const InitialState& initial) {
    chain.validate();
    noise.validate(chain);
    initial.validate(chain.n_sites);
    const int n = chain.n_sites;
    const auto es = toeplitz_eigensystem(chain);
    ModeTable table;
    table.n_sites = n;
    table.clusters = perturbation_clusters(chain, noise);
    table.distinct_frequencies = int(table.clusters.size());

    for (const auto& cl : table.clusters) {
        double slow = -1.0;
        for (std::size_t i = 0; i < cl.rates.size(); ++i)
            if (cl.visible[i] && slow < 0.0) slow = cl.rates[i];
        if (slow < 0.0) slow = cl.rates.front();
        for (const ModePair& p : cl.pairs) {
            ModeEntry e;
            e.k = p.first;
            e.l = p.second;
            e.frequency = mode_frequency(chain, e.k, e.l);
            const ModePair q = partner_of(n, p);
            if (q != p) e.partner = q;
            const bool has_partner = q != p;
            const std::size_t class_size = has_partner ? 2 : 1;
            e.degeneracy = cl.pairs.size() > class_size ? Degeneracy::accidental
                           : has_partner               ? Degeneracy::partner
                                                       : Degeneracy::nondegenerate;
            e.decay = slow;
            e.cluster_rates = cl.rates;
            if (noise.sites.size() == 1 && e.degeneracy != Degeneracy::accidental)
                e.decay_exact = decay_one_site_exact(chain, noise.sites[0], e.k, e.l, has_partner);
            const auto pk = es.vectors.col(e.k - 1), pl = es.vectors.col(e.l - 1);
            e.mode_vector = 2.0 * pk.cwiseProduct(pl);
            e.amplitude = pk.cast<cplx>().dot(initial.correlation * pl.cast<cplx>());
            table.entries.push_back(std::move(e));
        }
    }
    std::sort(table.entries.begin(), table.entries.end(),
              [](const ModeEntry& a, const ModeEntry& b) { return std::pair(a.k, a.l) < std::pair(b.k, b.l); });
    table.partner_classes = 0;
    for (const auto& e : table.entries)
        if (!e.partner || ModePair{e.k, e.l} < *e.partner) ++table.partner_classes;
    return table;
}

// Requires (N+1)/3 integral. Entries are (4/(N+1)) sin(j pi/3) sin(2 j pi/3).
inline Eigen::VectorXd stable_mode(const ChainSpec& chain) {
    chain.validate();
    const int n = chain.n_sites;
    if ((n + 1) % 3 != 0)
        throw PreconditionError("stable mode requires (N+1)/3 integral; N+1 = " + std::to_string(n + 1) +
                                " is not divisible by 3");
    Eigen::VectorXd v(n);
    for (int j = 1; j <= n; ++j)
        v(j - 1) = 4.0 / (n + 1) * std::sin(j * std::numbers::pi / 3) * std::sin(2 * j * std::numbers::pi / 3);
    return v;
}

enum class EndRelation { in_phase, anti_phase };

inline const char* to_string(EndRelation e) { return e == EndRelation::in_phase ? "in-phase" : "anti-phase"; }

struct SyncReport {
    bool satisfied = false;
    std::optional<ModePair> surviving_pair;
    std::optional<Eigen::VectorXd> stable_mode;
    std::optional<double> frequency;
    std::optional<EndRelation> end_relation;
    double decay_gap = 0.0;           // smallest first-order rate among the other modes
    int zero_modes = 0;               // first-order rates below 1e-12
    std::vector<int> admissible_sites;  // every single site that would satisfy the condition
};

// Only pairs k = (N+1)/3, l = 2k can escape the noise, and only when every
// noisy site u has sin(u k pi/(N+1)) = 0. The escaping set is the multiples of
// (N+1)/g with g = gcd(N+1, sites), so exactly one pair survives iff g = 3.
inline SyncReport sync_condition(const ChainSpec& chain, const NoiseSpec& noise) {
    chain.validate();
    noise.validate(chain);
    const int n = chain.n_sites;
    SyncReport rep;
    for (int u = 1; u <= n; ++u)
        if (std::gcd(u, n + 1) == 3) rep.admissible_sites.push_back(u);

    int g = n + 1;
    for (int u : noise.sites) g = std::gcd(g, u);
    rep.satisfied = !noise.sites.empty() && g == 3;

    const auto clusters = perturbation_clusters(chain, noise);
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& cl : clusters)
        for (double m : cl.rates) {
            if (m < 1e-12)
                ++rep.zero_modes;
            else
                gap = std::min(gap, m);
        }
    rep.decay_gap = std::isfinite(gap) ? gap : 0.0;

    if (rep.satisfied) {
        const int k = (n + 1) / 3;
        rep.surviving_pair = ModePair{k, 2 * k};
        rep.stable_mode = stable_mode(chain);
        rep.frequency = mode_frequency(chain, k, 2 * k);
        const auto& v = *rep.stable_mode;
        rep.end_relation = v(0) * v(n - 1) > 0 ? EndRelation::in_phase : EndRelation::anti_phase;
    }
    return rep;
}

}  // namespace noisesync
