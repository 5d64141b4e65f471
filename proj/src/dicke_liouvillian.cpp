// Dicke-basis generator.
//
// Collective terms act inside each J block. Individual channels sum_i A_i rho A_i^dag
// (A = sigma^-, sigma^+, sigma^z) are reduced through the branching
// (C^2)^{(x)N} = sum_j' V_j' (x) C^2 (x) S_j' of the last emitter against the other
// N-1: for a permutation-invariant rho = sum_J rho~^J (x) 1/d_J,
//
//   [sum_i A_i rho A_i^dag]~^{J'} = N sum_{j'} (d^{N-1}_{j'} / d^N_J)
//                                   K_{J'J}^{j'} rho~^J (K_{J'J}^{j'})^T,
//   K_{J'J}^{j'} = C_{J',j'}^dag (1 (x) A) C_{J,j'},
//
// with C_{J,j'} the Clebsch-Gordan isometry V_J -> V_j' (x) C^2 and d the
// multiplicity of a multiplet. The anticommutator parts are collective:
// sum_i s+_i s-_i = J_z + N/2, sum_i s-_i s+_i = N/2 - J_z, sum_i sz_i^2 = N.

#include <cmath>

#include "dickecav/dicke.hpp"
#include "dickecav/error.hpp"

namespace dickecav::dicke {

namespace {

using Complex = std::complex<double>;

// <j', M - mu; 1/2, mu | J, M> in doubled labels (Condon-Shortley phase).
double cg_half(int two_J, int two_jp, int two_M, int two_mu) {
    if (std::abs(two_M - two_mu) > two_jp || std::abs(two_M) > two_J) return 0.0;
    const double jp = 0.5 * two_jp, M = 0.5 * two_M;
    const double denom = two_jp + 1.0;
    if (two_J == two_jp + 1) return std::sqrt((two_mu > 0 ? jp + M + 0.5 : jp - M + 0.5) / denom);
    if (two_J == two_jp - 1) return two_mu > 0 ? -std::sqrt((jp - M + 0.5) / denom) : std::sqrt((jp + M + 0.5) / denom);
    return 0.0;
}

enum class SiteOp { lower, raise, z };

int shift_of(SiteOp op) {
    switch (op) {
    case SiteOp::lower: return -2;
    case SiteOp::raise: return 2;
    case SiteOp::z: return 0;
    }
    return 0;
}

// <J', M + shift | C_{J',j'}^dag (1 (x) A) C_{J,j'} | J, M>
double reduced_element(SiteOp op, int two_J_out, int two_J, int two_jp, int two_M) {
    double sum = 0.0;
    for (int two_mu : {1, -1}) {
        const double c_in = cg_half(two_J, two_jp, two_M, two_mu);
        if (c_in == 0.0) continue;
        int two_mu_out = two_mu;
        double amp = 1.0;
        switch (op) {
        case SiteOp::lower:
            if (two_mu != 1) continue;
            two_mu_out = -1;
            break;
        case SiteOp::raise:
            if (two_mu != -1) continue;
            two_mu_out = 1;
            break;
        case SiteOp::z: amp = two_mu > 0 ? 1.0 : -1.0; break;
        }
        const int two_M_out = two_M + two_mu_out - two_mu;
        if (std::abs(two_M_out) > two_J_out) continue;
        sum += amp * c_in * cg_half(two_J_out, two_jp, two_M_out, two_mu_out);
    }
    return sum;
}

struct Transition {
    int block_in;
    int block_out;
    int two_jp;
    double weight; // N d^{N-1}_{j'} / d^N_J
};

// All (J -> J') routes through an (N-1)-emitter multiplet j'.
std::vector<Transition> transitions(const DickeBasis& basis) {
    const int n = basis.n_emitters();
    std::vector<Transition> out;
    for (int b = 0; b < basis.block_count(); ++b) {
        const int tj = basis.two_j(b);
        const double log_d = DickeBasis::log_multiplicity(n, tj);
        for (int two_jp : {tj - 1, tj + 1}) {
            if (two_jp < 0 || two_jp > n - 1) continue;
            const double w = n * std::exp(DickeBasis::log_multiplicity(n - 1, two_jp) - log_d);
            for (int two_J_out : {two_jp - 1, two_jp + 1}) {
                const int b_out = basis.block_of(two_J_out);
                if (b_out < 0) continue;
                out.push_back({b, b_out, two_jp, w});
            }
        }
    }
    return out;
}

} // namespace

DickeLiouvillian::DickeLiouvillian(DickeBasis basis, CollectiveRates rates)
    : basis_(std::move(basis)), rates_(rates) {
    for (double r : {rates_.Gamma, rates_.gamma, rates_.chi, rates_.eta})
        if (!std::isfinite(r) || r < 0.0) throw InvalidArgument("Dicke rates must be finite and >= 0");
    if (!std::isfinite(rates_.delta_omega)) throw InvalidArgument("delta_omega must be finite");

    const int n = basis_.n_emitters();
    const auto routes = transitions(basis_);
    std::vector<Eigen::Triplet<Complex>> full;
    std::vector<Eigen::Triplet<double>> pop;

    auto vec_index = [&](int b, int row, int col) {
        return static_cast<int>(basis_.block_offset(b) + row + static_cast<std::size_t>(col) * basis_.block_dim(b));
    };
    auto pop_index = [&](int b, int i) { return static_cast<int>(basis_.population_offset(b) + i); };

    // Block-local terms.
    for (int b = 0; b < basis_.block_count(); ++b) {
        const int tj = basis_.two_j(b);
        const int d = tj + 1;
        for (int c = 0; c < d; ++c) {
            const int two_mc = 2 * c - tj;
            const double ac2 = a_minus_squared(tj, two_mc);
            for (int r = 0; r < d; ++r) {
                const int two_mr = 2 * r - tj;
                const double ar2 = a_minus_squared(tj, two_mr);
                const double m_sum = 0.5 * (two_mr + two_mc);
                const double decay = -0.5 * rates_.gamma * (m_sum + n) - 0.5 * rates_.eta * (n - m_sum) -
                               0.5 * rates_.chi * n - 0.5 * rates_.Gamma * (ar2 + ac2);
                const Complex diag(decay, -rates_.delta_omega * 0.5 * (two_mr - two_mc));
                full.emplace_back(vec_index(b, r, c), vec_index(b, r, c), diag);
                if (r == c) pop.emplace_back(pop_index(b, r), pop_index(b, r), decay);
                // Gamma J- rho J+
                if (r > 0 && c > 0 && rates_.Gamma > 0.0) {
                    const double v = rates_.Gamma * std::sqrt(ar2 * ac2);
                    full.emplace_back(vec_index(b, r - 1, c - 1), vec_index(b, r, c), v);
                    if (r == c) pop.emplace_back(pop_index(b, r - 1), pop_index(b, r), v);
                }
            }
        }
    }

    // Individual jump terms.
    const std::pair<SiteOp, double> channels[] = {
        {SiteOp::lower, rates_.gamma}, {SiteOp::raise, rates_.eta}, {SiteOp::z, 0.5 * rates_.chi}};
    for (const auto& [op, rate] : channels) {
        if (rate == 0.0) continue;
        const int shift = shift_of(op) / 2;
        for (const auto& t : routes) {
            const int tj = basis_.two_j(t.block_in);
            const int tj_out = basis_.two_j(t.block_out);
            const int d = tj + 1;
            std::vector<double> k(d);
            for (int i = 0; i < d; ++i) k[i] = reduced_element(op, tj_out, tj, t.two_jp, 2 * i - tj);
            const int off = (tj_out - tj) / 2; // index offset between blocks for equal M
            for (int c = 0; c < d; ++c) {
                if (k[c] == 0.0) continue;
                for (int r = 0; r < d; ++r) {
                    if (k[r] == 0.0) continue;
                    const int r_out = r + off + shift;
                    const int c_out = c + off + shift;
                    const double v = rate * t.weight * k[r] * k[c];
                    full.emplace_back(vec_index(t.block_out, r_out, c_out), vec_index(t.block_in, r, c), v);
                    if (r == c) pop.emplace_back(pop_index(t.block_out, r_out), pop_index(t.block_in, r), v);
                }
            }
        }
    }

    const auto nv = static_cast<Eigen::Index>(basis_.vector_size());
    const auto np = static_cast<Eigen::Index>(basis_.population_size());
    full_.resize(nv, nv);
    full_.setFromTriplets(full.begin(), full.end());
    full_.makeCompressed();
    populations_.resize(np, np);
    populations_.setFromTriplets(pop.begin(), pop.end());
    populations_.makeCompressed();
}

DickeBlockState DickeLiouvillian::apply(const DickeBlockState& rho) const {
    const Eigen::VectorXcd out = full_ * rho.to_vector();
    return DickeBlockState::from_vector(basis_, std::span<const Complex>(out.data(), out.size()));
}

double DickeLiouvillian::norm() const {
    double best = 0.0;
    for (Eigen::Index c = 0; c < full_.outerSize(); ++c) {
        double s = 0.0;
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(full_, c); it; ++it) s += std::abs(it.value());
        best = std::max(best, s);
    }
    return best;
}

DickeLiouvillian build_liouvillian(int n_emitters, const CollectiveRates& rates, const LiouvillianOptions& opts) {
    return DickeLiouvillian(DickeBasis(n_emitters, opts.max_emitters), rates);
}

DickeLiouvillian build_liouvillian(int n_emitters, double Gamma, const RateSet& rates, double delta_omega,
                                   const LiouvillianOptions& opts) {
    CollectiveRates r;
    r.Gamma = Gamma;
    r.gamma = rates.gamma;
    r.chi = rates.chi;
    r.eta = rates.eta;
    r.delta_omega = delta_omega;
    return build_liouvillian(n_emitters, r, opts);
}

} // namespace dickecav::dicke
