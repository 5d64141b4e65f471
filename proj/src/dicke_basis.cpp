#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "dickecav/dicke.hpp"
#include "dickecav/error.hpp"

namespace dickecav::dicke {

double a_minus_squared(int two_j, int two_m) {
    if (two_j < 0 || std::abs(two_m) > two_j || (two_j - two_m) % 2 != 0)
        throw InvalidArgument("invalid Dicke label 2J=" + std::to_string(two_j) + " 2M=" + std::to_string(two_m));
    // (J+M)(J-M+1) with doubled labels
    return 0.25 * (two_j + two_m) * (two_j - two_m + 2);
}

double a_minus_coefficient(double j, double m) {
    const double two_j = 2.0 * j, two_m = 2.0 * m;
    if (std::abs(two_j - std::round(two_j)) > 1e-12 || std::abs(two_m - std::round(two_m)) > 1e-12)
        throw InvalidArgument("J and M must be integers or half-integers");
    return std::sqrt(a_minus_squared(static_cast<int>(std::lround(two_j)), static_cast<int>(std::lround(two_m))));
}

double DickeBasis::log_multiplicity(int n, int two_j) {
    // d_J = N! (2J+1) / ((N/2+J+1)! (N/2-J)!)
    const int upper = (n + two_j) / 2; // N/2 + J
    const int lower = (n - two_j) / 2; // N/2 - J
    return std::lgamma(n + 1.0) + std::log(two_j + 1.0) - std::lgamma(upper + 2.0) - std::lgamma(lower + 1.0);
}

DickeBasis::DickeBasis(int n_emitters, int max_emitters) : n_(n_emitters) {
    if (n_ < 1) throw InvalidArgument("Dicke basis needs N >= 1");
    if (n_ > max_emitters)
        throw DimensionLimit("N=" + std::to_string(n_) + " exceeds the Dicke dimension cap of " +
                             std::to_string(max_emitters));
    pop_offset_.push_back(0);
    vec_offset_.push_back(0);
    for (int tj = n_; tj >= 0; tj -= 2) {
        two_j_.push_back(tj);
        const std::size_t dim = tj + 1;
        pop_offset_.push_back(pop_offset_.back() + dim);
        vec_offset_.push_back(vec_offset_.back() + dim * dim);
        for (int tm = -tj; tm <= tj; tm += 2) levels_.push_back({tj, tm});
    }
}

int DickeBasis::block_of(int two_j) const {
    if (two_j < 0 || two_j > n_ || (n_ - two_j) % 2 != 0) return -1;
    return (n_ - two_j) / 2;
}

DickeBlockState::DickeBlockState(DickeBasis basis) : basis_(std::move(basis)) {
    blocks_.reserve(basis_.block_count());
    for (int b = 0; b < basis_.block_count(); ++b) {
        const int d = basis_.block_dim(b);
        blocks_.push_back(Eigen::MatrixXcd::Zero(d, d));
    }
}

DickeBlockState DickeBlockState::ground(const DickeBasis& basis) {
    DickeBlockState s(basis);
    s.blocks_[0](0, 0) = 1.0;
    return s;
}

DickeBlockState DickeBlockState::fully_excited(const DickeBasis& basis) {
    DickeBlockState s(basis);
    const int d = basis.block_dim(0);
    s.blocks_[0](d - 1, d - 1) = 1.0;
    return s;
}

DickeBlockState DickeBlockState::from_populations(const DickeBasis& basis, std::span<const double> p) {
    if (p.size() != basis.population_size()) throw InvalidArgument("population vector has wrong length");
    DickeBlockState s(basis);
    for (int b = 0; b < basis.block_count(); ++b)
        for (int i = 0; i < basis.block_dim(b); ++i) s.blocks_[b](i, i) = p[basis.population_offset(b) + i];
    return s;
}

DickeBlockState DickeBlockState::from_vector(const DickeBasis& basis, std::span<const std::complex<double>> v) {
    if (v.size() != basis.vector_size()) throw InvalidArgument("state vector has wrong length");
    DickeBlockState s(basis);
    for (int b = 0; b < basis.block_count(); ++b) {
        const int d = basis.block_dim(b);
        s.blocks_[b] = Eigen::Map<const Eigen::MatrixXcd>(v.data() + basis.block_offset(b), d, d);
    }
    return s;
}

double DickeBlockState::population(int two_j, int two_m) const {
    const int b = basis_.block_of(two_j);
    if (b < 0 || std::abs(two_m) > two_j) throw InvalidArgument("level not in basis");
    const int i = m_index(two_j, two_m);
    return blocks_[b](i, i).real();
}

std::vector<double> DickeBlockState::populations() const {
    std::vector<double> p(basis_.population_size());
    for (int b = 0; b < basis_.block_count(); ++b)
        for (int i = 0; i < basis_.block_dim(b); ++i) p[basis_.population_offset(b) + i] = blocks_[b](i, i).real();
    return p;
}

Eigen::VectorXcd DickeBlockState::to_vector() const {
    Eigen::VectorXcd v(basis_.vector_size());
    for (int b = 0; b < basis_.block_count(); ++b) {
        const int d = basis_.block_dim(b);
        v.segment(basis_.block_offset(b), d * d) = Eigen::Map<const Eigen::VectorXcd>(blocks_[b].data(), d * d);
    }
    return v;
}

std::complex<double> DickeBlockState::trace() const {
    std::complex<double> t = 0.0;
    for (const auto& blk : blocks_) t += blk.trace();
    return t;
}

bool DickeBlockState::has_coherences(double tol) const {
    for (const auto& blk : blocks_)
        for (int c = 0; c < blk.cols(); ++c)
            for (int r = 0; r < blk.rows(); ++r)
                if (r != c && std::abs(blk(r, c)) > tol) return true;
    return false;
}

bool DickeBlockState::is_valid(double tol) const {
    if (std::abs(trace() - 1.0) > tol) return false;
    for (const auto& blk : blocks_) {
        if ((blk - blk.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
        for (int i = 0; i < blk.rows(); ++i)
            if (blk(i, i).real() < -tol) return false;
    }
    return true;
}

double DickeBlockState::jplus_jminus() const {
    double s = 0.0;
    for (int b = 0; b < basis_.block_count(); ++b) {
        const int tj = basis_.two_j(b);
        for (int i = 0; i <= tj; ++i) s += a_minus_squared(tj, 2 * i - tj) * blocks_[b](i, i).real();
    }
    return s;
}

DickeBlockState DickeBlockState::lowered() const {
    DickeBlockState out(basis_);
    for (int b = 0; b < basis_.block_count(); ++b) {
        const int tj = basis_.two_j(b);
        const int d = tj + 1;
        // J- |J,M> = A^-_{J,M} |J,M-1>: row index shifts down by one.
        Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(d, d);
        for (int i = 1; i < d; ++i) lower(i - 1, i) = std::sqrt(a_minus_squared(tj, 2 * i - tj));
        out.blocks_[b] = lower * blocks_[b] * lower.transpose();
    }
    return out;
}

double trace_distance(const DickeBlockState& a, const DickeBlockState& b) {
    if (a.basis().n_emitters() != b.basis().n_emitters()) throw InvalidArgument("trace distance between different N");
    double total = 0.0;
    for (int k = 0; k < a.basis().block_count(); ++k) {
        const Eigen::MatrixXcd diff = a.block(k) - b.block(k);
        const Eigen::MatrixXcd herm = 0.5 * (diff + diff.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
        total += es.eigenvalues().cwiseAbs().sum();
    }
    return 0.5 * total;
}

} // namespace dickecav::dicke
