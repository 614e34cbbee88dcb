#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include "bbb/error.hpp"

namespace bbb {

using Index = Eigen::Index;

// Undirected link with n < m.
struct Link {
    Index n;
    Index m;
};

template <typename Real>
struct Entry {
    Index n;
    Index m;
    std::complex<Real> value;
};

template <typename Real>
using VectorR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
template <typename Real>
using VectorC = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
class BasicHermitianGenerator {
public:
    using Complex = std::complex<Real>;

    BasicHermitianGenerator() = default;

    // Entries may give either or both orientations of an off-diagonal element.
    BasicHermitianGenerator(Index dim, const std::vector<Entry<Real>>& entries, Real hbar = 1)
        : dim_(dim), hbar_(hbar), diagonal_(VectorR<Real>::Zero(dim)), adjacency_(dim) {
        if (dim <= 0) throw ValidationError("generator: dimension must be positive");
        if (!(hbar > 0)) throw ValidationError("generator: hbar must be positive");
        std::map<std::pair<Index, Index>, Complex> upper;
        std::map<std::pair<Index, Index>, bool> seen;
        for (const auto& e : entries) {
            if (e.n < 0 || e.m < 0 || e.n >= dim || e.m >= dim) {
                std::ostringstream os;
                os << "generator: entry (" << e.n << "," << e.m << ") out of range";
                throw ValidationError(os.str());
            }
            if (!std::isfinite(e.value.real()) || !std::isfinite(e.value.imag()))
                throw ValidationError("generator: non-finite entry");
            if (seen[{e.n, e.m}]) {
                std::ostringstream os;
                os << "generator: duplicate entry (" << e.n << "," << e.m << ")";
                throw ValidationError(os.str());
            }
            seen[{e.n, e.m}] = true;
            if (e.n == e.m) {
                if (e.value.imag() != 0) {
                    std::ostringstream os;
                    os << "generator: non-Hermitian diagonal entry (" << e.n << "," << e.n << ")";
                    throw ValidationError(os.str());
                }
                diagonal_(e.n) = e.value.real();
                continue;
            }
            const Index lo = std::min(e.n, e.m), hi = std::max(e.n, e.m);
            const Complex v = e.n < e.m ? e.value : std::conj(e.value);
            auto it = upper.find({lo, hi});
            if (it == upper.end()) {
                upper[{lo, hi}] = v;
            } else if (it->second != v) {
                std::ostringstream os;
                os << "generator: non-Hermitian entries at (" << lo << "," << hi << ")";
                throw ValidationError(os.str());
            }
        }
        for (const auto& [key, v] : upper) {
            if (v == Complex(0)) continue;
            const Index l = static_cast<Index>(links_.size());
            links_.push_back({key.first, key.second});
            values_.push_back(v);
            adjacency_[key.first].push_back({key.second, l});
            adjacency_[key.second].push_back({key.first, l});
        }
    }

    Index dim() const { return dim_; }
    Real hbar() const { return hbar_; }
    const VectorR<Real>& diagonal() const { return diagonal_; }
    const std::vector<Link>& links() const { return links_; }
    // H_nm for each link, n < m.
    const std::vector<Complex>& link_values() const { return values_; }
    // (neighbour k, link index) pairs for label n.
    const std::vector<std::pair<Index, Index>>& adjacent(Index n) const { return adjacency_[n]; }

    Index link_index(Index n, Index m) const {
        for (const auto& [k, l] : adjacency_[n])
            if (k == m) return l;
        return -1;
    }

    Complex operator()(Index n, Index m) const {
        if (n == m) return diagonal_(n);
        const Index l = link_index(n, m);
        if (l < 0) return Complex(0);
        return n < m ? values_[l] : std::conj(values_[l]);
    }

    // Gershgorin bound on the spectral radius.
    Real spectral_bound() const {
        VectorR<Real> rows = diagonal_.cwiseAbs();
        for (std::size_t l = 0; l < links_.size(); ++l) {
            rows(links_[l].n) += std::abs(values_[l]);
            rows(links_[l].m) += std::abs(values_[l]);
        }
        return rows.size() ? rows.maxCoeff() : Real(0);
    }

    Eigen::SparseMatrix<Complex> sparse() const {
        std::vector<Eigen::Triplet<Complex>> t;
        for (Index n = 0; n < dim_; ++n)
            if (diagonal_(n) != 0) t.emplace_back(n, n, Complex(diagonal_(n)));
        for (std::size_t l = 0; l < links_.size(); ++l) {
            t.emplace_back(links_[l].n, links_[l].m, values_[l]);
            t.emplace_back(links_[l].m, links_[l].n, std::conj(values_[l]));
        }
        Eigen::SparseMatrix<Complex> h(dim_, dim_);
        h.setFromTriplets(t.begin(), t.end());
        return h;
    }

    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> dense() const { return Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>(sparse()); }

private:
    Index dim_ = 0;
    Real hbar_ = 1;
    VectorR<Real> diagonal_;
    std::vector<Link> links_;
    std::vector<Complex> values_;
    std::vector<std::vector<std::pair<Index, Index>>> adjacency_;
};

template <typename Real>
class BasicAmplitudeField {
public:
    BasicAmplitudeField() = default;

    explicit BasicAmplitudeField(VectorC<Real> psi, Real tolerance = Real(1e-9)) : psi_(std::move(psi)) {
        if (psi_.size() == 0) throw ValidationError("amplitude field: empty");
        if (!psi_.allFinite()) throw ValidationError("amplitude field: non-finite amplitude");
        const Real norm = psi_.squaredNorm();
        if (std::abs(norm - 1) > tolerance) {
            std::ostringstream os;
            os << "amplitude field: not normalized (sum |psi|^2 = " << norm << ")";
            throw ValidationError(os.str());
        }
    }

    static BasicAmplitudeField normalized(VectorC<Real> psi) {
        const Real n = psi.norm();
        if (!(n > 0) || !std::isfinite(n)) throw ValidationError("amplitude field: cannot normalize");
        psi /= n;
        return BasicAmplitudeField(std::move(psi));
    }

    const VectorC<Real>& values() const { return psi_; }
    Index size() const { return psi_.size(); }
    std::complex<Real> operator[](Index n) const { return psi_(n); }

private:
    VectorC<Real> psi_;
};

template <typename Real>
struct BasicPolarField {
    VectorR<Real> R;
    VectorR<Real> S;  // action units
    Real hbar = 1;

    BasicPolarField() = default;
    BasicPolarField(VectorR<Real> r, VectorR<Real> s, Real h = 1) : R(std::move(r)), S(std::move(s)), hbar(h) {
        if (R.size() != S.size()) throw ValidationError("polar field: R and S differ in size");
        if ((R.array() < 0).any()) throw ValidationError("polar field: negative modulus");
        if (!R.allFinite() || !S.allFinite()) throw ValidationError("polar field: non-finite entry");
    }
};

template <typename Real>
class BasicProbabilityField {
public:
    explicit BasicProbabilityField(VectorR<Real> p, Real tolerance = Real(1e-9)) : p_(std::move(p)) {
        if ((p_.array() < 0).any()) throw ValidationError("probability field: negative entry");
        if (std::abs(p_.sum() - 1) > tolerance) throw ValidationError("probability field: does not sum to 1");
    }
    const VectorR<Real>& values() const { return p_; }
    Real operator[](Index n) const { return p_(n); }

private:
    VectorR<Real> p_;
};

// Antisymmetric by storage: one value J_nm per link with n < m.
template <typename Real>
class BasicCurrentField {
public:
    BasicCurrentField(std::vector<Link> links, VectorR<Real> j) : links_(std::move(links)), j_(std::move(j)) {}

    const std::vector<Link>& links() const { return links_; }
    const VectorR<Real>& values() const { return j_; }

    Real operator()(Index n, Index m) const {
        for (std::size_t l = 0; l < links_.size(); ++l) {
            if (links_[l].n == n && links_[l].m == m) return j_(l);
            if (links_[l].n == m && links_[l].m == n) return -j_(l);
        }
        return 0;
    }

    // Sum_m J_nm for each label, which is dP_n/dt.
    VectorR<Real> divergence(Index dim) const {
        VectorR<Real> d = VectorR<Real>::Zero(dim);
        for (std::size_t l = 0; l < links_.size(); ++l) {
            d(links_[l].n) += j_(l);
            d(links_[l].m) -= j_(l);
        }
        return d;
    }

private:
    std::vector<Link> links_;
    VectorR<Real> j_;
};

template <typename Real>
BasicPolarField<Real> polar_decompose(const BasicAmplitudeField<Real>& psi, Real hbar = 1) {
    const Index n = psi.size();
    VectorR<Real> r(n), s(n);
    for (Index k = 0; k < n; ++k) {
        r(k) = std::abs(psi[k]);
        Real phase = std::arg(psi[k]);
        if (phase <= -std::numbers::pi_v<Real>) phase = std::numbers::pi_v<Real>;
        s(k) = r(k) == 0 ? Real(0) : hbar * phase;
    }
    return BasicPolarField<Real>(std::move(r), std::move(s), hbar);
}

template <typename Real>
VectorC<Real> polar_compose_values(const BasicPolarField<Real>& p) {
    VectorC<Real> psi(p.R.size());
    for (Index k = 0; k < p.R.size(); ++k) psi(k) = p.R(k) == 0 ? std::complex<Real>(0) : std::polar(p.R(k), p.S(k) / p.hbar);
    return psi;
}

template <typename Real>
BasicAmplitudeField<Real> polar_compose(const BasicPolarField<Real>& p) {
    return BasicAmplitudeField<Real>(polar_compose_values(p));
}

template <typename Real>
BasicProbabilityField<Real> probability(const BasicAmplitudeField<Real>& psi) {
    return BasicProbabilityField<Real>(psi.values().cwiseAbs2());
}

template <typename Real>
BasicCurrentField<Real> current(const VectorC<Real>& psi, const BasicHermitianGenerator<Real>& h) {
    if (psi.size() != h.dim()) throw ValidationError("current: dimension mismatch");
    const auto& links = h.links();
    VectorR<Real> j(links.size());
    for (std::size_t l = 0; l < links.size(); ++l)
        j(l) = 2 / h.hbar() * std::imag(std::conj(psi(links[l].n)) * h.link_values()[l] * psi(links[l].m));
    return BasicCurrentField<Real>(links, std::move(j));
}

template <typename Real>
BasicCurrentField<Real> current(const BasicAmplitudeField<Real>& psi, const BasicHermitianGenerator<Real>& h) {
    return current(psi.values(), h);
}

// J_nm = (2/hbar) R_n R_m Im(theta_nm H_nm) with theta_nm = exp(-i(S_n - S_m)/hbar).
template <typename Real>
BasicCurrentField<Real> current_from_polar(const BasicPolarField<Real>& p, const BasicHermitianGenerator<Real>& h) {
    if (p.R.size() != h.dim()) throw ValidationError("current: dimension mismatch");
    const auto& links = h.links();
    VectorR<Real> j(links.size());
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Index n = links[l].n, m = links[l].m;
        const auto theta = std::polar(Real(1), -(p.S(n) - p.S(m)) / p.hbar);
        j(l) = 2 / h.hbar() * p.R(n) * p.R(m) * std::imag(theta * h.link_values()[l]);
    }
    return BasicCurrentField<Real>(links, std::move(j));
}

using Real = double;
using Complex = std::complex<double>;
using RealVector = VectorR<double>;
using ComplexVector = VectorC<double>;
using HermitianGenerator = BasicHermitianGenerator<double>;
using AmplitudeField = BasicAmplitudeField<double>;
using PolarField = BasicPolarField<double>;
using ProbabilityField = BasicProbabilityField<double>;
using CurrentField = BasicCurrentField<double>;

} // namespace bbb
