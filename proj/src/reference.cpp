#include "bbb/reference.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <sstream>
#include <mutex>
#include <thread>

#include "bbb/random.hpp"

namespace bbb {

struct UnitaryIntegrator::Impl {
    Eigen::SparseMatrix<Complex> plus;  // 1 - i dt H / 2 hbar
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>> minus_lu;  // 1 + i dt H / 2 hbar
    Eigen::MatrixXcd propagator;
};

UnitaryIntegrator::UnitaryIntegrator(HermitianGenerator h, double dt, UnitaryScheme scheme)
    : h_(std::move(h)), dt_(dt), scheme_(scheme) {
    if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("dt: must be positive and finite");
    auto impl = std::make_shared<Impl>();
    const Complex c(0, dt / (2 * h_.hbar()));
    if (scheme == UnitaryScheme::implicit_midpoint) {
        const double bound = h_.spectral_bound();
        if (dt * bound / h_.hbar() >= 0.5) {
            std::ostringstream os;
            os << "dt: step-size violation, dt*|H|/hbar = " << dt * bound / h_.hbar() << " >= 0.5 (spectral bound " << bound
               << ", require dt < " << 0.5 * h_.hbar() / bound << ")";
            throw ValidationError(os.str());
        }
        Eigen::SparseMatrix<Complex> id(h_.dim(), h_.dim());
        id.setIdentity();
        const Eigen::SparseMatrix<Complex> hs = h_.sparse();
        impl->plus = id - c * hs;
        Eigen::SparseMatrix<Complex> minus = id + c * hs;
        minus.makeCompressed();
        impl->minus_lu.compute(minus);
        if (impl->minus_lu.info() != Eigen::Success) throw IntegrationError("implicit midpoint: factorization failed");
    } else {
        if (h_.dim() > max_exponential_dim) throw ValidationError("integrator: exact-exponential limited to dimension <= 4096");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h_.dense());
        const Eigen::VectorXcd phases = (es.eigenvalues().cast<Complex>() * Complex(0, -dt / h_.hbar())).array().exp();
        impl->propagator = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    }
    impl_ = std::move(impl);
}

ComplexVector UnitaryIntegrator::step(const ComplexVector& psi) const {
    if (psi.size() != h_.dim()) throw ValidationError("integrator: dimension mismatch");
    if (scheme_ == UnitaryScheme::exact_exponential) return impl_->propagator * psi;
    const ComplexVector rhs = impl_->plus * psi;
    return impl_->minus_lu.solve(rhs);
}

std::vector<AmplitudeField> evolve(const AmplitudeField& psi0, const UnitaryIntegrator& integ, std::size_t steps) {
    std::vector<AmplitudeField> out;
    out.reserve(steps + 1);
    out.push_back(psi0);
    ComplexVector psi = psi0.values();
    for (std::size_t k = 0; k < steps; ++k) {
        psi = integ.step(psi);
        out.emplace_back(psi, 1e-8);
    }
    return out;
}

JumpRates rates_from_flux(const RealVector& p, const RealVector& flux, const HermitianGenerator& h, double eps_p, EventLog* log) {
    const auto& links = h.links();
    JumpRates r{RealVector::Zero(links.size()), RealVector::Zero(links.size())};
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Index n = links[l].n, m = links[l].m;
        if (p(n) < eps_p || p(m) < eps_p) {
            if (log && flux(l) != 0) log->record("probability-floor", "link " + std::to_string(n) + "-" + std::to_string(m));
            continue;
        }
        if (flux(l) > 0) r.into_first(l) = flux(l) / p(m);
        else if (flux(l) < 0) r.into_second(l) = -flux(l) / p(n);
    }
    return r;
}

JumpRates bell_rates(const AmplitudeField& psi, const HermitianGenerator& h, double eps_p, EventLog* log) {
    return rates_from_flux(psi.values().cwiseAbs2(), current(psi, h).values(), h, eps_p, log);
}

double exit_rate(const JumpRates& rates, const HermitianGenerator& h, Index n) {
    double total = 0;
    for (const auto& [k, l] : h.adjacent(n)) total += k > n ? rates.into_second(l) : rates.into_first(l);
    return total;
}

std::size_t cap_exit_probability(JumpRates& rates, const HermitianGenerator& h, double dt, double cap) {
    std::size_t capped = 0;
    for (Index n = 0; n < h.dim(); ++n) {
        const double p = dt * exit_rate(rates, h, n);
        if (p <= cap) continue;
        const double scale = cap / p * (1 - 1e-12);
        for (const auto& [k, l] : h.adjacent(n)) (k > n ? rates.into_second(l) : rates.into_first(l)) *= scale;
        ++capped;
    }
    return capped;
}

Index jump_step(Index n, const JumpRates& rates, const HermitianGenerator& h, double dt, double u) {
    const double total = dt * exit_rate(rates, h, n);
    if (total > 0.1 + 1e-12) {
        std::ostringstream os;
        os << "jump_step: dt*exit rate = " << total << " exceeds 0.1 at label " << n << "; require dt <= " << 0.1 * dt / total;
        throw IntegrationError(os.str());
    }
    double acc = 0;
    for (const auto& [k, l] : h.adjacent(n)) {
        acc += dt * (k > n ? rates.into_second(l) : rates.into_first(l));
        if (u < acc) return k;
    }
    return n;
}

double EnsembleResult::max_z(std::size_t m) const {
    double z = 0;
    for (Index i = 0; i < occupancy.rows(); ++i)
        for (Index j = 0; j < occupancy.cols(); ++j) {
            const double p = expected(i, j);
            const double var = std::max(p * (1 - p), 1.0 / double(m)) / double(m);
            z = std::max(z, std::abs(occupancy(i, j) - p) / std::sqrt(var));
        }
    return z;
}

double EnsembleResult::fraction_beyond(double zlim, std::size_t m) const {
    std::size_t beyond = 0;
    for (Index i = 0; i < occupancy.rows(); ++i)
        for (Index j = 0; j < occupancy.cols(); ++j) {
            const double p = expected(i, j);
            const double var = std::max(p * (1 - p), 1.0 / double(m)) / double(m);
            if (std::abs(occupancy(i, j) - p) > zlim * std::sqrt(var)) ++beyond;
        }
    return occupancy.size() ? double(beyond) / double(occupancy.size()) : 0.0;
}

namespace {

Index sample_categorical(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    return std::min<Index>(it - cdf.begin(), Index(cdf.size()) - 1);
}

template <typename F>
void parallel_chunks(std::size_t count, unsigned threads, F&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = unsigned(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    if (threads <= 1) {
        body(0, std::size_t(0), count);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk, e = std::min(count, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, t, b, e] { body(t, b, e); });
    }
    for (auto& th : pool) th.join();
}

} // namespace

EnsembleResult run_jump_ensemble(const HermitianGenerator& h, const FluxSource& source, double dt, std::size_t steps, const EnsembleOptions& opt) {
    const Index dim = h.dim();
    const std::size_t m = opt.trajectories;
    if (m == 0) throw ValidationError("ensemble_size: must be positive");
    std::vector<std::size_t> samples = opt.sample_steps;
    std::sort(samples.begin(), samples.end());
    samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
    if (!samples.empty() && samples.back() > steps) throw ValidationError("sample step beyond horizon");

    EnsembleResult res;
    res.occupancy = Eigen::MatrixXd::Zero(Index(samples.size()), dim);
    res.expected = Eigen::MatrixXd::Zero(Index(samples.size()), dim);
    for (auto s : samples) res.times.push_back(double(s) * dt);

    constexpr std::size_t block = 256;
    std::vector<Index> labels(m);
    const std::size_t recorded = std::min(opt.recorded, m);
    res.trajectories.resize(recorded);
    for (std::size_t i = 0; i < recorded; ++i) res.trajectories[i] = {opt.seed, i, {}};

    std::size_t next_sample = 0;
    for (std::size_t b = 0; b <= steps; b += block) {
        const std::size_t e = std::min(b + block, steps + 1);
        std::vector<JumpRates> rates;
        std::vector<std::pair<std::size_t, Index>> sample_rows;  // (step, row)
        for (std::size_t k = b; k < e; ++k) {
            StepFlux sf = source(k);
            if (k == 0) {
                const RealVector& p0 = opt.initial_distribution.size() ? opt.initial_distribution : sf.p;
                if (p0.size() != dim || (p0.array() < 0).any() || !(p0.sum() > 0)) throw ValidationError("initial distribution: invalid");
                std::vector<double> cdf(dim);
                double acc = 0;
                for (Index n = 0; n < dim; ++n) cdf[n] = acc += p0(n);
                for (std::size_t i = 0; i < m; ++i) labels[i] = sample_categorical(cdf, counter_uniform(opt.seed, i, 0));
            }
            if (next_sample < samples.size() && samples[next_sample] == k) {
                res.expected.row(Index(next_sample)) = sf.p.transpose();
                sample_rows.push_back({k, Index(next_sample)});
                ++next_sample;
            }
            if (k < steps) {
                JumpRates r = rates_from_flux(sf.p, sf.flux, h, opt.eps_p, &res.log);
                const std::size_t capped = cap_exit_probability(r, h, dt, opt.exit_cap);
                if (capped) res.log.record("rate-cap", "step " + std::to_string(k));
                rates.push_back(std::move(r));
            }
        }
        const unsigned threads = opt.threads;
        std::vector<Eigen::MatrixXd> partial;
        std::mutex guard;
        parallel_chunks(m, threads, [&](unsigned, std::size_t lo, std::size_t hi) {
            Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(res.occupancy.rows(), dim);
            std::size_t row = 0;
            for (std::size_t k = b; k < e; ++k) {
                const bool is_sample = row < sample_rows.size() && sample_rows[row].first == k;
                for (std::size_t i = lo; i < hi; ++i) {
                    if (is_sample) {
                        counts(sample_rows[row].second, labels[i]) += 1;
                        if (i < recorded) res.trajectories[i].samples.push_back({double(k) * dt, labels[i]});
                    }
                    if (k < steps) labels[i] = jump_step(labels[i], rates[k - b], h, dt, counter_uniform(opt.seed, i, k + 1));
                }
                if (is_sample) ++row;
            }
            std::lock_guard lock(guard);
            partial.push_back(std::move(counts));
        });
        for (const auto& c : partial) res.occupancy += c;
    }
    res.occupancy /= double(m);
    return res;
}

EnsembleResult simulate_guided_ensemble(const AmplitudeField& psi0, const UnitaryIntegrator& integ, std::size_t steps, const EnsembleOptions& options) {
    const HermitianGenerator& h = integ.generator();
    ComplexVector psi = psi0.values();
    std::size_t at = 0;
    FluxSource source = [&](std::size_t k) {
        if (k != at) throw IntegrationError("guided ensemble: steps requested out of order");
        StepFlux sf;
        sf.p = psi.cwiseAbs2();
        if (k < steps) {
            const ComplexVector next = integ.step(psi);
            // Implicit midpoint satisfies the discrete continuity equation exactly with the midpoint current.
            sf.flux = current(ComplexVector(0.5 * (psi + next)), h).values();
            psi = next;
        }
        ++at;
        return sf;
    };
    return run_jump_ensemble(h, source, integ.dt(), steps, options);
}

} // namespace bbb
