#include "bbb/config.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace bbb {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ValidationError(path + ": " + what); }

// Cursor over one JSON object that remembers its path and which keys were consumed.
class Node {
public:
    Node(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) fail(at(key), "required field missing");
        return j_.at(key);
    }

    Node child(const std::string& key) { return Node(raw(key), at(key)); }

    double number(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_number()) fail(at(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(at(key), "must be finite");
        return x;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : (seen_.insert(key), fallback); }

    double positive(const std::string& key) {
        const double x = number(key);
        if (!(x > 0)) fail(at(key), "must be positive (got " + format(x) + ")");
        return x;
    }
    double positive(const std::string& key, double fallback) { return has(key) ? positive(key) : (seen_.insert(key), fallback); }

    std::int64_t integer(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_number_integer()) fail(at(key), "expected an integer");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) { return has(key) ? integer(key) : (seen_.insert(key), fallback); }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return seen_.insert(key), fallback;
        const std::int64_t v = integer(key);
        if (v < 0) fail(at(key), "must be nonnegative");
        return std::uint64_t(v);
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return seen_.insert(key), fallback;
        const Json& v = raw(key);
        if (!v.is_boolean()) fail(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string choice(const std::string& key, std::initializer_list<const char*> allowed, std::optional<std::string> fallback = {}) {
        if (!has(key) && fallback) return seen_.insert(key), *fallback;
        const Json& v = raw(key);
        std::string list;
        for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        if (!v.is_string()) fail(at(key), "expected one of " + list);
        const std::string s = v.get<std::string>();
        for (const char* a : allowed)
            if (s == a) return s;
        fail(at(key), "unknown value \"" + s + "\"; expected one of " + list);
    }

    RealVector vector(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected an array of numbers");
        RealVector out(Index(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out(Index(i)) = v[i].get<double>();
            if (!std::isfinite(out(Index(i)))) fail(at(key) + "[" + std::to_string(i) + "]", "must be finite");
        }
        return out;
    }

    // Rejects keys that were never read.
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) fail(at(k), "unknown field");
    }

    static std::string format(double x) {
        std::ostringstream os;
        os << x;
        return os.str();
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

SpinHalfModel parse_spin(Node& n) {
    SpinHalfModel m;
    m.mu = n.number("mu");
    m.field = n.number("B");
    return m;
}

CircleModel parse_circle(Node& n) {
    CircleModel m;
    const std::int64_t size = n.integer("N");
    if (size < 3) fail(n.at("N"), "must be at least 3");
    m.n = Index(size);
    const bool has_a = n.has("a"), has_l = n.has("L");
    if (has_a == has_l) fail(n.at("a"), "give exactly one of a (spacing) or L (circumference)");
    m.a = has_a ? n.positive("a") : n.positive("L") / double(m.n);
    m.mass = n.positive("mass", 1.0);
    if (n.has("potential")) {
        Node p = n.child("potential");
        const std::string kind = p.choice("type", {"zero", "harmonic", "values"});
        if (kind == "harmonic") {
            const double omega = p.positive("omega");
            const double center = p.number("center", m.length() / 2);
            m.potential = harmonic_potential(m.n, m.a, m.mass, omega, center);
        } else if (kind == "values") {
            m.potential = p.vector("values");
            if (m.potential.size() != m.n) fail(p.at("values"), "length must equal N = " + std::to_string(m.n));
        }
        p.finish();
    }
    return m;
}

PolarField parse_explicit(Node& n, Index dim, double hbar) {
    const RealVector r = n.vector("R");
    const RealVector s = n.has("S") ? n.vector("S") : RealVector::Zero(r.size());
    if (r.size() != dim) fail(n.at("R"), "length " + std::to_string(r.size()) + " does not match the model dimension " + std::to_string(dim));
    if (s.size() != dim) fail(n.at("S"), "length " + std::to_string(s.size()) + " does not match the model dimension " + std::to_string(dim));
    if ((r.array() < 0).any()) fail(n.at("R"), "moduli must be nonnegative");
    if (std::abs(r.squaredNorm() - 1) > 1e-9) fail(n.at("R"), "sum of R^2 must be 1 within 1e-9 (got " + Node::format(r.squaredNorm()) + ")");
    return PolarField(r, s, hbar);
}

PolarField parse_basis(Node& n, Index dim, double hbar) {
    const std::int64_t k = n.integer("n");
    if (k < 0 || k >= dim) fail(n.at("n"), "label out of range [0, " + std::to_string(dim) + ")");
    return basis_state(dim, Index(k), hbar);
}

PolarField parse_spatial(Node n, const CircleModel& circle, double hbar) {
    const std::string type = n.choice("type", {"gaussian-packet", "plane-wave", "basis-state", "ground-state", "explicit"});
    PolarField out;
    if (type == "gaussian-packet") {
        const double center = n.number("center");
        const double width = n.positive("width");
        out = gaussian_packet(circle.n, circle.a, center, width, int(n.integer("momentum_q", 0)), hbar);
    } else if (type == "plane-wave") {
        out = plane_wave(circle.n, int(n.integer("q")), hbar);
    } else if (type == "basis-state") {
        out = parse_basis(n, circle.n, hbar);
    } else if (type == "ground-state") {
        out = ground_state(circle, hbar);
    } else {
        out = parse_explicit(n, circle.n, hbar);
    }
    n.finish();
    return out;
}

PolarField parse_spin_state(Node n, double hbar) {
    const PolarField out = n.choice("type", {"explicit", "basis-state"}) == "explicit" ? parse_explicit(n, 2, hbar) : parse_basis(n, 2, hbar);
    n.finish();
    return out;
}

// States of the spin-half and particle-spin models.
PolarField parse_state(Node n, ModelKind kind, const CircleModel& circle, Index dim, double hbar) {
    const std::string type = n.choice("type", {"basis-state", "explicit", "product"});
    PolarField out;
    if (type == "explicit") {
        out = parse_explicit(n, dim, hbar);
    } else if (type == "basis-state") {
        out = parse_basis(n, dim, hbar);
    } else {
        if (kind != ModelKind::particle_spin) fail(n.at("type"), "product states need the particle-spin model");
        const PolarField spatial = parse_spatial(n.child("spatial"), circle, hbar);
        out = product_state(spatial, parse_spin_state(n.child("spin"), hbar));
    }
    n.finish();
    return out;
}

} // namespace

std::size_t RunConfig::steps() const { return std::size_t(std::llround(horizon / dt)); }

HermitianGenerator RunConfig::generator() const {
    switch (model_kind) {
    case ModelKind::spin_half: return build_spin_half(spin, hbar);
    case ModelKind::circle: return build_circle(circle, hbar);
    case ModelKind::particle_spin: return build_particle_spin({circle, spin}, hbar);
    }
    throw ValidationError("model.type: unsupported");
}

RunConfig parse_config(const Json& doc) {
    RunConfig c;
    c.source = doc;
    Node root(doc, "");

    c.hbar = root.positive("hbar", 1.0);
    {
        Node m = root.child("model");
        const std::string type = m.choice("type", {"spin-half", "circle", "particle-spin"});
        if (type == "spin-half") {
            c.model_kind = ModelKind::spin_half;
            c.spin = parse_spin(m);
        } else if (type == "circle") {
            c.model_kind = ModelKind::circle;
            c.circle = parse_circle(m);
        } else {
            c.model_kind = ModelKind::particle_spin;
            Node circle = m.child("circle");
            c.circle = parse_circle(circle);
            circle.finish();
            Node spin = m.child("spin");
            c.spin = parse_spin(spin);
            spin.finish();
        }
        m.finish();
    }
    const Index dim = c.model_kind == ModelKind::spin_half ? 2 : c.model_kind == ModelKind::circle ? c.circle.n : 2 * c.circle.n;

    const std::string f = root.choice("formulation", {"reference", "f1-guided", "f2-ensemble", "f3-hydro", "wavefree"});
    c.formulation = f == "reference" ? Formulation::reference
                    : f == "f1-guided" ? Formulation::f1_guided
                    : f == "f2-ensemble" ? Formulation::f2_ensemble
                    : f == "f3-hydro" ? Formulation::f3_hydro
                                      : Formulation::wavefree;
    if ((c.formulation == Formulation::f2_ensemble || c.formulation == Formulation::f3_hydro) && c.model_kind != ModelKind::circle)
        fail("formulation", f + " needs the circle model");

    c.dt = root.number("dt");
    if (!(c.dt > 0)) fail("dt", "must be positive (got " + Node::format(c.dt) + ")");
    c.horizon = root.number("horizon");
    if (!(c.horizon > 0)) fail("horizon", "must be positive (got " + Node::format(c.horizon) + ")");
    if (c.steps() == 0) fail("horizon", "shorter than half a step dt");
    if (c.steps() > 100000000) fail("horizon", "more than 1e8 steps of dt");

    {
        if (c.model_kind == ModelKind::circle)
            c.initial = parse_spatial(root.child("initial_state"), c.circle, c.hbar);
        else
            c.initial = parse_state(root.child("initial_state"), c.model_kind, c.circle, dim, c.hbar);
    }

    c.ensemble_size = root.count("ensemble_size", 0);
    if ((c.formulation == Formulation::f1_guided || c.formulation == Formulation::f2_ensemble) && c.ensemble_size == 0)
        fail("ensemble_size", "must be positive for " + f);
    c.seed = root.count("seed", 0);

    const std::string integ = root.choice("integrator", {"implicit-midpoint", "exact-exponential"}, "implicit-midpoint");
    c.integrator = integ == "exact-exponential" ? UnitaryScheme::exact_exponential : UnitaryScheme::implicit_midpoint;
    if (c.integrator == UnitaryScheme::exact_exponential && dim > max_exponential_dim)
        fail("integrator", "exact-exponential limited to dimension " + std::to_string(max_exponential_dim));

    if (root.has("wavefree")) {
        Node w = root.child("wavefree");
        c.wavefree.scheme = w.choice("scheme", {"euler", "rk4"}, "euler") == "rk4" ? WaveFreeScheme::rk4 : WaveFreeScheme::euler;
        c.wavefree.max_halvings = int(w.count("max_halvings", 20));
        w.finish();
    }
    if (root.has("hydro")) {
        Node h = root.child("hydro");
        c.hydro.flux = h.choice("flux", {"centered", "upwind"}, "centered") == "upwind" ? FluxKind::upwind : FluxKind::centered;
        c.hydro.bernoulli = h.boolean("bernoulli", true);
        c.hydro.cfl = h.positive("cfl", 0.5);
        h.finish();
    }
    if (root.has("density")) {
        Node d = root.child("density");
        c.density.kind = d.choice("kind", {"histogram", "kernel"}, "histogram") == "kernel" ? DensityKind::kernel : DensityKind::histogram;
        c.density.bandwidth = d.number("bandwidth", 0.0);
        if (c.density.bandwidth < 0) fail(d.at("bandwidth"), "must be nonnegative");
        d.finish();
    }
    if (root.has("output")) {
        Node o = root.child("output");
        c.output.every = o.count("every", 1);
        if (c.output.every == 0) fail(o.at("every"), "must be at least 1");
        c.output.trajectories = o.count("trajectories", 0);
        if (c.output.trajectories > c.ensemble_size) fail(o.at("trajectories"), "exceeds ensemble_size");
        o.finish();
    }
    if (root.has("tolerances")) {
        Node t = root.child("tolerances");
        c.tolerances.radicand = t.positive("radicand", c.tolerances.radicand);
        c.tolerances.probability_drift = t.positive("probability_drift", c.tolerances.probability_drift);
        c.tolerances.compare = t.positive("compare", c.tolerances.compare);
        t.finish();
    }
    c.wavefree.radicand_tolerance = c.tolerances.radicand;
    c.wavefree.probability_drift = c.tolerances.probability_drift;
    root.finish();

    c.hash = config_hash(doc);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config: " + path + " is not valid JSON (" + e.what() + ")");
    }
    return parse_config(doc);
}

std::string sha1_hex(const std::string& bytes) {
    unsigned char md[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
    std::ostringstream os;
    for (unsigned char b : md) os << std::hex << std::setw(2) << std::setfill('0') << int(b);
    return os.str();
}

std::string config_hash(const Json& doc) {
    const std::string body = doc.dump();
    return sha1_hex("blob " + std::to_string(body.size()) + std::string(1, '\0') + body);
}

std::string to_string(Formulation f) {
    switch (f) {
    case Formulation::reference: return "reference";
    case Formulation::f1_guided: return "f1-guided";
    case Formulation::f2_ensemble: return "f2-ensemble";
    case Formulation::f3_hydro: return "f3-hydro";
    case Formulation::wavefree: return "wavefree";
    }
    return "?";
}

std::string to_string(ModelKind m) {
    switch (m) {
    case ModelKind::spin_half: return "spin-half";
    case ModelKind::circle: return "circle";
    case ModelKind::particle_spin: return "particle-spin";
    }
    return "?";
}

} // namespace bbb
