#include "hypolab/operator_core.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <sstream>

#include "hypolab/errors.hpp"
#include "hypolab/expr.hpp"

namespace hypolab {

namespace {

std::string point_str(const Eigen::VectorXd& x) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace

Eigen::MatrixXd OperatorSpec::eval_a(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd m = a(x);
    if (!m.allFinite())
        throw CoefficientError("a(x) non-finite at " + point_str(x));
    return m;
}

double OperatorSpec::eval_v(const Eigen::VectorXd& x) const {
    double val = v(x);
    if (!std::isfinite(val) || val <= 0.0)
        throw CoefficientError("v(x) must be finite and positive at " + point_str(x));
    return val;
}

double OperatorSpec::eval_c(const Eigen::VectorXd& x) const {
    double val = c ? c(x) : 0.0;
    if (!std::isfinite(val))
        throw CoefficientError("c(x) non-finite at " + point_str(x));
    return val;
}

void OperatorSpec::validate_at(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd m = eval_a(x);
    double scale = m.cwiseAbs().maxCoeff();
    double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * (1.0 + scale))
        throw CoefficientError("a(x) not symmetric at " + point_str(x));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                      Eigen::EigenvaluesOnly);
    double min_ev = es.eigenvalues().minCoeff();
    if (min_ev < -1e-10 * (1.0 + m.trace()))
        throw CoefficientError("a(x) not positive semi-definite at " + point_str(x));
    eval_v(x);
    if (epsilon < 0.0) throw CoefficientError("epsilon must be >= 0");
}

OperatorSpec OperatorSpec::with_epsilon(double eps) const {
    OperatorSpec out = *this;
    out.epsilon = eps;
    return out;
}

OperatorSpec OperatorSpec::with_c(ScalarFn new_c) const {
    OperatorSpec out = *this;
    out.c = std::move(new_c);
    return out;
}

double fd_step(const Eigen::VectorXd& x) {
    return 1e-5 * (1.0 + x.norm());
}

Eigen::MatrixXd VectorFieldSet::rows(const Eigen::VectorXd& x) const {
    return spec.eval_a(x);
}

Eigen::VectorXd VectorFieldSet::grad_log_v(const Eigen::VectorXd& x) const {
    const int n = spec.dim;
    if (spec.grad_v) {
        return (*spec.grad_v)(x) / spec.eval_v(x);
    }
    double h = fd_step(x);
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (spec.eval_v(xp) - spec.eval_v(xm)) / (2.0 * h);
    }
    return g / spec.eval_v(x);
}

Eigen::VectorXd VectorFieldSet::x0(const Eigen::VectorXd& x) const {
    Eigen::VectorXd glv = grad_log_v(x);
    Eigen::MatrixXd A = spec.eval_a(x);
    // X_0 = sum_i (d_i V / V) X_i with X_i = row i of a.
    return A.transpose() * glv;
}

Eigen::VectorXd VectorFieldSet::field(const Eigen::VectorXd& x, int i) const {
    if (i == 0) return x0(x);
    return spec.eval_a(x).row(i - 1).transpose();
}

Eigen::VectorXd VectorFieldSet::b(const Eigen::VectorXd& x) const {
    const int n = spec.dim;
    double vx = spec.eval_v(x);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (spec.grad_a && spec.grad_v) {
        std::vector<Eigen::MatrixXd> dA = (*spec.grad_a)(x);
        Eigen::VectorXd gv = (*spec.grad_v)(x);
        Eigen::MatrixXd A = spec.eval_a(x);
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += gv[i] * A(i, j) + vx * dA[i](i, j);
            out[j] = s / vx;
        }
        return out;
    }
    double h = fd_step(x);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            double gp = spec.eval_v(xp) * spec.eval_a(xp)(i, j);
            double gm = spec.eval_v(xm) * spec.eval_a(xm)(i, j);
            s += (gp - gm) / (2.0 * h);
        }
        out[j] = s / vx;
    }
    return out;
}

double VectorFieldSet::span_residual(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd A = spec.eval_a(x);
    Eigen::VectorXd drift = x0(x);
    Eigen::VectorXd coef =
        A.transpose().completeOrthogonalDecomposition().solve(drift);
    double res = (A.transpose() * coef - drift).norm();
    return res / (1.0 + drift.norm());
}

VectorFieldSet extract_fields(const OperatorSpec& spec) {
    return VectorFieldSet{spec};
}

namespace {

// Halton sequence (bases 2,3,5,...) with a seed-derived offset; deterministic
// low-discrepancy samples for check_ntd.
double halton(long index, int base) {
    double f = 1.0, r = 0.0;
    long i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

}  // namespace

NtdReport check_ntd(const OperatorSpec& spec, const Box& region, long samples,
                    std::uint64_t seed) {
    if (samples < 1) throw PreconditionViolated("check_ntd requires samples >= 1");
    const int n = spec.dim;
    NtdReport report;
    report.samples = samples;
    report.seed = seed;
    report.min_trace = std::numeric_limits<double>::infinity();
    long offset = static_cast<long>(seed % 100003);
    Eigen::VectorXd x(n);
    for (long s = 0; s < samples; ++s) {
        for (int d = 0; d < n; ++d) {
            double t = halton(offset + 1 + s, kPrimes[d % 8]);
            x[d] = region.lo[d] + t * (region.hi[d] - region.lo[d]);
        }
        double tr = spec.eval_a(x).trace();
        if (tr < report.min_trace) {
            report.min_trace = tr;
            report.argmin = x;
        }
    }
    report.pass = report.min_trace > 0.0;
    return report;
}

TangentialityCertificate tangentiality_bound(const OperatorSpec& spec, const Eigen::VectorXd& x,
                                             long samples, std::uint64_t seed) {
    const int n = spec.dim;
    Eigen::MatrixXd A = spec.eval_a(x);
    if (A.trace() <= 0.0)
        throw TotallyDegeneratePoint("A(x) vanishes at " + point_str(x));
    TangentialityCertificate cert;
    cert.samples = samples;
    cert.lambda = Eigen::VectorXd(n);
    cert.max_ratio = Eigen::VectorXd::Zero(n);
    // Cauchy-Schwarz on the PSD form: <A e_i, nu>^2 <= a_ii <A nu, nu>,
    // sharp, so lambda_i = a_ii; rows with a_ii = 0 vanish identically.
    for (int i = 0; i < n; ++i) cert.lambda[i] = A(i, i) > 0.0 ? A(i, i) : 1.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long s = 0; s < samples; ++s) {
        Eigen::VectorXd nu(n);
        for (int d = 0; d < n; ++d) nu[d] = normal(rng);
        double len = nu.norm();
        if (len == 0.0) continue;
        nu /= len;
        double quad = nu.dot(A * nu);
        if (quad <= 0.0) continue;
        Eigen::VectorXd anu = A * nu;
        for (int i = 0; i < n; ++i) {
            double ratio = anu[i] * anu[i] / quad;
            if (ratio > cert.max_ratio[i]) cert.max_ratio[i] = ratio;
        }
    }
    cert.pass = true;
    for (int i = 0; i < n; ++i)
        cert.pass = cert.pass && cert.max_ratio[i] <= cert.lambda[i] * (1.0 + 1e-12) + 1e-300;
    return cert;
}

namespace {

OperatorSpec make_laplace(int dim) {
    OperatorSpec spec;
    spec.dim = dim;
    spec.a = [dim](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(dim, dim); };
    spec.v = [](const Eigen::VectorXd&) { return 1.0; };
    spec.c = [](const Eigen::VectorXd&) { return 0.0; };
    spec.grad_v = [dim](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dim); };
    spec.grad_a = [dim](const Eigen::VectorXd&) {
        return std::vector<Eigen::MatrixXd>(dim, Eigen::MatrixXd::Zero(dim, dim));
    };
    spec.hypo_tag = HypoTag::Certified;
    spec.name = "laplace";
    return spec;
}

// Default profile a(x1) = exp(-1/x1^2), extended by 0 at x1 = 0 (the unique
// smooth extension); derivative 2/x1^3 * a, also 0 at the origin.
double fedii_profile(double t) {
    if (t == 0.0) return 0.0;
    return std::exp(-1.0 / (t * t));
}

double fedii_profile_deriv(double t) {
    if (t == 0.0) return 0.0;
    double a = fedii_profile(t);
    return a == 0.0 ? 0.0 : a * 2.0 / (t * t * t);
}

void validate_profile(const std::function<double(double)>& prof, const std::string& text) {
    // even, nonnegative, nondecreasing on [0, inf), vanishing only at 0 --
    // checked on a sample grid.
    double prev = -1.0;
    for (int k = 0; k <= 300; ++k) {
        double t = 3.0 * k / 300.0;
        double at = prof(t);
        if (!std::isfinite(at) || at < 0.0)
            throw InvalidProfile("profile '" + text + "' negative or non-finite at " +
                                 std::to_string(t));
        if (at < prev - 1e-12 * (1.0 + std::abs(prev)))
            throw InvalidProfile("profile '" + text + "' not nondecreasing near " +
                                 std::to_string(t));
        double am = prof(-t);
        if (std::abs(am - at) > 1e-12 * (1.0 + std::abs(at)))
            throw InvalidProfile("profile '" + text + "' not even at " + std::to_string(t));
        prev = at;
    }
}

OperatorSpec make_grushin_fedii(const std::map<std::string, std::string>& params) {
    OperatorSpec spec;
    spec.dim = 2;
    auto it = params.find("a");
    if (it == params.end()) {
        spec.a = [](const Eigen::VectorXd& x) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
            m(0, 0) = 1.0;
            double a = fedii_profile(x[0]);
            m(1, 1) = a * a;
            return m;
        };
        spec.grad_a = [](const Eigen::VectorXd& x) {
            std::vector<Eigen::MatrixXd> d(2, Eigen::MatrixXd::Zero(2, 2));
            d[0](1, 1) = 2.0 * fedii_profile(x[0]) * fedii_profile_deriv(x[0]);
            return d;
        };
    } else {
        Expr prof = Expr::parse(it->second, 1);
        auto prof_fn = [prof](double t) {
            double arg[1] = {t};
            return prof.eval(arg);
        };
        validate_profile(prof_fn, it->second);
        spec.a = [prof_fn](const Eigen::VectorXd& x) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
            m(0, 0) = 1.0;
            double a = prof_fn(x[0]);
            m(1, 1) = a * a;
            return m;
        };
    }
    spec.v = [](const Eigen::VectorXd&) { return 1.0; };
    spec.c = [](const Eigen::VectorXd&) { return 0.0; };
    spec.grad_v = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(2); };
    spec.hypo_tag = HypoTag::Certified;
    spec.name = "grushin_fedii";
    return spec;
}

OperatorSpec make_lie2d() {
    OperatorSpec spec;
    spec.dim = 2;
    spec.a = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
        m(0, 0) = std::exp(2.0 * x[1]);
        m(1, 1) = 1.0;
        return m;
    };
    spec.v = [](const Eigen::VectorXd& x) { return std::exp(-x[1]); };
    spec.c = [](const Eigen::VectorXd&) { return 0.0; };
    spec.grad_v = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(2);
        g[1] = -std::exp(-x[1]);
        return g;
    };
    spec.grad_a = [](const Eigen::VectorXd& x) {
        std::vector<Eigen::MatrixXd> d(2, Eigen::MatrixXd::Zero(2, 2));
        d[1](0, 0) = 2.0 * std::exp(2.0 * x[1]);
        return d;
    };
    spec.hypo_tag = HypoTag::Certified;
    spec.name = "lie2d";
    return spec;
}

double exp_inv_pow(double t, double power) {
    // exp(-1/|t|^power), extended by 0 at t = 0.
    if (t == 0.0) return 0.0;
    return std::exp(-1.0 / std::pow(std::abs(t), power));
}

double exp_inv_pow_deriv(double t, double power) {
    if (t == 0.0) return 0.0;
    double a = exp_inv_pow(t, power);
    if (a == 0.0) return 0.0;
    double s = t > 0.0 ? 1.0 : -1.0;
    return a * power * s / std::pow(std::abs(t), power + 1.0);
}

OperatorSpec make_christ3d() {
    OperatorSpec spec;
    spec.dim = 3;
    spec.a = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
        m(0, 0) = 1.0;
        double lam = exp_inv_pow(x[0], 1.0);
        m(1, 1) = lam * lam;
        m(2, 2) = lam * lam;
        return m;
    };
    spec.v = [](const Eigen::VectorXd&) { return 1.0; };
    spec.c = [](const Eigen::VectorXd&) { return 0.0; };
    spec.grad_v = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(3); };
    spec.grad_a = [](const Eigen::VectorXd& x) {
        std::vector<Eigen::MatrixXd> d(3, Eigen::MatrixXd::Zero(3, 3));
        double lam = exp_inv_pow(x[0], 1.0);
        double dlam = exp_inv_pow_deriv(x[0], 1.0);
        d[0](1, 1) = 2.0 * lam * dlam;
        d[0](2, 2) = 2.0 * lam * dlam;
        return d;
    };
    spec.hypo_tag = HypoTag::Certified;
    spec.name = "christ3d";
    return spec;
}

OperatorSpec make_kusuoka_stroock3d() {
    OperatorSpec spec;
    spec.dim = 3;
    spec.a = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
        m(0, 0) = 1.0;
        double lam = exp_inv_pow(x[0], 0.5);
        m(1, 1) = lam * lam;
        m(2, 2) = 1.0;
        return m;
    };
    spec.v = [](const Eigen::VectorXd&) { return 1.0; };
    spec.c = [](const Eigen::VectorXd&) { return 0.0; };
    spec.grad_v = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(3); };
    spec.grad_a = [](const Eigen::VectorXd& x) {
        std::vector<Eigen::MatrixXd> d(3, Eigen::MatrixXd::Zero(3, 3));
        double lam = exp_inv_pow(x[0], 0.5);
        double dlam = exp_inv_pow_deriv(x[0], 0.5);
        d[0](1, 1) = 2.0 * lam * dlam;
        return d;
    };
    spec.hypo_tag = HypoTag::Certified;
    spec.name = "kusuoka_stroock3d";
    return spec;
}

OperatorSpec make_morimoto4d() {
    // d_2^2 + (x2 d_1)^2 + d_4^2 + (exp(-1/|x1|^(1/3)) d_3)^2 in R^4.
    OperatorSpec spec;
    spec.dim = 4;
    spec.a = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
        m(0, 0) = x[1] * x[1];
        m(1, 1) = 1.0;
        double lam = exp_inv_pow(x[0], 1.0 / 3.0);
        m(2, 2) = lam * lam;
        m(3, 3) = 1.0;
        return m;
    };
    spec.v = [](const Eigen::VectorXd&) { return 1.0; };
    spec.c = [](const Eigen::VectorXd&) { return 0.0; };
    spec.grad_v = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(4); };
    spec.grad_a = [](const Eigen::VectorXd& x) {
        std::vector<Eigen::MatrixXd> d(4, Eigen::MatrixXd::Zero(4, 4));
        double lam = exp_inv_pow(x[0], 1.0 / 3.0);
        double dlam = exp_inv_pow_deriv(x[0], 1.0 / 3.0);
        d[0](2, 2) = 2.0 * lam * dlam;
        d[1](0, 0) = 2.0 * x[1];
        return d;
    };
    spec.hypo_tag = HypoTag::Certified;
    spec.name = "morimoto4d";
    return spec;
}

}  // namespace

OperatorSpec gallery(const std::string& name, const std::map<std::string, std::string>& params) {
    if (name == "laplace") {
        int dim = 2;
        auto it = params.find("dim");
        if (it != params.end()) dim = std::stoi(it->second);
        if (dim < 1 || dim > 8) throw InvalidProfile("laplace: dim out of range");
        return make_laplace(dim);
    }
    if (name == "grushin_fedii") return make_grushin_fedii(params);
    if (name == "lie2d") return make_lie2d();
    if (name == "christ3d") return make_christ3d();
    if (name == "kusuoka_stroock3d") return make_kusuoka_stroock3d();
    if (name == "morimoto4d") return make_morimoto4d();
    throw UnknownGallery("no gallery operator named '" + name + "'");
}

std::vector<std::string> gallery_names() {
    return {"laplace", "grushin_fedii", "lie2d", "christ3d", "kusuoka_stroock3d", "morimoto4d"};
}

}  // namespace hypolab
