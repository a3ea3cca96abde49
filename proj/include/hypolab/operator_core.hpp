#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hypolab {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
/// Returns the N matrices dA/dx_k, k = 0..N-1.
using MatGradFn = std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)>;

enum class HypoTag { Certified, AssertedByUser };

/// Divergence-form operator  L = (1/V) sum_ij d_i (V a_ij d_j)  together with
/// the zero-order term c and the spectral shift: the artifact assembles and
/// solves L_eps = L - c - eps.
struct OperatorSpec {
    int dim = 0;
    MatrixFn a;    // x -> symmetric PSD N x N
    ScalarFn v;    // x -> positive density of nu
    ScalarFn c;    // zero-order term, >= 0 where used
    double epsilon = 0.0;
    std::optional<GradFn> grad_v;
    std::optional<MatGradFn> grad_a;
    HypoTag hypo_tag = HypoTag::AssertedByUser;
    std::string name = "user";

    Eigen::MatrixXd eval_a(const Eigen::VectorXd& x) const;
    double eval_v(const Eigen::VectorXd& x) const;
    double eval_c(const Eigen::VectorXd& x) const;

    /// Asserts a(x) symmetric (1e-12 relative), PSD (smallest eigenvalue
    /// >= -1e-10*(1+trace)) and v(x) > 0; throws CoefficientError otherwise.
    void validate_at(const Eigen::VectorXd& x) const;

    OperatorSpec with_epsilon(double eps) const;
    OperatorSpec with_c(ScalarFn new_c) const;
};

/// The fields X_i = row i of a(x) and the drift X_0 = sum_i (d_i V / V) X_i.
/// b holds the first-order coefficients of the expanded non-divergence form,
/// b_j = (1/V) sum_i d_i(V a_ij).
struct VectorFieldSet {
    OperatorSpec spec;

    Eigen::MatrixXd rows(const Eigen::VectorXd& x) const;   // row i = X_i(x)
    Eigen::VectorXd field(const Eigen::VectorXd& x, int i) const;  // X_i, i>=1; i==0 -> drift
    Eigen::VectorXd x0(const Eigen::VectorXd& x) const;
    Eigen::VectorXd b(const Eigen::VectorXd& x) const;
    Eigen::VectorXd grad_log_v(const Eigen::VectorXd& x) const;
    /// Least-squares residual of X_0 against the rows of a, relative to 1+|X_0|.
    double span_residual(const Eigen::VectorXd& x) const;
};

VectorFieldSet extract_fields(const OperatorSpec& spec);

/// Centered finite-difference step used whenever analytic gradients are absent.
double fd_step(const Eigen::VectorXd& x);

struct Box {
    Eigen::VectorXd lo, hi;
};

struct NtdReport {
    bool pass = false;
    double min_trace = 0.0;
    Eigen::VectorXd argmin;
    long samples = 0;
    std::uint64_t seed = 0;
};

/// Samples trace(A(x)) over the box with a seeded low-discrepancy sequence.
NtdReport check_ntd(const OperatorSpec& spec, const Box& region, long samples,
                    std::uint64_t seed = 0x5EED);

struct TangentialityCertificate {
    Eigen::VectorXd lambda;     // per-i constants, lambda_i(x)
    Eigen::VectorXd max_ratio;  // max over sampled unit nu of <X_i,nu>^2 / <A nu,nu>
    long samples = 0;
    bool pass = false;
};

/// Certifies <X_i(x),nu>^2 <= lambda_i(x) <A(x)nu,nu> with lambda_i = a_ii
/// (the sharp Cauchy-Schwarz constant); ratios checked on seeded unit vectors.
TangentialityCertificate tangentiality_bound(const OperatorSpec& spec, const Eigen::VectorXd& x,
                                             long samples = 100, std::uint64_t seed = 0x5EED);

/// Gallery of certified-hypoelliptic operators. Names: laplace, grushin_fedii,
/// lie2d, christ3d, kusuoka_stroock3d, morimoto4d. Params (as strings):
///   laplace:        dim (default 2)
///   grushin_fedii:  a = profile expression in x1 (default exp(-1/(x1*x1)))
OperatorSpec gallery(const std::string& name,
                     const std::map<std::string, std::string>& params = {});

std::vector<std::string> gallery_names();

}  // namespace hypolab
