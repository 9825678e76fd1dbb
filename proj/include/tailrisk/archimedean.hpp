#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "tailrisk/rng.hpp"

namespace tailrisk {

enum class GeneratorFamily { gumbel, clayton, frank, joe };

const char* family_name(GeneratorFamily f);
GeneratorFamily family_from_name(const std::string& name);

// One-parameter Archimedean generator. theta is restricted to the
// nesting-compatible range of each family (Gumbel/Joe >= 1, Clayton/Frank > 0)
// so that the frailty construction and HAC nesting stay valid.
//
// Two conventions coexist in the copula literature and both are exposed here
// under unambiguous names:
//   psi / psi_inverse        decreasing generator with psi(1) = 0, used by the
//                            CDF combiner C(u) = psi_inverse(sum psi(u_i)).
//   frailty_laplace / _inverse  the completely monotone Laplace transform of
//                            the frailty variable V, used by the samplers.
// They coincide up to an equivalence scaling of the generator (for Clayton the
// frailty form drops the 1/theta scale); both generate the same copula.
struct ArchimedeanGenerator {
    GeneratorFamily family = GeneratorFamily::gumbel;
    double theta = 1.0;

    void validate() const;  // throws std::domain_error on out-of-range theta
};

double psi(const ArchimedeanGenerator& gen, double t);          // t in (0,1]
double psi_inverse(const ArchimedeanGenerator& gen, double s);  // s >= 0
double psi_prime(const ArchimedeanGenerator& gen, double t);

double frailty_laplace(const ArchimedeanGenerator& gen, double t);
double frailty_laplace_inverse(const ArchimedeanGenerator& gen, double u);

// C(u_1..u_d) = psi_inverse(sum_i psi(u_i)), d >= 2, u_i in (0,1].
double ac_cdf(const ArchimedeanGenerator& gen, const Eigen::Ref<const Eigen::VectorXd>& u);

// d2C/du dv on the open unit square.
double ac_bivariate_density(const ArchimedeanGenerator& gen, double u, double v);

// Kendall's tau of the copula. Gumbel and Clayton are closed form, Frank goes
// through the Debye-1 function, Joe through adaptive quadrature of the
// generator identity tau = 1 + 4 int_0^1 psi(t)/psi'(t) dt.
double tau_from_theta(const ArchimedeanGenerator& gen);

// The generator-identity quadrature for any family; independent cross-check
// of the closed forms.
double tau_eq_quadrature(const ArchimedeanGenerator& gen);

// Inverse of tau_from_theta on the attainable range tau in (0,1).
// Throws std::range_error for unattainable tau.
double theta_from_tau(GeneratorFamily family, double tau);

// Monte Carlo estimate 4 E[C(U,V)] - 1 from n pairs sampled off the copula.
double tau_monte_carlo(const ArchimedeanGenerator& gen, int n, std::uint64_t seed);

struct UniformSample {
    Eigen::MatrixXd values;  // n x d, entries strictly in (0,1)

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index d() const { return values.cols(); }
};

// Marshall-Olkin sampling: V from the family frailty law, then
// u_j = frailty_laplace(E_j / V) with iid unit exponentials E_j.
// Row i consumes its own substream of `seed`, so results do not depend on
// evaluation order.
UniformSample sample_ac(const ArchimedeanGenerator& gen, int d, int n, std::uint64_t seed);

// Pairwise Kendall tau-b of two columns, O(n log n) (Knight's algorithm).
// Throws std::invalid_argument if either column is constant.
double kendall_tau(const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y);

// Symmetric matrix of pairwise tau-b values with unit diagonal.
Eigen::MatrixXd empirical_kendall_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace tailrisk
