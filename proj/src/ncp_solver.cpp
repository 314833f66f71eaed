#include "ftraffic/ncp_solver.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ftraffic {

double fb_phi(double a, double b) noexcept {
    return std::hypot(a, b) - (a + b);
}

std::pair<double, double> fb_subgradient(double a, double b) noexcept {
    const double r = std::hypot(a, b);
    if (r == 0.0) {
        constexpr double e = std::numbers::sqrt2 / 2.0 - 1.0;
        return {e, e};
    }
    return {a / r - 1.0, b / r - 1.0};
}

Vector evaluate_map(const NcpProblem& problem, const Vector& x) {
    if (x.size() != problem.n) throw DomainError("NCP point has wrong dimension");
    Vector f = problem.F(x);
    if (f.size() != problem.n) throw DomainError("NCP map returned wrong dimension");
    if (!f.allFinite()) throw DomainError("NCP map is not finite at the current point");
    return f;
}

Matrix evaluate_jacobian(const NcpProblem& problem, const Vector& x) {
    if (problem.jacobian) {
        Matrix j = problem.jacobian(x);
        if (j.rows() != problem.n || j.cols() != problem.n) {
            throw DomainError("NCP Jacobian has wrong shape");
        }
        if (!j.allFinite()) throw DomainError("NCP Jacobian is not finite");
        return j;
    }
    Matrix j(problem.n, problem.n);
    for (int k = 0; k < problem.n; ++k) {
        const double h = 1e-7 * std::max(1.0, std::abs(x[k]));
        Vector xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        j.col(k) = (evaluate_map(problem, xp) - evaluate_map(problem, xm)) / (2.0 * h);
    }
    return j;
}

namespace {

Vector fb_of(const Vector& x, const Vector& f) {
    Vector phi(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) phi[i] = fb_phi(x[i], f[i]);
    return phi;
}

/// H = D_a + D_b J for the chosen Clarke element.
Matrix generalized_jacobian(const Vector& x, const Vector& f, const Matrix& jf) {
    Matrix h = jf;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const auto [da, db] = fb_subgradient(x[i], f[i]);
        h.row(i) *= db;
        h(i, i) += da;
    }
    return h;
}

}  // namespace

Vector fb_system(const Vector& x, const NcpProblem& problem) {
    return fb_of(x, evaluate_map(problem, x));
}

double merit(const Vector& x, const NcpProblem& problem) {
    return 0.5 * fb_system(x, problem).squaredNorm();
}

Vector merit_gradient(const Vector& x, const NcpProblem& problem) {
    const Vector f = evaluate_map(problem, x);
    const Matrix h = generalized_jacobian(x, f, evaluate_jacobian(problem, x));
    return h.transpose() * fb_of(x, f);
}

void SolverConfig::validate() const {
    if (!(tol_merit > 0 && tol_residual > 0 && max_iter > 0 && armijo_sigma > 0 &&
          descent_rho > 0 && descent_p > 0 && min_step > 0)) {
        throw DomainError("solver settings must be positive");
    }
    if (!(armijo_beta > 0 && armijo_beta < 1)) throw DomainError("armijo_beta must lie in (0,1)");
    if (!(armijo_sigma < 1)) throw DomainError("armijo_sigma must lie in (0,1)");
}

const char* to_string(SolveStatus s) noexcept {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

SolveReport solve_ncp(const NcpProblem& problem, const SolverConfig& config,
                      std::optional<Vector> x0) {
    config.validate();
    if (problem.n < 1 || !problem.F) throw DomainError("NCP problem is empty");
    Vector x = x0.value_or(Vector::Ones(problem.n));
    if (x.size() != problem.n || !x.allFinite()) throw DomainError("invalid NCP starting point");

    SolveReport report;
    Vector f = evaluate_map(problem, x);
    Vector phi = fb_of(x, f);
    double g = 0.5 * phi.squaredNorm();
    report.merit_history.push_back(g);
    report.status = SolveStatus::max_iter;

    for (int iter = 0;; ++iter) {
        if (phi.cwiseAbs().maxCoeff() <= config.tol_residual) {
            report.status = SolveStatus::converged;
            break;
        }
        if (iter == config.max_iter) break;

        const Matrix h = generalized_jacobian(x, f, evaluate_jacobian(problem, x));
        const Vector grad = h.transpose() * phi;

        Vector d;
        bool newton_ok = false;
        {
            Eigen::PartialPivLU<Matrix> lu(h);
            if (lu.rcond() > 1e-14) {
                d = lu.solve(-phi);
                newton_ok = d.allFinite() &&
                            d.dot(grad) <= -config.descent_rho * std::pow(d.norm(), config.descent_p);
            }
        }
        if (!newton_ok) {
            d = -grad;
            ++report.gradient_steps;
        }
        const double slope = grad.dot(d);
        if (!(d.norm() > 0.0) || !(slope < 0.0)) {
            report.status = g <= config.tol_merit ? SolveStatus::converged
                                                  : SolveStatus::line_search_failure;
            break;
        }

        bool accepted = false;
        for (double t = 1.0; t >= config.min_step; t *= config.armijo_beta) {
            const Vector xn = x + t * d;
            Vector fn;
            try {
                fn = evaluate_map(problem, xn);
            } catch (const DomainError&) {
                continue;
            }
            const Vector phin = fb_of(xn, fn);
            const double gn = 0.5 * phin.squaredNorm();
            if (gn <= g + config.armijo_sigma * t * slope) {
                x = xn;
                f = std::move(fn);
                phi = phin;
                g = gn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            report.status = g <= config.tol_merit ? SolveStatus::converged
                                                  : SolveStatus::line_search_failure;
            break;
        }
        ++report.iterations;
        report.merit_history.push_back(g);
    }

    report.x_star = x;
    report.merit = g;
    report.residual = phi.cwiseAbs().maxCoeff();
    return report;
}

}  // namespace ftraffic
