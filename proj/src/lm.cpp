#include "emx/lm.hpp"

#include <algorithm>
#include <cmath>

namespace emx
{

double LmResult::stderr_of(Eigen::Index i) const
{
    const double v = covariance(i, i);
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

Eigen::MatrixXd numeric_jacobian(const ResidualFn &f, const Eigen::VectorXd &p,
                                 const Eigen::VectorXd &scale, double rel_step)
{
    const Eigen::Index n = p.size();
    Eigen::MatrixXd jac;
    Eigen::VectorXd q = p;
    for (Eigen::Index j = 0; j < n; ++j)
    {
        const double h = rel_step * std::max(std::abs(p[j]), scale[j]);
        q[j] = p[j] + h;
        const Eigen::VectorXd fp = f(q);
        q[j] = p[j] - h;
        const Eigen::VectorXd fm = f(q);
        q[j] = p[j];
        if (j == 0)
            jac.resize(fp.size(), n);
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

LmResult levenberg_marquardt(const ResidualFn &f, const Eigen::VectorXd &p0,
                             const std::optional<JacobianFn> &jac, const LmOptions &opts)
{
    const Eigen::Index n = p0.size();
    Eigen::VectorXd scale = p0.cwiseAbs();
    for (Eigen::Index j = 0; j < n; ++j)
        if (scale[j] == 0.0)
            scale[j] = 1.0;

    auto jacobian = [&](const Eigen::VectorXd &p) -> Eigen::MatrixXd {
        if (jac)
            return (*jac)(p);
        return numeric_jacobian(f, p, scale, opts.fd_relative_step);
    };

    LmResult res;
    res.params = p0;
    Eigen::VectorXd r = f(p0);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost))
    {
        res.status = LmStatus::Failed;
        res.residuals = r;
        return res;
    }

    Eigen::MatrixXd J = jacobian(res.params);
    Eigen::MatrixXd A = J.transpose() * J;
    Eigen::VectorXd g = J.transpose() * r;
    Eigen::VectorXd diag = A.diagonal().cwiseMax(1e-300);
    double lambda = 1e-3;
    double nu = 2.0;
    res.status = LmStatus::MaxIterations;

    int it = 0;
    for (; it < opts.max_iterations; ++it)
    {
        if (g.cwiseAbs().maxCoeff() <= opts.gradient_tol * std::max(cost, 1e-300))
        {
            res.status = LmStatus::Converged;
            break;
        }
        diag = diag.cwiseMax(A.diagonal());
        Eigen::MatrixXd M = A;
        M.diagonal() += lambda * diag;
        const Eigen::VectorXd h = M.ldlt().solve(-g);
        if (!h.allFinite())
        {
            lambda *= nu;
            nu *= 2.0;
            continue;
        }
        const Eigen::VectorXd p_new = res.params + h;
        const Eigen::VectorXd r_new = f(p_new);
        const double cost_new = r_new.squaredNorm();
        const double predicted = -(2.0 * h.dot(g) + h.dot(A * h));
        const double rho = std::isfinite(cost_new) && predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;

        if (rho > 0.0)
        {
            const double rel_drop = (cost - cost_new) / std::max(cost, 1e-300);
            const double step_norm = h.cwiseQuotient(scale).norm();
            res.params = p_new;
            r = r_new;
            cost = cost_new;
            J = jacobian(res.params);
            A = J.transpose() * J;
            g = J.transpose() * r;
            lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
            if (rel_drop < opts.cost_tol || step_norm < opts.step_tol)
            {
                res.status = LmStatus::Converged;
                ++it;
                break;
            }
        }
        else
        {
            lambda *= nu;
            nu *= 2.0;
            if (lambda > 1e16)
            {
                // No downhill step at any damping: already at a minimum to
                // working precision.
                res.status = LmStatus::Converged;
                ++it;
                break;
            }
        }
    }

    res.iterations = it;
    res.residuals = r;
    res.chi2 = cost;
    res.dof = static_cast<int>(r.size() - n);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    res.covariance = cod.pseudoInverse();
    if (opts.scale_covariance && res.dof > 0)
        res.covariance *= cost / res.dof;
    return res;
}

} // namespace emx
