#ifndef EMX_LM_HPP
#define EMX_LM_HPP

#include <Eigen/Dense>

#include <functional>
#include <optional>

namespace emx
{

// Damped least squares with Marquardt diagonal scaling.
//
// The residual function returns already-weighted residuals r(p); the
// optimiser minimises |r|^2. If no Jacobian is supplied it is built by central
// differences with a step of fd_relative_step * max(|p_j|, scale_j).
struct LmOptions
{
    int max_iterations = 200;
    double fd_relative_step = 1e-6;
    double gradient_tol = 1e-12;
    double step_tol = 1e-12;
    double cost_tol = 1e-14;
    // Covariance is multiplied by chi2/dof when true (noise level unknown).
    bool scale_covariance = true;
};

enum class LmStatus
{
    Converged,
    MaxIterations,
    Failed,
};

struct LmResult
{
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd residuals;
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    LmStatus status = LmStatus::Failed;

    double stderr_of(Eigen::Index i) const;
    double reduced_chi2() const { return dof > 0 ? chi2 / dof : 0.0; }
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd &)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd &)>;

Eigen::MatrixXd numeric_jacobian(const ResidualFn &f, const Eigen::VectorXd &p,
                                 const Eigen::VectorXd &scale, double rel_step);

LmResult levenberg_marquardt(const ResidualFn &f, const Eigen::VectorXd &p0,
                             const std::optional<JacobianFn> &jac = std::nullopt,
                             const LmOptions &opts = {});

} // namespace emx

#endif // EMX_LM_HPP
