#pragma once

#include <vector>

#include "kslab/forward.hpp"
#include "kslab/image.hpp"
#include "kslab/sampling.hpp"

namespace kslab {

/** Quadratic MAP objective: data term plus lambda * ||x||^2 ridge. */
struct MapObjective {
    NllConfig data_term;
    double reg_lambda = 1e-3;
    int max_iters = 50;
    double tol = 1e-6;
};

/** Convergence trace of one solve. */
struct CgReport {
    int iterations = 0;
    bool converged = false;
    double initial_residual = 0.0;
    double final_residual = 0.0;
    std::vector<double> residual_norms;  // per iterate, index 0 = initial
    std::vector<double> objectives;      // data term + ridge, recorded at restart boundaries
};

/** Root-sum-of-squares of the per-coil inverse transforms, zeros left in place. */
RealImage zero_filled_rss(const CoilStack& masked_kspace);

/** Coil-combined adjoint reconstruction, identical to adjoint_model. */
ComplexImage zero_filled_sense(const CoilStack& masked_kspace, const CoilStack& sens);

/**
 * Ridge-regularized least-squares reconstruction: solves
 * ((1/sigma^2) A*A + lambda I) x = (1/sigma^2) A* y from the coil-combined
 * adjoint, where A = mask * F * sens, stopping once ||r|| <= tol * ||b||.
 * The Krylov iteration is the minimum residual conjugate-direction variant,
 * so the residual norm never increases; the true residual is recomputed every
 * few steps and the objective is logged at those restart points. Throws
 * divergence_error on non-finite values.
 */
ComplexImage solve_map_cg(const CoilStack& masked_kspace, const CoilStack& sens,
                          const SamplingMask& mask, const MapObjective& obj,
                          CgReport* report = nullptr);

}  // namespace kslab
