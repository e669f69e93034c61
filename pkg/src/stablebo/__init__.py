"""Stability-aware Bayesian optimisation toolkit.

Finds maxima of expensive black-box functions while steering away from
regions where small input perturbations cause large output variation.  The
core pieces are a gradient Gaussian-process model, Monte-Carlo stability
scores derived from it, and stability-weighted acquisition functions (EISG
and UCBSG) wired into an ask-tell optimisation loop.
"""

from .mathcore import (
    DomainError,
    TruncGainMoments,
    hermite_term_count,
    lambert_w0,
    std_normal_cdf,
    std_normal_pdf,
    trunc_gain_moments,
)
from .kernels import (
    DerivTensor,
    KernelConstants,
    KernelSpec,
    KernelVerdict,
    UnsupportedKernelError,
    estimate_delta,
    estimate_delta_r,
    kappa,
    kappa_deriv,
    kernel_constants,
    kernel_eval,
    kron_deriv,
    validate_kernel,
)
from .gp import (
    Dataset,
    FitError,
    GradPosterior,
    GradientGP,
    Posterior,
    fit,
    grad_posterior,
    predict,
    predict_batch,
    sample_grad,
)
from .stability import (
    BoundReport,
    PerturbationTooLargeError,
    StabilityParams,
    ab_stability_oracle,
    bound_D,
    bound_F,
    min_order,
    remainder_bound,
    select_params,
    stability_score,
    stability_score_q,
)
from .acquisition import (
    AcqSpec,
    ScoredDataset,
    acq_ei,
    acq_eisg,
    acq_ucb,
    acq_ucbsg,
    expected_stable_gain,
    gain,
    srinivas_beta,
)
from .optimizer import (
    AskTellState,
    OptConfig,
    ProtocolError,
    TraceRow,
    new_state,
    plan,
    recommend,
    run,
    suggest,
    tell,
    trace_to_csv,
)
from .bench import (
    ExperimentConfig,
    run_experiment,
    stability_map,
    synthetic_config,
    synthetic_objective,
)

__version__ = "0.1.0"
