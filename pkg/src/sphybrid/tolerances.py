"""Numerical tolerances and tuning defaults shared by every module.

Everything that decides a predicate (Hurwitz, Schur, singular, ...) or
stops an iteration reads its threshold from here, so one table controls
the behaviour of the whole package.
"""

# linalg
HURWITZ_MARGIN = 1e-12  # max Re(eig) must be < -HURWITZ_MARGIN
SCHUR_MARGIN = 1e-12  # spectral radius must be < 1 - SCHUR_MARGIN
SYMMETRY_RTOL = 1e-12
LYAPUNOV_RESIDUAL_RTOL = 1e-10
SQRT_RESIDUAL_RTOL = 1e-10
EIG_MAX_ITER = 10_000

# decouple
A22_RELATIVE_DET = 1e-12  # |det| / prod(row norms) below this => singular
BLOCK_IDENTITY_ATOL = 1e-12

# certify
KAPPA = 0.9  # fraction of the spectral abscissa used as decay rate
EPS2_FRACTION = 0.99  # eps2 = min(eps1, EPS2_FRACTION * lambda_f / lambda_s)
Q_MIN_EIG_TOL = 1e-12  # Q >= I checked as min eig >= 1 - Q_MIN_EIG_TOL
LYAPUNOV_INEQUALITY_TOL = 1e-10
GAMMA_ONE_BAND = 1e-12  # |gamma11 - 1| <= band is treated as gamma11 == 1
GAMMA_ZERO = 1e-12  # gamma12 <= this is treated as zero
GOLDEN_ITERS = 60
A_SEARCH_MARGIN = 1e-6  # keep the a-parameter this far (relative) inside open bounds
BISECTION_RTOL = 1e-12  # final bracket width relative to max(1, tau)
WITNESS_STEP = 1e-9  # certificates are checked at tau + WITNESS_STEP
BOUND_ORDER_TOL = 1e-9  # tau_bisection <= tau_closed_form + BOUND_ORDER_TOL

# simulate
OVERFLOW_MAGNITUDE = 1e300
DIVERGENCE_FACTOR = 1e6
CONVERGENCE_DELTA = 1e-3
TAIL_FRACTION = 0.1
SUBSTEP_SLACK = 1e-9  # an interval shorter than (1 + slack) * sample_dt is one step
DEFAULT_HORIZON = 10.0
HORIZON_PER_RATE = 50.0  # default horizon is HORIZON_PER_RATE / lambda_s

# model
AUGMENT_RATE_FACTOR = 10.0
