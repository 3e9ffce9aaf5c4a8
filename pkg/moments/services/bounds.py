"""
Closed-form sample-complexity bounds for third-moment testing and the
generic learning-tree bound evaluators.

Asymptotic bounds are reported with absolute constant 1 ("up to absolute
constants").
"""

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from experiments.exceptions import DegenerateInstanceError, DomainError, ParameterError, require_probability
from replicas.services.cycle import alpha_omega_modulus_sq
from replicas.services.delta3 import g_poly, r_poly, trace_N_delta3_squared


@dataclass(frozen=True)
class HeisenbergBoundInput:
    """sigma_q >= mu * 1 and tr((Delta^u)^2) for the Heisenberg likelihood bound."""

    mu: float
    delta_sq_trace: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError(f'mu must be positive, got {self.mu}')
        if self.delta_sq_trace < 0:
            raise ParameterError(f'delta_sq_trace must be nonnegative, got {self.delta_sq_trace}')


def _check_n(n):
    if int(n) != n or n < 1:
        raise ParameterError(f'n must be a positive integer, got {n}')
    if n == 1:
        raise DegenerateInstanceError('third-moment bounds are degenerate at n=1 (Delta_3 = 0)')
    return int(n)


def raw_lower_bound(n, lam):
    """min{2^{n/2}, (2^n+1)^2 (2^n+2)^2 / R_n(1-lambda)}; the second branch is +inf when R_n = 0."""
    n = _check_n(n)
    lam = require_probability('lambda', lam)
    dim = 2 ** n
    r = r_poly(n, 1.0 - lam)
    second = math.inf if r <= 0 else (dim + 1) ** 2 * (dim + 2) ** 2 / r
    return min(2 ** (n / 2), second)


def promise_base(a):
    return 16.0 / (1 + 9 * a ** 2 + 6 * a ** 3)


def moment_gap(n, a, mixed_weight=0.0):
    """
    |E_p[tr((D rho)^3)] - E_q[tr((D rho)^3)]| for the ensembles at floor
    weight mixed_weight: (1-w)^3 / 18 * G_n(a) / (4^n (2^n+1) (2^n+2)).
    """
    require_probability('mixed_weight', mixed_weight)
    dim = 2 ** n
    return (1.0 - mixed_weight) ** 3 / 18.0 * g_poly(n, a) / (4 ** n * (dim + 1) * (dim + 2))


def injection_upper_bound(n, lambda_prime, epsilon, delta, mixed_weight=0.0):
    """
    Sample counts for the injected-copy cycle test.

    Returns:
        Dict with 'generic' (|alpha_omega|^{2n} log(1/delta) / epsilon^2),
        'hoeffding' (range-based count for the same estimator), 'promise'
        ((16 / (1+9a^2+6a^3))^{2n} log(1/delta)) and 'gap'
    """
    n = _check_n(n)
    lam = require_probability('lambda_prime', lambda_prime, open_upper=True)
    for name, value in (('epsilon', epsilon), ('delta', delta)):
        if not 0 < value < 1:
            raise ParameterError(f'{name} must lie in (0, 1), got {value}')
    a = 1.0 - lam
    variance_scale = alpha_omega_modulus_sq(a) ** n
    log_term = math.log(1.0 / delta)
    return {
        'generic': variance_scale * log_term / epsilon ** 2,
        'hoeffding': 2.0 * variance_scale * math.log(2.0 / delta) / epsilon ** 2,
        'promise': promise_base(a) ** (2 * n) * log_term,
        'gap': moment_gap(n, a, mixed_weight),
    }


def _threshold_equation(y, x):
    return 6 * y ** 3 + 9 * y ** 2 + 1 - 4 * math.sqrt(1 + 9 * x ** 6 + 6 * x ** 10)


def speedup_threshold_third_moment(lam):
    """
    Largest injection strength lambda' keeping the uploaded protocol ahead:
    solves 6y^3 + 9y^2 + 1 = 4 sqrt(1 + 9x^6 + 6x^10), x = 1 - lambda,
    y = 1 - lambda'.
    """
    lam = float(lam)
    if not 0 < lam < 1:
        raise ParameterError(f'lambda must lie in (0, 1), got {lam}')
    x = 1.0 - lam
    lo, hi = _threshold_equation(0.0, x), _threshold_equation(1.0, x)
    if lo * hi > 0:
        raise DomainError(f'no threshold root in [0, 1] for lambda={lam}')
    y = brentq(_threshold_equation, 0.0, 1.0, args=(x,), xtol=1e-15, rtol=1e-15)
    return 1.0 - y


def third_moment_separation_exponent(lam, lambda_prime):
    """Per-qubit log growth rate of N_raw / N_inj; zero exactly at the threshold."""
    x = 1.0 - require_probability('lambda', lam)
    a = 1.0 - require_probability('lambda_prime', lambda_prime)
    return math.log(16.0 / (1 + 9 * x ** 6 + 6 * x ** 10)) - 2.0 * math.log(promise_base(a))


def speedup_ratio(n, lam, lambda_prime):
    """Raw second-branch lower bound divided by the promise-problem injected count."""
    n = _check_n(n)
    dim = 2 ** n
    r = r_poly(n, 1.0 - require_probability('lambda', lam))
    if r <= 0:
        return math.inf
    raw = (dim + 1) ** 2 * (dim + 2) ** 2 / r
    a = 1.0 - require_probability('lambda_prime', lambda_prime)
    return raw / promise_base(a) ** (2 * n)


def learning_tree_bounds(bound_input, target_tv):
    """
    delta = tr((Delta^u)^2) / mu and the depth below which a learning tree
    cannot reach total variation target_tv, from d_TV <= (e^{delta T} - 1) / 2.
    """
    if target_tv < 0:
        raise ParameterError(f'target_tv must be nonnegative, got {target_tv}')
    delta = bound_input.delta_sq_trace / bound_input.mu
    if target_tv == 0:
        return delta, 0.0
    if delta == 0:
        return delta, math.inf
    return delta, math.log(1.0 + 2.0 * target_tv) / delta


def le_cam_success_bound(tv):
    """Best success probability of a two-hypothesis test: 1/2 + d_TV / 2."""
    if not 0 <= tv <= 1:
        raise ParameterError(f'total variation must lie in [0, 1], got {tv}')
    return 0.5 + tv / 2.0


def martingale_tv_bound(delta, depth):
    return 0.5 * math.expm1(delta * depth)


def martingale_tv_bound_pinsker(delta, depth):
    return math.sqrt(0.5 * ((1.0 + delta) ** depth - 1.0))


def third_moment_heisenberg_input(n, lam):
    """mu = 1 / (8 * 2^{3n}) and tr(N(Delta_3)^2) / 18^2 for the third-moment instance."""
    n = _check_n(n)
    return HeisenbergBoundInput(mu=1.0 / (8 * 2 ** (3 * n)), delta_sq_trace=trace_N_delta3_squared(n, lam) / 18 ** 2)


def tv_aggregation_penalty(depth, n):
    if depth < 1:
        raise ParameterError(f'depth must be >= 1, got {depth}')
    u = 1.5 * depth
    return 2.0 * (u ** 2 + u) / 2 ** n


def aggregated_depth(n, lam, target_tv):
    """
    Smallest depth T at which the martingale bound plus the aggregation
    penalty can reach target_tv.
    """
    if not 0 <= target_tv <= 1:
        raise ParameterError(f'target_tv must lie in [0, 1], got {target_tv}')
    if target_tv == 0:
        return 0.0
    bound_input = third_moment_heisenberg_input(n, lam)
    delta, martingale_depth = learning_tree_bounds(bound_input, target_tv)
    penalty_depth = (math.sqrt(1.0 + 2.0 * target_tv * 2 ** n) - 1.0) / 3.0
    upper = min(martingale_depth, penalty_depth)

    def total(depth):
        u = 1.5 * depth
        return martingale_tv_bound(delta, depth) + 2.0 * (u ** 2 + u) / 2 ** n - target_tv

    return brentq(total, 0.0, upper, xtol=1e-12)
