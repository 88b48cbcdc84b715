"""Hot serial recursions: state filters, simulators and the self-exciting
time-change inversion.

Every kernel exists twice: a plain-Python reference implementation
(``_py_*``) and, when numba is importable and ``DURCAST_NO_NUMBA`` is not
set, an ``@njit``-compiled binding of the *same* function body.  Both paths
execute identical floating-point operations, so results agree bitwise; the
active backend is reported in ``BACKEND``.

The recursions are inherently sequential (each state depends on the previous
one), which is why they are written as explicit loops rather than vectorized
numpy.  ``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

# Exponent clamp for the log-linked state updates (logACD / logACI); keeps a
# blown-up latent state from overflowing exp() while counting occurrences.
LOG_STATE_CLAMP = 50.0

_PHI_INV_MAX_ITER = 100


def _py_se_phi_inverse(y, mu, alpha, beta, x):
    """Solve mu*t + (x-mu+alpha)*(1-exp(-beta*t))/beta = y for t >= 0.

    The map is increasing and concave in t, so a Newton iteration started
    from a lower bound converges monotonically; a bisection bracket guards
    against floating-point overshoot.  Returns the final iterate even when
    the cap of 100 iterations is hit; callers verify the round trip.
    """
    g = x - mu + alpha
    lo = 0.0
    hi = y / mu  # phi(t) >= mu*t
    t = y / mu - g / (beta * mu)  # linear asymptote, a lower bound
    alt = y / (x + alpha)  # chord bound, also below the root
    if alt > t:
        t = alt
    if t < lo:
        t = lo
    tol = 1e-12 * (y if y > 1.0 else 1.0)
    for _ in range(_PHI_INV_MAX_ITER):
        e = math.exp(-beta * t)
        f = mu * t + g * (1.0 - e) / beta - y
        if abs(f) <= tol:
            return t
        if f < 0.0:
            lo = t
        else:
            hi = t
        t_new = t - f / (mu + g * e)
        if t_new <= lo or t_new >= hi:
            t_new = 0.5 * (lo + hi)
        t = t_new
    return t


def _py_se_filter(durations, mu, alpha, beta, x0):
    n = durations.shape[0]
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    for i in range(n):
        x = mu + (x - mu + alpha) * math.exp(-beta * durations[i])
        states[i + 1] = x
    return states


def _py_acd_filter(durations, b0, a, b1, x0):
    n = durations.shape[0]
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    for i in range(n):
        x = b0 + a * durations[i] + b1 * x
        states[i + 1] = x
    return states


def _py_logacd_filter(durations, b0, a, b1, x0):
    n = durations.shape[0]
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    clamped = 0
    for i in range(n):
        z = b0 + a * math.log(durations[i]) + b1 * math.log(x)
        if z > LOG_STATE_CLAMP:
            z = LOG_STATE_CLAMP
            clamped += 1
        elif z < -LOG_STATE_CLAMP:
            z = -LOG_STATE_CLAMP
            clamped += 1
        x = math.exp(z)
        states[i + 1] = x
    return states, clamped


def _py_logaci_filter(durations, b0, a, b1, x0):
    n = durations.shape[0]
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    clamped = 0
    for i in range(n):
        z = b0 + a * (x * durations[i] - 1.0) + b1 * math.log(x)
        if z > LOG_STATE_CLAMP:
            z = LOG_STATE_CLAMP
            clamped += 1
        elif z < -LOG_STATE_CLAMP:
            z = -LOG_STATE_CLAMP
            clamped += 1
        x = math.exp(z)
        states[i + 1] = x
    return states, clamped


def _py_se_simulate(eps, mu, alpha, beta, x0):
    """Map pre-drawn residuals through the inverse time change.

    The Newton inversion is inlined so the jitted variant stays a single
    self-contained compilation unit.
    """
    n = eps.shape[0]
    durations = np.empty(n)
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    for i in range(n):
        y = eps[i]
        g = x - mu + alpha
        lo = 0.0
        hi = y / mu
        t = y / mu - g / (beta * mu)
        alt = y / (x + alpha)
        if alt > t:
            t = alt
        if t < lo:
            t = lo
        tol = 1e-12 * (y if y > 1.0 else 1.0)
        ok = False
        for _ in range(_PHI_INV_MAX_ITER):
            e = math.exp(-beta * t)
            f = mu * t + g * (1.0 - e) / beta - y
            if abs(f) <= tol:
                ok = True
                break
            if f < 0.0:
                lo = t
            else:
                hi = t
            t_new = t - f / (mu + g * e)
            if t_new <= lo or t_new >= hi:
                t_new = 0.5 * (lo + hi)
            t = t_new
        if not ok:
            e = math.exp(-beta * t)
            f = mu * t + g * (1.0 - e) / beta - y
            if abs(f) > tol:
                t = np.nan
        durations[i] = t
        x = mu + (x - mu + alpha) * math.exp(-beta * t)
        states[i + 1] = x
    return durations, states


def _py_acd_simulate(eps, b0, a, b1, x0):
    n = eps.shape[0]
    durations = np.empty(n)
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    for i in range(n):
        tau = x * eps[i]
        durations[i] = tau
        x = b0 + a * tau + b1 * x
        states[i + 1] = x
    return durations, states


def _py_logacd_simulate(eps, b0, a, b1, x0):
    n = eps.shape[0]
    durations = np.empty(n)
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    clamped = 0
    for i in range(n):
        tau = x * eps[i]
        durations[i] = tau
        z = b0 + a * math.log(tau) + b1 * math.log(x)
        if z > LOG_STATE_CLAMP:
            z = LOG_STATE_CLAMP
            clamped += 1
        elif z < -LOG_STATE_CLAMP:
            z = -LOG_STATE_CLAMP
            clamped += 1
        x = math.exp(z)
        states[i + 1] = x
    return durations, states, clamped


def _py_logaci_simulate(eps, b0, a, b1, x0):
    n = eps.shape[0]
    durations = np.empty(n)
    states = np.empty(n + 1)
    states[0] = x0
    x = x0
    clamped = 0
    for i in range(n):
        tau = eps[i] / x
        durations[i] = tau
        z = b0 + a * (x * tau - 1.0) + b1 * math.log(x)
        if z > LOG_STATE_CLAMP:
            z = LOG_STATE_CLAMP
            clamped += 1
        elif z < -LOG_STATE_CLAMP:
            z = -LOG_STATE_CLAMP
            clamped += 1
        x = math.exp(z)
        states[i + 1] = x
    return durations, states, clamped


def _numba_disabled() -> bool:
    flag = os.environ.get("DURCAST_NO_NUMBA", "")
    return flag.strip().lower() in ("1", "true", "yes", "on")


_PY_KERNELS = {
    "se_phi_inverse": _py_se_phi_inverse,
    "se_filter": _py_se_filter,
    "acd_filter": _py_acd_filter,
    "logacd_filter": _py_logacd_filter,
    "logaci_filter": _py_logaci_filter,
    "se_simulate": _py_se_simulate,
    "acd_simulate": _py_acd_simulate,
    "logacd_simulate": _py_logacd_simulate,
    "logaci_simulate": _py_logaci_simulate,
}

BACKEND = "numpy"
if not _numba_disabled():
    try:
        from numba import njit

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None

if BACKEND == "numba":
    _jit = njit(cache=True, fastmath=False)
    se_phi_inverse = _jit(_py_se_phi_inverse)
    se_filter = _jit(_py_se_filter)
    acd_filter = _jit(_py_acd_filter)
    logacd_filter = _jit(_py_logacd_filter)
    logaci_filter = _jit(_py_logaci_filter)
    se_simulate = _jit(_py_se_simulate)
    acd_simulate = _jit(_py_acd_simulate)
    logacd_simulate = _jit(_py_logacd_simulate)
    logaci_simulate = _jit(_py_logaci_simulate)
else:
    se_phi_inverse = _py_se_phi_inverse
    se_filter = _py_se_filter
    acd_filter = _py_acd_filter
    logacd_filter = _py_logacd_filter
    logaci_filter = _py_logaci_filter
    se_simulate = _py_se_simulate
    acd_simulate = _py_acd_simulate
    logacd_simulate = _py_logacd_simulate
    logaci_simulate = _py_logaci_simulate
