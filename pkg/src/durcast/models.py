"""Observation-driven duration dynamics.

A model pairs a latent-state update rule with a unit-mean residual
distribution.  Interarrival times relate to the residuals through a strictly
increasing time change ``phi(t, x)``:

    eps_n = phi(tau_n, X_{n-1})        tau_n = phi^{-1}(eps_n, X_{n-1})
    X_n   = psi(tau_n, X_{n-1})

Supported dynamics families:

* ``se``      -- self-exciting with exponential decay.  State jumps by
  ``alpha`` at each event and decays at rate ``beta`` toward the baseline
  ``mu``; ``phi`` is the integral of the decayed state, so with exponential
  residuals this is the classic Hawkes process.
* ``acd``     -- conditional expected duration ``X_n = b0 + a*tau + b1*X``,
  ``phi(t, x) = t/x`` (ACD(1,1)).
* ``logacd``  -- log-linear duration update, same ``phi`` (log-ACD(1,1)).
* ``logaci``  -- log-linear conditional intensity, ``phi(t, x) = x*t``
  (log-ACI(1,1)); defined with exponential residuals only.
* ``renewal`` -- i.i.d. durations, ``phi(t, x) = t``.

States are plain positive floats; for ``se`` the state lives on
``[mu, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, residuals
from .errors import DomainError, NumericalError
from .residuals import ResidualSpec, make_residual

DYNAMICS_FAMILIES = ("se", "acd", "logacd", "logaci", "renewal")


@dataclass(frozen=True)
class DynamicsSpec:
    """Dynamics family plus its parameter vector.

    ``params`` ordering: se -> (mu, alpha, beta); acd/logacd/logaci ->
    (b0, a, b1); renewal -> ().
    """

    family: str
    params: tuple[float, ...]

    # se accessors
    @property
    def mu(self) -> float:
        self._expect("se")
        return self.params[0]

    @property
    def alpha(self) -> float:
        self._expect("se")
        return self.params[1]

    @property
    def beta(self) -> float:
        self._expect("se")
        return self.params[2]

    # autoregressive accessors
    @property
    def b0(self) -> float:
        self._expect("acd", "logacd", "logaci")
        return self.params[0]

    @property
    def a(self) -> float:
        self._expect("acd", "logacd", "logaci")
        return self.params[1]

    @property
    def b1(self) -> float:
        self._expect("acd", "logacd", "logaci")
        return self.params[2]

    def _expect(self, *families: str) -> None:
        if self.family not in families:
            raise AttributeError(f"parameter not defined for {self.family!r} dynamics")

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.family == "se":
            return ("mu", "alpha", "beta")
        if self.family == "renewal":
            return ()
        return ("b0", "a", "b1")

    def to_dict(self) -> dict:
        return {"family": self.family, **dict(zip(self.param_names, self.params))}


def se_dynamics(mu: float, alpha: float, beta: float) -> DynamicsSpec:
    """Self-exciting dynamics; stability (alpha < beta) is reported, not
    enforced, so explosive regimes remain explorable."""
    if not (mu > 0 and alpha > 0 and beta > 0):
        raise DomainError("se dynamics require mu, alpha, beta > 0")
    return DynamicsSpec("se", (float(mu), float(alpha), float(beta)))


def acd_dynamics(b0: float, a: float, b1: float) -> DynamicsSpec:
    if not (b0 > 0 and a > 0 and b1 > 0):
        raise DomainError("acd dynamics require b0, a, b1 > 0")
    if a + b1 >= 1.0:
        raise DomainError(f"acd dynamics require a + b1 < 1 (got {a + b1:g})")
    return DynamicsSpec("acd", (float(b0), float(a), float(b1)))


def logacd_dynamics(b0: float, a: float, b1: float) -> DynamicsSpec:
    if a < 0 or b1 < 0:
        raise DomainError("logacd dynamics require a >= 0 and b1 >= 0")
    if a + b1 >= 1.0:
        raise DomainError(f"logacd dynamics require a + b1 < 1 (got {a + b1:g})")
    return DynamicsSpec("logacd", (float(b0), float(a), float(b1)))


def logaci_dynamics(b0: float, a: float, b1: float) -> DynamicsSpec:
    if abs(b1) >= 1.0:
        raise DomainError(f"logaci dynamics require |b1| < 1 (got {b1:g})")
    return DynamicsSpec("logaci", (float(b0), float(a), float(b1)))


def renewal_dynamics() -> DynamicsSpec:
    return DynamicsSpec("renewal", ())


_CONSTRUCTORS = {
    "se": se_dynamics,
    "acd": acd_dynamics,
    "logacd": logacd_dynamics,
    "logaci": logaci_dynamics,
    "renewal": renewal_dynamics,
}


def make_dynamics(family: str, params=()) -> DynamicsSpec:
    fam = str(family).strip().lower()
    if fam not in _CONSTRUCTORS:
        raise DomainError(f"unknown dynamics family {family!r}; expected one of {DYNAMICS_FAMILIES}")
    return _CONSTRUCTORS[fam](*[float(v) for v in params])


def dynamics_from_dict(data: dict) -> DynamicsSpec:
    fam = str(data["family"]).strip().lower()
    if fam == "renewal":
        return renewal_dynamics()
    if fam == "se":
        return se_dynamics(data["mu"], data["alpha"], data["beta"])
    return make_dynamics(fam, (data["b0"], data["a"], data["b1"]))


@dataclass(frozen=True)
class ModelSpec:
    """A dynamics family paired with a residual distribution."""

    dynamics: DynamicsSpec
    residual: ResidualSpec

    def __post_init__(self):
        if self.dynamics.family == "logaci" and self.residual.family != "exponential":
            raise DomainError("logaci dynamics are defined with exponential residuals only")

    def to_dict(self) -> dict:
        return {"dynamics": self.dynamics.to_dict(), "residual": self.residual.to_dict()}


def model_from_dict(data: dict) -> ModelSpec:
    return ModelSpec(dynamics_from_dict(data["dynamics"]), residuals.residual_from_dict(data["residual"]))


def make_model(family: str, dyn_params, residual_family: str, residual_params=()) -> ModelSpec:
    return ModelSpec(make_dynamics(family, dyn_params), make_residual(residual_family, residual_params))


def _dyn(model) -> DynamicsSpec:
    return model.dynamics if isinstance(model, ModelSpec) else model


def validate_state(model, state: float) -> float:
    dyn = _dyn(model)
    state = float(state)
    if not math.isfinite(state) or state <= 0.0:
        raise DomainError(f"latent state must be a positive finite number, got {state!r}")
    if dyn.family == "se" and state < dyn.mu:
        raise DomainError(f"se latent state must be >= mu (state={state:g}, mu={dyn.mu:g})")
    return state


def default_initial_state(model) -> float:
    """Burn-in-friendly starting state for each family.

    se: mu / (1 - alpha/beta), the intensity level whose reciprocal is the
    stationary mean duration (falls back to 2*mu when unstable);
    acd: b0 / (1 - a - b1); logacd: exp(b0 / (1 - a - b1)) (the update is
    log-linear, so the stationary level lives on the log scale);
    logaci: exp(b0 / (1 - b1)); renewal: 1.
    """
    dyn = _dyn(model)
    if dyn.family == "se":
        if dyn.alpha < dyn.beta:
            return dyn.mu / (1.0 - dyn.alpha / dyn.beta)
        return 2.0 * dyn.mu
    if dyn.family == "acd":
        return dyn.b0 / (1.0 - dyn.a - dyn.b1)
    if dyn.family == "logacd":
        return math.exp(dyn.b0 / (1.0 - dyn.a - dyn.b1))
    if dyn.family == "logaci":
        return math.exp(dyn.b0 / (1.0 - dyn.b1))
    return 1.0


def time_change(model, t, state: float):
    """phi(t, x): cumulative transformation of elapsed time onto the
    residual scale.  Vectorized over ``t >= 0``."""
    dyn = _dyn(model)
    state = validate_state(model, state)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise DomainError("elapsed time must be >= 0")
    if dyn.family == "se":
        mu, alpha, beta = dyn.params
        out = mu * t_arr + (state - mu + alpha) * (-np.expm1(-beta * t_arr)) / beta
    elif dyn.family in ("acd", "logacd"):
        out = t_arr / state
    elif dyn.family == "logaci":
        out = state * t_arr
    else:
        out = t_arr + 0.0
    return float(out) if t_arr.ndim == 0 else out


def time_change_derivative(model, t, state: float):
    """d phi/dt: the decayed state for se, 1/x for (log)acd, x for logaci."""
    dyn = _dyn(model)
    state = validate_state(model, state)
    t_arr = np.asarray(t, dtype=float)
    if dyn.family == "se":
        mu, alpha, beta = dyn.params
        out = mu + (state - mu + alpha) * np.exp(-beta * t_arr)
    elif dyn.family in ("acd", "logacd"):
        out = np.full_like(t_arr, 1.0 / state)
    elif dyn.family == "logaci":
        out = np.full_like(t_arr, state)
    else:
        out = np.ones_like(t_arr)
    return float(out) if t_arr.ndim == 0 else out


def time_change_inverse(model, y, state: float):
    """phi^{-1}(y, x) for y > 0; closed form everywhere except se, which
    uses a safeguarded Newton iteration on the monotone map."""
    dyn = _dyn(model)
    state = validate_state(model, state)
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0.0):
        raise DomainError("time_change_inverse requires y > 0")
    if dyn.family in ("acd", "logacd"):
        out = state * y_arr
    elif dyn.family == "logaci":
        out = y_arr / state
    elif dyn.family == "renewal":
        out = y_arr + 0.0
    else:
        mu, alpha, beta = dyn.params
        flat = np.atleast_1d(y_arr).astype(float)
        out = np.empty_like(flat)
        g = state - mu + alpha
        for i, yi in enumerate(flat):
            ti = _kernels.se_phi_inverse(yi, mu, alpha, beta, state)
            gap = abs(mu * ti + g * (-math.expm1(-beta * ti)) / beta - yi)
            if not math.isfinite(ti) or gap > 1e-10 * max(1.0, yi):
                raise NumericalError(
                    f"time-change inversion did not converge for y={yi:g}, state={state:g} "
                    f"(residual gap {gap:g})"
                )
            out[i] = ti
        out = out.reshape(y_arr.shape)
    return float(out) if y_arr.ndim == 0 else out


def update_state(model, tau: float, state: float) -> float:
    """psi(tau, x): post-event latent state."""
    dyn = _dyn(model)
    state = validate_state(model, state)
    tau = float(tau)
    if tau <= 0.0:
        raise DomainError("duration must be > 0")
    if dyn.family == "se":
        mu, alpha, beta = dyn.params
        return mu + (state - mu + alpha) * math.exp(-beta * tau)
    if dyn.family == "acd":
        b0, a, b1 = dyn.params
        return b0 + a * tau + b1 * state
    if dyn.family == "logacd":
        b0, a, b1 = dyn.params
        z = b0 + a * math.log(tau) + b1 * math.log(state)
        z = min(max(z, -_kernels.LOG_STATE_CLAMP), _kernels.LOG_STATE_CLAMP)
        return math.exp(z)
    if dyn.family == "logaci":
        b0, a, b1 = dyn.params
        z = b0 + a * (state * tau - 1.0) + b1 * math.log(state)
        z = min(max(z, -_kernels.LOG_STATE_CLAMP), _kernels.LOG_STATE_CLAMP)
        return math.exp(z)
    return 1.0


def intensity(model: ModelSpec, t, state: float):
    """Conditional event rate at elapsed time t since the last event:
    hazard of the residual at phi(t, x) times d phi/dt."""
    phi = time_change(model, t, state)
    dphi = time_change_derivative(model, t, state)
    phi_arr = np.asarray(phi, dtype=float)
    # hazard(0) is approached through the limit; phi=0 only at t=0
    tiny = np.finfo(float).tiny
    _, _, hz = residuals.evaluate(model.residual, np.maximum(phi_arr, tiny))
    out = np.asarray(hz) * np.asarray(dphi)
    if not np.all(np.isfinite(out)):
        raise NumericalError("intensity evaluation overflowed")
    return float(out) if np.asarray(t, dtype=float).ndim == 0 else out


def state_transition_density(model: ModelSpec, y, x: float):
    """Density of the next se latent state given the current one.

    Supported on (mu, x + alpha]; zero outside.  Obtained by the change of
    variables y = mu + (x - mu + alpha) * exp(-beta * tau) applied to the
    residual density.
    """
    dyn = _dyn(model)
    if dyn.family != "se":
        raise DomainError("state_transition_density is defined for se dynamics only")
    mu, alpha, beta = dyn.params
    x = float(x)
    if x < mu:
        raise DomainError("current state must satisfy x >= mu")
    y_arr = np.asarray(y, dtype=float)
    out = np.zeros_like(y_arr, dtype=float)
    inside = (y_arr > mu) & (y_arr <= x + alpha)
    if np.any(inside):
        yi = y_arr[inside]
        g = x - mu + alpha
        eps = (x - yi + alpha) / beta - (mu / beta) * np.log((yi - mu) / g)
        dens = np.exp(residuals.log_pdf(model.residual, eps)) * yi / (beta * (yi - mu))
        out[inside] = dens
    return float(out) if y_arr.ndim == 0 else out


def se_inverse_linear_bound_knot(model, x: float, delta0: float) -> float:
    """The y value past which the linear asymptote of phi^{-1} is within
    delta0 of the true inverse."""
    dyn = _dyn(model)
    mu, alpha, beta = dyn.params
    g = x - mu + alpha
    return g / beta + (mu / beta) * math.log(g / (mu * beta * delta0))


def time_change_inverse_bound(model, y, x: float, delta0: float):
    """Piecewise-linear upper bound on the se inverse time change.

    Below the knot y0 the bound is the chord from the origin through
    (y0, phi^{-1}(y0, x)); above it, the linear asymptote shifted up by the
    (exactly computed) gap at y0.  Convexity of the inverse makes the chord
    an upper bound, and the decaying deviation makes the shifted asymptote
    one.
    """
    dyn = _dyn(model)
    if dyn.family != "se":
        raise DomainError("time_change_inverse_bound is defined for se dynamics only")
    mu, alpha, beta = dyn.params
    if delta0 <= 0:
        raise DomainError("delta0 must be > 0")
    if x < mu:
        raise DomainError("state must satisfy x >= mu")
    y0 = se_inverse_linear_bound_knot(model, x, delta0)
    if y0 <= 0.0:
        raise DomainError(
            f"delta0={delta0:g} is too large for state x={x:g}: the asymptote knot is non-positive"
        )
    g = x - mu + alpha
    t0 = time_change_inverse(model, y0, x)
    gap0 = t0 - y0 / mu + g / (beta * mu)
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0.0):
        raise DomainError("bound requires y > 0")
    chord = (t0 / y0) * y_arr
    shifted = y_arr / mu - g / (beta * mu) + gap0
    out = np.where(y_arr <= y0, chord, shifted)
    return float(out) if y_arr.ndim == 0 else out


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    margin: float


def check_stability(model) -> StabilityReport:
    """Stationarity check per family.

    se: alpha < beta (unit-mean residuals), margin beta - alpha;
    acd/logacd: a + b1 < 1, margin 1 - a - b1; logaci: |b1| < 1,
    margin 1 - |b1|; renewal: always stable.
    """
    dyn = _dyn(model)
    if dyn.family == "se":
        margin = dyn.beta - dyn.alpha
        return StabilityReport(margin > 0.0, margin)
    if dyn.family in ("acd", "logacd"):
        margin = 1.0 - dyn.a - dyn.b1
        return StabilityReport(margin > 0.0, margin)
    if dyn.family == "logaci":
        margin = 1.0 - abs(dyn.b1)
        return StabilityReport(margin > 0.0, margin)
    return StabilityReport(True, math.inf)
