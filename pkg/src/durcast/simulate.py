"""Exact simulation of event series and sample-path statistics.

Simulation is exact inverse-transform: draw residuals, map each through the
inverse time change of the current state, then update the state.  No
thinning or discretization is involved.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, NumericalError
from .models import ModelSpec, check_stability, default_initial_state, validate_state
from .residuals import sample as sample_residuals


@dataclass
class EventSeries:
    """Ordered event arrivals: durations, cumulative arrival times and,
    optionally, the latent-state path (one entry per event plus the initial
    state)."""

    durations: np.ndarray
    arrival_times: np.ndarray
    latent_path: np.ndarray | None = None
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=float)
        self.arrival_times = np.asarray(self.arrival_times, dtype=float)
        if self.latent_path is not None:
            self.latent_path = np.asarray(self.latent_path, dtype=float)

    def __len__(self) -> int:
        return self.durations.shape[0]

    def validate(self) -> None:
        if np.any(self.durations <= 0.0):
            raise DomainError("all durations must be > 0")
        if self.arrival_times.shape != self.durations.shape:
            raise DomainError("arrival_times and durations must have equal length")
        if np.any(np.diff(self.arrival_times) <= 0.0):
            raise DomainError("arrival times must be strictly increasing")
        recon = np.diff(self.arrival_times, prepend=0.0)
        if np.max(np.abs(recon - self.durations), initial=0.0) > 1e-12 * max(
            1.0, float(self.arrival_times[-1]) if len(self) else 1.0
        ):
            raise DomainError("arrival-time increments disagree with durations")
        if self.latent_path is not None and self.latent_path.shape[0] != len(self) + 1:
            raise DomainError("latent_path must have length len(durations) + 1")


def simulate(
    model: ModelSpec,
    count: int,
    seed,
    initial_state: float | None = None,
    burn_in: int = 0,
) -> EventSeries:
    """Simulate ``count`` events (after discarding ``burn_in``).

    Residuals are pre-drawn with a seeded generator, then pushed through the
    deterministic recursion, so identical (model, seed, initial_state,
    burn_in) inputs give bit-identical output.  Unstable self-exciting
    parameters produce a warning on the returned series rather than an
    error.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    if burn_in < 0:
        raise DomainError("burn_in must be >= 0")
    x0 = default_initial_state(model) if initial_state is None else float(initial_state)
    validate_state(model, x0)

    notes: list[str] = []
    dyn = model.dynamics
    if dyn.family == "se" and not check_stability(model).stable:
        notes.append(
            f"unstable se parameters (alpha={dyn.alpha:g} >= beta={dyn.beta:g}); "
            "no stationary regime exists"
        )

    total = count + burn_in
    eps = sample_residuals(model.residual, total, seed)

    if dyn.family == "renewal":
        durations = eps
        states = np.ones(total + 1)
    elif dyn.family == "se":
        durations, states = _kernels.se_simulate(eps, *dyn.params, x0)
    elif dyn.family == "acd":
        durations, states = _kernels.acd_simulate(eps, *dyn.params, x0)
    elif dyn.family == "logacd":
        durations, states, clamped = _kernels.logacd_simulate(eps, *dyn.params, x0)
        if clamped:
            notes.append(f"log-state exponent clamped at +/-{_kernels.LOG_STATE_CLAMP:g} ({clamped} times)")
    else:
        durations, states, clamped = _kernels.logaci_simulate(eps, *dyn.params, x0)
        if clamped:
            notes.append(f"log-state exponent clamped at +/-{_kernels.LOG_STATE_CLAMP:g} ({clamped} times)")

    if not np.all(np.isfinite(durations)):
        raise NumericalError("simulation produced non-finite durations (pathological parameters)")

    durations = durations[burn_in:]
    states = states[burn_in:]
    series = EventSeries(
        durations=durations,
        arrival_times=np.cumsum(durations),
        latent_path=states,
        warnings=tuple(notes),
    )
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return series


def sample_acf(values, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation rho(0..max_lag); rho(0) = 1."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if max_lag < 1:
        raise DomainError("max_lag must be >= 1")
    if n <= max_lag:
        raise DomainError("need more observations than max_lag")
    centered = values - values.mean()
    var = float(np.dot(centered, centered)) / n
    if var <= 0.0:
        raise DomainError("autocorrelation of a constant sequence is undefined")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for k in range(1, max_lag + 1):
        acf[k] = float(np.dot(centered[:-k], centered[k:])) / n / var
    return acf


def stationary_mean_duration(dynamics) -> float:
    """Long-run mean duration of a stable self-exciting model:
    (beta * 1 - alpha) / (beta * mu) under unit-mean residuals."""
    dyn = dynamics.dynamics if isinstance(dynamics, ModelSpec) else dynamics
    if dyn.family != "se":
        raise DomainError("stationary_mean_duration applies to se dynamics only")
    if dyn.alpha >= dyn.beta:
        raise DomainError("stationary mean requires alpha < beta")
    return (dyn.beta - dyn.alpha) / (dyn.beta * dyn.mu)
