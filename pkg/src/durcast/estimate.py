"""Maximum-likelihood estimation.

The log-likelihood of an observed duration sequence is

    sum_n [ log f_eps(phi(tau_n, X_{n-1})) + log dphi/dt(tau_n, X_{n-1}) ]

with the states filtered forward by the update rule.  Fitting runs on an
unconstrained reparameterization (logs for positive parameters, a simplex
logistic for (a, b1) with a + b1 < 1, alpha = beta * sigmoid(eta) for the
self-exciting stability constraint), using a Nelder-Mead search refined by
BFGS, with scattered restarts.  Standard errors come from the
central-difference observed information in the free space, delta-method
mapped back to the natural scale.

A fractionally integrated log-duration benchmark (ARFIMA(1, d, 1) dynamics
on log durations with Gaussian innovations, estimated by conditional sum of
squares) is provided as ``fit_fi_logacd``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal
from scipy.special import expit

from . import _kernels
from .errors import DomainError, InsufficientDataError, NumericalError
from .models import (
    DynamicsSpec,
    ModelSpec,
    default_initial_state,
    make_dynamics,
    validate_state,
)
from .residuals import canonical_family, log_pdf, make_residual

MIN_FIT_OBS = 200
MIN_FI_OBS = 2000


@dataclass
class FitConfig:
    """Optimizer settings; readable from key=value files via the CLI."""

    tolerance: float = 1e-5
    max_iterations: int = 4000
    restarts: int = 5
    truncation_lag: int = 1000
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("tolerance must be > 0")
        if self.max_iterations < 1 or self.restarts < 1:
            raise DomainError("max_iterations and restarts must be >= 1")
        if self.truncation_lag < 50:
            raise DomainError("truncation_lag must be >= 50")


@dataclass(frozen=True)
class FiLogAcdSpec:
    """Fractionally integrated log-duration benchmark parameters.

    ``d`` is the long-memory order (0 collapses to ARMA(1,1) on logs),
    ``phi``/``theta`` the AR/MA coefficients, ``sigma`` the Gaussian
    innovation scale on the log scale and ``mu_log`` the location (sample
    mean of log durations when fitted).
    """

    mu_log: float
    d: float
    phi: float
    theta: float
    sigma: float
    truncation_lag: int = 1000

    def __post_init__(self):
        if not (0.0 <= self.d < 0.5):
            raise DomainError(f"d must lie in [0, 0.5), got {self.d:g}")
        if abs(self.phi) >= 1.0 or abs(self.theta) >= 1.0:
            raise DomainError("phi and theta must lie strictly inside (-1, 1)")
        if self.sigma < 0.0:
            raise DomainError("sigma must be >= 0")
        if self.truncation_lag < 50:
            raise DomainError("truncation_lag must be >= 50")

    def to_dict(self) -> dict:
        return {
            "family": "fi_logacd",
            "mu_log": self.mu_log,
            "d": self.d,
            "phi": self.phi,
            "theta": self.theta,
            "sigma": self.sigma,
            "truncation_lag": self.truncation_lag,
        }


@dataclass
class FitResult:
    model: ModelSpec | FiLogAcdSpec
    loglik: float
    param_names: tuple[str, ...]
    params: np.ndarray
    std_errors: np.ndarray | None
    converged: bool
    iterations: int
    final_gradient_norm: float
    n_obs: int
    restart_params: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "loglik": self.loglik,
            "params": {k: float(v) for k, v in zip(self.param_names, self.params)},
            "std_errors": None
            if self.std_errors is None
            else {k: float(v) for k, v in zip(self.param_names, self.std_errors)},
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "final_gradient_norm": float(self.final_gradient_norm),
            "n_obs": int(self.n_obs),
        }


def _check_durations(durations) -> np.ndarray:
    arr = np.asarray(durations, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("durations must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("all durations must be positive and finite")
    return arr


def filter_latent(dynamics: DynamicsSpec, durations: np.ndarray, x0: float) -> np.ndarray:
    """States X_0..X_N produced by repeated application of the update rule."""
    if dynamics.family == "renewal":
        return np.ones(durations.shape[0] + 1)
    if dynamics.family == "se":
        return _kernels.se_filter(durations, *dynamics.params, x0)
    if dynamics.family == "acd":
        return _kernels.acd_filter(durations, *dynamics.params, x0)
    if dynamics.family == "logacd":
        states, _ = _kernels.logacd_filter(durations, *dynamics.params, x0)
        return states
    states, _ = _kernels.logaci_filter(durations, *dynamics.params, x0)
    return states


def _phi_terms(dynamics: DynamicsSpec, durations: np.ndarray, prev_states: np.ndarray):
    """Vectorized phi(tau_n, X_{n-1}) and log dphi/dt(tau_n, X_{n-1})."""
    fam = dynamics.family
    if fam == "se":
        mu, alpha, beta = dynamics.params
        g = prev_states - mu + alpha
        decay = np.exp(-beta * durations)
        phi = mu * durations + g * (1.0 - decay) / beta
        log_dphi = np.log(mu + g * decay)
    elif fam in ("acd", "logacd"):
        phi = durations / prev_states
        log_dphi = -np.log(prev_states)
    elif fam == "logaci":
        phi = prev_states * durations
        log_dphi = np.log(prev_states)
    else:
        phi = durations
        log_dphi = np.zeros_like(durations)
    return phi, log_dphi


def loglik(model: ModelSpec, durations, initial_state: float | None = None) -> float:
    """Total log-likelihood of the duration sequence under ``model``.

    The first observation is included (no conditioning-out); the filter
    starts from ``initial_state`` or the model's default.
    """
    durations = _check_durations(durations)
    x0 = default_initial_state(model) if initial_state is None else float(initial_state)
    validate_state(model, x0)
    states = filter_latent(model.dynamics, durations, x0)
    phi, log_dphi = _phi_terms(model.dynamics, durations, states[:-1])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = log_pdf(model.residual, phi) + log_dphi
    bad = ~np.isfinite(terms)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise NumericalError(
            f"non-finite log-likelihood contribution at observation {idx} "
            f"(tau={durations[idx]:g}, state={states[idx]:g})"
        )
    return float(np.sum(terms))


# ---------------------------------------------------------------------------
# unconstrained reparameterizations


def _logit(p: float) -> float:
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return math.log(p / (1.0 - p))


class _Transform:
    """Bijection between natural parameters and an unconstrained vector."""

    def __init__(self, dyn_family: str, res_family: str):
        self.dyn_family = dyn_family
        self.res_family = res_family
        dyn_names = {
            "se": ("mu", "alpha", "beta"),
            "acd": ("b0", "a", "b1"),
            "logacd": ("b0", "a", "b1"),
            "logaci": ("b0", "a", "b1"),
            "renewal": (),
        }[dyn_family]
        res_names = {
            "exponential": (),
            "gamma": ("kappa",),
            "gengamma": ("d", "p"),
            "burr": ("s1", "s2"),
        }[res_family]
        self.names: tuple[str, ...] = dyn_names + res_names
        self.n_dyn = len(dyn_names)

    @property
    def size(self) -> int:
        return len(self.names)

    def pack(self, natural) -> np.ndarray:
        natural = [float(v) for v in natural]
        dyn, res = natural[: self.n_dyn], natural[self.n_dyn :]
        out: list[float] = []
        if self.dyn_family == "se":
            mu, alpha, beta = dyn
            out += [math.log(mu), _logit(alpha / beta), math.log(beta)]
        elif self.dyn_family == "acd":
            b0, a, b1 = dyn
            r = max(1.0 - a - b1, 1e-12)
            out += [math.log(b0), math.log(max(a, 1e-12) / r), math.log(max(b1, 1e-12) / r)]
        elif self.dyn_family == "logacd":
            b0, a, b1 = dyn
            r = max(1.0 - a - b1, 1e-12)
            out += [b0, math.log(max(a, 1e-12) / r), math.log(max(b1, 1e-12) / r)]
        elif self.dyn_family == "logaci":
            b0, a, b1 = dyn
            out += [b0, a, math.atanh(min(max(b1, -1 + 1e-12), 1 - 1e-12))]
        if self.res_family == "gamma":
            out.append(math.log(res[0]))
        elif self.res_family == "gengamma":
            out += [math.log(res[0]), math.log(res[1])]
        elif self.res_family == "burr":
            s1, s2 = res
            out += [math.log(max(s1 * s2 - 1.0, 1e-12)), math.log(s2)]
        return np.asarray(out, dtype=float)

    def unpack(self, free: np.ndarray) -> tuple[tuple[float, ...], tuple[float, ...]]:
        free = np.asarray(free, dtype=float)
        i = 0
        if self.dyn_family == "se":
            mu = math.exp(free[0])
            beta = math.exp(free[2])
            alpha = beta * float(expit(free[1]))
            dyn = (mu, alpha, beta)
            i = 3
        elif self.dyn_family in ("acd", "logacd"):
            denom = 1.0 + math.exp(free[1]) + math.exp(free[2])
            a = math.exp(free[1]) / denom
            b1 = math.exp(free[2]) / denom
            b0 = math.exp(free[0]) if self.dyn_family == "acd" else free[0]
            dyn = (b0, a, b1)
            i = 3
        elif self.dyn_family == "logaci":
            dyn = (free[0], free[1], math.tanh(free[2]))
            i = 3
        else:
            dyn = ()
        rest = free[i:]
        if self.res_family == "exponential":
            res = ()
        elif self.res_family == "gamma":
            res = (math.exp(rest[0]),)
        elif self.res_family == "gengamma":
            res = (math.exp(rest[0]), math.exp(rest[1]))
        else:
            s2 = math.exp(rest[1])
            s1 = (1.0 + math.exp(rest[0])) / s2
            res = (s1, s2)
        return tuple(dyn), tuple(res)

    def natural(self, free: np.ndarray) -> np.ndarray:
        dyn, res = self.unpack(free)
        return np.asarray(dyn + res, dtype=float)

    def build_model(self, free: np.ndarray) -> ModelSpec:
        dyn, res = self.unpack(free)
        return ModelSpec(make_dynamics(self.dyn_family, dyn), make_residual(self.res_family, res))


def _start_params(dyn_family: str, res_family: str, durations: np.ndarray) -> list[float]:
    """Method-of-moments-flavoured starting values."""
    m = float(np.mean(durations))
    cv2 = float(np.var(durations)) / m**2 if m > 0 else 1.0
    out: list[float] = []
    if dyn_family == "se":
        beta = 1.0 / m
        out += [0.5 / m, 0.5 * beta, beta]
    elif dyn_family == "acd":
        out += [0.2 * m, 0.1, 0.7]
    elif dyn_family == "logacd":
        out += [0.2 * float(np.mean(np.log(durations))), 0.1, 0.7]
    elif dyn_family == "logaci":
        out += [0.3 * math.log(1.0 / m), 0.05, 0.7]
    kappa0 = min(max(1.0 / max(cv2, 0.2), 0.05), 5.0)
    if res_family == "gamma":
        out.append(kappa0)
    elif res_family == "gengamma":
        out += [kappa0, 1.0]
    elif res_family == "burr":
        out += [2.0, 1.0]
    return out


def _hessian(fun, x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    k = x.size
    hess = np.empty((k, k))
    f0 = fun(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = steps[i]
        hess[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / steps[i] ** 2
    for i in range(k):
        for j in range(i + 1, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = steps[i]
            ej[j] = steps[j]
            hess[i, j] = hess[j, i] = (
                fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    return hess


def _gradient(fun, x: np.ndarray, steps: np.ndarray) -> np.ndarray:
    grad = np.empty(x.size)
    for i in range(x.size):
        ei = np.zeros(x.size)
        ei[i] = steps[i]
        grad[i] = (fun(x + ei) - fun(x - ei)) / (2.0 * steps[i])
    return grad


def _delta_std_errors(neg_loglik, natural_of, x_opt: np.ndarray) -> np.ndarray | None:
    """Invert the free-space observed information and map the covariance to
    the natural scale; None when the information is not positive definite."""
    steps = 1e-4 * (1.0 + np.abs(x_opt))
    hess = _hessian(neg_loglik, x_opt, steps)
    try:
        chol = np.linalg.cholesky(hess)
    except np.linalg.LinAlgError:
        return None
    identity = np.eye(x_opt.size)
    cov_free = np.linalg.solve(chol.T, np.linalg.solve(chol, identity))
    jac = np.empty((len(natural_of(x_opt)), x_opt.size))
    for i in range(x_opt.size):
        ei = np.zeros(x_opt.size)
        ei[i] = steps[i]
        jac[:, i] = (natural_of(x_opt + ei) - natural_of(x_opt - ei)) / (2.0 * steps[i])
    cov_nat = jac @ cov_free @ jac.T
    diag = np.diag(cov_nat)
    if np.any(diag <= 0.0) or not np.all(np.isfinite(diag)):
        return None
    return np.sqrt(diag)


class _BestTracker:
    """Wraps an objective, remembering the best point ever evaluated."""

    def __init__(self, fun):
        self.fun = fun
        self.best_f = math.inf
        self.best_x: np.ndarray | None = None
        self.n_calls = 0

    def __call__(self, x):
        value = self.fun(x)
        self.n_calls += 1
        if value < self.best_f:
            self.best_f = value
            self.best_x = np.array(x, dtype=float)
        return value


def _minimize_with_refine(objective, x0: np.ndarray, config: FitConfig):
    tracker = _BestTracker(objective)
    if x0.size == 0:
        return tracker, np.asarray([]), 0
    nm = optimize.minimize(
        tracker,
        x0,
        method="Nelder-Mead",
        options={
            "maxiter": config.max_iterations,
            "xatol": 1e-7,
            "fatol": 1e-9,
            "adaptive": True,
        },
    )
    gtol = config.tolerance * max(1.0, abs(nm.fun))
    bfgs = optimize.minimize(
        tracker,
        nm.x,
        method="BFGS",
        options={"gtol": gtol, "maxiter": config.max_iterations},
    )
    iterations = int(nm.nit + bfgs.nit)
    x_best = tracker.best_x if tracker.best_f <= bfgs.fun else np.array(bfgs.x)
    return tracker, x_best, iterations


def fit(
    family: str,
    residual_family: str,
    durations,
    config: FitConfig | None = None,
) -> FitResult:
    """Constrained MLE for any dynamics/residual pairing.

    Runs ``config.restarts`` searches from a data-driven start plus seeded
    perturbations of it, keeps the best, and reports delta-method standard
    errors.  A failed search still returns its best point with
    ``converged=False``.
    """
    config = config or FitConfig()
    durations = _check_durations(durations)
    if durations.size < MIN_FIT_OBS:
        raise InsufficientDataError(f"fit requires at least {MIN_FIT_OBS} durations, got {durations.size}")

    dyn_family = str(family).strip().lower()
    if dyn_family not in ("se", "acd", "logacd", "logaci", "renewal"):
        raise DomainError(f"unknown dynamics family {family!r}")
    res_family = canonical_family(residual_family)
    if dyn_family == "logaci" and res_family != "exponential":
        raise DomainError("logaci dynamics are defined with exponential residuals only")
    transform = _Transform(dyn_family, res_family)

    def neg_loglik(free: np.ndarray) -> float:
        try:
            model = transform.build_model(free)
            return -loglik(model, durations)
        except (DomainError, NumericalError, OverflowError, FloatingPointError):
            return math.inf

    x_start = transform.pack(_start_params(transform.dyn_family, transform.res_family, durations))
    rng = np.random.default_rng(config.seed)
    starts = [x_start]
    for _ in range(config.restarts - 1):
        starts.append(x_start + rng.normal(scale=0.5, size=x_start.size))

    best_f = math.inf
    best_x = x_start
    best_iter = 0
    restart_records = []
    for start in starts:
        tracker, x_opt, iterations = _minimize_with_refine(neg_loglik, start, config)
        x_opt = np.asarray(x_opt, dtype=float)
        f_opt = neg_loglik(x_opt)
        restart_records.append((-f_opt, transform.natural(x_opt) if x_opt.size else np.asarray([])))
        if f_opt < best_f:
            best_f = f_opt
            best_x = np.asarray(x_opt, dtype=float)
            best_iter = iterations

    if transform.size == 0:
        model = transform.build_model(best_x)
        return FitResult(
            model=model,
            loglik=float(-neg_loglik(best_x)),
            param_names=(),
            params=np.asarray([]),
            std_errors=np.asarray([]),
            converged=True,
            iterations=0,
            final_gradient_norm=0.0,
            n_obs=int(durations.size),
            restart_params=restart_records,
        )

    steps = 1e-4 * (1.0 + np.abs(best_x))
    grad = _gradient(neg_loglik, best_x, steps)
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    converged = math.isfinite(best_f) and gnorm <= config.tolerance * max(1.0, abs(best_f))
    std_errors = _delta_std_errors(neg_loglik, transform.natural, best_x) if math.isfinite(best_f) else None

    return FitResult(
        model=transform.build_model(best_x),
        loglik=float(-best_f),
        param_names=transform.names,
        params=transform.natural(best_x),
        std_errors=std_errors,
        converged=bool(converged),
        iterations=best_iter,
        final_gradient_norm=gnorm,
        n_obs=int(durations.size),
        restart_params=restart_records,
    )


# ---------------------------------------------------------------------------
# fractionally integrated log-duration benchmark


def fracdiff_weights(d: float, n_weights: int) -> np.ndarray:
    """Binomial expansion coefficients of (1 - B)^d, w_0..w_{n_weights}."""
    w = np.empty(n_weights + 1)
    w[0] = 1.0
    for k in range(1, n_weights + 1):
        w[k] = w[k - 1] * (k - 1.0 - d) / k
    return w


def fi_innovations(z: np.ndarray, d: float, phi: float, theta: float, lag: int) -> np.ndarray:
    """Residuals of the ARFIMA(1, d, 1) filter, truncated at ``lag``:
    (1 - phi*B)(1 - B)^d z = (1 + theta*B) eps."""
    w = fracdiff_weights(d, lag)
    v = signal.lfilter(w, [1.0], z)
    u = v.copy()
    u[1:] -= phi * v[:-1]
    return signal.lfilter([1.0], [1.0, theta], u)


def fi_ar_weights(d: float, phi: float, theta: float, lag: int) -> np.ndarray:
    """AR(infinity) coefficients pi_0..pi_lag of
    (1 + theta*B)^{-1} (1 - phi*B)(1 - B)^d; pi_0 = 1."""
    w = fracdiff_weights(d, lag)
    c = w.copy()
    c[1:] -= phi * w[:-1]
    pi = np.empty_like(c)
    pi[0] = c[0]
    for k in range(1, c.size):
        pi[k] = c[k] - theta * pi[k - 1]
    return pi


def fit_fi_logacd(durations, config: FitConfig | None = None) -> FitResult:
    """Gaussian conditional-sum-of-squares fit of the long-memory benchmark
    on demeaned log durations."""
    config = config or FitConfig()
    durations = _check_durations(durations)
    if durations.size < MIN_FI_OBS:
        raise InsufficientDataError(
            f"fi_logacd fit requires at least {MIN_FI_OBS} durations, got {durations.size}"
        )
    log_tau = np.log(durations)
    mu_log = float(np.mean(log_tau))
    z = log_tau - mu_log
    n = z.size
    lag = config.truncation_lag

    def unpack(free: np.ndarray) -> tuple[float, float, float]:
        return 0.5 * float(expit(free[0])), math.tanh(free[1]), math.tanh(free[2])

    def css_objective(free: np.ndarray) -> float:
        try:
            d, phi, theta = unpack(free)
            resid = fi_innovations(z, d, phi, theta, lag)
            mse = float(np.mean(resid**2))
            if not math.isfinite(mse) or mse <= 0.0:
                return math.inf
            return 0.5 * n * math.log(mse)
        except FloatingPointError:
            return math.inf

    rng = np.random.default_rng(config.seed)
    x_start = np.asarray([0.0, math.atanh(0.2), 0.0])
    starts = [x_start]
    for _ in range(config.restarts - 1):
        starts.append(x_start + rng.normal(scale=0.5, size=3))

    best_f = math.inf
    best_x = x_start
    best_iter = 0
    restart_records = []
    for start in starts:
        _, x_opt, iterations = _minimize_with_refine(css_objective, start, config)
        f_opt = css_objective(x_opt)
        restart_records.append((-f_opt, np.asarray(unpack(x_opt))))
        if f_opt < best_f:
            best_f, best_x, best_iter = f_opt, np.asarray(x_opt, dtype=float), iterations

    d_hat, phi_hat, theta_hat = unpack(best_x)
    resid = fi_innovations(z, d_hat, phi_hat, theta_hat, lag)
    sigma_hat = float(np.sqrt(np.mean(resid**2)))

    # full Gaussian log-likelihood over (d, phi, theta, log sigma) for the
    # observed-information standard errors
    def neg_full(free4: np.ndarray) -> float:
        try:
            d, phi, theta = unpack(free4[:3])
            sigma = math.exp(free4[3])
            e = fi_innovations(z, d, phi, theta, lag)
            return 0.5 * n * math.log(2.0 * math.pi) + n * math.log(sigma) + float(
                np.sum(e**2)
            ) / (2.0 * sigma**2)
        except FloatingPointError:
            return math.inf

    def natural_of(free4: np.ndarray) -> np.ndarray:
        d, phi, theta = unpack(free4[:3])
        return np.asarray([d, phi, theta, math.exp(free4[3])])

    x4 = np.concatenate([best_x, [math.log(sigma_hat)]])
    steps = 1e-6 * (1.0 + np.abs(x4))
    grad = _gradient(neg_full, x4, steps)
    gnorm = float(np.max(np.abs(grad)))
    loglik_value = -neg_full(x4)
    converged = math.isfinite(loglik_value) and gnorm <= config.tolerance * max(1.0, abs(loglik_value))
    std_errors = _delta_std_errors(neg_full, natural_of, x4)

    spec = FiLogAcdSpec(
        mu_log=mu_log,
        d=d_hat,
        phi=phi_hat,
        theta=theta_hat,
        sigma=sigma_hat,
        truncation_lag=lag,
    )
    return FitResult(
        model=spec,
        loglik=float(loglik_value),
        param_names=("d", "phi", "theta", "sigma"),
        params=np.asarray([d_hat, phi_hat, theta_hat, sigma_hat]),
        std_errors=std_errors,
        converged=bool(converged),
        iterations=best_iter,
        final_gradient_norm=gnorm,
        n_obs=int(n),
        restart_params=restart_records,
    )
