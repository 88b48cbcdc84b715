"""Unit-mean residual distributions.

Every duration model in this package draws i.i.d. positive innovations from
one of four families, each parameterized so that the mean is exactly one:

* ``exponential`` -- unit rate, no free parameters.
* ``gamma``       -- shape ``kappa``, scale fixed at ``1/kappa``.
* ``gengamma``    -- generalized gamma with shapes ``d`` (origin behaviour)
  and ``p`` (tail thickness); scale ``a = Gamma(d/p) / Gamma((d+1)/p)``.
* ``burr``        -- Burr type XII with shapes ``s1``, ``s2`` and scale
  ``c = [s1 * B(s1 - 1/s2, 1 + 1/s2)]**-1``; the mean exists only when
  ``s1 * s2 > 1``.

Densities and survival functions are evaluated in log space so that extreme
shape values (e.g. Burr ``s1`` in the hundreds) do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import DomainError

FAMILIES = ("exponential", "gamma", "gengamma", "burr")

_ALIASES = {
    "exp": "exponential",
    "exponential": "exponential",
    "gamma": "gamma",
    "gengamma": "gengamma",
    "ggamma": "gengamma",
    "generalized_gamma": "gengamma",
    "burr": "burr",
}

# Largest residual reported before the survival probability is numerically
# indistinguishable from zero; -log(1e-16).
MAX_EXP_RESIDUAL = -math.log(1e-16)


@dataclass(frozen=True)
class ResidualSpec:
    """Immutable description of a unit-mean residual distribution.

    ``scale`` and ``log_norm`` (the log normalization constant of the pdf)
    are derived at construction and cached because they sit inside the
    likelihood loop.  Instances are safe to share across threads.
    """

    family: str
    kappa: float | None = None
    d: float | None = None
    p: float | None = None
    s1: float | None = None
    s2: float | None = None
    scale: float = 1.0
    log_norm: float = 0.0

    @property
    def shape_params(self) -> dict[str, float]:
        out = {}
        for name in ("kappa", "d", "p", "s1", "s2"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    def to_dict(self) -> dict:
        """Serialized form: family plus named shapes; scale is re-derived."""
        return {"family": self.family, **self.shape_params}


def canonical_family(name: str) -> str:
    key = str(name).strip().lower()
    if key not in _ALIASES:
        raise DomainError(f"unknown residual family {name!r}; expected one of {FAMILIES}")
    return _ALIASES[key]


def make_residual(family: str, params=()) -> ResidualSpec:
    """Build a ResidualSpec with its unit-mean scale constant.

    ``params`` is positional per family: () for exponential, (kappa,) for
    gamma, (d, p) for gengamma, (s1, s2) for burr.
    """
    fam = canonical_family(family)
    if np.isscalar(params):
        params = (float(params),)
    else:
        params = tuple(float(v) for v in params)
    arity = {"exponential": 0, "gamma": 1, "gengamma": 2, "burr": 2}[fam]
    if len(params) != arity:
        raise DomainError(f"{fam} expects {arity} shape parameter(s), got {len(params)}")
    if any(not math.isfinite(v) or v <= 0.0 for v in params):
        raise DomainError(f"{fam} shape parameters must be strictly positive, got {params}")

    if fam == "exponential":
        return ResidualSpec("exponential", scale=1.0, log_norm=0.0)
    if fam == "gamma":
        (kappa,) = params
        log_norm = kappa * math.log(kappa) - sc.gammaln(kappa)
        return ResidualSpec("gamma", kappa=kappa, scale=1.0 / kappa, log_norm=log_norm)
    if fam == "gengamma":
        d, p = params
        a = math.exp(sc.gammaln(d / p) - sc.gammaln((d + 1.0) / p))
        log_norm = math.log(p) - d * math.log(a) - sc.gammaln(d / p)
        return ResidualSpec("gengamma", d=d, p=p, scale=a, log_norm=log_norm)
    # burr
    s1, s2 = params
    if s1 * s2 <= 1.0:
        raise DomainError(
            f"burr requires s1*s2 > 1 for the mean to exist (got s1*s2 = {s1 * s2:g}); "
            "a unit-mean parameterization is impossible"
        )
    log_beta = sc.betaln(s1 - 1.0 / s2, 1.0 + 1.0 / s2)
    c = math.exp(-(math.log(s1) + log_beta))
    log_norm = math.log(s1) + math.log(s2) - math.log(c)
    return ResidualSpec("burr", s1=s1, s2=s2, scale=c, log_norm=log_norm)


def residual_from_dict(data: dict) -> ResidualSpec:
    fam = canonical_family(data["family"])
    order = {"exponential": (), "gamma": ("kappa",), "gengamma": ("d", "p"), "burr": ("s1", "s2")}
    return make_residual(fam, [float(data[k]) for k in order[fam]])


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0 or np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise DomainError("residual evaluations require strictly positive finite x")
    return x


def log_pdf(spec: ResidualSpec, x):
    """Log density; vectorized over x (which must be > 0)."""
    x = np.asarray(x, dtype=float)
    lx = np.log(x)
    if spec.family == "exponential":
        return -x
    if spec.family == "gamma":
        return spec.log_norm + (spec.kappa - 1.0) * lx - spec.kappa * x
    if spec.family == "gengamma":
        z = np.exp(spec.p * (lx - math.log(spec.scale)))
        return spec.log_norm + (spec.d - 1.0) * lx - z
    # burr: log1p((x/c)^s2) via softplus keeps huge shape values finite
    u = spec.s2 * (lx - math.log(spec.scale))
    return spec.log_norm + (spec.s2 - 1.0) * (lx - math.log(spec.scale)) - (spec.s1 + 1.0) * np.logaddexp(0.0, u)


def cdf(spec: ResidualSpec, x):
    x = np.asarray(x, dtype=float)
    if spec.family == "exponential":
        return -np.expm1(-x)
    if spec.family == "gamma":
        return sc.gammainc(spec.kappa, spec.kappa * x)
    if spec.family == "gengamma":
        z = np.exp(spec.p * (np.log(x) - math.log(spec.scale)))
        return sc.gammainc(spec.d / spec.p, z)
    return -np.expm1(log_survival(spec, x))


def log_survival(spec: ResidualSpec, x):
    """log(1 - cdf); computed directly where a stable form exists."""
    x = np.asarray(x, dtype=float)
    if spec.family == "exponential":
        return -x
    if spec.family == "burr":
        u = spec.s2 * (np.log(x) - math.log(spec.scale))
        return -spec.s1 * np.logaddexp(0.0, u)
    if spec.family == "gamma":
        s = sc.gammaincc(spec.kappa, spec.kappa * x)
    else:
        z = np.exp(spec.p * (np.log(x) - math.log(spec.scale)))
        s = sc.gammaincc(spec.d / spec.p, z)
    with np.errstate(divide="ignore"):
        return np.log(s)


def evaluate(spec: ResidualSpec, x):
    """Return (pdf, cdf, hazard) at x > 0; hazard = pdf / (1 - cdf)."""
    x = _check_positive(x)
    ls = log_survival(spec, x)
    pdf = np.exp(log_pdf(spec, x))
    cdf_vals = -np.expm1(ls)
    hazard = pdf / np.exp(ls)
    if x.ndim == 0:
        return float(pdf), float(cdf_vals), float(hazard)
    return pdf, cdf_vals, hazard


def quantile(spec: ResidualSpec, u):
    """Inverse CDF on (0, 1).

    Burr inverts in closed form; gamma and generalized gamma go through the
    regularized incomplete-gamma inverse.
    """
    u_arr = np.asarray(u, dtype=float)
    if u_arr.size == 0 or np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DomainError("quantile requires 0 < u < 1")
    if spec.family == "exponential":
        out = -np.log1p(-u_arr)
    elif spec.family == "gamma":
        out = sc.gammaincinv(spec.kappa, u_arr) / spec.kappa
    elif spec.family == "gengamma":
        out = spec.scale * sc.gammaincinv(spec.d / spec.p, u_arr) ** (1.0 / spec.p)
    else:
        # x = c * [(1-u)^(-1/s1) - 1]^(1/s2), with (1-u)^(-1/s1) = exp(-log1p(-u)/s1)
        out = spec.scale * np.expm1(-np.log1p(-u_arr) / spec.s1) ** (1.0 / spec.s2)
    if u_arr.ndim == 0:
        return float(out)
    return out


def sample(spec: ResidualSpec, count: int, seed) -> np.ndarray:
    """Draw ``count`` i.i.d. residuals, reproducibly for a given seed.

    ``seed`` may be an int or an already-constructed numpy Generator, so
    parallel callers can pass independent streams.
    """
    if count < 1:
        raise DomainError("sample count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if spec.family == "exponential":
        return rng.exponential(size=count)
    if spec.family == "gamma":
        return rng.gamma(spec.kappa, 1.0 / spec.kappa, size=count)
    if spec.family == "gengamma":
        g = rng.gamma(spec.d / spec.p, 1.0, size=count)
        return spec.scale * g ** (1.0 / spec.p)
    # burr via the inverse CDF applied to an exponential draw: survival
    # (1+(x/c)^s2)^(-s1) = exp(-E) inverts tail-accurately through expm1
    e = rng.exponential(size=count)
    return spec.scale * np.expm1(e / spec.s1) ** (1.0 / spec.s2)
