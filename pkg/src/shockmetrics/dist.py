"""Parametric one-dimensional distributions and aging-class checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K


class InvalidParameterError(ValueError):
    pass


class DomainError(ValueError):
    pass


FAMILIES = {
    "weibull": K.WEIBULL,
    "gamma": K.GAMMA,
    "exponential": K.EXPONENTIAL,
    "uniform": K.UNIFORM,
    "binomial": K.BINOMIAL,
    "dirac": K.DIRAC,
    "empty": K.EMPTY,
}
FAMILY_NAMES = {code: name for name, code in FAMILIES.items()}

# JSON parameter names per family, in (p1, p2) order
PARAM_NAMES = {
    "weibull": ("shape", "scale"),
    "gamma": ("shape", "rate"),
    "exponential": ("rate",),
    "uniform": ("a", "b"),
    "binomial": ("n", "p"),
    "dirac": ("x",),
    "empty": (),
}

CONTINUOUS = {"weibull", "gamma", "exponential", "uniform"}


@dataclass(frozen=True)
class DistributionSpec:
    """A family tag plus up to two parameters.

    ``p1``/``p2`` follow :data:`PARAM_NAMES`: Weibull (shape, scale),
    Gamma (shape, rate), Exponential (rate), UniformInterval (a, b),
    Binomial (n, p), Dirac (x). ``Empty`` is the law of an event that never
    happens (survival 1 everywhere, infinite mean).
    """

    family: str
    p1: float = 0.0
    p2: float = 0.0
    _code: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise InvalidParameterError(f"unknown family {self.family!r}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "p1", float(self.p1))
        object.__setattr__(self, "p2", float(self.p2))
        object.__setattr__(self, "_code", FAMILIES[fam])
        _validate(self)

    @property
    def code(self) -> int:
        return self._code

    @property
    def triple(self):
        return self._code, self.p1, self.p2

    # constructors -------------------------------------------------------
    @classmethod
    def weibull(cls, shape, scale):
        return cls("weibull", shape, scale)

    @classmethod
    def gamma(cls, shape, rate):
        return cls("gamma", shape, rate)

    @classmethod
    def exponential(cls, rate):
        return cls("exponential", rate)

    @classmethod
    def uniform(cls, a, b):
        return cls("uniform", a, b)

    @classmethod
    def binomial(cls, n, p):
        return cls("binomial", n, p)

    @classmethod
    def dirac(cls, x):
        return cls("dirac", x)

    @classmethod
    def empty(cls):
        return cls("empty")

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        names = PARAM_NAMES[self.family]
        out = {"family": self.family}
        for name, value in zip(names, (self.p1, self.p2)):
            out[name] = int(value) if self.family == "binomial" and name == "n" else value
        return out

    @classmethod
    def from_dict(cls, data: dict, **defaults) -> "DistributionSpec":
        data = dict(data)
        try:
            fam = str(data.pop("family")).lower()
        except KeyError:
            raise InvalidParameterError("distribution needs a 'family' key") from None
        if fam not in PARAM_NAMES:
            raise InvalidParameterError(f"unknown family {fam!r}")
        names = PARAM_NAMES[fam]
        unknown = set(data) - set(names)
        if unknown:
            raise InvalidParameterError(
                f"unknown keys for {fam}: {', '.join(sorted(unknown))}"
            )
        values = []
        for name in names:
            if name in data:
                values.append(data[name])
            elif name in defaults:
                values.append(defaults[name])
            else:
                raise InvalidParameterError(f"{fam} needs parameter {name!r}")
        return cls(fam, *values)

    # evaluation ---------------------------------------------------------
    def cdf(self, x):
        return cdf(self, x)

    def sf(self, x):
        return survival(self, x)

    def mean(self):
        return mean(self)

    def __str__(self):
        names = PARAM_NAMES[self.family]
        args = ", ".join(f"{n}={v:g}" for n, v in zip(names, (self.p1, self.p2)))
        return f"{self.family}({args})"


def _validate(d: DistributionSpec):
    fam, p1, p2 = d.family, d.p1, d.p2
    if not all(math.isfinite(v) for v in (p1, p2)):
        raise InvalidParameterError(f"{fam}: parameters must be finite")
    if fam in ("weibull", "gamma"):
        if p1 <= 0 or p2 <= 0:
            raise InvalidParameterError(f"{fam}: shape and scale/rate must be > 0")
    elif fam == "exponential":
        if p1 <= 0:
            raise InvalidParameterError("exponential: rate must be > 0")
    elif fam == "uniform":
        if not (0 <= p1 < p2):
            raise InvalidParameterError("uniform: need 0 <= a < b")
    elif fam == "binomial":
        if p1 < 0 or p1 != int(p1):
            raise InvalidParameterError("binomial: n must be a nonnegative integer")
        if not (0 <= p2 <= 1):
            raise InvalidParameterError("binomial: p must lie in [0, 1]")
    elif fam == "dirac":
        if p1 < 0:
            raise InvalidParameterError("dirac: atom must be >= 0")


def _apply(kernel, d, x):
    if np.ndim(x) == 0:
        return kernel(d.code, d.p1, d.p2, float(x))
    arr = np.asarray(x, dtype=float)
    out = np.empty(arr.shape)
    flat = arr.ravel()
    res = out.ravel()
    for i in range(flat.size):
        res[i] = kernel(d.code, d.p1, d.p2, flat[i])
    return out


def cdf(d: DistributionSpec, x):
    """P(Z <= x). Accepts scalars or arrays."""
    return _apply(K.dist_cdf, d, x)


def survival(d: DistributionSpec, x):
    """P(Z > x)."""
    return _apply(K.dist_sf, d, x)


def mean(d: DistributionSpec) -> float:
    return float(K.dist_mean(*d.triple))


def pmf_support(d: DistributionSpec):
    """Atoms and weights of a finite-support law (Binomial or Dirac)."""
    if d.family == "binomial":
        n = int(d.p1)
        ks = np.arange(n + 1)
        w = np.array([math.exp(K.binom_logpmf(k, n, d.p2)) for k in ks])
        return ks.astype(float), w / w.sum()
    if d.family == "dirac":
        return np.array([d.p1]), np.array([1.0])
    raise InvalidParameterError(f"{d.family} has no finite support")


def sample(d: DistributionSpec, rng: np.random.Generator, size=None):
    """Draw from ``d`` with a numpy Generator.

    Inverse CDF for Weibull, Exponential and Uniform; numpy's Gamma and
    Binomial samplers otherwise.
    """
    if d.family == "empty":
        raise DomainError("cannot sample the empty law: no event ever occurs")
    shape = () if size is None else size
    fam = d.family
    if fam == "weibull":
        u = rng.random(shape)
        out = d.p2 * (-np.log1p(-u)) ** (1.0 / d.p1)
    elif fam == "exponential":
        out = -np.log1p(-rng.random(shape)) / d.p1
    elif fam == "uniform":
        out = d.p1 + (d.p2 - d.p1) * rng.random(shape)
    elif fam == "gamma":
        out = rng.gamma(d.p1, 1.0 / d.p2, shape)
    elif fam == "binomial":
        out = rng.binomial(int(d.p1), d.p2, shape).astype(float)
    else:
        out = np.full(shape, d.p1)
    return float(out) if size is None else out


def reg_lower_inc_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if not a > 0:
        raise DomainError(f"a must be > 0, got {a}")
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x}")
    return K.gammainc_pq(float(a), float(x))[0]


def reg_upper_inc_gamma(a: float, x: float) -> float:
    if not a > 0:
        raise DomainError(f"a must be > 0, got {a}")
    if not x >= 0:
        raise DomainError(f"x must be >= 0, got {x}")
    return K.gammainc_pq(float(a), float(x))[1]


# ---------------------------------------------------------------------------
# aging classes


@dataclass(frozen=True)
class AgingCheck:
    holds: bool
    worst_violation: float
    # grid point(s) where the worst violation occurs
    where: tuple = ()

    def __bool__(self):
        return self.holds


def check_nbu(d: DistributionSpec, grid, tol: float = 1e-12) -> AgingCheck:
    """Grid check of  sf(z1 + z2) <= sf(z1) * sf(z2)  for all pairs."""
    z = np.asarray(grid, dtype=float)
    if z.size == 0:
        raise ValueError("grid must be nonempty")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    sf = survival(d, z)
    sums = z[:, None] + z[None, :]
    sf_sum = survival(d, sums.ravel()).reshape(sums.shape)
    excess = sf_sum - sf[:, None] * sf[None, :]
    i, j = np.unravel_index(np.argmax(excess), excess.shape)
    worst = float(max(excess[i, j], 0.0))
    return AgingCheck(worst <= tol, worst, (float(z[i]), float(z[j])))


def tail_integral(d: DistributionSpec, z: float, abs_tol: float = 1e-10) -> float:
    """Integral of the survival function over [z, inf)."""
    from .renewal import integrate_survival

    if d.family == "dirac":
        return max(d.p1 - z, 0.0)
    if d.family == "uniform":
        a, b = d.p1, d.p2
        if z >= b:
            return 0.0
        if z <= a:
            return (a - z) + 0.5 * (b - a)
        return 0.5 * (b - z) ** 2 / (b - a)
    if d.family == "exponential":
        return math.exp(-d.p1 * z) / d.p1
    if d.family == "binomial":
        n = int(d.p1)
        ks = np.arange(math.floor(z), n + 1)
        total = 0.0
        for k in ks:
            lo = max(float(k), z)
            total += (k + 1 - lo) * float(K.dist_sf(d.code, d.p1, d.p2, float(k)))
        return total
    scale = max(mean(d), 1e-300)
    value, _err = integrate_survival(
        lambda t: float(K.dist_sf(d.code, d.p1, d.p2, z + t)),
        abs_tol=abs_tol,
        scale=scale,
    )
    return value


def check_nbue(d: DistributionSpec, grid, tol: float = 1e-10) -> AgingCheck:
    """Grid check of  int_z^inf sf(x) dx <= E[Z] * sf(z)."""
    mu = mean(d)
    if not math.isfinite(mu):
        raise DomainError("NBUE check needs a finite mean")
    z = np.asarray(grid, dtype=float)
    if z.size == 0:
        raise ValueError("grid must be nonempty")
    excess = np.array([tail_integral(d, float(zi)) - mu * float(survival(d, zi)) for zi in z])
    k = int(np.argmax(excess))
    worst = float(max(excess[k], 0.0))
    return AgingCheck(worst <= tol, worst, (float(z[k]),))


def default_aging_grid(d: DistributionSpec, n: int = 21) -> np.ndarray:
    mu = mean(d)
    top = 5.0 * mu if math.isfinite(mu) and mu > 0 else 10.0
    return np.linspace(0.0, top, n)
