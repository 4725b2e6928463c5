"""Correlation, regression, and mediation statistics, self-contained.

Distribution functions live in-tree (regularized incomplete beta via
Lentz's continued fraction for the Student t, erfc for the normal) so
the analysis never depends on an external statistics environment; both
match high-precision oracles to better than 1e-12 over the ranges used.

The mediation decomposition follows the standard three-regression
scheme on standardized variables: total effect c (outcome on
predictor), path a (mediator on predictor), paths c' and b from the
two-predictor fit, and a Sobel z for the indirect effect a*b.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

_SQRT2 = math.sqrt(2.0)


class DegenerateInputError(ValueError):
    """Input with zero variance (or too few points) for the statistic."""


class CollinearityError(ValueError):
    """Rank-deficient design matrix; ``column`` names the offender."""

    def __init__(self, message: str, column: str):
        super().__init__(message)
        self.column = column


# --- distribution functions -----------------------------------------------


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_p_two_sided(z: float) -> float:
    return math.erfc(abs(z) / _SQRT2)


def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for the incomplete beta (modified Lentz)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise RuntimeError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to ~1e-13 for moderate a, b."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError(f"df must be positive, got {df}")
    if t == 0.0:
        return 0.5
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def student_t_p_two_sided(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


# --- basic statistics --------------------------------------------------------


def _as_vector(v: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class PearsonResult:
    r: float
    t: float
    p: float
    n: int


def pearson(x: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Sample correlation with a two-sided Student t significance test."""
    xa, ya = _as_vector(x, "x"), _as_vector(y, "y")
    if xa.size != ya.size:
        raise ValueError(f"length mismatch: {xa.size} vs {ya.size}")
    n = xa.size
    if n < 3:
        raise DegenerateInputError(f"need n >= 3 for a correlation test, got {n}")
    dx, dy = xa - xa.mean(), ya - ya.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("zero variance input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return PearsonResult(r=r, t=math.inf if r > 0 else -math.inf, p=0.0, n=n)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return PearsonResult(r=r, t=t, p=student_t_p_two_sided(t, n - 2), n=n)


def standardize(v: Sequence[float]) -> np.ndarray:
    """Mean 0, sample (n-1) standard deviation 1."""
    arr = _as_vector(v, "v")
    if arr.size < 2:
        raise DegenerateInputError(f"need n >= 2 to standardize, got {arr.size}")
    sd = float(arr.std(ddof=1))
    if sd == 0.0:
        raise DegenerateInputError("zero variance input")
    return (arr - arr.mean()) / sd


@dataclass(frozen=True)
class RegressionFit:
    """OLS fit with intercept; index 0 of each array is the intercept."""

    names: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adjusted_r_squared: float
    n: int
    df_resid: int

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def std_error(self, name: str) -> float:
        return float(self.std_errors[self.names.index(name)])


def ols(
    y: Sequence[float],
    predictors: Sequence[Sequence[float]] | np.ndarray,
    names: Sequence[str] | None = None,
) -> RegressionFit:
    """Least squares of y on predictors plus intercept, solved via QR.

    Standard errors come from sigma^2 (X'X)^-1; rank deficiency raises
    :class:`CollinearityError` naming the offending column.
    """
    ya = _as_vector(y, "y")
    cols = [_as_vector(p, f"predictor {i}") for i, p in enumerate(predictors)]
    if not cols:
        raise ValueError("at least one predictor required")
    n = ya.size
    for i, col in enumerate(cols):
        if col.size != n:
            raise ValueError(f"predictor {i} has length {col.size}, y has {n}")
    p = len(cols)
    if names is None:
        names = tuple(f"x{i + 1}" for i in range(p))
    else:
        names = tuple(names)
        if len(names) != p:
            raise ValueError(f"got {len(names)} names for {p} predictors")
    if n <= p + 1:
        raise DegenerateInputError(f"need n > {p + 1} observations, got {n}")
    all_names = ("intercept",) + names
    design = np.column_stack([np.ones(n)] + cols)

    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = max(n, p + 1) * np.finfo(float).eps * diag.max()
    deficient = np.flatnonzero(diag <= tol)
    if deficient.size:
        column = all_names[int(deficient[0])]
        raise CollinearityError(
            f"design matrix is rank deficient at column '{column}'", column
        )
    beta = np.linalg.solve(r, q.T @ ya)
    residuals = ya - design @ beta
    rss = float(residuals @ residuals)
    df = n - (p + 1)
    sigma2 = rss / df
    r_inv = np.linalg.inv(r)
    xtx_inv_diag = (r_inv * r_inv).sum(axis=1)
    std_errors = np.sqrt(sigma2 * xtx_inv_diag)

    tss = float(((ya - ya.mean()) ** 2).sum())
    if tss == 0.0:
        raise DegenerateInputError("outcome has zero variance")
    r_squared = 1.0 - rss / tss
    adjusted = 1.0 - (1.0 - r_squared) * (n - 1) / df

    t_values = np.empty(p + 1)
    p_values = np.empty(p + 1)
    for i in range(p + 1):
        if std_errors[i] == 0.0:
            t_values[i] = 0.0 if beta[i] == 0.0 else math.copysign(math.inf, beta[i])
            p_values[i] = 1.0 if beta[i] == 0.0 else 0.0
        else:
            t_values[i] = beta[i] / std_errors[i]
            p_values[i] = student_t_p_two_sided(float(t_values[i]), df)

    return RegressionFit(
        names=all_names,
        coefficients=beta,
        std_errors=std_errors,
        t_values=t_values,
        p_values=p_values,
        r_squared=r_squared,
        adjusted_r_squared=adjusted,
        n=n,
        df_resid=df,
    )


# --- mediation -----------------------------------------------------------------


@dataclass(frozen=True)
class SobelResult:
    z: float
    p: float


def sobel(a: float, se_a: float, b: float, se_b: float) -> SobelResult:
    """Sobel test of the indirect effect a*b (classic variant)."""
    if se_a <= 0 or se_b <= 0:
        raise ValueError(f"standard errors must be positive, got {se_a}, {se_b}")
    product = a * b
    if product == 0.0:
        return SobelResult(z=0.0, p=1.0)
    z = product / math.sqrt(b * b * se_a * se_a + a * a * se_b * se_b)
    return SobelResult(z=z, p=normal_p_two_sided(z))


@dataclass(frozen=True)
class MediationReport:
    """Standardized path coefficients of a three-variable mediation.

    a: mediator ~ predictor; b: outcome ~ mediator controlling for the
    predictor; c: total effect of the predictor; c_prime: direct effect
    controlling for the mediator.
    """

    a: float
    se_a: float
    b: float
    se_b: float
    c: float
    se_c: float
    c_prime: float
    se_c_prime: float
    sobel_z: float
    sobel_p: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MediationReport":
        fields = {f: data[f] for f in cls.__dataclass_fields__}
        return cls(**fields)


def mediation(
    predictor: Sequence[float],
    mediator: Sequence[float],
    outcome: Sequence[float],
) -> MediationReport:
    """Three-regression mediation on standardized variables."""
    zp = standardize(predictor)
    zm = standardize(mediator)
    zo = standardize(outcome)
    if not zp.size == zm.size == zo.size:
        raise ValueError("predictor, mediator, outcome must have equal lengths")
    if zp.size < 4:
        raise DegenerateInputError(f"need n >= 4 for mediation, got {zp.size}")

    total = ols(zo, [zp], names=("predictor",))
    path_a = ols(zm, [zp], names=("predictor",))
    full = ols(zo, [zp, zm], names=("predictor", "mediator"))

    a, se_a = path_a.coefficient("predictor"), path_a.std_error("predictor")
    b, se_b = full.coefficient("mediator"), full.std_error("mediator")
    test = sobel(a, se_a, b, se_b)
    return MediationReport(
        a=a,
        se_a=se_a,
        b=b,
        se_b=se_b,
        c=total.coefficient("predictor"),
        se_c=total.std_error("predictor"),
        c_prime=full.coefficient("predictor"),
        se_c_prime=full.std_error("predictor"),
        sobel_z=test.z,
        sobel_p=test.p,
        n=int(zp.size),
    )


# --- judgments -------------------------------------------------------------------


@dataclass(frozen=True)
class JudgmentAggregate:
    """Per-pattern tally of "random" judgments.

    ``n_total`` may be 0 in a raw export (no completed sessions yet);
    :func:`subjective_randomness` requires at least one judgment.
    """

    pattern_hex: str
    n_random: int
    n_total: int

    def __post_init__(self):
        if self.n_total < 0 or not 0 <= self.n_random <= max(self.n_total, 0):
            raise ValueError(
                f"need 0 <= n_random <= n_total, got {self.n_random}/{self.n_total}"
            )


def subjective_randomness(agg: JudgmentAggregate) -> float:
    """log2 of the add-half-smoothed share judging the pattern random.

    The (n_random + 0.5) / (n_total + 1) smoothing keeps the log finite
    at unanimous tallies and vanishes as n grows.
    """
    if agg.n_total < 1:
        raise ValueError(f"need at least one judgment for {agg.pattern_hex}")
    return math.log2((agg.n_random + 0.5) / (agg.n_total + 1))
