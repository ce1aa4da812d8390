"""Credit portfolio model: obligor groups, default-probability scale, and the
limiting loss curve whose inverse locates the systemic-risk threshold.

A portfolio is a finite union of homogeneous sub-portfolios; group j holds
``count_j`` obligors, each with exposure ``exposure_j`` and marginal default
probability ``pd_scale_j * f_n``.  The scale f_n shrinks with portfolio size
to encode diversification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .archimedean import ArchimedeanGenerator

_INDEX_EPS = 1e-9  # snap for integer-boundary comparisons of nb against cumulative exposure


@dataclass(frozen=True)
class SubPortfolio:
    """A homogeneous obligor group: exposure c, default scale multiplier l, size."""

    exposure: float
    pd_scale: float
    count: int

    def __post_init__(self):
        if not self.exposure > 0.0:
            raise ValueError(f"exposure must be positive, got {self.exposure}")
        if not self.pd_scale > 0.0:
            raise ValueError(f"pd_scale must be positive, got {self.pd_scale}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class Portfolio:
    groups: tuple[SubPortfolio, ...]

    def __init__(self, groups):
        groups = tuple(groups)
        if not groups:
            raise ValueError("portfolio needs at least one group")
        object.__setattr__(self, "groups", groups)

    @property
    def n(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def weights(self) -> np.ndarray:
        """Group weights n_j / n, the finite-n group proportions."""
        n = self.n
        return np.array([g.count / n for g in self.groups])

    @property
    def exposures(self) -> np.ndarray:
        return np.array([g.exposure for g in self.groups])

    @property
    def pd_scales(self) -> np.ndarray:
        return np.array([g.pd_scale for g in self.groups])

    @property
    def counts(self) -> np.ndarray:
        return np.array([g.count for g in self.groups])

    @property
    def mean_exposure(self) -> float:
        """Average loss per obligor if every obligor defaults."""
        return float(np.dot(self.exposures, self.weights))

    @property
    def total_exposure(self) -> float:
        return float(np.dot(self.exposures, self.counts))

    @property
    def homogeneous_exposure(self) -> float | None:
        """Common per-obligor exposure, or None if exposures differ."""
        c = self.groups[0].exposure
        return c if all(g.exposure == c for g in self.groups) else None

    @staticmethod
    def homogeneous(n: int, exposure: float = 1.0, pd_scale: float = 1.0) -> "Portfolio":
        return Portfolio((SubPortfolio(exposure, pd_scale, n),))


@dataclass(frozen=True)
class DefaultScale:
    """Default-probability scale f_n: 1/n, 1/ln(n), or a fixed constant."""

    kind: str
    value: float | None = None

    _KINDS = ("reciprocal", "log_reciprocal", "constant")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown scale kind {self.kind!r}; expected one of {self._KINDS}")
        if self.kind == "constant":
            if self.value is None or not 0.0 < self.value < 1.0:
                raise ValueError(f"constant scale needs a value in (0, 1), got {self.value}")
        elif self.value is not None:
            raise ValueError(f"{self.kind} scale takes no value")

    @staticmethod
    def reciprocal() -> "DefaultScale":
        return DefaultScale("reciprocal")

    @staticmethod
    def log_reciprocal() -> "DefaultScale":
        return DefaultScale("log_reciprocal")

    @staticmethod
    def constant(value: float) -> "DefaultScale":
        return DefaultScale("constant", value)

    def resolve(self, n: int) -> float:
        """f_n for a portfolio of n obligors; always in (0, 1)."""
        if self.kind == "reciprocal":
            f = 1.0 / n
        elif self.kind == "log_reciprocal":
            f = 1.0 / math.log(n)
        else:
            f = self.value
        if not 0.0 < f < 1.0:
            raise ValueError(f"resolved default scale {f} outside (0, 1) for n={n}")
        return f

    def validate(self, pf: Portfolio) -> float:
        """Resolve against pf and check all marginal default probabilities < 1."""
        f = self.resolve(pf.n)
        worst = max(g.pd_scale for g in pf.groups) * f
        if not worst < 1.0:
            raise ValueError(
                f"marginal default probability {worst} >= 1; shrink pd_scale or the scale f_n"
            )
        return f


# operations -----------------------------------------------------------------


def conditional_default_prob(
    pf: Portfolio, scale: DefaultScale, gen: ArchimedeanGenerator, v_raw: float, group: int
) -> float:
    """Default probability of a group-j obligor given the raw mixture value.

    Equals 1 - exp(-v_raw * phi(1 - l_j f_n)); increasing in both v_raw and
    the group's pd_scale.
    """
    if v_raw <= 0.0:
        raise ValueError(f"conditioning value must be positive, got {v_raw}")
    g = pf.groups[group]
    f_n = scale.validate(pf)
    return -math.expm1(-v_raw * gen.phi_one_minus(g.pd_scale * f_n))


def conditional_default_prob_scaled(
    pf: Portfolio, scale: DefaultScale, gen: ArchimedeanGenerator, v: float, group: int
) -> float:
    """Same probability under the normalized parameterization v = V * phi(1 - f_n)."""
    if v <= 0.0:
        raise ValueError(f"conditioning value must be positive, got {v}")
    g = pf.groups[group]
    f_n = scale.validate(pf)
    ratio = gen.phi_one_minus(g.pd_scale * f_n) / gen.phi_one_minus(f_n)
    return -math.expm1(-v * ratio)


def limiting_mean_loss(pf: Portfolio, alpha: float, v: float) -> float:
    """Large-portfolio mean loss per obligor at normalized mixture value v.

    r(v) = sum_j c_j w_j (1 - exp(-v l_j**alpha)); strictly increasing from 0
    to the mean exposure.
    """
    if v < 0.0:
        raise ValueError(f"v must be nonnegative, got {v}")
    w = pf.weights
    c = pf.exposures
    l_a = pf.pd_scales**alpha
    return float(np.dot(c * w, -np.expm1(-v * l_a)))


def solve_vstar(pf: Portfolio, alpha: float, b: float) -> float:
    """Invert the limiting loss curve: the unique v with r(v) = b.

    Bracketing bisection with doubling; tolerance 1e-12 of the mean exposure
    in r-units.
    """
    cbar = pf.mean_exposure
    if not 0.0 < b < cbar:
        raise ValueError(f"loss level must lie in (0, {cbar}), got {b}")
    hi = 1.0
    while limiting_mean_loss(pf, alpha, hi) <= b:
        hi *= 2.0
        if hi > 1e308:
            raise ValueError(f"loss level {b} unreachable below the mean exposure {cbar}")
    lo = 0.0
    tol = 1e-12 * cbar
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = limiting_mean_loss(pf, alpha, mid)
        if abs(r - b) <= tol:
            return mid
        if r < b:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_index(pf: Portfolio, b: float) -> tuple[int, np.ndarray]:
    """Smallest default count whose cumulative exposure strictly exceeds n*b.

    Valid as a constant only for equal-exposure portfolios, where any default
    order accumulates the same exposure; returns (k, per-obligor exposures).
    For mixed exposures the index depends on the realized default order and
    is computed per replication inside the conditional Monte Carlo estimator.
    """
    nb = pf.n * b
    if b < 0.0:
        raise ValueError(f"loss level must be nonnegative, got {b}")
    if nb >= pf.total_exposure - _INDEX_EPS:
        raise ValueError(
            f"loss level unattainable: n*b={nb} >= total exposure {pf.total_exposure}"
        )
    flat = np.repeat(pf.exposures, pf.counts)
    c = pf.homogeneous_exposure
    if c is None:
        raise ValueError(
            "threshold index is replication-dependent for mixed exposures; "
            "it is resolved inside the conditional Monte Carlo estimator"
        )
    k = int(math.floor(nb / c + _INDEX_EPS)) + 1
    return max(k, 1), flat


def realized_loss(pf: Portfolio, defaults: "np.ndarray | list[int]") -> float:
    """Total loss from per-group default counts."""
    d = np.asarray(defaults)
    if d.shape != (len(pf.groups),):
        raise ValueError(f"expected one default count per group, got shape {d.shape}")
    if np.any(d < 0) or np.any(d > pf.counts):
        raise ValueError("default counts must lie between 0 and the group sizes")
    return float(np.dot(pf.exposures, d))
