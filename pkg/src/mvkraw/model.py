"""The concrete model: linear birth rates toward a population ceiling N and
linear per-capita death rates.

With birth intensities p and death intensities q, the rates are
B_j(x) = (N - |x|) p_j and D_j(x) = q_j x_j.  The stationary distribution is
multinomial with probabilities eta derived from the ratios p_j/q_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bdcore import RateField
from .combinatorics import EXACT_N_MAX, log_multinomial, multinomial
from .errors import ValidationError
from .lattice import StateSpace


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: dimension n, ceiling N, intensities p and q > 0."""

    n: int
    N: int
    p: tuple
    q: tuple

    def __post_init__(self):
        if not (isinstance(self.n, int) and isinstance(self.N, int)):
            raise ValidationError("n and N must be integers")
        if self.n < 1 or self.N < 1:
            raise ValidationError(f"need n >= 1 and N >= 1, got n={self.n}, N={self.N}")
        p = tuple(float(v) for v in self.p)
        q = tuple(float(v) for v in self.q)
        if len(p) != self.n or len(q) != self.n:
            raise ValidationError(
                f"p and q must have length n={self.n}, got {len(p)} and {len(q)}"
            )
        for name, vec in (("p", p), ("q", q)):
            if not all(math.isfinite(v) and v > 0 for v in vec):
                raise ValidationError(f"all {name} entries must be finite and positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def coincidence_gap(self) -> float:
        """Smallest pairwise |q_i - q_j| (inf when n = 1)."""
        if self.n == 1:
            return math.inf
        qs = sorted(self.q)
        return min(b - a for a, b in zip(qs, qs[1:]))

    def exceptional(self, band: float | None = None) -> bool:
        """True when some q_i coincide within the detection band.

        In that regime the closed-form eigenpolynomial construction breaks
        down and only the numeric eigenbasis is available.  The default
        band is 1e-9 * max(q).
        """
        if band is None:
            band = 1e-9 * max(self.q)
        return self.coincidence_gap <= band


def rates(params: ModelParams) -> RateField:
    """Rate field B_j(x) = (N - |x|) p_j, D_j(x) = q_j x_j.

    Boundary conditions hold automatically: births vanish on |x| = N and
    deaths vanish at x_j = 0.
    """
    N, p, q = params.N, params.p, params.q

    def birth(j: int, x) -> float:
        return (N - sum(x)) * p[j]

    def death(j: int, x) -> float:
        return q[j] * x[j]

    return RateField(params.n, birth, death)


@dataclass(frozen=True)
class Probabilities:
    """Multinomial cell probabilities (eta0, eta_1..eta_n), summing to 1."""

    eta0: float
    eta: tuple


def probabilities(params: ModelParams) -> Probabilities:
    """eta_i = (p_i/q_i) / (1 + sum_j p_j/q_j) and eta0 = the remainder."""
    ratio = [pi / qi for pi, qi in zip(params.p, params.q)]
    denom = 1.0 + math.fsum(ratio)
    eta = tuple(r / denom for r in ratio)
    return Probabilities(1.0 / denom, eta)


def multinomial_weight(params: ModelParams, x) -> float:
    """Stationary weight of one point: multinomial pmf with cells
    (eta0, eta) and counts (N - |x|, x)."""
    prob = probabilities(params)
    return _multinomial_pmf(params.N, prob.eta0, prob.eta, x)


def _multinomial_pmf(N: int, eta0: float, eta, x) -> float:
    x = [int(v) for v in x]
    x0 = N - sum(x)
    if x0 < 0 or any(v < 0 for v in x):
        raise ValidationError(f"{tuple(x)} is not in the lattice for N={N}")
    if N <= EXACT_N_MAX:
        coeff = multinomial(N, x)
        value = coeff * eta0**x0
        for ei, xi in zip(eta, x):
            value *= ei**xi
        return value
    logv = log_multinomial(N, x) + x0 * math.log(eta0)
    logv += math.fsum(xi * math.log(ei) for ei, xi in zip(eta, x) if xi)
    return math.exp(logv)


def multinomial_vector(space: StateSpace, eta0: float, eta) -> np.ndarray:
    """Multinomial pmf over the whole lattice, in rank order."""
    eta = tuple(float(v) for v in eta)
    if len(eta) != space.n:
        raise ValidationError(f"need {space.n} cell probabilities, got {len(eta)}")
    return np.array(
        [_multinomial_pmf(space.N, eta0, eta, pt) for pt in space.points]
    )


def weight_vector(params: ModelParams, space: StateSpace) -> np.ndarray:
    """Stationary weight over the whole lattice, in rank order."""
    if space.n != params.n or space.N != params.N:
        raise ValidationError("state space does not match params")
    prob = probabilities(params)
    return multinomial_vector(space, prob.eta0, prob.eta)
