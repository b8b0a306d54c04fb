"""System parameters, case classification and derived exponents.

The system is

    u_t = D1 Δu + v^p,   v_t = D2 Δv + u^q   in R^N,

with 0 < p <= q and pq > 1.  Its (N, p, q) parameter region splits into six
cases (A)-(F) according to the sign of (q+1)/(pq-1) - N/2 and the position of
q relative to the Fujita exponent 1 + 2/N.

Exact rationals (``Fraction``, ``int`` or strings such as ``"5/3"``) are kept
exact for classification so that boundary cases land on the boundary; all
numerics downstream use floats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, float, Fraction, str]

#: relative tolerance for the boundary equalities of cases B, C and E
EQ_RTOL = 1e-12

CASE_LABELS = ("A", "B", "C", "D", "E", "F")


class ParameterError(ValueError):
    """Raised for inadmissible system parameters."""


class HypothesisError(ValueError):
    """Raised when an operation's mathematical hypothesis does not hold."""


def parse_number(value: Number) -> Union[Fraction, float]:
    """Return an exact ``Fraction`` for rational input, otherwise a float.

    Strings are parsed as ``"a/b"`` or decimal literals; decimal strings are
    treated as exact (``"1.5"`` -> 3/2).
    """
    if isinstance(value, bool):
        raise ParameterError("booleans are not numbers here")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"cannot parse number {value!r}") from exc
    return float(value)


def _is_close(lhs: float, rhs: float) -> bool:
    return abs(lhs - rhs) <= EQ_RTOL * max(1.0, abs(lhs), abs(rhs))


@dataclass(frozen=True)
class SystemParams:
    """The tuple (N, p, q, D1, D2); ``D`` is min(D1, D2).

    ``p`` and ``q`` are floats; ``p_exact``/``q_exact`` keep the exact
    rational value when one was supplied (otherwise ``None``).
    """

    N: int
    p: float
    q: float
    D1: float = 1.0
    D2: float = 1.0
    p_exact: Fraction | None = field(default=None, compare=False, repr=False)
    q_exact: Fraction | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("p", "q"):
            raw = getattr(self, name)
            exact_name = f"{name}_exact"
            exact = getattr(self, exact_name)
            parsed = parse_number(raw) if exact is None else Fraction(exact)
            if isinstance(parsed, Fraction):
                object.__setattr__(self, exact_name, parsed)
            object.__setattr__(self, name, float(parsed))
        for name in ("D1", "D2"):
            value = float(parse_number(getattr(self, name)))
            if not value > 0:
                raise ParameterError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)
        if not (self.p > 0 and self.q > 0):
            raise ParameterError("p and q must be positive")
        if self.exact:
            if self.p_exact > self.q_exact:
                raise ParameterError(f"need p <= q, got p={self.p_exact}, q={self.q_exact}")
            if self.p_exact * self.q_exact <= 1:
                raise ParameterError("need pq > 1 (pq = 1 is not admissible)")
        else:
            if self.p > self.q:
                raise ParameterError(f"need p <= q, got p={self.p}, q={self.q}")
            if not self.p * self.q > 1.0:
                raise ParameterError("need pq > 1 (pq = 1 is not admissible)")

    @property
    def D(self) -> float:
        return min(self.D1, self.D2)

    @property
    def exact(self) -> bool:
        """True when both p and q are exact rationals."""
        return self.p_exact is not None and self.q_exact is not None

    def to_dict(self) -> dict:
        out = {"N": self.N, "p": self.p, "q": self.q, "D1": self.D1, "D2": self.D2}
        if self.exact:
            out["p_exact"] = str(self.p_exact)
            out["q_exact"] = str(self.q_exact)
        return out


@dataclass(frozen=True)
class CaseLabel:
    label: str
    ratio: float
    half_dim: float
    q_fujita: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "ratio": self.ratio,
            "half_dim": self.half_dim,
            "q_fujita": self.q_fujita,
        }


@dataclass(frozen=True)
class ExponentSet:
    lambda_mu: float
    lambda_nu: float
    r1_star: float
    r2_star: float
    scal_u: float
    scal_v: float
    d_over_q: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _compare(params: SystemParams, exact_lhs, exact_rhs, lhs: float, rhs: float) -> int:
    """Three-way comparison honouring exact input and the equality tolerance."""
    if params.exact:
        return (exact_lhs > exact_rhs) - (exact_lhs < exact_rhs)
    if _is_close(lhs, rhs):
        return 0
    return 1 if lhs > rhs else -1


def classify(params: SystemParams) -> CaseLabel:
    """Return the case (A)-(F) of ``params``; D1 and D2 play no role."""
    N, p, q = params.N, params.p, params.q
    ratio = (q + 1) / (p * q - 1)
    half_dim = N / 2
    q_fujita = 1 + 2 / N
    if params.exact:
        pe, qe = params.p_exact, params.q_exact
        ratio_e = (qe + 1) / (pe * qe - 1)
        half_e = Fraction(N, 2)
        fuj_e = 1 + Fraction(2, N)
    else:
        pe = qe = ratio_e = half_e = fuj_e = None
    side = _compare(params, ratio_e, half_e, ratio, half_dim)
    if side < 0:
        label = "A"
    elif side == 0:
        label = "C" if _compare(params, pe, qe, p, q) == 0 else "B"
    else:
        fuj = _compare(params, qe, fuj_e, q, q_fujita)
        label = {1: "D", 0: "E", -1: "F"}[fuj]
    return CaseLabel(label=label, ratio=ratio, half_dim=half_dim, q_fujita=q_fujita)


def case_condition_holds(params: SystemParams, label: str) -> bool:
    """Evaluate the defining condition of ``label`` directly (no dispatch).

    Used as an independent check of :func:`classify`.
    """
    N, p, q = params.N, params.p, params.q
    ratio = (q + 1) / (p * q - 1)
    eq_half = _is_close(ratio, N / 2)
    eq_fuj = _is_close(q, 1 + 2 / N)
    eq_pq = _is_close(p, q)
    if label == "A":
        return ratio < N / 2 and not eq_half
    if label == "B":
        return eq_half and p < q and not eq_pq
    if label == "C":
        return eq_half and eq_pq
    if label == "D":
        return ratio > N / 2 and not eq_half and q > 1 + 2 / N and not eq_fuj
    if label == "E":
        return ratio > N / 2 and not eq_half and eq_fuj
    if label == "F":
        return ratio > N / 2 and not eq_half and q < 1 + 2 / N and not eq_fuj
    raise ValueError(f"unknown case label {label!r}")


def derive_exponents(params: SystemParams) -> ExponentSet:
    N, p, q = params.N, params.p, params.q
    pq1 = p * q - 1
    return ExponentSet(
        lambda_mu=2 * (p + 1) / pq1,
        lambda_nu=2 * (q + 1) / pq1,
        r1_star=(N / 2) * pq1 / (p + 1),
        r2_star=(N / 2) * pq1 / (q + 1),
        scal_u=(p + 1) / pq1,
        scal_v=(q + 1) / pq1,
        d_over_q=(N + 2) / q,
    )


def lebesgue_indices(params: SystemParams, r1: float, r2: float) -> tuple[float, float, bool]:
    """Return ``(P, Q, max(P, Q) <= 2)`` for Lebesgue exponents ``r1, r2``.

    P = N (p/r2 - 1/r1) and Q = N (q/r1 - 1/r2).  The criterion is stated
    for p >= 1 only.
    """
    if params.p < 1:
        raise HypothesisError(f"hypothesis violated: the index criterion needs p >= 1 (p={params.p})")
    if not (r1 > 1 and r2 > 1):
        raise ValueError("r1 and r2 must lie in (1, inf)")
    N, p, q = params.N, params.p, params.q
    P = N * (p / r2 - 1 / r1)
    Q = N * (q / r1 - 1 / r2)
    return P, Q, max(P, Q) <= 2


def case_b_identity(params: SystemParams) -> float:
    """Residual of -(N/2)(pq-1) + q + 1, zero in case B."""
    return -(params.N / 2) * (params.p * params.q - 1) + params.q + 1


def case_de_margin(params: SystemParams) -> float:
    """q + 1 - (N/2)(pq-1), positive in cases D and E."""
    return params.q + 1 - (params.N / 2) * (params.p * params.q - 1)
