"""Inequality functionals evaluated as explicit term triples.

Every evaluator works on a :class:`~opial.distributions.QuantizedModel` with
nodes ``x_1 < ... < x_m`` and masses ``p_i``, using prefix-sum recurrences
with compensated accumulation.  Results are exact for atomic distributions
and converge at first order under quantization refinement for continuous
ones.

Two tie conventions coexist deliberately.  The pairwise transforms weight the
event ``Y = X`` by one half, which symmetrizes the right-continuous CDF and
makes the first-order bounds exactly tight at constant functions even on
atoms.  The n-th order nested integral instead sums over strictly ordered
tuples with no tie weight, which is what makes atoms force strict inequality
in the n-th order bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .accumulate import comp_sum, prefix_exclusive, suffix_exclusive
from .distributions import (
    Distribution,
    NodeFunction,
    QuantizedModel,
    conditional_truncate,
    make_uniform_interval,
    quantize,
)

#: Relative tolerance of the equality flag on reports.
EQUALITY_TOL = 1e-10

#: Relative tolerance on the zero-mean side condition.
ZERO_MEAN_TOL = 1e-10

#: Default quantization resolution where an operation needs one.
DEFAULT_RESOLUTION = 512

#: Default cap on the nested-integral order; beyond this the values are
#: rarely distinguishable from 0 in double precision at moderate resolution.
ORDER_CAP = 6

INV_PI_SQ = 1.0 / math.pi**2

Direction = Literal["below", "above"]

#: Stable external functional identifiers.
FUNCTIONAL_IDS = (
    "thm1-lower",
    "thm1-upper",
    "corollary",
    "thm2",
    "thm3",
    "weighted-lower",
    "weighted-upper",
    "wirtinger",
    "o9-1",
    "o9-2",
    "o15",
    "o18",
    "rtwo",
    "troy",
)

DISCRETE_IDENTITY_IDS = ("o9-1", "o9-2", "o15", "o18")


class ZeroMeanError(ValueError):
    """Input violates the zero-mean side condition."""


@dataclass(frozen=True)
class IneqReport:
    """One evaluated inequality instance.

    ``terms`` holds the named sides (lhs, middle where defined, rhs, ...).
    ``slack`` is rhs minus the tightest left-hand term, ``ratio`` that term
    over rhs (0 when rhs is 0), and ``equality`` tests
    ``slack <= tol * max(1, |rhs|)``.  ``m`` is the quantization resolution
    and ``exact`` whether the model evaluated had no discretization error.
    """

    functional: str
    terms: dict[str, float]
    slack: float
    ratio: float
    equality: bool
    m: int
    exact: bool
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc = {
            "functional": self.functional,
            "terms": {k: float(v) for k, v in self.terms.items()},
            "slack": float(self.slack),
            "ratio": float(self.ratio),
            "equality": bool(self.equality),
            "m": int(self.m),
            "exact": bool(self.exact),
        }
        for key, value in self.extras.items():
            doc[key] = value
        return doc


def _build_report(
    functional: str,
    terms: dict[str, float],
    tight: float,
    rhs: float,
    m: int,
    exact: bool,
    tol: float = EQUALITY_TOL,
    extras: dict | None = None,
) -> IneqReport:
    slack = rhs - tight
    ratio = 0.0 if rhs == 0.0 else tight / rhs
    equality = slack <= tol * max(1.0, abs(rhs))
    return IneqReport(
        functional=functional,
        terms=terms,
        slack=slack,
        ratio=ratio,
        equality=equality,
        m=m,
        exact=exact,
        extras=extras or {},
    )


def _as_values(psi, model: QuantizedModel) -> np.ndarray:
    """Resolve a NodeFunction or raw vector against `model`."""
    if isinstance(psi, NodeFunction):
        return psi.resolve(model)
    vals = np.asarray(psi, dtype=float).ravel()
    if vals.size != model.node_count:
        raise ValueError(
            f"value vector has {vals.size} entries but the model has "
            f"{model.node_count} nodes"
        )
    return vals


def _check_direction(direction: str) -> None:
    if direction not in ("below", "above"):
        raise ValueError(f"direction must be 'below' or 'above', got {direction!r}")


# ---------------------------------------------------------------------------
# first-order (pairwise) inequalities
# ---------------------------------------------------------------------------


def half_tie_transform(model: QuantizedModel, psi, direction: Direction = "below") -> np.ndarray:
    """Half-tie weighted conditional sums, one value per node.

    below:  T-_i = sum_{j<i} p_j psi_j + p_i psi_i / 2
    above:  T+_i = sum_{j>i} p_j psi_j + p_i psi_i / 2

    Computed by a single compensated forward (resp. backward) pass.
    """
    _check_direction(direction)
    vals = _as_values(psi, model)
    weighted = model.mass * vals
    if direction == "below":
        return prefix_exclusive(weighted) + 0.5 * weighted
    return suffix_exclusive(weighted) + 0.5 * weighted


def opial_terms(
    model: QuantizedModel,
    psi,
    direction: Direction = "below",
    tol: float = EQUALITY_TOL,
) -> IneqReport:
    """First-order inequality chain lhs <= middle <= rhs.

    lhs    = E |T(X) psi(X)|          (T the half-tie transform of psi)
    middle = E |psi(X)| Tabs(X)       (Tabs the transform of |psi|)
    rhs    = E psi(X)^2 / 2

    Equality throughout iff psi is constant on the support.
    """
    _check_direction(direction)
    vals = _as_values(psi, model)
    p = model.mass
    t_signed = half_tie_transform(model, vals, direction)
    t_abs = half_tie_transform(model, np.abs(vals), direction)
    lhs = comp_sum(p * np.abs(t_signed * vals))
    middle = comp_sum(p * np.abs(vals) * t_abs)
    rhs = 0.5 * comp_sum(p * vals * vals)
    functional = "thm1-lower" if direction == "below" else "thm1-upper"
    return _build_report(
        functional,
        {"lhs": lhs, "middle": middle, "rhs": rhs},
        tight=middle,
        rhs=rhs,
        m=model.source_m,
        exact=model.is_exact,
        tol=tol,
    )


def corollary_split(
    dist: Distribution,
    psi,
    c: float,
    m: int = DEFAULT_RESOLUTION,
    tol: float = EQUALITY_TOL,
) -> IneqReport:
    """Two-sided split at `c`: below-form on X <= c plus above-form on X > c.

    Each conditional law gets its own first-order evaluation; the right-hand
    side is E[psi^2 (1_{X<=c}/p + 1_{X>c}/(1-p))]/2 with p = P(X <= c).
    Equality iff psi is constant on each side separately.

    Named node-function families are resolved against each conditional model
    (in particular cos_pi_F uses the conditional CDF); explicit value vectors
    align with the full support and therefore require an atomic distribution.
    """
    lower_dist, p_low = conditional_truncate(dist, c, "lower")
    upper_dist, p_up = conditional_truncate(dist, c, "upper")
    q_low = quantize(lower_dist, m)
    q_up = quantize(upper_dist, m)

    is_vector = not isinstance(psi, NodeFunction) or psi.kind == "values"
    if is_vector:
        # An explicit value vector is aligned to the full quantized support;
        # it can only be split at c when that support survives the split,
        # i.e. for purely atomic distributions.
        if dist.pieces:
            raise ValueError(
                "explicit value vectors cannot be split at c for distributions "
                "with continuous pieces; use a named node-function family"
            )
        full = quantize(dist, m)
        vals = _as_values(psi, full)
        vals_low = vals[full.support <= c]
        vals_up = vals[full.support > c]
    else:
        vals_low = psi.resolve(q_low)
        vals_up = psi.resolve(q_up)

    rep_low = opial_terms(q_low, vals_low, "below", tol=tol)
    rep_up = opial_terms(q_up, vals_up, "above", tol=tol)
    terms = {
        "lhs": rep_low.terms["lhs"] + rep_up.terms["lhs"],
        "middle": rep_low.terms["middle"] + rep_up.terms["middle"],
        "rhs": rep_low.terms["rhs"] + rep_up.terms["rhs"],
    }
    return _build_report(
        "corollary",
        terms,
        tight=terms["middle"],
        rhs=terms["rhs"],
        m=m,
        exact=q_low.is_exact and q_up.is_exact,
        tol=tol,
        extras={"c": float(c), "p_lower": float(p_low)},
    )


# ---------------------------------------------------------------------------
# n-th order inequality
# ---------------------------------------------------------------------------


def nested_integral(model: QuantizedModel, psi, n: int, order_cap: int = ORDER_CAP) -> np.ndarray:
    """n-fold nested integral over strictly ordered arguments below each node.

    I_1(x_i) = sum_{x_j < x_i} p_j psi_j,
    I_k(x_i) = sum_{x_j < x_i} p_j I_{k-1}(x_j).

    Strict inequalities throughout: ties carry no weight here, unlike the
    half-tie transform.
    """
    if n < 1:
        raise ValueError(f"order n must be >= 1, got {n}")
    if n > order_cap:
        raise ValueError(f"order n={n} exceeds the cap {order_cap}")
    cur = _as_values(psi, model)
    for _ in range(n):
        cur = prefix_exclusive(model.mass * cur)
    return cur


def theorem2_terms(
    model: QuantizedModel,
    psi,
    n: int,
    order_cap: int = ORDER_CAP,
    tol: float = EQUALITY_TOL,
) -> IneqReport:
    """n-th order inequality E|I_n(X) psi(X)| <= E psi^2 / (n+1)!.

    On atomic inputs the bound is strict for nonzero psi; equality is only
    approached by refining quantizations of continuous distributions with
    constant psi.
    """
    vals = _as_values(psi, model)
    i_n = nested_integral(model, vals, n, order_cap)
    p = model.mass
    lhs = comp_sum(p * np.abs(i_n * vals))
    rhs = comp_sum(p * vals * vals) / math.factorial(n + 1)
    return _build_report(
        "thm2",
        {"lhs": lhs, "rhs": rhs},
        tight=lhs,
        rhs=rhs,
        m=model.source_m,
        exact=model.is_exact,
        tol=tol,
        extras={"n": int(n), "strict_for_atoms": bool(model.is_exact)},
    )


# ---------------------------------------------------------------------------
# second-order inequality with atom corrections
# ---------------------------------------------------------------------------


def theorem3_terms(model: QuantizedModel, psi, tol: float = EQUALITY_TOL) -> IneqReport:
    """Second-order inequality that is sharp for atomic distributions too.

    With a = |psi| and the double sums

      J_i  = sum_{j<i} p_j sum_{k<j} p_k a_k,
      JD_i = sum_{j<i} p_j a_j (p_j + p_i),

    the inequality reads

      6 E(J(X) a(X)) + 3 E(JD(X) a(X)) <= E(psi^2 (1 - p(X)^2)),

    with equality iff psi is constant on the support; the tie terms JD and
    the p^2 correction on the right absorb exactly what atoms remove from the
    strictly ordered region.
    """
    vals = _as_values(psi, model)
    a = np.abs(vals)
    p = model.mass
    s1 = prefix_exclusive(p * a)
    j = prefix_exclusive(p * s1)
    jd = prefix_exclusive(p * p * a) + p * s1
    lhs = 6.0 * comp_sum(p * j * a) + 3.0 * comp_sum(p * jd * a)
    rhs = comp_sum(p * vals * vals * (1.0 - p * p))
    return _build_report(
        "thm3",
        {"lhs": lhs, "rhs": rhs},
        tight=lhs,
        rhs=rhs,
        m=model.source_m,
        exact=model.is_exact,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# weighted inequalities
# ---------------------------------------------------------------------------


def weighted_opial_terms(
    model: QuantizedModel,
    psi,
    chi,
    direction: Direction = "below",
    tol: float = EQUALITY_TOL,
) -> IneqReport:
    """First-order inequality with a nonnegative weight chi on the outer node.

    For direction below,

      lhs    = E |T-(X) psi(X)| chi(X)
      middle = E |psi(X)| chi(X) Tabs-(X)
      rhs    = E psi^2(X) [chi(X)(C(X) + p(X)/2) + R(X)] / 2

    with C(X) the mass strictly below X and R(X) the half-tie weighted sum of
    chi strictly above X.  The direction 'above' mirrors everything.  When
    chi is monotone the right way (nonincreasing for below, nondecreasing for
    above) the simpler bound E psi^2 chi / 2 applies; it is emitted as
    ``monotone_bound`` with an applicability flag.
    """
    _check_direction(direction)
    vals = _as_values(psi, model)
    weights = _as_values(chi, model)
    if np.any(weights < 0.0):
        raise ValueError("weight chi must be nonnegative at all nodes")
    p = model.mass
    t_signed = half_tie_transform(model, vals, direction)
    t_abs = half_tie_transform(model, np.abs(vals), direction)
    lhs = comp_sum(p * np.abs(t_signed * vals) * weights)
    middle = comp_sum(p * np.abs(vals) * weights * t_abs)
    if direction == "below":
        near = prefix_exclusive(p)
        far = suffix_exclusive(p * weights) + 0.5 * p * weights
        monotone_ok = bool(np.all(np.diff(weights) <= 0.0))
    else:
        near = suffix_exclusive(p)
        far = prefix_exclusive(p * weights) + 0.5 * p * weights
        monotone_ok = bool(np.all(np.diff(weights) >= 0.0))
    rhs = 0.5 * comp_sum(p * vals * vals * (weights * (near + 0.5 * p) + far))
    monotone_bound = 0.5 * comp_sum(p * vals * vals * weights)
    functional = "weighted-lower" if direction == "below" else "weighted-upper"
    return _build_report(
        functional,
        {"lhs": lhs, "middle": middle, "rhs": rhs, "monotone_bound": monotone_bound},
        tight=middle,
        rhs=rhs,
        m=model.source_m,
        exact=model.is_exact,
        tol=tol,
        extras={"monotone_applicable": monotone_ok},
    )


@dataclass(frozen=True)
class TroyComparison:
    """Weighted bound comparison for chi(x) = x^p on uniform (0, 1).

    ``our_lhs``/``our_rhs`` come from the weighted evaluation (sharp: tight
    at constant psi); ``troy_rhs`` is the classical bound
    E psi^2 / (2 sqrt(p+1)), which constant psi does not attain for p > 0.
    """

    p_exp: float
    m: int
    our_lhs: float
    our_rhs: float
    troy_rhs: float

    def to_json_dict(self) -> dict:
        return {
            "functional": "troy",
            "p_exp": float(self.p_exp),
            "m": int(self.m),
            "our_lhs": float(self.our_lhs),
            "our_rhs": float(self.our_rhs),
            "troy_rhs": float(self.troy_rhs),
        }


def troy_comparison(p_exp: float, psi, m: int = DEFAULT_RESOLUTION) -> TroyComparison:
    """Evaluate both weighted bounds for chi(x) = x^p on uniform (0, 1)."""
    if p_exp <= -1.0:
        raise ValueError(f"weight exponent must exceed -1, got {p_exp}")
    model = quantize(make_uniform_interval(0.0, 1.0), m)
    chi = model.support ** p_exp
    vals = _as_values(psi, model)
    report = weighted_opial_terms(model, vals, chi, "below")
    troy_rhs = comp_sum(model.mass * vals * vals) / (2.0 * math.sqrt(p_exp + 1.0))
    return TroyComparison(
        p_exp=float(p_exp),
        m=m,
        our_lhs=report.terms["lhs"],
        our_rhs=report.terms["rhs"],
        troy_rhs=troy_rhs,
    )


# ---------------------------------------------------------------------------
# Wirtinger-type inequality
# ---------------------------------------------------------------------------


def wirtinger_terms(
    model: QuantizedModel,
    psi,
    project: bool = False,
    mean_tol: float = ZERO_MEAN_TOL,
    tol: float = EQUALITY_TOL,
) -> IneqReport:
    """Wirtinger-type bound E (sum_{x_j<X} p_j psi_j)^2 <= E psi^2 / pi^2.

    Requires E psi = 0.  With ``project`` the mean is removed first;
    otherwise a violation raises :class:`ZeroMeanError`.  The bound is a
    theorem for (quantizations of) absolutely continuous distributions; on
    genuinely atomic input the report is still produced but flagged
    ``heuristic`` and the bound may fail.
    """
    vals = _as_values(psi, model)
    p = model.mass
    mean = comp_sum(p * vals)
    scale = max(1.0, math.sqrt(comp_sum(p * vals * vals)))
    if abs(mean) > mean_tol * scale:
        if not project:
            raise ZeroMeanError(
                f"E psi = {mean!r} violates the zero-mean condition "
                f"(tolerance {mean_tol} relative); pass project=True to remove the mean"
            )
        vals = vals - mean
    low = prefix_exclusive(p * vals)
    lhs = comp_sum(p * low * low)
    rhs = INV_PI_SQ * comp_sum(p * vals * vals)
    return _build_report(
        "wirtinger",
        {"lhs": lhs, "rhs": rhs},
        tight=lhs,
        rhs=rhs,
        m=model.source_m,
        exact=model.is_exact,
        tol=tol,
        extras={"heuristic": bool(model.is_exact)},
    )


# ---------------------------------------------------------------------------
# discrete sequence identities
# ---------------------------------------------------------------------------


def _require_zero_sum(a: np.ndarray, which: str, mean_tol: float) -> None:
    total = comp_sum(a)
    scale = max(1.0, comp_sum(np.abs(a)))
    if abs(total) > mean_tol * scale:
        raise ZeroMeanError(f"{which} requires sum(a) = 0; got {total!r}")


def discrete_identities(
    a,
    which: str,
    tol: float = EQUALITY_TOL,
    mean_tol: float = ZERO_MEAN_TOL,
) -> IneqReport:
    """Classical discrete inequalities, both sides evaluated literally.

    o9-1: sum_i |a_i sum_{j<=i} a_j|            <= (N+1)/2 sum a^2
    o9-2: sum_i sum_{j<=i} |a_i a_j|            <= (N+1)/2 sum a^2
    o15:  sum_i |a_i (sum_{j<i} a_j + a_i/2)|   <= N/4 sum a^2      (sum a = 0)
    o18:  sum_i |a_i sum_{j<i} a_j|             <= floor((N+1)/2)/2 sum a^2
                                                                    (sum a = 0)
    """
    key = which.replace("_", "-")
    if key not in DISCRETE_IDENTITY_IDS:
        raise ValueError(f"unknown discrete identity {which!r}; expected one of {DISCRETE_IDENTITY_IDS}")
    arr = np.asarray(a, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty coefficient vector")
    n = arr.size
    sum_sq = comp_sum(arr * arr)
    if key == "o9-1":
        incl = prefix_exclusive(arr) + arr
        lhs = comp_sum(np.abs(arr * incl))
        rhs = 0.5 * (n + 1) * sum_sq
    elif key == "o9-2":
        mags = np.abs(arr)
        lhs = comp_sum(mags * (prefix_exclusive(mags) + mags))
        rhs = 0.5 * (n + 1) * sum_sq
    elif key == "o15":
        _require_zero_sum(arr, "o15", mean_tol)
        lhs = comp_sum(np.abs(arr * (prefix_exclusive(arr) + 0.5 * arr)))
        rhs = 0.25 * n * sum_sq
    else:  # o18
        _require_zero_sum(arr, "o18", mean_tol)
        lhs = comp_sum(np.abs(arr * prefix_exclusive(arr)))
        rhs = 0.5 * ((n + 1) // 2) * sum_sq
    return _build_report(
        key,
        {"lhs": lhs, "rhs": rhs},
        tight=lhs,
        rhs=rhs,
        m=n,
        exact=True,
        tol=tol,
    )


def rtwo_terms(a, tol: float = EQUALITY_TOL) -> IneqReport:
    """Second-order discrete form 6 sum_i sum_{j<=i} (i-j) a_i a_j <= (N^2-1) sum a^2.

    Requires a >= 0.  Evaluated by the literal double sum so that the
    identity with the second-order functional on a uniform integer support is
    an actual cross-check rather than shared code.
    """
    arr = np.asarray(a, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty coefficient vector")
    if np.any(arr < 0.0):
        raise ValueError("rtwo expects nonnegative coefficients")
    n = arr.size
    vals = arr.tolist()
    total = 0.0
    for i in range(n):
        inner = 0.0
        for j in range(i + 1):
            inner += (i - j) * vals[j]
        total += vals[i] * inner
    lhs = 6.0 * total
    rhs = (n * n - 1.0) * comp_sum(arr * arr)
    return _build_report(
        "rtwo",
        {"lhs": lhs, "rhs": rhs},
        tight=lhs,
        rhs=rhs,
        m=n,
        exact=True,
        tol=tol,
    )
