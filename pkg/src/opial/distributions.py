"""Distributions with atoms and piecewise-uniform continuous parts.

A :class:`Distribution` is a mixture of point masses and uniform-density
intervals.  All functional evaluation happens on the canonical pure-atom form
(:class:`QuantizedModel`): atoms pass through untouched, and every uniform
piece of mass ``w`` is replaced by ``m`` atoms of mass ``w/m`` placed at the
conditional quantile midpoints of the piece.  For a purely atomic source the
quantization is exact and evaluation results carry no discretization error.

All values are immutable after construction; every operation is a pure
function, safe for concurrent use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .accumulate import prefix_exclusive

#: Absolute tolerance for probability-mass comparisons.  Support-point
#: comparisons are always exact.
MASS_TOL = 1e-12

#: Guard against runaway node counts when quantizing many pieces.
DEFAULT_MAX_NODES = 2_000_000


class DistributionError(ValueError):
    """Invalid distribution data: bad masses, ordering or overlap."""


@dataclass(frozen=True)
class Piece:
    """Uniform-density interval (lo, hi) carrying total mass `mass`."""

    lo: float
    hi: float
    mass: float


@dataclass(frozen=True)
class Distribution:
    """Probability distribution given by atoms plus uniform pieces.

    Atoms are ``(location, mass)`` pairs; pieces carry a constant density
    ``mass / (hi - lo)`` on the open interval ``(lo, hi)``.  Construction
    sorts atoms, merges duplicate locations, drops zero-mass components and
    validates that the total mass is 1 (within :data:`MASS_TOL`), that piece
    interiors are pairwise disjoint and that no atom sits strictly inside a
    piece.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    pieces: tuple[Piece, ...] = ()

    def __post_init__(self) -> None:
        atoms = [(float(x), float(p)) for x, p in self.atoms]
        pieces = [
            pc if isinstance(pc, Piece) else Piece(*map(float, pc))
            for pc in self.pieces
        ]
        for x, p in atoms:
            if p < 0.0:
                raise DistributionError(f"atom at {x} has negative mass {p}")
            if not math.isfinite(x) or not math.isfinite(p):
                raise DistributionError(f"atom ({x}, {p}) is not finite")
        for pc in pieces:
            if not (math.isfinite(pc.lo) and math.isfinite(pc.hi) and math.isfinite(pc.mass)):
                raise DistributionError(f"piece ({pc.lo}, {pc.hi}, {pc.mass}) is not finite")
            if pc.mass < 0.0:
                raise DistributionError(
                    f"piece ({pc.lo}, {pc.hi}) has negative mass {pc.mass}"
                )
            if not pc.lo < pc.hi:
                raise DistributionError(
                    f"piece ({pc.lo}, {pc.hi}) must satisfy lo < hi"
                )

        # Merge duplicate atom locations; each support point appears once.
        merged: dict[float, float] = {}
        for x, p in atoms:
            if p == 0.0:
                continue
            merged[x] = merged.get(x, 0.0) + p
        atoms = sorted(merged.items())
        pieces = sorted((pc for pc in pieces if pc.mass > 0.0), key=lambda pc: pc.lo)

        for a, b in zip(pieces, pieces[1:]):
            if b.lo < a.hi:
                raise DistributionError(
                    f"pieces ({a.lo}, {a.hi}) and ({b.lo}, {b.hi}) overlap"
                )
        for x, _ in atoms:
            for pc in pieces:
                if pc.lo < x < pc.hi:
                    raise DistributionError(
                        f"atom at {x} lies inside piece ({pc.lo}, {pc.hi})"
                    )

        total = math.fsum([p for _, p in atoms] + [pc.mass for pc in pieces])
        if abs(total - 1.0) > MASS_TOL:
            raise DistributionError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")

        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "pieces", tuple(pieces))

    # -- CDF queries ------------------------------------------------------

    def cdf(self, x: float) -> float:
        """P(X <= x)."""
        parts = [p for loc, p in self.atoms if loc <= x]
        for pc in self.pieces:
            if x >= pc.hi:
                parts.append(pc.mass)
            elif x > pc.lo:
                parts.append(pc.mass * (x - pc.lo) / (pc.hi - pc.lo))
        return math.fsum(parts)

    def left_cdf(self, x: float) -> float:
        """P(X < x)."""
        parts = [p for loc, p in self.atoms if loc < x]
        for pc in self.pieces:
            if x >= pc.hi:
                parts.append(pc.mass)
            elif x > pc.lo:
                parts.append(pc.mass * (x - pc.lo) / (pc.hi - pc.lo))
        return math.fsum(parts)

    def point_mass(self, x: float) -> float:
        """P(X = x); nonzero only at atom locations."""
        for loc, p in self.atoms:
            if loc == x:
                return p
        return 0.0

    # -- serialization ----------------------------------------------------

    @classmethod
    def from_spec_dict(cls, obj: dict) -> "Distribution":
        """Build from the JSON document form.

        ``{"atoms": [[x, p], ...], "pieces": [{"lo": a, "hi": b, "mass": w}, ...]}``
        """
        if not isinstance(obj, dict):
            raise DistributionError("distribution spec must be a JSON object")
        atoms_raw = obj.get("atoms", [])
        pieces_raw = obj.get("pieces", [])
        if not isinstance(atoms_raw, list):
            raise DistributionError("/atoms: expected a list of [x, p] pairs")
        if not isinstance(pieces_raw, list):
            raise DistributionError("/pieces: expected a list of objects")
        atoms = []
        for i, entry in enumerate(atoms_raw):
            if not isinstance(entry, (list, tuple)) or len(entry) != 2:
                raise DistributionError(f"/atoms/{i}: expected a [location, mass] pair")
            atoms.append((float(entry[0]), float(entry[1])))
        pieces = []
        for i, entry in enumerate(pieces_raw):
            if not isinstance(entry, dict):
                raise DistributionError(f"/pieces/{i}: expected an object with lo/hi/mass")
            try:
                pieces.append(Piece(float(entry["lo"]), float(entry["hi"]), float(entry["mass"])))
            except KeyError as exc:
                raise DistributionError(f"/pieces/{i}: missing field {exc.args[0]!r}") from None
        return cls(atoms=tuple(atoms), pieces=tuple(pieces))

    def to_spec_dict(self) -> dict:
        return {
            "atoms": [[x, p] for x, p in self.atoms],
            "pieces": [{"lo": pc.lo, "hi": pc.hi, "mass": pc.mass} for pc in self.pieces],
        }


def make_discrete(points: Sequence[float], probs: Sequence[float]) -> Distribution:
    """Atomic distribution on `points` with masses `probs`.

    Points are sorted and duplicates merged; probabilities must be
    nonnegative and sum to 1 within :data:`MASS_TOL`.
    """
    if len(points) != len(probs):
        raise DistributionError(
            f"got {len(points)} points but {len(probs)} probabilities"
        )
    return Distribution(atoms=tuple(zip(map(float, points), map(float, probs))))


def make_uniform_interval(a: float, b: float) -> Distribution:
    """Uniform distribution on the interval (a, b)."""
    if not a < b:
        raise DistributionError(f"need a < b, got a={a}, b={b}")
    return Distribution(pieces=(Piece(float(a), float(b), 1.0),))


@dataclass(frozen=True)
class QuantizedModel:
    """Canonical pure-atom evaluation form.

    ``support`` is strictly increasing, ``mass`` is positive and sums to 1.
    ``is_exact`` is True when the source distribution had no continuous
    pieces, in which case every evaluation on this model is exact for the
    source.  ``source_m`` records the atomization resolution used.
    """

    support: np.ndarray
    mass: np.ndarray
    is_exact: bool = True
    source_m: int = 1

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=float).ravel()
        mass = np.asarray(self.mass, dtype=float).ravel()
        if support.size == 0:
            raise DistributionError("empty support")
        if support.size != mass.size:
            raise DistributionError(
                f"{support.size} support points but {mass.size} masses"
            )
        if np.any(~np.isfinite(support)) or np.any(~np.isfinite(mass)):
            raise DistributionError("support and mass must be finite")
        if np.any(np.diff(support) <= 0):
            raise DistributionError("support must be strictly increasing")
        if np.any(mass <= 0.0):
            raise DistributionError("all masses must be positive")
        if abs(math.fsum(mass.tolist()) - 1.0) > MASS_TOL:
            raise DistributionError("masses must sum to 1")
        support.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @property
    def node_count(self) -> int:
        return int(self.support.size)

    def left_cum(self) -> np.ndarray:
        """Cumulative mass strictly below each node."""
        return prefix_exclusive(self.mass)

    def midpoint_cdf(self) -> np.ndarray:
        """Half-tie CDF at the nodes: F(x-) + p/2."""
        return self.left_cum() + 0.5 * self.mass

    def cdf_at(self, x: float) -> float:
        """Cumulative mass of nodes <= x."""
        return math.fsum(self.mass[self.support <= x].tolist())


def quantize(dist: Distribution, m: int, max_nodes: int = DEFAULT_MAX_NODES) -> QuantizedModel:
    """Reduce `dist` to a pure-atom model at resolution `m`.

    Atoms pass through unchanged.  A piece of mass ``w`` on ``(lo, hi)``
    becomes ``m`` atoms of mass ``w/m`` at ``lo + (hi-lo)(k-1/2)/m``; those
    midpoints are strictly interior, so they can never collide with atoms or
    with nodes of other pieces.
    """
    if m < 1:
        raise ValueError(f"resolution m must be >= 1, got {m}")
    node_count = len(dist.atoms) + m * len(dist.pieces)
    if node_count > max_nodes:
        raise DistributionError(
            f"quantization would create {node_count} nodes (limit {max_nodes})"
        )
    locs: list[float] = [x for x, _ in dist.atoms]
    masses: list[float] = [p for _, p in dist.atoms]
    for pc in dist.pieces:
        width = pc.hi - pc.lo
        share = pc.mass / m
        for k in range(1, m + 1):
            locs.append(pc.lo + width * (k - 0.5) / m)
            masses.append(share)
    order = np.argsort(np.asarray(locs), kind="stable")
    support = np.asarray(locs, dtype=float)[order]
    mass = np.asarray(masses, dtype=float)[order]
    return QuantizedModel(
        support=support,
        mass=mass,
        is_exact=not dist.pieces,
        source_m=m,
    )


def conditional_truncate(
    dist: Distribution, c: float, side: Literal["lower", "upper"]
) -> tuple[Distribution, float]:
    """Conditional law of X given X <= c (lower) or X > c (upper).

    Returns the conditional distribution together with the probability of the
    conditioning event.  An atom located exactly at `c` belongs to the lower
    side; a piece containing `c` is split exactly at `c`.
    """
    if side not in ("lower", "upper"):
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    atoms: list[tuple[float, float]] = []
    pieces: list[Piece] = []
    if side == "lower":
        atoms = [(x, p) for x, p in dist.atoms if x <= c]
        for pc in dist.pieces:
            if pc.hi <= c:
                pieces.append(pc)
            elif pc.lo < c:
                pieces.append(Piece(pc.lo, c, pc.mass * (c - pc.lo) / (pc.hi - pc.lo)))
    else:
        atoms = [(x, p) for x, p in dist.atoms if x > c]
        for pc in dist.pieces:
            if pc.lo >= c:
                pieces.append(pc)
            elif pc.hi > c:
                pieces.append(Piece(c, pc.hi, pc.mass * (pc.hi - c) / (pc.hi - pc.lo)))
    # Summing the selected components directly keeps the conditional law's
    # total at 1 to the ulp; computing the upper mass as 1 - cdf(c) would
    # cancel catastrophically when the retained side is small.
    p_side = math.fsum([p for _, p in atoms] + [pc.mass for pc in pieces])
    if p_side <= MASS_TOL or p_side >= 1.0 - MASS_TOL:
        raise DistributionError(
            f"conditioning on X {'<=' if side == 'lower' else '>'} {c} leaves probability {p_side!r}"
        )
    scaled_atoms = tuple((x, p / p_side) for x, p in atoms)
    scaled_pieces = tuple(Piece(pc.lo, pc.hi, pc.mass / p_side) for pc in pieces)
    return Distribution(atoms=scaled_atoms, pieces=scaled_pieces), p_side


NODE_FUNCTION_KINDS = ("values", "constant", "identity", "cos_pi_F", "step")


@dataclass(frozen=True)
class NodeFunction:
    """Function attached to the nodes of a quantized model.

    Either an explicit value vector (aligned to the node count of the target
    model) or one of the named analytic families:

    * ``constant`` -- the fixed ``level``,
    * ``identity`` -- the node location itself,
    * ``cos_pi_F`` -- ``cos(pi * Ftilde(x))`` with the half-tie CDF ``Ftilde``,
    * ``step`` -- ``low`` for ``x <= threshold``, else ``high``.
    """

    kind: str
    values: tuple[float, ...] | None = None
    level: float = 1.0
    threshold: float = 0.0
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in NODE_FUNCTION_KINDS:
            raise ValueError(
                f"unknown node-function kind {self.kind!r}; expected one of {NODE_FUNCTION_KINDS}"
            )
        if self.kind == "values":
            if self.values is None:
                raise ValueError("kind 'values' requires a value vector")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def constant(cls, level: float = 1.0) -> "NodeFunction":
        return cls(kind="constant", level=float(level))

    @classmethod
    def identity(cls) -> "NodeFunction":
        return cls(kind="identity")

    @classmethod
    def cos_pi_cdf(cls) -> "NodeFunction":
        return cls(kind="cos_pi_F")

    @classmethod
    def step(cls, threshold: float, low: float, high: float) -> "NodeFunction":
        return cls(kind="step", threshold=float(threshold), low=float(low), high=float(high))

    @classmethod
    def of_values(cls, values: Iterable[float]) -> "NodeFunction":
        return cls(kind="values", values=tuple(float(v) for v in values))

    def resolve(self, model: QuantizedModel) -> np.ndarray:
        """Evaluate at the nodes of `model`."""
        if self.kind == "values":
            assert self.values is not None
            if len(self.values) != model.node_count:
                raise ValueError(
                    f"value vector has {len(self.values)} entries but the model has "
                    f"{model.node_count} nodes"
                )
            return np.asarray(self.values, dtype=float)
        if self.kind == "constant":
            return np.full(model.node_count, self.level)
        if self.kind == "identity":
            return np.array(model.support, dtype=float)
        if self.kind == "cos_pi_F":
            return np.cos(math.pi * model.midpoint_cdf())
        if self.kind == "step":
            return np.where(model.support <= self.threshold, self.low, self.high)
        raise AssertionError(self.kind)

    @classmethod
    def from_spec(cls, spec: dict | str) -> "NodeFunction":
        """Parse the JSON spec form, or a bare family name."""
        if isinstance(spec, str):
            name = spec.strip()
            if name == "constant":
                return cls.constant()
            if name == "identity":
                return cls.identity()
            if name == "cos_pi_F":
                return cls.cos_pi_cdf()
            raise ValueError(f"unknown node-function name {name!r}")
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ValueError("node-function spec must be an object with a 'kind' field")
        kind = spec["kind"]
        if kind == "constant":
            return cls.constant(spec.get("level", 1.0))
        if kind == "identity":
            return cls.identity()
        if kind == "cos_pi_F":
            return cls.cos_pi_cdf()
        if kind == "step":
            try:
                return cls.step(spec["threshold"], spec["low"], spec["high"])
            except KeyError as exc:
                raise ValueError(f"step spec missing field {exc.args[0]!r}") from None
        if kind == "values":
            if "values" not in spec:
                raise ValueError("values spec missing field 'values'")
            return cls.of_values(spec["values"])
        raise ValueError(f"unknown node-function kind {kind!r}")

    def to_spec(self) -> dict:
        if self.kind == "values":
            return {"kind": "values", "values": list(self.values or ())}
        if self.kind == "constant":
            return {"kind": "constant", "level": self.level}
        if self.kind == "step":
            return {
                "kind": "step",
                "threshold": self.threshold,
                "low": self.low,
                "high": self.high,
            }
        return {"kind": self.kind}
