"""Mamdani fuzzy inference: piecewise-linear memberships, min/max operators,
discrete centroid defuzzification.

Rule bases are immutable after construction and inference is pure, so a single
instance may serve any number of concurrent simulations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

LABELS5 = ("NB", "NS", "ZE", "PS", "PB")


@dataclass(frozen=True)
class MembershipFunction:
    """Triangular (a, b, c) or trapezoidal (a, b, c, d) membership."""

    kind: str
    points: tuple[float, ...]

    def __post_init__(self):
        if self.kind == "tri":
            if len(self.points) != 3:
                raise ValueError("triangular MF needs 3 breakpoints")
        elif self.kind == "trap":
            if len(self.points) != 4:
                raise ValueError("trapezoidal MF needs 4 breakpoints")
        else:
            raise ValueError(f"unknown MF kind {self.kind!r}")
        if any(b < a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("MF breakpoints must be non-decreasing")

    @property
    def support(self) -> tuple[float, float]:
        return self.points[0], self.points[-1]


def tri(a: float, b: float, c: float) -> MembershipFunction:
    return MembershipFunction("tri", (a, b, c))


def trap(a: float, b: float, c: float, d: float) -> MembershipFunction:
    return MembershipFunction("trap", (a, b, c, d))


def mf_eval(mf: MembershipFunction, x: float) -> float:
    """Membership of x, zero outside the support; degenerate edges evaluate to 1."""
    if mf.kind == "tri":
        a, b, c = mf.points
        lo_flat, hi_flat = b, b
    else:
        a, b, c, d = mf.points
        lo_flat, hi_flat = b, c
        c = d
    if x < a or x > c:
        return 0.0
    if x < lo_flat:
        return (x - a) / (lo_flat - a) if lo_flat > a else 1.0
    if x <= hi_flat:
        return 1.0
    return (c - x) / (c - hi_flat) if c > hi_flat else 1.0


def _mf_eval_vec(mf: MembershipFunction, xs: np.ndarray) -> np.ndarray:
    if mf.kind == "tri":
        a, b, c = mf.points
        b2 = b
    else:
        a, b, b2, c = mf.points
    rise = (xs - a) / (b - a) if b > a else (xs >= a).astype(float)
    fall = (c - xs) / (c - b2) if c > b2 else (xs <= c).astype(float)
    out = np.minimum(np.minimum(rise, fall), 1.0)
    out[(xs < a) | (xs > c)] = 0.0
    return np.maximum(out, 0.0)


@dataclass(frozen=True)
class LinguisticVariable:
    """Named universe with labeled membership functions covering it without gaps."""

    name: str
    universe: tuple[float, float]
    mfs: Mapping[str, MembershipFunction]

    def __post_init__(self):
        lo, hi = self.universe
        if not lo < hi:
            raise ValueError("universe must satisfy lo < hi")
        if not self.mfs:
            raise ValueError("variable needs at least one membership function")
        object.__setattr__(self, "mfs", dict(self.mfs))
        eps = 1e-9 * (hi - lo)
        covered = lo
        for a, b in sorted(mf.support for mf in self.mfs.values()):
            if a < lo - eps or b > hi + eps:
                raise ValueError(f"{self.name}: MF support [{a}, {b}] leaves the universe")
            if a > covered + eps:
                raise ValueError(f"{self.name}: coverage gap at {covered}")
            covered = max(covered, b)
        if covered < hi - eps:
            raise ValueError(f"{self.name}: coverage gap at {covered}")

    def clamp(self, x: float) -> float:
        return min(max(x, self.universe[0]), self.universe[1])

    def to_dict(self) -> dict:
        return {"name": self.name, "universe": list(self.universe),
                "mfs": {label: {"kind": mf.kind, "points": list(mf.points)}
                        for label, mf in self.mfs.items()}}

    @staticmethod
    def from_dict(data: dict) -> "LinguisticVariable":
        mfs = {label: MembershipFunction(spec["kind"], tuple(spec["points"]))
               for label, spec in data["mfs"].items()}
        return LinguisticVariable(data["name"], tuple(data["universe"]), mfs)


class RuleBase:
    """Complete two-input/one-output Mamdani rule table."""

    def __init__(self, var_in1: LinguisticVariable, var_in2: LinguisticVariable,
                 var_out: LinguisticVariable, table: Mapping[tuple[str, str], str]):
        self.var_in1 = var_in1
        self.var_in2 = var_in2
        self.var_out = var_out
        self.table = dict(table)
        for l1 in var_in1.mfs:
            for l2 in var_in2.mfs:
                if (l1, l2) not in self.table:
                    raise ValueError(f"rule table is missing ({l1}, {l2})")
        for (l1, l2), lout in self.table.items():
            if l1 not in var_in1.mfs or l2 not in var_in2.mfs:
                raise ValueError(f"rule ({l1}, {l2}) names an unknown input label")
            if lout not in var_out.mfs:
                raise ValueError(f"rule ({l1}, {l2}) -> {lout} names an unknown output label")
        self._grid_cache: dict[int, tuple[np.ndarray, dict[str, np.ndarray]]] = {}

    def _grid(self, samples: int) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        cached = self._grid_cache.get(samples)
        if cached is None:
            lo, hi = self.var_out.universe
            xs = np.linspace(lo, hi, samples)
            cached = (xs, {label: _mf_eval_vec(mf, xs)
                           for label, mf in self.var_out.mfs.items()})
            self._grid_cache[samples] = cached
        return cached

    def infer(self, x1: float, x2: float, samples: int = 201) -> float:
        """Mamdani pipeline: min AND/implication, max aggregation, discrete centroid.

        Inputs are clamped to their universes. When no rule fires, the midpoint
        of the output universe is returned.
        """
        if samples < 2:
            raise ValueError("samples must be at least 2")
        x1 = self.var_in1.clamp(x1)
        x2 = self.var_in2.clamp(x2)
        mu1 = {label: mf_eval(mf, x1) for label, mf in self.var_in1.mfs.items()}
        mu2 = {label: mf_eval(mf, x2) for label, mf in self.var_in2.mfs.items()}
        strength: dict[str, float] = {}
        for (l1, l2), lout in self.table.items():
            w = min(mu1[l1], mu2[l2])
            if w > 0.0 and w > strength.get(lout, 0.0):
                strength[lout] = w
        lo, hi = self.var_out.universe
        midpoint = 0.5 * (lo + hi)
        if not strength:
            return midpoint
        xs, mf_samples = self._grid(samples)
        agg = np.zeros_like(xs)
        for lout, w in strength.items():
            np.maximum(agg, np.minimum(w, mf_samples[lout]), out=agg)
        total = float(agg.sum())
        if total == 0.0:
            return midpoint
        return float(np.dot(agg, xs) / total)

    def aggregate(self, x1: float, x2: float, xs: np.ndarray) -> np.ndarray:
        """Aggregated output membership sampled at xs (exposed for test oracles)."""
        x1 = self.var_in1.clamp(x1)
        x2 = self.var_in2.clamp(x2)
        mu1 = {label: mf_eval(mf, x1) for label, mf in self.var_in1.mfs.items()}
        mu2 = {label: mf_eval(mf, x2) for label, mf in self.var_in2.mfs.items()}
        agg = np.zeros_like(xs)
        for (l1, l2), lout in self.table.items():
            w = min(mu1[l1], mu2[l2])
            if w > 0.0:
                np.maximum(agg, np.minimum(w, _mf_eval_vec(self.var_out.mfs[lout], xs)),
                           out=agg)
        return agg

    def clipped_consequents(self, x1: float, x2: float) -> list[tuple[float, MembershipFunction]]:
        """(firing strength, consequent MF) for every fired rule (for test oracles)."""
        x1 = self.var_in1.clamp(x1)
        x2 = self.var_in2.clamp(x2)
        mu1 = {label: mf_eval(mf, x1) for label, mf in self.var_in1.mfs.items()}
        mu2 = {label: mf_eval(mf, x2) for label, mf in self.var_in2.mfs.items()}
        out = []
        for (l1, l2), lout in self.table.items():
            w = min(mu1[l1], mu2[l2])
            if w > 0.0:
                out.append((w, self.var_out.mfs[lout]))
        return out

    def to_dict(self) -> dict:
        return {"inputs": [self.var_in1.to_dict(), self.var_in2.to_dict()],
                "output": self.var_out.to_dict(),
                "rules": [{"if": [l1, l2], "then": lout}
                          for (l1, l2), lout in sorted(self.table.items())]}

    @staticmethod
    def from_dict(data: dict) -> "RuleBase":
        var1 = LinguisticVariable.from_dict(data["inputs"][0])
        var2 = LinguisticVariable.from_dict(data["inputs"][1])
        var_out = LinguisticVariable.from_dict(data["output"])
        table = {(r["if"][0], r["if"][1]): r["then"] for r in data["rules"]}
        return RuleBase(var1, var2, var_out, table)


def infer(rb: RuleBase, x1: float, x2: float, samples: int = 201) -> float:
    return rb.infer(x1, x2, samples)


def five_label_variable(name: str, span: float) -> LinguisticVariable:
    """Five uniformly spaced triangles on [-span, span] with 50% overlap."""
    if span <= 0:
        raise ValueError("span must be positive")
    half = span / 2.0
    centers = [-span, -half, 0.0, half, span]
    mfs = {}
    for label, c in zip(LABELS5, centers):
        a = max(c - half, -span)
        b = min(c + half, span)
        mfs[label] = tri(a, c, b)
    return LinguisticVariable(name, (-span, span), mfs)


def antisymmetric_table() -> dict[tuple[str, str], str]:
    """Default rule table: output index = -(clamped sum of input indices).

    Positive slope error means the operating point sits left of the peak, so
    the duty must fall; severity grows with both inputs.
    """
    table = {}
    for i1, l1 in enumerate(LABELS5):
        for i2, l2 in enumerate(LABELS5):
            s = (i1 - 2) + (i2 - 2)
            s = max(-2, min(2, s))
            table[(l1, l2)] = LABELS5[2 - s]
    return table


def mppt_rule_base(e_span: float = 1.0, ce_span: float = 1.0,
                   out_span: float = 0.02) -> RuleBase:
    """Default controller rule base over normalized slope inputs and a duty-step output."""
    return RuleBase(
        five_label_variable("E", e_span),
        five_label_variable("CE", ce_span),
        five_label_variable("dD", out_span),
        antisymmetric_table(),
    )
