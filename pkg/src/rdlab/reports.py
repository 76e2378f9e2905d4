"""Verdict records produced by the certifiers and experiments.

Every report can render itself as one line of text and as CSV rows. Numbers
are written with 17 significant digits so repeated runs are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PASS = "pass"
FAIL = "fail"
PASS_WITH_CONSTANT = "pass-with-constant"

# Reports on computed trajectories carry this caveat in their header.
NONUNIQUENESS_NOTE = (
    "scheme trajectories are one computable solution per datum; "
    "they need not coincide with any particular weak solution when uniqueness fails"
)


def fmt(x) -> str:
    """Format a scalar with 17 significant digits (ints and strings pass through)."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def passed(verdict: str) -> bool:
    return verdict in (PASS, PASS_WITH_CONSTANT)


@dataclass(frozen=True)
class Witness:
    t: float
    u: tuple[float, ...]
    margin: float
    v: tuple[float, ...] | None = None
    component: int | None = None

    def coords(self) -> str:
        parts = [f"t={fmt(self.t)}", "u=(" + ";".join(fmt(x) for x in self.u) + ")"]
        if self.v is not None:
            parts.append("v=(" + ";".join(fmt(x) for x in self.v) + ")")
        if self.component is not None:
            parts.append(f"i={self.component}")
        return " ".join(parts)


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    verdict: str
    constants: dict = field(default_factory=dict)
    witness: Witness | None = None
    n_samples: int = 0
    seed: int | None = None
    note: str = ""

    def __post_init__(self):
        if self.verdict == FAIL and (self.witness is None or not self.witness.margin < 0):
            raise ValueError(f"{self.condition}: a fail verdict needs a strictly violating witness")

    @property
    def ok(self) -> bool:
        return passed(self.verdict)

    def to_line(self) -> str:
        consts = " ".join(f"{k}={fmt(v)}" for k, v in self.constants.items())
        line = f"{self.condition}: {self.verdict} on {self.n_samples} samples (seed {self.seed})"
        if consts:
            line += f" [{consts}]"
        if self.witness is not None:
            line += f" worst {self.witness.coords()} margin={fmt(self.witness.margin)}"
        if self.note:
            line += f" -- {self.note}"
        return line

    def csv_rows(self):
        w = self.witness
        coords = w.coords() if w else ""
        margin = fmt(w.margin) if w else ""
        if not self.constants:
            yield [self.condition, self.verdict, "", "", coords, margin]
        for name, value in self.constants.items():
            yield [self.condition, self.verdict, name, fmt(value), coords, margin]


CONDITION_CSV_HEADER = ["condition", "verdict", "constant", "value", "witness", "margin"]


@dataclass(frozen=True)
class EstimateReport:
    """Outcome of an a-posteriori inequality check on trajectories."""

    name: str
    verdict: str
    worst_margin: float
    tolerance: float
    where: str = ""
    constants: dict = field(default_factory=dict)
    note: str = ""

    @property
    def ok(self) -> bool:
        return passed(self.verdict)

    def to_line(self) -> str:
        consts = " ".join(f"{k}={fmt(v)}" for k, v in self.constants.items())
        line = (
            f"{self.name}: {self.verdict} worst slack={fmt(self.worst_margin)} "
            f"(tolerance {fmt(self.tolerance)})"
        )
        if self.where:
            line += f" at {self.where}"
        if consts:
            line += f" [{consts}]"
        if self.note:
            line += f" -- {self.note}"
        return line


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    pair: tuple[str, str]
    times: np.ndarray
    positive_part: np.ndarray
    envelope: np.ndarray
    tolerance: float
    max_violation: float
    verdict: str
    dt: float
    grid_summary: str
    C3: float
    epsilon: float = 0.0
    R0_required: float = 0.0
    R0_covered: dict = field(default_factory=dict)
    gronwall_margin: np.ndarray | None = None
    min_value: float = 0.0
    trajectories: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return passed(self.verdict)

    def header(self) -> str:
        return (
            f"# comparison {self.pair[0]} <= {self.pair[1]} on {self.grid_summary}, dt={fmt(self.dt)}\n"
            f"# {NONUNIQUENESS_NOTE}"
        )

    def to_line(self) -> str:
        covered = ", ".join(f"{k}:{'yes' if v else 'no'}" for k, v in self.R0_covered.items())
        return (
            f"compare {self.pair[0]} vs {self.pair[1]}: {self.verdict} "
            f"max violation={fmt(self.max_violation)} tol={fmt(self.tolerance)} "
            f"min value={fmt(self.min_value)} C3={fmt(self.C3)} "
            f"R0^2 required={fmt(self.R0_required)} cooperativity covers [{covered}]"
        )

    def csv_rows(self):
        for t, g, env in zip(self.times, self.positive_part, self.envelope):
            yield [fmt(t), fmt(g), fmt(env), fmt(int(g > self.tolerance))]


COMPARISON_CSV_HEADER = ["t", "positive_part_norm", "envelope", "violation_flag"]
