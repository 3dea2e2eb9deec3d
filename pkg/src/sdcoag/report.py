"""Structured pass/fail records produced by checks and experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass
class Observation:
    """One observed quantity and the threshold it is held to.

    ``relation`` is one of ``"<="``, ``"<"``, ``">="``, ``">"``, ``"=="``,
    ``"in"`` (closed interval ``[lo, hi]``) or ``"info"``; ``info`` entries are
    recorded but never gate the result.
    """

    quantity: str
    value: Any
    threshold: Any = None
    relation: str = "info"

    @property
    def passed(self) -> bool:
        return bool(self._check())

    def _check(self):
        if self.relation == "info":
            return True
        v, t = self.value, self.threshold
        if isinstance(v, float) and math.isnan(v):
            return False
        if self.relation == "<=":
            return v <= t
        if self.relation == "<":
            return v < t
        if self.relation == ">=":
            return v >= t
        if self.relation == ">":
            return v > t
        if self.relation == "==":
            return v == t
        if self.relation == "in":
            return t[0] <= v <= t[1]
        raise ValueError(f"unknown relation {self.relation!r}")

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "value": self.value.item() if hasattr(self.value, "item") else self.value,
            "threshold": self.threshold,
            "relation": self.relation,
            "passed": self.passed,
        }


@dataclass
class ExperimentReport:
    name: str
    claim: str
    parameters: dict = field(default_factory=dict)
    observed: list[Observation] = field(default_factory=list)
    exploratory: bool = False
    experiment: str = ""
    # name -> (header, rows); written to CSV next to the JSON report
    data: dict[str, tuple[list[str], list[list[float]]]] = field(
        default_factory=dict, repr=False
    )

    def observe(self, quantity, value, threshold=None, relation="info"):
        obs = Observation(quantity, value, threshold, relation)
        self.observed.append(obs)
        return obs

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.observed)

    @property
    def threshold(self) -> dict:
        return {
            o.quantity: [o.relation, o.threshold]
            for o in self.observed
            if o.relation != "info"
        }

    def failures(self) -> list[Observation]:
        return [o for o in self.observed if not o.passed]

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.exploratory:
            tag += " (exploratory)"
        return f"[{tag}] {self.name}"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "experiment": self.experiment,
            "claim": self.claim,
            "parameters": self.parameters,
            "observed": [o.to_dict() for o in self.observed],
            "threshold": self.threshold,
            "exploratory": self.exploratory,
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        rep = cls(
            name=d["name"],
            claim=d.get("claim", ""),
            parameters=d.get("parameters", {}),
            exploratory=d.get("exploratory", False),
            experiment=d.get("experiment", ""),
        )
        for o in d.get("observed", []):
            rep.observe(o["quantity"], o["value"], o["threshold"], o["relation"])
        return rep
