"""Small predicate language for guards and mode invariants."""

from __future__ import annotations

import math
import operator
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Any

# Guards written as "tau == tau_I" are evaluated as tau >= tau_I - TIMER_EPS so
# that a sampled timer cannot step over the threshold.
TIMER_EPS = 1e-9


class Expr:
    def evaluate(self, env: Mapping[str, Any]) -> Any:
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: Any

    def evaluate(self, env):
        return self.value

    def variables(self):
        return frozenset()

    def __str__(self) -> str:
        if self.value is True:
            return "true"
        if self.value is False:
            return "false"
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def evaluate(self, env):
        return env[self.name]

    def variables(self):
        return frozenset({self.name})

    def __str__(self) -> str:
        return self.name


_CMP: dict[str, Callable[[Any, Any], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


@dataclass(frozen=True)
class Cmp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in _CMP:
            raise ValueError(f"unknown comparison {self.op!r}")

    def evaluate(self, env):
        return bool(_CMP[self.op](self.left.evaluate(env), self.right.evaluate(env)))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    def evaluate(self, env):
        return not self.arg.evaluate(env)

    def variables(self):
        return self.arg.variables()

    def __str__(self) -> str:
        return f"not ({self.arg})"


@dataclass(frozen=True)
class And(Expr):
    args: tuple[Expr, ...]

    def evaluate(self, env):
        return all(a.evaluate(env) for a in self.args)

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return "true"
        return " and ".join(f"({a})" for a in self.args)


@dataclass(frozen=True)
class Or(Expr):
    args: tuple[Expr, ...]

    def evaluate(self, env):
        return any(a.evaluate(env) for a in self.args)

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return "false"
        return " or ".join(f"({a})" for a in self.args)


def _linf_dist(a, b) -> float:
    if len(a) != len(b):
        raise ValueError("linf_dist of vectors with different lengths")
    return max((abs(x - y) for x, y in zip(a, b)), default=0.0)


def _concat(*vectors) -> tuple:
    out: list = []
    for v in vectors:
        out.extend(v)
    return tuple(out)


FUNCTIONS: dict[str, Callable[..., Any]] = {
    "linf_dist": _linf_dist,
    "concat": _concat,
    "abs": abs,
    "isnan": math.isnan,
}


@dataclass(frozen=True)
class Apply(Expr):
    fn: str
    args: tuple[Expr, ...]

    def __post_init__(self) -> None:
        if self.fn not in FUNCTIONS:
            raise ValueError(f"unknown function {self.fn!r}")

    def evaluate(self, env):
        return FUNCTIONS[self.fn](*(a.evaluate(env) for a in self.args))

    def variables(self):
        return frozenset().union(*(a.variables() for a in self.args))

    def __str__(self) -> str:
        return f"{self.fn}({', '.join(str(a) for a in self.args)})"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class TimerReached(Expr):
    """Sampling-robust form of ``timer == threshold`` for a count-up timer."""

    name: str
    threshold: float

    def evaluate(self, env):
        return bool(env[self.name] >= self.threshold - TIMER_EPS)

    def variables(self):
        return frozenset({self.name})

    def __str__(self) -> str:
        return f"{self.name} >= {self.threshold!r}"


def timer_reached(name: str, threshold: float) -> Expr:
    return TimerReached(name, float(threshold))


def is_true(name: str) -> Expr:
    return Cmp("==", Var(name), TRUE)
