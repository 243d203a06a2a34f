"""Whitelisted arithmetic expressions for configs: step rules, schedules and
inline scalar models.

An expression is parsed with ``ast`` and rejected unless it uses numbers,
arithmetic, comparisons, conditional expressions, known variables and the
functions in ``FUNCTIONS``. Accepted expressions are turned into ordinary
Python functions and, for model coefficients, into numba-compiled twins.
"""
from __future__ import annotations

import ast
import math
from typing import Callable, Dict, Iterable, Sequence

import numpy as np
from numba import njit

from .errors import ConfigError

FUNCTIONS = {
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt, "sin": math.sin, "cos": math.cos,
    "tanh": math.tanh, "abs": abs, "floor": math.floor, "ceil": math.ceil,
    "min": min, "max": max,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load, ast.Call,
    ast.Compare, ast.IfExp, ast.BoolOp,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.FloorDiv, ast.Mod, ast.Pow, ast.USub, ast.UAdd,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq, ast.And, ast.Or,
)


class Expression:
    """A checked expression over a fixed set of variable names."""

    def __init__(self, source, variables: Iterable[str], field: str = "expression",
                 functions: Dict[str, Callable] = None):
        if isinstance(source, (int, float)) and not isinstance(source, bool):
            source = repr(float(source))
        if not isinstance(source, str):
            raise ConfigError(f"{field}: expected an expression string, got {source!r}")
        self.source = source
        self.field = field
        self.variables = tuple(variables)
        self.functions = dict(FUNCTIONS, **(functions or {}))
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"{field}: cannot parse {source!r}: {exc.msg}") from None
        names = set()
        for node in ast.walk(tree):
            if not isinstance(node, _NODES):
                raise ConfigError(f"{field}: {type(node).__name__} not allowed in {source!r}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ConfigError(f"{field}: only numeric constants allowed in {source!r}")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in self.functions:
                    raise ConfigError(f"{field}: unknown function in {source!r}")
                if node.keywords:
                    raise ConfigError(f"{field}: keyword arguments not allowed in {source!r}")
            if isinstance(node, ast.Name) and not _is_call_target(tree, node):
                names.add(node.id)
        unknown = names - set(self.variables) - set(CONSTANTS)
        if unknown:
            raise ConfigError(f"{field}: unknown name(s) {sorted(unknown)} in {source!r}")
        self.names = names
        self._code = compile(tree, f"<{field}>", "eval")

    def uses(self, name: str) -> bool:
        return name in self.names

    def __call__(self, **values):
        env = dict(CONSTANTS, **self.functions, **values)
        try:
            return eval(self._code, {"__builtins__": {}}, env)
        except (ArithmeticError, ValueError, TypeError) as exc:
            raise ConfigError(f"{self.field}: evaluating {self.source!r} failed: {exc}") from None


def _is_call_target(tree, name_node):
    for node in ast.walk(tree):
        if isinstance(node, ast.Call) and node.func is name_node:
            return True
    return False


def integer_rule(source, variable: str, field: str) -> Callable[[int], int]:
    """Rule such as ``floor(10*M**1.4)`` mapping an integer to a positive integer."""
    expr = Expression(source, (variable,), field)

    def rule(v):
        out = expr(**{variable: v})
        if isinstance(out, float):
            if not math.isfinite(out) or out != math.floor(out):
                raise ConfigError(f"{field}: {source!r} gave non-integer {out} at {variable}={v}")
            out = int(out)
        if not isinstance(out, int) or out < 1:
            raise ConfigError(f"{field}: {source!r} gave {out!r} at {variable}={v}; need an integer >= 1")
        return out

    return rule


def compile_scalar(source, args: Sequence[str], params: Dict[str, float], field: str):
    """``(python_fn, numba_fn)`` for ``f(*args, prm)`` with parameters read
    from the array ``prm`` in the order of ``params``."""
    expr = Expression(source, tuple(args) + tuple(params), field)
    lines = [f"def _f({', '.join(args)}, prm):"]
    for i, name in enumerate(params):
        lines.append(f"    {name} = prm[{i}]")
    lines.append(f"    return float({expr.source.strip()})")
    src = "\n".join(lines)
    namespace = dict(CONSTANTS, **FUNCTIONS)
    namespace["abs"] = abs
    exec(compile(src, f"<{field}>", "exec"), namespace)
    py_fn = namespace["_f"]
    return py_fn, njit(py_fn), expr
