"""Tiny whitelisted arithmetic expressions for config-declared profiles.

Expressions may reference the macroscopic coordinates u1..ud (and, for
boundary data, the transverse coordinates), numpy-vectorized math functions,
and pi.  Anything else is rejected up front.
"""
from __future__ import annotations

import ast

import numpy as np

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "tanh": np.tanh,
    "sinh": np.sinh, "cosh": np.cosh, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "minimum": np.minimum, "maximum": np.maximum,
}
_CONSTS = {"pi": np.pi, "e": np.e}


def make_expr_function(expr: str, varnames: tuple[str, ...]):
    """Compile expr into f(**{var: array}) -> array, allowing only whitelisted names."""
    tree = ast.parse(expr, mode="eval")
    allowed = set(_FUNCS) | set(_CONSTS) | set(varnames)
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ValueError(f"name {node.id!r} not allowed in expression {expr!r}")
        if isinstance(node, (ast.Attribute, ast.Call)) and isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name):
                raise ValueError(f"only plain function calls allowed in {expr!r}")
        if isinstance(node, ast.Attribute):
            raise ValueError(f"attribute access not allowed in {expr!r}")
    code = compile(tree, f"<expr {expr!r}>", "eval")
    env = {"__builtins__": {}}
    env.update(_FUNCS)
    env.update(_CONSTS)

    def f(**vars):
        return eval(code, env, vars)

    f.expression = expr
    return f
