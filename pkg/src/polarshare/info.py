"""Exact single-letter information measures by full pmf enumeration.

All quantities are in bits and are computed from the exact joint of
(X, Y_1..Y_J, U[, V]) induced by a source and a test channel.  Expression
strings such as ``"I(U;X|Y{1,2})"`` or ``"H(V|U,Y{1})"`` give the CLI and
report layer a uniform interface.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import UnknownExpressionError
from .sources import JointSource, TestChannel


def _plogp(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


@dataclass(frozen=True)
class JointModel:
    """Labeled exact joint pmf with entropy / mutual-information queries."""

    array: np.ndarray
    names: tuple[str, ...]

    def _axes(self, variables) -> tuple[int, ...]:
        axes = []
        for v in variables:
            if v not in self.names:
                raise UnknownExpressionError(f"unknown variable {v!r}")
            axes.append(self.names.index(v))
        return tuple(sorted(set(axes)))

    def marginal(self, variables) -> np.ndarray:
        keep = self._axes(variables)
        drop = tuple(a for a in range(self.array.ndim) if a not in keep)
        return self.array.sum(axis=drop)

    def entropy(self, targets, given=()) -> float:
        """H(targets | given) in bits."""
        targets = tuple(targets)
        given = tuple(given)
        h_joint = _plogp(self.marginal(targets + given))
        h_given = _plogp(self.marginal(given)) if given else 0.0
        return h_joint - h_given

    def mutual_information(self, a, b, given=()) -> float:
        """I(a ; b | given) in bits."""
        a, b, given = tuple(a), tuple(b), tuple(given)
        return (
            self.entropy(a, given)
            + self.entropy(b, given)
            - self.entropy(a + b, given)
        )


def joint_model(source: JointSource, channel: TestChannel | None = None) -> JointModel:
    """Joint of (X, Y_1..Y_J) extended by U (and V for layered channels)."""
    j = source.participants
    arr = source.pmf
    names = ["X"] + [f"Y{i}" for i in range(1, j + 1)]
    if channel is not None:
        pux = channel.p_u_given_x.reshape((2,) + (1,) * j + (2,))
        arr = arr[..., None] * pux
        names.append("U")
        if channel.layered:
            # p(v | u, x) placed against axes (x, ..., u)
            pv = np.transpose(channel.p_v_given_ux, (1, 0, 2))  # (x, u, v)
            pv = pv.reshape((2,) + (1,) * j + (2, 2))
            arr = arr[..., None] * pv
            names.append("V")
    return JointModel(arr, tuple(names))


_VAR_RE = re.compile(r"^(X|U|V|Y\{[0-9 ,]*\})$")


def _expand_var(token: str, model: JointModel) -> list[str]:
    token = token.strip()
    if not _VAR_RE.match(token):
        raise UnknownExpressionError(f"bad variable token {token!r}")
    if token.startswith("Y"):
        inner = token[2:-1].strip()
        if not inner:
            return []
        return [f"Y{int(m)}" for m in inner.split(",")]
    return [token]


def _expand_group(group: str, model: JointModel) -> list[str]:
    out: list[str] = []
    depth = 0
    token = ""
    for ch in group:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == "," and depth == 0:
            out.extend(_expand_var(token, model))
            token = ""
        else:
            token += ch
    if token.strip():
        out.extend(_expand_var(token, model))
    return out


def evaluate_expression(model: JointModel, expr: str) -> float:
    """Evaluate one ``H(.|.)`` or ``I(.;.|.)`` expression string."""
    expr = expr.replace(" ", "")
    m = re.match(r"^H\((.+)\)$", expr)
    if m:
        inner = m.group(1)
        parts = inner.split("|")
        if len(parts) > 2:
            raise UnknownExpressionError(expr)
        targets = _expand_group(parts[0], model)
        given = _expand_group(parts[1], model) if len(parts) == 2 else []
        return model.entropy(targets, given)
    m = re.match(r"^I\((.+)\)$", expr)
    if m:
        inner = m.group(1)
        parts = inner.split("|")
        if len(parts) > 2:
            raise UnknownExpressionError(expr)
        sides = parts[0].split(";")
        if len(sides) != 2:
            raise UnknownExpressionError(expr)
        a = _expand_group(sides[0], model)
        b = _expand_group(sides[1], model)
        given = _expand_group(parts[1], model) if len(parts) == 2 else []
        return model.mutual_information(a, b, given)
    raise UnknownExpressionError(expr)


def exact_info(source: JointSource, channel: TestChannel | None, expressions) -> dict[str, float]:
    """Evaluate a collection of expression strings against the exact joint."""
    model = joint_model(source, channel)
    return {expr: evaluate_expression(model, expr) for expr in expressions}


def y_group(members) -> str:
    """Expression token for a participant subset, e.g. ``Y{1,2}``."""
    return "Y{" + ",".join(str(m) for m in sorted(members)) + "}"
