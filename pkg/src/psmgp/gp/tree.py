"""Arithmetic expression trees stored as prefix token tuples.

Tokens are operator names (``add``, ``sub``, ``mul``, ``div``), feature
names (``f1``..``f11``) or floats for constants. ``div`` is protected: it
returns 1.0 when the denominator magnitude is at most ``EPS``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ParseError, ValidationError

EPS = 1e-12
OPERATORS = ("add", "sub", "mul", "div")
FEATURES = tuple(f"f{i}" for i in range(1, 12))
_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURES)}

Token = Union[str, float]


def protected_div(a: float, b: float) -> float:
    return a / b if abs(b) > EPS else 1.0


def is_operator(tok: Token) -> bool:
    return isinstance(tok, str) and tok in OPERATORS


@dataclass(frozen=True)
class ExpressionTree:
    nodes: tuple

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        need = 1
        for tok in nodes:
            if need == 0:
                raise ValidationError("trailing tokens after a complete tree")
            if is_operator(tok):
                need += 1
            elif isinstance(tok, str):
                if tok not in _FEATURE_INDEX:
                    raise ValidationError(f"unknown terminal {tok!r}")
                need -= 1
            elif isinstance(tok, float):
                need -= 1
            else:
                raise ValidationError(f"bad token {tok!r}")
        if need != 0:
            raise ValidationError("incomplete tree")

    def __len__(self):
        return len(self.nodes)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def depth(self) -> int:
        """Height with a lone leaf at depth 0."""
        stack, best = [0], 0
        for tok in self.nodes:
            d = stack.pop()
            best = max(best, d)
            if is_operator(tok):
                stack.extend((d + 1, d + 1))
        return best

    def subtree_end(self, start: int) -> int:
        """Exclusive end index of the subtree rooted at ``start``."""
        need, i = 1, start
        while need:
            need += 1 if is_operator(self.nodes[i]) else -1
            i += 1
        return i

    def node_depths(self) -> list[int]:
        out, stack = [], [0]
        for tok in self.nodes:
            d = stack.pop()
            out.append(d)
            if is_operator(tok):
                stack.extend((d + 1, d + 1))
        return out

    def replace(self, start: int, subtree: "ExpressionTree | tuple") -> "ExpressionTree":
        sub = subtree.nodes if isinstance(subtree, ExpressionTree) else tuple(subtree)
        end = self.subtree_end(start)
        return ExpressionTree(self.nodes[:start] + sub + self.nodes[end:])

    def features_used(self) -> set[str]:
        return {t for t in self.nodes if isinstance(t, str) and t in _FEATURE_INDEX}

    # -- evaluation --------------------------------------------------------

    def evaluate(self, X: np.ndarray) -> tuple[np.ndarray, bool]:
        """Evaluate on rows of ``X`` (shape ``(n, 11)``).

        Returns ``(values, clean)``; non-finite intermediates are replaced
        by 0 and ``clean`` is False if that happened anywhere.
        """
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        stack = []
        clean = True
        with np.errstate(all="ignore"):
            for tok in reversed(self.nodes):
                if isinstance(tok, float):
                    stack.append(np.full(n, tok))
                elif tok in _FEATURE_INDEX:
                    stack.append(X[:, _FEATURE_INDEX[tok]])
                else:
                    a = stack.pop()
                    b = stack.pop()
                    if tok == "add":
                        r = a + b
                    elif tok == "sub":
                        r = a - b
                    elif tok == "mul":
                        r = a * b
                    else:
                        r = np.divide(a, b, out=np.ones(n), where=np.abs(b) > EPS)
                    if not np.isfinite(r).all():
                        clean = False
                        r = np.where(np.isfinite(r), r, 0.0)
                    stack.append(r)
        out = stack.pop()
        if not np.isfinite(out).all():
            clean = False
            out = np.where(np.isfinite(out), out, 0.0)
        return out, clean

    def __call__(self, features) -> float:
        """Score one feature vector (a FeatureVector or 11 numbers)."""
        values = getattr(features, "values", features)
        row = np.asarray(values, dtype=float).reshape(1, -1)
        if row.shape[1] != len(FEATURES):
            raise ValidationError(f"expected {len(FEATURES)} features, got {row.shape[1]}")
        return float(self.evaluate(row)[0][0])

    # -- text form -----------------------------------------------------------

    def to_sexpr(self) -> str:
        out, _ = _render(self.nodes, 0)
        return out

    def __str__(self):
        return self.to_sexpr()

    @classmethod
    def from_sexpr(cls, text: str) -> "ExpressionTree":
        return cls(parse_sexpr(text))

    def to_infix(self) -> str:
        symbols = {"add": "+", "sub": "-", "mul": "*", "div": "/"}

        def walk(i):
            tok = self.nodes[i]
            if not is_operator(tok):
                return _fmt_token(tok), i + 1
            left, j = walk(i + 1)
            right, k = walk(j)
            return f"({left} {symbols[tok]} {right})", k

        return walk(0)[0]


def _fmt_token(tok: Token) -> str:
    return repr(float(tok)) if isinstance(tok, float) else tok


def _render(nodes, i):
    tok = nodes[i]
    if not is_operator(tok):
        return _fmt_token(tok), i + 1
    left, j = _render(nodes, i + 1)
    right, k = _render(nodes, j)
    return f"({tok} {left} {right})", k


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


def parse_sexpr(text: str) -> tuple:
    """Parse ``(add (mul 2.0 f2) f1)`` into prefix tokens."""
    toks = _TOKEN_RE.findall(text)
    if not toks:
        raise ParseError("empty expression")
    out = []
    pos = 0

    def expr():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of expression")
        tok = toks[pos]
        pos += 1
        if tok == "(":
            if pos >= len(toks):
                raise ParseError("unexpected end of expression")
            op = toks[pos]
            pos += 1
            if op not in OPERATORS:
                raise ParseError(f"unknown operator {op!r}")
            out.append(op)
            expr()
            expr()
            if pos >= len(toks) or toks[pos] != ")":
                raise ParseError(f"expected ')' after operands of {op}")
            pos += 1
        elif tok == ")":
            raise ParseError("unexpected ')'")
        elif tok in _FEATURE_INDEX:
            out.append(tok)
        else:
            try:
                value = float(tok)
            except ValueError:
                raise ParseError(f"unknown terminal {tok!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"non-finite constant {tok!r}")
            out.append(value)

    expr()
    if pos != len(toks):
        raise ParseError("trailing tokens after expression")
    return tuple(out)
