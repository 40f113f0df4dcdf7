"""Expression-tree scheduling policies.

A policy scores each filtered candidate from ten normalized state features
and the function set ``+ - * / max min sin``. Any operation that produces a
non-finite value yields 1 at that node instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Mapping

import numpy as np

from .simulator import Candidates, DecisionContext

FEATURES = ("RP", "RPPU", "EMC", "EMO", "RMP", "CT", "TIST", "RTP", "FR", "RR")
CONSTANT = "C"
TERMINALS = FEATURES + (CONSTANT,)

FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "+": (2, np.add),
    "-": (2, np.subtract),
    "*": (2, np.multiply),
    "/": (2, np.divide),
    "max": (2, np.maximum),
    "min": (2, np.minimum),
    "sin": (1, np.sin),
}
ALIASES = {"÷": "/", "×": "*", "−": "-"}

# small constant of the imaging-start-time feature
TIST_EPS = 1e-6


@dataclass(frozen=True)
class Node:
    op: str
    children: tuple["Node", ...] = ()
    value: float = 0.0

    def __post_init__(self):
        if self.op in FUNCTIONS:
            if len(self.children) != FUNCTIONS[self.op][0]:
                raise ValueError(f"{self.op!r} takes {FUNCTIONS[self.op][0]} argument(s)")
        elif self.op in TERMINALS:
            if self.children:
                raise ValueError(f"terminal {self.op!r} cannot have children")
            if self.op == CONSTANT and not math.isfinite(self.value):
                raise ValueError("constants must be finite")
        else:
            raise ValueError(f"unknown primitive {self.op!r}")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __str__(self) -> str:
        return serialize(self)


def const(value: float) -> Node:
    return Node(CONSTANT, (), float(value))


def term(name: str) -> Node:
    return Node(name)


def fn(op: str, *children: Node) -> Node:
    return Node(ALIASES.get(op, op), tuple(children))


def depth(tree: Node) -> int:
    """Edges on the longest root-to-leaf path; a lone terminal has depth 0."""
    if not tree.children:
        return 0
    return 1 + max(depth(c) for c in tree.children)


def size(tree: Node) -> int:
    return 1 + sum(size(c) for c in tree.children)


def iter_nodes(tree: Node, path: tuple[int, ...] = (), level: int = 0) -> Iterator[tuple[tuple[int, ...], Node, int]]:
    """Pre-order ``(path, node, depth)`` triples."""
    yield path, tree, level
    for k, child in enumerate(tree.children):
        yield from iter_nodes(child, path + (k,), level + 1)


def subtree(tree: Node, path: tuple[int, ...]) -> Node:
    for k in path:
        tree = tree.children[k]
    return tree


def replace(tree: Node, path: tuple[int, ...], new: Node) -> Node:
    if not path:
        return new
    k = path[0]
    kids = list(tree.children)
    kids[k] = replace(kids[k], path[1:], new)
    return Node(tree.op, tuple(kids), tree.value)


# ------------------------------------------------------------------ features


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.full(x.shape, 0.5)
    return (x - lo) / (hi - lo)


def compute_features(ctx: DecisionContext, cands: Candidates) -> dict[str, np.ndarray] | None:
    """Feature arrays aligned with ``cands``; ``None`` for an empty pool."""
    n = len(cands)
    if n == 0:
        return None
    inst, env = ctx.instance, ctx.env
    arr = inst.arrays
    ids = cands.ids
    du = arr.du[ids]
    profit = env.actual_profit[ids]
    mem = inst.cr * du
    remaining = ctx.remaining_memory
    horizon = inst.horizon
    t_now = ctx.t_now
    return {
        "RP": _minmax(profit),
        "RPPU": _minmax(profit / du),
        "EMC": _minmax(mem),
        "EMO": mem / remaining if remaining > 0 else np.full(n, np.finfo(float).max),
        "RMP": np.full(n, remaining / inst.mmc),
        "CT": np.full(n, t_now / horizon),
        "TIST": (cands.starts - t_now + TIST_EPS) / (horizon - t_now + TIST_EPS),
        "RTP": np.full(n, n / inst.nt),
        "FR": arr.ws_rank[ids] / inst.nt,
        # candidates arrive in (ws, id) order, so position is the in-pool rank
        "RR": np.arange(1, n + 1) / n,
    }


# ---------------------------------------------------------------- evaluation


def _guard(x):
    return np.where(np.isfinite(x), x, 1.0)


def compile_tree(tree: Node) -> Callable[[Mapping[str, np.ndarray]], np.ndarray]:
    """Turn a tree into a closure over a feature mapping (scalars or equal-length arrays)."""
    if tree.op == CONSTANT:
        v = tree.value
        return lambda f: v
    if tree.op in FEATURES:
        name = tree.op
        return lambda f: f[name]
    func = FUNCTIONS[tree.op][1]
    if len(tree.children) == 1:
        a = compile_tree(tree.children[0])
        return lambda f: _guard(func(a(f)))
    a, b = (compile_tree(c) for c in tree.children)
    return lambda f: _guard(func(a(f), b(f)))


def evaluate(tree: Node, features: Mapping[str, float | np.ndarray]):
    with np.errstate(all="ignore"):
        out = compile_tree(tree)(features)
    out = _guard(np.asarray(out, dtype=float))
    return float(out) if out.ndim == 0 else out


class TreePolicy:
    """Callable policy that scores candidates with a compiled expression tree."""

    def __init__(self, tree: Node):
        self.tree = tree
        self._fn = compile_tree(tree)

    def __call__(self, ctx: DecisionContext, cands: Candidates) -> np.ndarray:
        f = compute_features(ctx, cands)
        with np.errstate(all="ignore"):
            out = np.asarray(self._fn(f), dtype=float)
        if out.ndim == 0:
            out = np.full(len(cands), float(out))
        return out

    def __repr__(self) -> str:
        return f"TreePolicy({serialize(self.tree)!r})"


# ------------------------------------------------------------- text format


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


def serialize(tree: Node) -> str:
    if tree.op == CONSTANT:
        return repr(float(tree.value))
    if not tree.children:
        return tree.op
    return "(" + " ".join([tree.op, *(serialize(c) for c in tree.children)]) + ")"


def _tokens(text: str) -> list[tuple[str, int]]:
    out = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            out.append((ch, i))
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            out.append((text[i:j], i))
            i = j
    return out


def parse(text: str) -> Node:
    toks = _tokens(text)
    if not toks:
        raise ParseError("empty expression", 0)
    pos = 0

    def atom(tok: str, at: int) -> Node:
        if tok in TERMINALS and tok != CONSTANT:
            return Node(tok)
        try:
            value = float(tok)
        except ValueError:
            raise ParseError(f"unknown symbol {tok!r}", at) from None
        if not math.isfinite(value):
            raise ParseError("non-finite constant", at)
        return const(value)

    def expr() -> Node:
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input (unbalanced parenthesis)", len(text))
        tok, at = toks[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'", at)
        if tok != "(":
            return atom(tok, at)
        if pos >= len(toks):
            raise ParseError("unexpected end of input (unbalanced parenthesis)", len(text))
        op, op_at = toks[pos]
        op = ALIASES.get(op, op)
        pos += 1
        if op not in FUNCTIONS:
            raise ParseError(f"unknown function {op!r}", op_at)
        kids = []
        while True:
            if pos >= len(toks):
                raise ParseError("unexpected end of input (unbalanced parenthesis)", len(text))
            if toks[pos][0] == ")":
                pos += 1
                break
            kids.append(expr())
        if len(kids) != FUNCTIONS[op][0]:
            raise ParseError(f"{op!r} takes {FUNCTIONS[op][0]} argument(s), got {len(kids)}", op_at)
        return Node(op, tuple(kids))

    tree = expr()
    if pos != len(toks):
        raise ParseError("trailing input", toks[pos][1])
    return tree


def write_policies(trees, path: str | Path, header: str | None = None) -> None:
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    lines.extend(serialize(t) for t in trees)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_policies(path: str | Path) -> list[Node]:
    trees = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            trees.append(parse(line))
    return trees
