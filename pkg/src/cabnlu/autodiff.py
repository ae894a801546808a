"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tape`` records every operation as it runs; nodes reference only
earlier nodes, so one reversed sweep propagates gradients. Tapes are
cheap and rebuilt per training example. All math is float64; shapes are
fixed at node creation.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, NumericError, ShapeError

Array = np.ndarray


def _f64(x) -> Array:
    a = np.asarray(x, dtype=np.float64)
    return a


class Tensor:
    """One node on a tape: cached forward value plus a gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "op", "id", "_bwd")

    data: Array
    grad: Array | None
    requires_grad: bool
    op: str
    id: int
    _bwd: Callable[[Array], None] | None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, id={self.id}, shape={self.data.shape})"


def _acc(t: Tensor, g: Array, own: bool) -> None:
    # own=True means g is a freshly allocated array this node may donate.
    if t.grad is None:
        t.grad = g if own else g.copy()
    else:
        t.grad += g


def _acc_slice(t: Tensor, idx, g: Array) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad[idx] += g


class Tape:
    """Append-only record of operations, in topological order by construction."""

    __slots__ = ("nodes",)

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []

    # -- node registration -------------------------------------------------

    def register(self, data: Array, op: str, requires_grad: bool,
                 bwd: Callable[[Array], None] | None) -> Tensor:
        """Append a node. ``bwd`` receives the output gradient and must
        accumulate into the parents' ``grad`` slots."""
        t = Tensor()
        t.data = data
        t.grad = None
        t.requires_grad = requires_grad
        t.op = op
        t.id = len(self.nodes)
        t._bwd = bwd if requires_grad else None
        self.nodes.append(t)
        return t

    def leaf(self, data, requires_grad: bool = True) -> Tensor:
        return self.register(_f64(data), "leaf", requires_grad, None)

    def constant(self, data) -> Tensor:
        return self.register(_f64(data), "const", False, None)

    # -- arithmetic --------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        ad, bd = a.data, b.data
        if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {ad.shape} x {bd.shape}")
        out = ad @ bd
        rg = a.requires_grad or b.requires_grad
        bwd = None
        if rg:
            def bwd(g: Array) -> None:
                if a.requires_grad:
                    _acc(a, g @ bd.T, own=True)
                if b.requires_grad:
                    _acc(b, ad.T @ g, own=True)
        return self.register(out, "matmul", rg, bwd)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.shape != b.data.shape:
            raise ShapeError(f"add: shape mismatch {a.data.shape} vs {b.data.shape}")
        rg = a.requires_grad or b.requires_grad
        bwd = None
        if rg:
            def bwd(g: Array) -> None:
                if a.requires_grad:
                    _acc(a, g, own=False)
                if b.requires_grad:
                    _acc(b, g, own=False)
        return self.register(a.data + b.data, "add", rg, bwd)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.shape != b.data.shape:
            raise ShapeError(f"mul: shape mismatch {a.data.shape} vs {b.data.shape}")
        ad, bd = a.data, b.data
        rg = a.requires_grad or b.requires_grad
        bwd = None
        if rg:
            def bwd(g: Array) -> None:
                if a.requires_grad:
                    _acc(a, g * bd, own=True)
                if b.requires_grad:
                    _acc(b, g * ad, own=True)
        return self.register(ad * bd, "mul", rg, bwd)

    def sigmoid(self, x: Tensor) -> Tensor:
        out = 1.0 / (1.0 + np.exp(-x.data))
        bwd = None
        if x.requires_grad:
            def bwd(g: Array) -> None:
                _acc(x, g * out * (1.0 - out), own=True)
        return self.register(out, "sigmoid", x.requires_grad, bwd)

    def tanh(self, x: Tensor) -> Tensor:
        out = np.tanh(x.data)
        bwd = None
        if x.requires_grad:
            def bwd(g: Array) -> None:
                _acc(x, g * (1.0 - out * out), own=True)
        return self.register(out, "tanh", x.requires_grad, bwd)

    def sum(self, x: Tensor) -> Tensor:
        bwd = None
        if x.requires_grad:
            def bwd(g: Array) -> None:
                _acc(x, np.full_like(x.data, float(g)), own=True)
        return self.register(np.asarray(x.data.sum()), "sum", x.requires_grad, bwd)

    # -- shape plumbing ----------------------------------------------------

    def slice1d(self, x: Tensor, start: int, stop: int) -> Tensor:
        out = x.data[start:stop]
        bwd = None
        if x.requires_grad:
            def bwd(g: Array) -> None:
                _acc_slice(x, slice(start, stop), g)
        return self.register(out, "slice", x.requires_grad, bwd)

    def row(self, x: Tensor, t: int) -> Tensor:
        out = x.data[t]
        bwd = None
        if x.requires_grad:
            def bwd(g: Array) -> None:
                _acc_slice(x, t, g)
        return self.register(out, "row", x.requires_grad, bwd)

    def concat(self, parts: Sequence[Tensor]) -> Tensor:
        """Concatenate 1-D tensors."""
        out = np.concatenate([p.data for p in parts])
        rg = any(p.requires_grad for p in parts)
        bwd = None
        if rg:
            offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])
            def bwd(g: Array) -> None:
                for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                    if p.requires_grad:
                        _acc(p, g[lo:hi], own=False)
        return self.register(out, "concat", rg, bwd)

    def concat_rows(self, parts: Sequence[Tensor]) -> Tensor:
        """Stack 2-D tensors along axis 0."""
        out = np.concatenate([p.data for p in parts], axis=0)
        rg = any(p.requires_grad for p in parts)
        bwd = None
        if rg:
            offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])
            def bwd(g: Array) -> None:
                for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                    if p.requires_grad:
                        _acc(p, g[lo:hi], own=False)
        return self.register(out, "concat_rows", rg, bwd)

    def hstack2(self, a: Tensor, b: Tensor) -> Tensor:
        """Concatenate two 2-D tensors along axis 1."""
        if a.data.shape[0] != b.data.shape[0]:
            raise ShapeError(f"hstack2: row mismatch {a.data.shape} vs {b.data.shape}")
        na = a.data.shape[1]
        out = np.concatenate([a.data, b.data], axis=1)
        rg = a.requires_grad or b.requires_grad
        bwd = None
        if rg:
            def bwd(g: Array) -> None:
                if a.requires_grad:
                    _acc(a, g[:, :na], own=False)
                if b.requires_grad:
                    _acc(b, g[:, na:], own=False)
        return self.register(out, "hstack2", rg, bwd)

    def stack_slices(self, parts: Sequence[tuple[Tensor, int, int]]) -> Tensor:
        """Build a matrix whose row t is parts[t][0].data[start:stop]."""
        out = np.stack([p.data[lo:hi] for p, lo, hi in parts])
        rg = any(p.requires_grad for p, _, _ in parts)
        bwd = None
        if rg:
            def bwd(g: Array) -> None:
                for t, (p, lo, hi) in enumerate(parts):
                    if p.requires_grad:
                        _acc_slice(p, slice(lo, hi), g[t])
        return self.register(out, "stack_slices", rg, bwd)

    def gather_rows(self, matrix: Tensor, indices: Sequence[int]) -> Tensor:
        idx = np.asarray(indices, dtype=np.intp)
        if idx.size and int(idx.max()) >= matrix.data.shape[0]:
            raise IndexError(
                f"gather_rows: index {int(idx.max())} out of range for {matrix.data.shape[0]} rows")
        out = matrix.data[idx]
        bwd = None
        if matrix.requires_grad:
            def bwd(g: Array) -> None:
                if matrix.grad is None:
                    matrix.grad = np.zeros_like(matrix.data)
                np.add.at(matrix.grad, idx, g)
        return self.register(out, "gather_rows", matrix.requires_grad, bwd)

    # -- nonlinears with contracts ------------------------------------------

    def softmax(self, logits: Tensor) -> Tensor:
        x = logits.data
        if x.ndim != 1 or x.shape[0] < 1:
            raise ShapeError(f"softmax: expected non-empty 1-D input, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NumericError("softmax: input contains NaN or infinity")
        e = np.exp(x - x.max())
        out = e / e.sum()
        bwd = None
        if logits.requires_grad:
            def bwd(g: Array) -> None:
                _acc(logits, out * (g - np.dot(out, g)), own=True)
        return self.register(out, "softmax", logits.requires_grad, bwd)

    def cross_entropy(self, probs: Tensor, target: int) -> Tensor:
        p = probs.data
        if not 0 <= target < p.shape[0]:
            raise IndexError(f"cross_entropy: target {target} out of range for {p.shape[0]} classes")
        clamped = max(float(p[target]), 1e-12)
        out = np.asarray(-np.log(clamped))
        bwd = None
        if probs.requires_grad:
            def bwd(g: Array) -> None:
                if probs.grad is None:
                    probs.grad = np.zeros_like(p)
                if p[target] > 1e-12:
                    probs.grad[target] += -float(g) / p[target]
        return self.register(out, "cross_entropy", probs.requires_grad, bwd)

    def softmax_cross_entropy(self, logits: Tensor, target: int) -> Tensor:
        """Fused, numerically stable -log softmax(logits)[target]."""
        x = logits.data
        if not 0 <= target < x.shape[0]:
            raise IndexError(f"softmax_cross_entropy: target {target} out of range")
        m = x.max()
        e = np.exp(x - m)
        z = e.sum()
        out = np.asarray(np.log(z) + m - x[target])
        bwd = None
        if logits.requires_grad:
            p = e / z
            def bwd(g: Array) -> None:
                d = p * float(g)
                d[target] -= float(g)
                _acc(logits, d, own=True)
        return self.register(out, "softmax_ce", logits.requires_grad, bwd)

    def seq_cross_entropy(self, logits: Tensor, targets: Sequence[int]) -> Tensor:
        """Sum of per-row softmax cross-entropies for a (T, L) logits matrix."""
        x = logits.data
        if x.ndim != 2 or len(targets) != x.shape[0]:
            raise ShapeError(f"seq_cross_entropy: logits {x.shape} vs {len(targets)} targets")
        tgt = np.asarray(targets, dtype=np.intp)
        m = x.max(axis=1, keepdims=True)
        e = np.exp(x - m)
        z = e.sum(axis=1)
        rows = np.arange(x.shape[0])
        out = np.asarray((np.log(z) + m[:, 0] - x[rows, tgt]).sum())
        bwd = None
        if logits.requires_grad:
            p = e / z[:, None]
            def bwd(g: Array) -> None:
                d = p * float(g)
                d[rows, tgt] -= float(g)
                _acc(logits, d, own=True)
        return self.register(out, "seq_ce", logits.requires_grad, bwd)

    def zone_cross_entropy(self, logits: Tensor,
                           zones: Sequence[tuple[Sequence[int], int, int, Sequence[int]]]) -> Tensor:
        """Summed cross-entropy where each row is scored only inside its zone.

        ``zones`` is a list of (row indices, col_start, col_stop, targets
        within the zone); rows outside every zone contribute nothing.
        """
        x = logits.data
        total = 0.0
        caches = []
        for rows, lo, hi, targets in zones:
            ridx = np.asarray(rows, dtype=np.intp)
            tgt = np.asarray(targets, dtype=np.intp)
            block = x[ridx, lo:hi]
            m = block.max(axis=1, keepdims=True)
            e = np.exp(block - m)
            z = e.sum(axis=1)
            rr = np.arange(ridx.shape[0])
            total += float((np.log(z) + m[:, 0] - block[rr, tgt]).sum())
            caches.append((ridx, lo, hi, tgt, e / z[:, None], rr))
        out = np.asarray(total)
        bwd = None
        if logits.requires_grad:
            def bwd(g: Array) -> None:
                if logits.grad is None:
                    logits.grad = np.zeros_like(x)
                gf = float(g)
                for ridx, lo, hi, tgt, p, rr in caches:
                    d = p * gf
                    d[rr, tgt] -= gf
                    logits.grad[ridx, lo:hi] += d
        return self.register(out, "zone_ce", logits.requires_grad, bwd)

    def affine(self, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
        """x @ w.T + b for x of shape (T, k) or (k,); w is (L, k), b is (L,)."""
        xd, wd = x.data, w.data
        if xd.shape[-1] != wd.shape[1]:
            raise ShapeError(f"affine: input width {xd.shape} vs weight {wd.shape}")
        out = xd @ wd.T + b.data
        rg = x.requires_grad or w.requires_grad or b.requires_grad
        bwd = None
        if rg:
            def bwd(g: Array) -> None:
                if w.requires_grad:
                    _acc(w, (g.T @ xd) if g.ndim == 2 else np.outer(g, xd), own=True)
                if b.requires_grad:
                    _acc(b, g.sum(axis=0) if g.ndim == 2 else g, own=g.ndim == 2)
                if x.requires_grad:
                    _acc(x, g @ wd, own=True)
        return self.register(out, "affine", rg, bwd)

    def dropout(self, x: Tensor, rate: float, rng: np.random.Generator,
                training: bool) -> Tensor:
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout: rate must be in [0, 1), got {rate}")
        if not training or rate == 0.0:
            bwd = None
            if x.requires_grad:
                def bwd(g: Array) -> None:
                    _acc(x, g, own=False)
            return self.register(x.data, "dropout", x.requires_grad, bwd)
        scale = 1.0 / (1.0 - rate)
        mask = (rng.random(x.data.shape) >= rate) * scale
        bwd = None
        if x.requires_grad:
            def bwd(g: Array) -> None:
                _acc(x, g * mask, own=True)
        return self.register(x.data * mask, "dropout", x.requires_grad, bwd)

    # -- backward ------------------------------------------------------------

    def backward(self, loss: Tensor) -> dict[int, Array]:
        """Propagate from a scalar loss; returns gradients keyed by node id
        for every requires_grad node the loss depends on."""
        if loss.data.shape != ():
            raise ContractError(f"backward: loss must be scalar, got shape {loss.data.shape}")
        for t in self.nodes:
            t.grad = None
        loss.grad = np.ones(())
        for i in range(loss.id, -1, -1):
            t = self.nodes[i]
            if t.grad is not None and t._bwd is not None:
                t._bwd(t.grad)
        return {t.id: t.grad for t in self.nodes
                if t.requires_grad and t.grad is not None}
