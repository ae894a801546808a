"""LSTM and GRU cells, bidirectional encoding, and attention pooling.

Cells are registered on the tape as fused nodes with hand-derived
backward rules (verified against finite differences in the test suite);
the same forward math backs the tape-free inference helpers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Array, Tape, Tensor, _acc
from .errors import ContractError, ShapeError
from .rng import SeedStream

LSTM_GATES = ("i", "f", "g", "o")
GRU_GATES = ("z", "r", "h")


@dataclass
class CellParams:
    """Per-gate weights for one recurrent cell.

    Every gate matrix is (hidden_dim, input_dim + hidden_dim); biases are
    (hidden_dim,). LSTM gates: i, f, g, o. GRU gates: z, r, h.
    """

    kind: str
    input_dim: int
    hidden_dim: int
    weights: dict[str, np.ndarray]

    def gate_names(self) -> tuple[str, ...]:
        return LSTM_GATES if self.kind == "lstm" else GRU_GATES


@dataclass
class AttentionParams:
    """Learned-context attention: score_t = u . tanh(w @ h_t)."""

    w: np.ndarray  # (attention_dim, 2H)
    u: np.ndarray  # (attention_dim,)


def init_cell(kind: str, input_dim: int, hidden_dim: int, stream: SeedStream) -> CellParams:
    """Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases.

    The LSTM forget-gate bias starts at 1.0 so memory is open at init.
    """
    if kind not in ("lstm", "gru"):
        raise ContractError(f"unknown cell kind {kind!r}")
    fan_in = input_dim + hidden_dim
    bound = np.sqrt(1.0 / fan_in)
    weights: dict[str, np.ndarray] = {}
    gates = LSTM_GATES if kind == "lstm" else GRU_GATES
    for gate in gates:
        gen = stream.split("cell", gate).generator()
        weights[f"w_{gate}"] = gen.uniform(-bound, bound, size=(hidden_dim, fan_in))
        weights[f"b_{gate}"] = np.zeros(hidden_dim)
    if kind == "lstm":
        weights["b_f"] = np.ones(hidden_dim)
    return CellParams(kind=kind, input_dim=input_dim, hidden_dim=hidden_dim, weights=weights)


def init_attention(attention_dim: int, encoder_width: int, stream: SeedStream) -> AttentionParams:
    bound_w = np.sqrt(1.0 / encoder_width)
    bound_u = np.sqrt(1.0 / attention_dim)
    return AttentionParams(
        w=stream.split("attn", "w").generator().uniform(-bound_w, bound_w, (attention_dim, encoder_width)),
        u=stream.split("attn", "u").generator().uniform(-bound_u, bound_u, attention_dim),
    )


class TapedCell:
    """Packed tape view of one cell for one example: gate leaves are
    concatenated once so every step costs a single matvec."""

    __slots__ = ("kind", "input_dim", "hidden_dim", "wp", "bp", "wh", "bh")

    def __init__(self, kind: str, input_dim: int, hidden_dim: int,
                 wp: Tensor, bp: Tensor, wh: Tensor | None, bh: Tensor | None):
        self.kind = kind
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.wp = wp
        self.bp = bp
        self.wh = wh
        self.bh = bh

    @property
    def state_width(self) -> int:
        return 2 * self.hidden_dim if self.kind == "lstm" else self.hidden_dim


def tape_cell(tape: Tape, cell: CellParams, leaves: dict[str, Tensor] | None = None,
              prefix: str = "", requires_grad: bool = True) -> TapedCell:
    """Register (or reuse) gate leaves and pack them for stepping."""
    def leaf(name: str) -> Tensor:
        full = prefix + name
        if leaves is not None and full in leaves:
            return leaves[full]
        t = tape.leaf(cell.weights[name], requires_grad=requires_grad)
        if leaves is not None:
            leaves[full] = t
        return t

    if cell.kind == "lstm":
        wp = tape.concat_rows([leaf(f"w_{g}") for g in LSTM_GATES])
        bp = tape.concat([leaf(f"b_{g}") for g in LSTM_GATES])
        return TapedCell("lstm", cell.input_dim, cell.hidden_dim, wp, bp, None, None)
    wzr = tape.concat_rows([leaf("w_z"), leaf("w_r")])
    bzr = tape.concat([leaf("b_z"), leaf("b_r")])
    return TapedCell("gru", cell.input_dim, cell.hidden_dim, wzr, bzr, leaf("w_h"), leaf("b_h"))


# -- fused step nodes -------------------------------------------------------

def _lstm_node(tape: Tape, cell: TapedCell, x: Tensor, hc_prev: Tensor | None) -> Tensor:
    """One LSTM step; state node layout is [h | c], shape (2H,)."""
    hdim = cell.hidden_dim
    xd = x.data
    if xd.shape != (cell.input_dim,):
        raise ShapeError(f"lstm step: input shape {xd.shape}, expected ({cell.input_dim},)")
    if hc_prev is None:
        h_prev = np.zeros(hdim)
        c_prev = np.zeros(hdim)
    else:
        if hc_prev.data.shape != (2 * hdim,):
            raise ShapeError(f"lstm step: state shape {hc_prev.data.shape}, expected ({2 * hdim},)")
        h_prev = hc_prev.data[:hdim]
        c_prev = hc_prev.data[hdim:]
    wp, bp = cell.wp, cell.bp
    xh = np.concatenate([xd, h_prev])
    z = wp.data @ xh + bp.data
    i = 1.0 / (1.0 + np.exp(-z[:hdim]))
    f = 1.0 / (1.0 + np.exp(-z[hdim:2 * hdim]))
    g_ = np.tanh(z[2 * hdim:3 * hdim])
    o = 1.0 / (1.0 + np.exp(-z[3 * hdim:]))
    c = f * c_prev + i * g_
    tc = np.tanh(c)
    out = np.concatenate([o * tc, c])

    rg = wp.requires_grad or bp.requires_grad or x.requires_grad or (
        hc_prev is not None and hc_prev.requires_grad)
    bwd = None
    if rg:
        def bwd(grad: Array) -> None:
            dh = grad[:hdim]
            dc = grad[hdim:] + dh * o * (1.0 - tc * tc)
            dz = np.empty_like(z)
            dz[:hdim] = (dc * g_) * i * (1.0 - i)
            dz[hdim:2 * hdim] = (dc * c_prev) * f * (1.0 - f)
            dz[2 * hdim:3 * hdim] = (dc * i) * (1.0 - g_ * g_)
            dz[3 * hdim:] = (dh * tc) * o * (1.0 - o)
            if wp.requires_grad:
                _acc(wp, np.outer(dz, xh), own=True)
            if bp.requires_grad:
                _acc(bp, dz, own=True)
            if x.requires_grad or (hc_prev is not None and hc_prev.requires_grad):
                dxh = wp.data.T @ dz
                if x.requires_grad:
                    _acc(x, dxh[:cell.input_dim], own=False)
                if hc_prev is not None and hc_prev.requires_grad:
                    dstate = np.concatenate([dxh[cell.input_dim:], dc * f])
                    _acc(hc_prev, dstate, own=True)
    return tape.register(out, "lstm", rg, bwd)


def _gru_node(tape: Tape, cell: TapedCell, x: Tensor, h_prev_node: Tensor | None) -> Tensor:
    """One GRU step; state node is h itself, shape (H,)."""
    hdim = cell.hidden_dim
    xd = x.data
    if xd.shape != (cell.input_dim,):
        raise ShapeError(f"gru step: input shape {xd.shape}, expected ({cell.input_dim},)")
    if h_prev_node is None:
        h_prev = np.zeros(hdim)
    else:
        if h_prev_node.data.shape != (hdim,):
            raise ShapeError(f"gru step: state shape {h_prev_node.data.shape}, expected ({hdim},)")
        h_prev = h_prev_node.data
    wzr, bzr, wh, bh = cell.wp, cell.bp, cell.wh, cell.bh
    xh = np.concatenate([xd, h_prev])
    zr = 1.0 / (1.0 + np.exp(-(wzr.data @ xh + bzr.data)))
    zg = zr[:hdim]
    r = zr[hdim:]
    xrh = np.concatenate([xd, r * h_prev])
    hbar = np.tanh(wh.data @ xrh + bh.data)
    out = (1.0 - zg) * h_prev + zg * hbar

    rg = (wzr.requires_grad or bzr.requires_grad or wh.requires_grad or bh.requires_grad
          or x.requires_grad or (h_prev_node is not None and h_prev_node.requires_grad))
    bwd = None
    if rg:
        def bwd(grad: Array) -> None:
            d = cell.input_dim
            da = (grad * zg) * (1.0 - hbar * hbar)
            if wh.requires_grad:
                _acc(wh, np.outer(da, xrh), own=True)
            if bh.requires_grad:
                _acc(bh, da, own=False)
            dxrh = wh.data.T @ da
            dzr = np.empty_like(zr)
            dzr[:hdim] = (grad * (hbar - h_prev)) * zg * (1.0 - zg)
            dzr[hdim:] = (dxrh[d:] * h_prev) * r * (1.0 - r)
            if wzr.requires_grad:
                _acc(wzr, np.outer(dzr, xh), own=True)
            if bzr.requires_grad:
                _acc(bzr, dzr, own=True)
            dxh = wzr.data.T @ dzr
            if x.requires_grad:
                _acc(x, dxh[:d] + dxrh[:d], own=True)
            if h_prev_node is not None and h_prev_node.requires_grad:
                dh_prev = grad * (1.0 - zg) + dxrh[d:] * r + dxh[d:]
                _acc(h_prev_node, dh_prev, own=True)
    return tape.register(out, "gru", rg, bwd)


# -- public step API --------------------------------------------------------

def lstm_step(tape: Tape, x: Tensor, h_prev: Tensor, c_prev: Tensor,
              cell: CellParams | TapedCell) -> tuple[Tensor, Tensor]:
    """Standard LSTM update; returns (h, c)."""
    taped = cell if isinstance(cell, TapedCell) else tape_cell(tape, cell)
    if taped.kind != "lstm":
        raise ContractError(f"lstm_step called with a {taped.kind!r} cell")
    hc_prev = tape.concat([h_prev, c_prev])
    hc = _lstm_node(tape, taped, x, hc_prev)
    hdim = taped.hidden_dim
    return tape.slice1d(hc, 0, hdim), tape.slice1d(hc, hdim, 2 * hdim)


def gru_step(tape: Tape, x: Tensor, h_prev: Tensor, cell: CellParams | TapedCell) -> Tensor:
    """Standard GRU update; returns h."""
    taped = cell if isinstance(cell, TapedCell) else tape_cell(tape, cell)
    if taped.kind != "gru":
        raise ContractError(f"gru_step called with a {taped.kind!r} cell")
    return _gru_node(tape, taped, x, h_prev)


def _run_direction(tape: Tape, cell: TapedCell, rows: list[Tensor],
                   reverse: bool) -> list[Tensor]:
    """State nodes per position, from fresh zero state."""
    step = _lstm_node if cell.kind == "lstm" else _gru_node
    order = range(len(rows) - 1, -1, -1) if reverse else range(len(rows))
    states: list[Tensor | None] = [None] * len(rows)
    prev: Tensor | None = None
    for t in order:
        prev = step(tape, cell, rows[t], prev)
        states[t] = prev
    return states  # type: ignore[return-value]


def bi_encode(tape: Tape, xs: Tensor, fwd: CellParams | TapedCell,
              bwd: CellParams | TapedCell) -> Tensor:
    """Bidirectional encoding: row t is [h_fwd(t) | h_bwd(t)], shape (T, 2H)."""
    if xs.data.ndim != 2 or xs.data.shape[0] < 1:
        raise ContractError(f"bi_encode: need a non-empty (T, d) input, got shape {xs.data.shape}")
    fwd_t = fwd if isinstance(fwd, TapedCell) else tape_cell(tape, fwd)
    bwd_t = bwd if isinstance(bwd, TapedCell) else tape_cell(tape, bwd)
    seq_len = xs.data.shape[0]
    rows = [tape.row(xs, t) for t in range(seq_len)]
    f_states = _run_direction(tape, fwd_t, rows, reverse=False)
    b_states = _run_direction(tape, bwd_t, rows, reverse=True)
    hdim_f, hdim_b = fwd_t.hidden_dim, bwd_t.hidden_dim
    f_h = tape.stack_slices([(s, 0, hdim_f) for s in f_states])
    b_h = tape.stack_slices([(s, 0, hdim_b) for s in b_states])
    return tape.hstack2(f_h, b_h)


def attention_pool(tape: Tape, hs: Tensor, attn: AttentionParams | tuple[Tensor, Tensor]
                   ) -> tuple[Tensor, np.ndarray]:
    """Score rows against a learned context vector, softmax, weighted sum.

    Returns the pooled context node and the attention weights as a plain
    array (probabilities; gradients do not flow through the returned copy).
    """
    if hs.data.ndim != 2 or hs.data.shape[0] < 1:
        raise ContractError(f"attention_pool: need a non-empty (T, 2H) input, got {hs.data.shape}")
    if isinstance(attn, AttentionParams):
        w_node = tape.leaf(attn.w)
        u_node = tape.leaf(attn.u)
    else:
        w_node, u_node = attn
    hd, wd, ud = hs.data, w_node.data, u_node.data
    scored = np.tanh(hd @ wd.T)           # (T, a)
    scores = scored @ ud                  # (T,)
    e = np.exp(scores - scores.max())
    weights = e / e.sum()
    context = hd.T @ weights              # (2H,)

    rg = hs.requires_grad or w_node.requires_grad or u_node.requires_grad
    bwd = None
    if rg:
        def bwd(g: Array) -> None:
            dw_vec = hd @ g
            ds = weights * (dw_vec - np.dot(weights, dw_vec))
            dpre = np.outer(ds, ud) * (1.0 - scored * scored)
            if u_node.requires_grad:
                _acc(u_node, scored.T @ ds, own=True)
            if w_node.requires_grad:
                _acc(w_node, dpre.T @ hd, own=True)
            if hs.requires_grad:
                _acc(hs, np.outer(weights, g) + dpre @ wd, own=True)
    node = tape.register(context, "attention_pool", rg, bwd)
    return node, weights.copy()


# -- tape-free inference ----------------------------------------------------

def _pack_lstm(cell: CellParams) -> tuple[np.ndarray, np.ndarray]:
    w = np.concatenate([cell.weights[f"w_{g}"] for g in LSTM_GATES], axis=0)
    b = np.concatenate([cell.weights[f"b_{g}"] for g in LSTM_GATES])
    return w, b


def run_direction_raw(cell: CellParams, xs: np.ndarray, reverse: bool) -> np.ndarray:
    """Hidden states per position (T, H), no tape."""
    seq_len, hdim = xs.shape[0], cell.hidden_dim
    out = np.empty((seq_len, hdim))
    order = range(seq_len - 1, -1, -1) if reverse else range(seq_len)
    if cell.kind == "lstm":
        wp, bp = _pack_lstm(cell)
        h = np.zeros(hdim)
        c = np.zeros(hdim)
        for t in order:
            z = wp @ np.concatenate([xs[t], h]) + bp
            i = 1.0 / (1.0 + np.exp(-z[:hdim]))
            f = 1.0 / (1.0 + np.exp(-z[hdim:2 * hdim]))
            g_ = np.tanh(z[2 * hdim:3 * hdim])
            o = 1.0 / (1.0 + np.exp(-z[3 * hdim:]))
            c = f * c + i * g_
            h = o * np.tanh(c)
            out[t] = h
        return out
    wzr = np.concatenate([cell.weights["w_z"], cell.weights["w_r"]], axis=0)
    bzr = np.concatenate([cell.weights["b_z"], cell.weights["b_r"]])
    wh, bh = cell.weights["w_h"], cell.weights["b_h"]
    h = np.zeros(hdim)
    for t in order:
        xh = np.concatenate([xs[t], h])
        zr = 1.0 / (1.0 + np.exp(-(wzr @ xh + bzr)))
        hbar = np.tanh(wh @ np.concatenate([xs[t], zr[hdim:] * h]) + bh)
        h = (1.0 - zr[:hdim]) * h + zr[:hdim] * hbar
        out[t] = h
    return out


def bi_encode_raw(fwd: CellParams, bwd: CellParams, xs: np.ndarray) -> np.ndarray:
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise ContractError(f"bi_encode: need a non-empty (T, d) input, got shape {xs.shape}")
    return np.concatenate(
        [run_direction_raw(fwd, xs, reverse=False), run_direction_raw(bwd, xs, reverse=True)],
        axis=1)


def attention_pool_raw(attn: AttentionParams, hs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.tanh(hs @ attn.w.T) @ attn.u
    e = np.exp(scores - scores.max())
    weights = e / e.sum()
    return hs.T @ weights, weights
