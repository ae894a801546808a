"""Cell equations, bidirectional encoding, attention pooling, and their gradients."""

import numpy as np
import pytest

from cabnlu.autodiff import Tape
from cabnlu.errors import ContractError
from cabnlu.recurrent import (
    AttentionParams,
    CellParams,
    attention_pool,
    attention_pool_raw,
    bi_encode,
    bi_encode_raw,
    gru_step,
    init_attention,
    init_cell,
    lstm_step,
    tape_cell,
)
from cabnlu.rng import SeedStream

from helpers import compare_grads, finite_diff_grads


def zero_cell(kind, d, h):
    cell = init_cell(kind, d, h, SeedStream(0))
    for k in cell.weights:
        cell.weights[k] = np.zeros_like(cell.weights[k])
    return cell


def random_cell(kind, d, h, seed):
    return init_cell(kind, d, h, SeedStream(seed))


class TestLstmStep:
    def test_zero_params_zero_inputs(self):
        cell = zero_cell("lstm", 3, 4)
        tape = Tape()
        h, c = lstm_step(tape, tape.constant(np.zeros(3)),
                         tape.constant(np.zeros(4)), tape.constant(np.zeros(4)), cell)
        np.testing.assert_array_equal(h.data, np.zeros(4))
        np.testing.assert_array_equal(c.data, np.zeros(4))

    def test_hidden_bounded(self):
        cell = random_cell("lstm", 5, 6, seed=1)
        rng = np.random.default_rng(2)
        tape = Tape()
        h, _ = lstm_step(tape, tape.constant(rng.normal(size=5) * 10),
                         tape.constant(np.tanh(rng.normal(size=6))),
                         tape.constant(rng.normal(size=6)), cell)
        assert np.all(np.abs(h.data) < 1.0)

    def test_wrong_kind_rejected(self):
        cell = random_cell("gru", 3, 4, seed=0)
        tape = Tape()
        with pytest.raises(ContractError):
            lstm_step(tape, tape.constant(np.zeros(3)),
                      tape.constant(np.zeros(4)), tape.constant(np.zeros(4)), cell)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradients_match_finite_differences(self, seed):
        d, hd = 3, 4
        cell = random_cell("lstm", d, hd, seed=seed)
        rng = np.random.default_rng(seed + 100)
        x = rng.normal(size=d)
        h0 = rng.normal(size=hd) * 0.5
        c0 = rng.normal(size=hd) * 0.5
        probe = rng.normal(size=2 * hd)

        def loss_fn(p):
            c = CellParams("lstm", d, hd, p)
            tape = Tape()
            h, cc = lstm_step(tape, tape.constant(x), tape.constant(h0),
                              tape.constant(c0), c)
            out = tape.concat([h, cc])
            return float(np.dot(out.data, probe))

        tape = Tape()
        leaves = {}
        taped = tape_cell(tape, cell, leaves)
        h, c = lstm_step(tape, tape.constant(x), tape.constant(h0),
                         tape.constant(c0), taped)
        out = tape.mul(tape.concat([h, c]), tape.constant(probe))
        grads = tape.backward(tape.sum(out))
        analytic = {name: grads[t.id] for name, t in leaves.items()}
        numeric = finite_diff_grads(loss_fn, cell.weights)
        compare_grads(analytic, numeric)


class TestGruStep:
    def test_zero_params_zero_inputs(self):
        cell = zero_cell("gru", 3, 4)
        tape = Tape()
        h = gru_step(tape, tape.constant(np.zeros(3)), tape.constant(np.zeros(4)), cell)
        np.testing.assert_array_equal(h.data, np.zeros(4))

    def test_convex_combination(self):
        cell = random_cell("gru", 4, 5, seed=3)
        rng = np.random.default_rng(4)
        x = rng.normal(size=4)
        h_prev = np.tanh(rng.normal(size=5))
        tape = Tape()
        h = gru_step(tape, tape.constant(x), tape.constant(h_prev), cell)
        # recompute the candidate to bound h between h_prev and hbar
        xh = np.concatenate([x, h_prev])
        zr = 1 / (1 + np.exp(-(np.concatenate([cell.weights["w_z"], cell.weights["w_r"]]) @ xh
                               + np.concatenate([cell.weights["b_z"], cell.weights["b_r"]]))))
        hbar = np.tanh(cell.weights["w_h"] @ np.concatenate([x, zr[5:] * h_prev])
                       + cell.weights["b_h"])
        lo = np.minimum(h_prev, hbar) - 1e-12
        hi = np.maximum(h_prev, hbar) + 1e-12
        assert np.all(h.data >= lo) and np.all(h.data <= hi)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradients_match_finite_differences(self, seed):
        d, hd = 3, 4
        cell = random_cell("gru", d, hd, seed=seed + 10)
        rng = np.random.default_rng(seed + 200)
        x = rng.normal(size=d)
        h0 = rng.normal(size=hd) * 0.5
        probe = rng.normal(size=hd)

        def loss_fn(p):
            c = CellParams("gru", d, hd, p)
            tape = Tape()
            h = gru_step(tape, tape.constant(x), tape.constant(h0), c)
            return float(np.dot(h.data, probe))

        tape = Tape()
        leaves = {}
        taped = tape_cell(tape, cell, leaves)
        h = gru_step(tape, tape.constant(x), tape.constant(h0), taped)
        loss = tape.sum(tape.mul(h, tape.constant(probe)))
        grads = tape.backward(loss)
        analytic = {name: grads[t.id] for name, t in leaves.items()}
        numeric = finite_diff_grads(loss_fn, cell.weights)
        compare_grads(analytic, numeric)


class TestBiEncode:
    def test_single_position_equals_two_steps(self):
        d, hd = 3, 4
        fwd = random_cell("lstm", d, hd, seed=5)
        bwd = random_cell("lstm", d, hd, seed=6)
        x = np.random.default_rng(7).normal(size=(1, d))
        enc = bi_encode_raw(fwd, bwd, x)
        tape = Tape()
        hf, _ = lstm_step(tape, tape.constant(x[0]), tape.constant(np.zeros(hd)),
                          tape.constant(np.zeros(hd)), fwd)
        hb, _ = lstm_step(tape, tape.constant(x[0]), tape.constant(np.zeros(hd)),
                          tape.constant(np.zeros(hd)), bwd)
        np.testing.assert_array_equal(enc[0], np.concatenate([hf.data, hb.data]))

    @pytest.mark.parametrize("kind", ["lstm", "gru"])
    def test_reverse_symmetry_bit_exact(self, kind):
        d, hd = 3, 4
        fwd = random_cell(kind, d, hd, seed=8)
        bwd = random_cell(kind, d, hd, seed=9)
        xs = np.random.default_rng(10).normal(size=(5, d))
        enc = bi_encode_raw(fwd, bwd, xs)
        flipped = bi_encode_raw(bwd, fwd, xs[::-1].copy())
        swapped = np.concatenate([flipped[:, hd:], flipped[:, :hd]], axis=1)[::-1]
        assert enc.tobytes() == swapped.tobytes()

    def test_output_shape(self):
        fwd = random_cell("gru", 3, 4, seed=11)
        bwd = random_cell("gru", 3, 4, seed=12)
        for t in (1, 2, 7):
            xs = np.random.default_rng(t).normal(size=(t, 3))
            assert bi_encode_raw(fwd, bwd, xs).shape == (t, 8)

    def test_empty_sequence_rejected(self):
        fwd = random_cell("lstm", 3, 4, seed=13)
        bwd = random_cell("lstm", 3, 4, seed=14)
        with pytest.raises(ContractError):
            bi_encode_raw(fwd, bwd, np.zeros((0, 3)))
        tape = Tape()
        with pytest.raises(ContractError):
            bi_encode(tape, tape.constant(np.zeros((0, 3))), fwd, bwd)

    def test_order_sensitive(self):
        fwd = random_cell("lstm", 3, 4, seed=15)
        bwd = random_cell("lstm", 3, 4, seed=16)
        xs = np.random.default_rng(17).normal(size=(4, 3))
        permuted = xs[[0, 2, 1, 3]]
        assert not np.allclose(bi_encode_raw(fwd, bwd, xs), bi_encode_raw(fwd, bwd, permuted))

    def test_tape_matches_raw(self):
        d, hd = 3, 4
        fwd = random_cell("lstm", d, hd, seed=18)
        bwd = random_cell("lstm", d, hd, seed=19)
        xs = np.random.default_rng(20).normal(size=(4, d))
        tape = Tape()
        enc = bi_encode(tape, tape.constant(xs), fwd, bwd)
        assert enc.data.tobytes() == bi_encode_raw(fwd, bwd, xs).tobytes()

    @pytest.mark.parametrize("kind,seed", [("lstm", 0), ("lstm", 1), ("gru", 0)])
    def test_gradients_match_finite_differences(self, kind, seed):
        d, hd, t = 2, 3, 4
        fwd = random_cell(kind, d, hd, seed=seed + 30)
        bwd = random_cell(kind, d, hd, seed=seed + 40)
        rng = np.random.default_rng(seed + 50)
        xs = rng.normal(size=(t, d))
        probe = rng.normal(size=(t, 2 * hd))
        all_params = {f"fwd.{k}": v for k, v in fwd.weights.items()}
        all_params.update({f"bwd.{k}": v for k, v in bwd.weights.items()})

        def loss_fn(p):
            f = CellParams(kind, d, hd, {k[4:]: v for k, v in p.items() if k.startswith("fwd.")})
            b = CellParams(kind, d, hd, {k[4:]: v for k, v in p.items() if k.startswith("bwd.")})
            return float((bi_encode_raw(f, b, xs) * probe).sum())

        tape = Tape()
        leaves = {}
        tf = tape_cell(tape, fwd, leaves, prefix="fwd.")
        tb = tape_cell(tape, bwd, leaves, prefix="bwd.")
        enc = bi_encode(tape, tape.constant(xs), tf, tb)
        loss = tape.sum(tape.mul(enc, tape.constant(probe)))
        grads = tape.backward(loss)
        analytic = {name: grads[node.id] for name, node in leaves.items()}
        numeric = finite_diff_grads(loss_fn, all_params)
        compare_grads(analytic, numeric)


class TestAttentionPool:
    def test_single_row_degenerate(self):
        attn = init_attention(3, 6, SeedStream(21))
        hs = np.random.default_rng(22).normal(size=(1, 6))
        ctx, weights = attention_pool_raw(attn, hs)
        np.testing.assert_allclose(weights, [1.0])
        np.testing.assert_allclose(ctx, hs[0])

    def test_identical_rows_uniform_weights(self):
        attn = init_attention(3, 6, SeedStream(23))
        row = np.random.default_rng(24).normal(size=6)
        hs = np.tile(row, (5, 1))
        _, weights = attention_pool_raw(attn, hs)
        np.testing.assert_allclose(weights, np.full(5, 0.2), atol=1e-12)

    def test_weights_sum_to_one(self):
        attn = init_attention(4, 8, SeedStream(25))
        for seed in range(3):
            hs = np.random.default_rng(seed).normal(size=(6, 8))
            _, weights = attention_pool_raw(attn, hs)
            assert abs(weights.sum() - 1.0) < 1e-12

    def test_tape_matches_raw(self):
        attn = init_attention(3, 6, SeedStream(26))
        hs = np.random.default_rng(27).normal(size=(4, 6))
        tape = Tape()
        ctx, weights = attention_pool(tape, tape.constant(hs), attn)
        ctx_raw, weights_raw = attention_pool_raw(attn, hs)
        assert ctx.data.tobytes() == ctx_raw.tobytes()
        assert weights.tobytes() == weights_raw.tobytes()

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradients_match_finite_differences(self, seed):
        a_dim, width, t = 3, 4, 5
        attn = init_attention(a_dim, width, SeedStream(seed + 60))
        rng = np.random.default_rng(seed + 70)
        hs = rng.normal(size=(t, width))
        probe = rng.normal(size=width)
        params = {"w": attn.w, "u": attn.u, "hs": hs}

        def loss_fn(p):
            ctx, _ = attention_pool_raw(AttentionParams(w=p["w"], u=p["u"]), p["hs"])
            return float(np.dot(ctx, probe))

        tape = Tape()
        w = tape.leaf(attn.w)
        u = tape.leaf(attn.u)
        hs_node = tape.leaf(hs)
        ctx, _ = attention_pool(tape, hs_node, (w, u))
        loss = tape.sum(tape.mul(ctx, tape.constant(probe)))
        grads = tape.backward(loss)
        analytic = {"w": grads[w.id], "u": grads[u.id], "hs": grads[hs_node.id]}
        numeric = finite_diff_grads(loss_fn, params)
        compare_grads(analytic, numeric)
