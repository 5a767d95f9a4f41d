"""LSTM cells in real and quaternion flavours, plus sequence drivers.

Both cells share the same gate topology: forget, input and output gates
squashed by a sigmoid, a tanh candidate, and component-wise (split) gating
of the cell state:

    f = sigmoid(Wf x + Rf h + bf)        i = sigmoid(Wi x + Ri h + bi)
    g = tanh(Wc x + Rc h + bc)           o = sigmoid(Wo x + Ro h + bo)
    c' = f * c + i * g                   h' = o * tanh(c')

In the quaternion cell every W and R is a QuaternionLinear, so the affine
maps are quaternion products while the gating stays component-wise over
the 4H real components of the split-layout state.

For speed the four gates are fused per forward pass: each cell assembles
its gate matrices once, stacks them, and every timestep then costs two
matrix products plus elementwise work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import (DivergenceError, Parameter, Tensor, add, concat_rows,
                       linear, mul, sigmoid, slice_cols, tanh)
from .layers import QuaternionLinear, RealLinear, assemble_quaternion_matrix
from .quaternions import QuaternionVector

__all__ = [
    "QLSTMCell",
    "LSTMCell",
    "QLSTMState",
    "qlstm_step",
    "lstm_step",
    "run_sequence",
    "bidirectional_run",
]

# Fused gate order; the first three slices take the sigmoid, the last the tanh.
_FUSED_GATES = ("f", "i", "o", "c")


def _gate_math(pre: Tensor, c_prev: Tensor, width: int) -> tuple[Tensor, Tensor]:
    """Shared gating given the fused pre-activation (B, 4*width)."""
    squashed = sigmoid(slice_cols(pre, 0, 3 * width))
    f = slice_cols(squashed, 0, width)
    i = slice_cols(squashed, width, 2 * width)
    o = slice_cols(squashed, 2 * width, 3 * width)
    g = tanh(slice_cols(pre, 3 * width, 4 * width))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


class QLSTMCell:
    """LSTM cell whose input and recurrent maps are quaternion-valued.

    The forget-gate bias starts positive so that early in training the cell
    state decays slowly and gradient signal survives long input-to-target
    gaps; all other biases start at zero.
    """

    def __init__(self, in_q: int, hidden_q: int,
                 rng: np.random.Generator | None = None,
                 forget_bias: float = 2.0):
        if rng is None:
            rng = np.random.default_rng()
        self.in_q = in_q
        self.hidden_q = hidden_q
        # Input maps, recurrent maps, then biases; gate order f, i, c, o.
        self.w_f = QuaternionLinear(hidden_q, in_q, bias=False, rng=rng)
        self.w_i = QuaternionLinear(hidden_q, in_q, bias=False, rng=rng)
        self.w_c = QuaternionLinear(hidden_q, in_q, bias=False, rng=rng)
        self.w_o = QuaternionLinear(hidden_q, in_q, bias=False, rng=rng)
        self.r_f = QuaternionLinear(hidden_q, hidden_q, bias=False, rng=rng)
        self.r_i = QuaternionLinear(hidden_q, hidden_q, bias=False, rng=rng)
        self.r_c = QuaternionLinear(hidden_q, hidden_q, bias=False, rng=rng)
        self.r_o = QuaternionLinear(hidden_q, hidden_q, bias=False, rng=rng)
        self.b_f = Parameter(np.full(4 * hidden_q, float(forget_bias)))
        self.b_i = Parameter(np.zeros(4 * hidden_q))
        self.b_c = Parameter(np.zeros(4 * hidden_q))
        self.b_o = Parameter(np.zeros(4 * hidden_q))

    @property
    def state_width(self) -> int:
        return 4 * self.hidden_q

    @property
    def input_width(self) -> int:
        return 4 * self.in_q

    def parameters(self):
        for gate in ("f", "i", "c", "o"):
            yield f"w_{gate}.weight", getattr(self, f"w_{gate}").weight
        for gate in ("f", "i", "c", "o"):
            yield f"r_{gate}.weight", getattr(self, f"r_{gate}").weight
        for gate in ("f", "i", "c", "o"):
            yield f"b_{gate}", getattr(self, f"b_{gate}")

    def fused_tensors(self) -> tuple[Tensor, Tensor, Tensor]:
        """Assembled gate matrices stacked in (f, i, o, c) order."""
        wt = concat_rows([assemble_quaternion_matrix(getattr(self, f"w_{g}").weight)
                          for g in _FUSED_GATES])
        rt = concat_rows([assemble_quaternion_matrix(getattr(self, f"r_{g}").weight)
                          for g in _FUSED_GATES])
        b = concat_rows([getattr(self, f"b_{g}") for g in _FUSED_GATES])
        return wt, rt, b

    def initial_state(self, batch_size: int) -> tuple[Tensor, Tensor]:
        zeros = np.zeros((batch_size, self.state_width))
        return Tensor(zeros), Tensor(zeros.copy())

    def step(self, x: Tensor, state: tuple[Tensor, Tensor],
             fused=None) -> tuple[Tensor, Tensor]:
        if x.data.shape[-1] != self.input_width:
            raise ValueError(f"expected input width {self.input_width}, got {x.data.shape[-1]}")
        h, c = state
        if h.data.shape[-1] != self.state_width:
            raise ValueError(f"expected state width {self.state_width}, got {h.data.shape[-1]}")
        if fused is None:
            fused = self.fused_tensors()
        wt, rt, b = fused
        pre = add(add(linear(x, wt), linear(h, rt)), b)
        return _gate_math(pre, c, self.state_width)


class LSTMCell:
    """Standard real-valued LSTM cell with the same gate topology.

    Initialized like the quaternion cell: positive forget-gate bias, zeros
    elsewhere, so both baselines start from the same gating regime.
    """

    def __init__(self, input_dim: int, hidden_dim: int,
                 rng: np.random.Generator | None = None,
                 forget_bias: float = 2.0):
        if rng is None:
            rng = np.random.default_rng()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.w_f = RealLinear(hidden_dim, input_dim, bias=False, rng=rng)
        self.w_i = RealLinear(hidden_dim, input_dim, bias=False, rng=rng)
        self.w_c = RealLinear(hidden_dim, input_dim, bias=False, rng=rng)
        self.w_o = RealLinear(hidden_dim, input_dim, bias=False, rng=rng)
        self.r_f = RealLinear(hidden_dim, hidden_dim, bias=False, rng=rng)
        self.r_i = RealLinear(hidden_dim, hidden_dim, bias=False, rng=rng)
        self.r_c = RealLinear(hidden_dim, hidden_dim, bias=False, rng=rng)
        self.r_o = RealLinear(hidden_dim, hidden_dim, bias=False, rng=rng)
        self.b_f = Parameter(np.full(hidden_dim, float(forget_bias)))
        self.b_i = Parameter(np.zeros(hidden_dim))
        self.b_c = Parameter(np.zeros(hidden_dim))
        self.b_o = Parameter(np.zeros(hidden_dim))

    @property
    def state_width(self) -> int:
        return self.hidden_dim

    @property
    def input_width(self) -> int:
        return self.input_dim

    def parameters(self):
        for gate in ("f", "i", "c", "o"):
            yield f"w_{gate}.weight", getattr(self, f"w_{gate}").weight
        for gate in ("f", "i", "c", "o"):
            yield f"r_{gate}.weight", getattr(self, f"r_{gate}").weight
        for gate in ("f", "i", "c", "o"):
            yield f"b_{gate}", getattr(self, f"b_{gate}")

    def fused_tensors(self):
        wt = concat_rows([getattr(self, f"w_{g}").weight for g in _FUSED_GATES])
        rt = concat_rows([getattr(self, f"r_{g}").weight for g in _FUSED_GATES])
        b = concat_rows([getattr(self, f"b_{g}") for g in _FUSED_GATES])
        return wt, rt, b

    def initial_state(self, batch_size: int) -> tuple[Tensor, Tensor]:
        zeros = np.zeros((batch_size, self.hidden_dim))
        return Tensor(zeros), Tensor(zeros.copy())

    def step(self, x, state, fused=None):
        if x.data.shape[-1] != self.input_dim:
            raise ValueError(f"expected input width {self.input_dim}, got {x.data.shape[-1]}")
        h, c = state
        if h.data.shape[-1] != self.hidden_dim:
            raise ValueError(f"expected state width {self.hidden_dim}, got {h.data.shape[-1]}")
        if fused is None:
            fused = self.fused_tensors()
        wt, rt, b = fused
        pre = add(add(linear(x, wt), linear(h, rt)), b)
        return _gate_math(pre, c, self.state_width)


def run_sequence(cell, inputs, state=None):
    """Fold the cell left to right; returns per-step hidden states and the
    final (h, c) state.  Gradients flow through the whole unroll."""
    if state is None:
        batch = inputs[0].data.shape[0] if inputs else 1
        state = cell.initial_state(batch)
    if not inputs:
        return [], state
    fused = cell.fused_tensors()
    hs = []
    h, c = state
    for x in inputs:
        h, c = cell.step(x, (h, c), fused=fused)
        hs.append(h)
    return hs, (h, c)


def bidirectional_run(fwd_cell, bwd_cell, inputs):
    """Component-wise sum of a forward pass and a reversed backward pass."""
    if fwd_cell.state_width != bwd_cell.state_width:
        raise ValueError("forward and backward cells must share the hidden size")
    hs_f, _ = run_sequence(fwd_cell, inputs)
    hs_b, _ = run_sequence(bwd_cell, list(reversed(inputs)))
    return [add(a, b) for a, b in zip(hs_f, reversed(hs_b))]


@dataclass
class QLSTMState:
    """Hidden and cell state of a quaternion cell as split-layout vectors."""

    h: QuaternionVector
    c: QuaternionVector


def qlstm_step(cell: QLSTMCell, x: QuaternionVector,
               prev: QLSTMState | None = None) -> QLSTMState:
    """Single unbatched step over split-layout quaternion vectors."""
    if x.n_quats != cell.in_q:
        raise ValueError(f"expected {cell.in_q} input quaternions, got {x.n_quats}")
    if prev is None:
        h = np.zeros(cell.state_width)
        c = np.zeros(cell.state_width)
    else:
        if prev.h.n_quats != cell.hidden_q or prev.c.n_quats != cell.hidden_q:
            raise ValueError("state size does not match the cell's hidden size")
        h, c = prev.h.components, prev.c.components
    ht, ct = cell.step(Tensor(x.components[np.newaxis, :]),
                       (Tensor(h[np.newaxis, :]), Tensor(c[np.newaxis, :])))
    if not (np.all(np.isfinite(ht.data)) and np.all(np.isfinite(ct.data))):
        raise DivergenceError("non-finite state after step")
    return QLSTMState(h=QuaternionVector(ht.data[0]), c=QuaternionVector(ct.data[0]))


def lstm_step(cell: LSTMCell, x: np.ndarray,
              prev: tuple[np.ndarray, np.ndarray] | None = None):
    """Single unbatched step of the real cell over plain arrays."""
    x = np.asarray(x, dtype=np.float64)
    if prev is None:
        h = np.zeros(cell.hidden_dim)
        c = np.zeros(cell.hidden_dim)
    else:
        h, c = (np.asarray(a, dtype=np.float64) for a in prev)
    ht, ct = cell.step(Tensor(x[np.newaxis, :]),
                       (Tensor(h[np.newaxis, :]), Tensor(c[np.newaxis, :])))
    if not (np.all(np.isfinite(ht.data)) and np.all(np.isfinite(ct.data))):
        raise DivergenceError("non-finite state after step")
    return ht.data[0], ct.data[0]
