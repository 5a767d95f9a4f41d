"""Real and quaternion linear layers, split activations, init, param counts.

A quaternion linear map with M output and N input quaternion units stores
its weights as four M x N real blocks (r, x, y, z).  Its forward pass is the
multiplication by a structured real 4M x 4N matrix assembled from those
blocks, which realises quaternion left-multiplication on split-layout
vectors while keeping the whole computation inside the real autodiff
engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autograd import Parameter, Tensor, add, linear, stable_sigmoid
from .quaternions import QuaternionVector

__all__ = [
    "InitConfig",
    "QuaternionLinear",
    "RealLinear",
    "quaternion_init",
    "quaternion_block_matrix",
    "assemble_real_matrix",
    "assemble_quaternion_matrix",
    "split_activation",
    "param_count",
    "real_linear_params",
    "quaternion_linear_params",
    "lstm_params",
    "qlstm_params",
]

# (component, sign) of each 4x4 block grid entry of the structured real
# matrix realising quaternion left-multiplication in split layout.
# Components are indexed 0=r, 1=x, 2=y, 3=z.
_BLOCK_LAYOUT = (
    ((0, 1.0), (1, -1.0), (2, -1.0), (3, -1.0)),
    ((1, 1.0), (0, 1.0), (3, -1.0), (2, 1.0)),
    ((2, 1.0), (3, 1.0), (0, 1.0), (1, -1.0)),
    ((3, 1.0), (2, -1.0), (1, 1.0), (0, 1.0)),
)


def quaternion_block_matrix(blocks: np.ndarray) -> np.ndarray:
    """Assemble (4, M, N) component blocks into the (4M, 4N) real matrix."""
    rows = [[sign * blocks[comp] for comp, sign in row] for row in _BLOCK_LAYOUT]
    return np.block(rows)


def assemble_quaternion_matrix(weight: Tensor) -> Tensor:
    """Differentiable version of quaternion_block_matrix for a (4, M, N) tensor."""
    data = quaternion_block_matrix(weight.data)
    if not weight.tracked:
        return Tensor(data)
    _, m, n = weight.data.shape

    def vjp(g, weight=weight, m=m, n=n):
        wg = weight.grad
        for bi, row in enumerate(_BLOCK_LAYOUT):
            gi = g[bi * m:(bi + 1) * m]
            for bj, (comp, sign) in enumerate(row):
                block = gi[:, bj * n:(bj + 1) * n]
                if sign > 0:
                    wg[comp] += block
                else:
                    wg[comp] -= block
    return Tensor(data, (weight,), (vjp,))


@dataclass(frozen=True)
class InitConfig:
    """Fan counts (in quaternion units) and seed for quaternion weight init."""

    fan_in: int
    fan_out: int
    seed: int = 0

    def __post_init__(self):
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError("fan counts must be positive")

    @property
    def sigma(self) -> float:
        return 1.0 / math.sqrt(2.0 * (self.fan_in + self.fan_out))


def _polar_quaternion_weights(rng: np.random.Generator, sigma: float,
                              out_q: int, in_q: int) -> np.ndarray:
    """Sample (4, out_q, in_q) weight blocks as magnitude * unit rotation.

    Each weight is phi * (cos(theta) + u sin(theta)) with phi uniform on
    [-sigma, sigma], theta uniform on [-pi, pi] and u a uniformly random
    unit pure-imaginary quaternion, so every sample has norm <= sigma.
    """
    shape = (out_q, in_q)
    phi = rng.uniform(-sigma, sigma, size=shape)
    theta = rng.uniform(-np.pi, np.pi, size=shape)
    axis = rng.standard_normal(size=(3,) + shape)
    axis /= np.linalg.norm(axis, axis=0)
    sin_t = np.sin(theta)
    return np.stack([
        phi * np.cos(theta),
        phi * sin_t * axis[0],
        phi * sin_t * axis[1],
        phi * sin_t * axis[2],
    ])


def quaternion_init(cfg: InitConfig, out_q: int, in_q: int) -> np.ndarray:
    """Deterministic (4, out_q, in_q) weight blocks for the given config."""
    rng = np.random.default_rng(cfg.seed)
    return _polar_quaternion_weights(rng, cfg.sigma, out_q, in_q)


def _glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


class RealLinear:
    """Ordinary dense map y = W x (+ b) with Glorot-uniform weights."""

    def __init__(self, out_dim: int, in_dim: int, bias: bool = True,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng()
        self.out_dim = out_dim
        self.in_dim = in_dim
        self.weight = Parameter(_glorot_uniform(rng, out_dim, in_dim))
        self.bias = Parameter(np.zeros(out_dim)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.in_dim:
            raise ValueError(f"expected input width {self.in_dim}, got {x.data.shape[-1]}")
        out = linear(x, self.weight)
        if self.bias is not None:
            out = add(out, self.bias)
        return out

    def parameters(self):
        yield "weight", self.weight
        if self.bias is not None:
            yield "bias", self.bias


class QuaternionLinear:
    """Dense map whose every weight entry is a quaternion.

    ``weight`` holds the four component blocks as one (4, out_q, in_q)
    parameter; ``bias``, when present, is a split-layout vector of out_q
    quaternions.  Input and output are split-layout vectors of widths
    4*in_q and 4*out_q.
    """

    def __init__(self, out_q: int, in_q: int, bias: bool = True,
                 rng: np.random.Generator | None = None,
                 sigma: float | None = None):
        if rng is None:
            rng = np.random.default_rng()
        if sigma is None:
            sigma = InitConfig(fan_in=in_q, fan_out=out_q).sigma
        self.out_q = out_q
        self.in_q = in_q
        self.weight = Parameter(_polar_quaternion_weights(rng, sigma, out_q, in_q))
        self.bias = Parameter(np.zeros(4 * out_q)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != 4 * self.in_q:
            raise ValueError(
                f"expected input width {4 * self.in_q}, got {x.data.shape[-1]}")
        out = linear(x, assemble_quaternion_matrix(self.weight))
        if self.bias is not None:
            out = add(out, self.bias)
        return out

    def forward_vector(self, v: QuaternionVector) -> QuaternionVector:
        """Apply the layer to one split-layout vector of in_q quaternions."""
        if v.n_quats != self.in_q:
            raise ValueError(f"expected {self.in_q} input quaternions, got {v.n_quats}")
        out = self(Tensor(v.components[np.newaxis, :]))
        return QuaternionVector(out.data[0])

    def parameters(self):
        yield "weight", self.weight
        if self.bias is not None:
            yield "bias", self.bias


def assemble_real_matrix(layer: QuaternionLinear) -> np.ndarray:
    """The (4M, 4N) real matrix whose product equals the layer's forward."""
    return quaternion_block_matrix(layer.weight.data)


def split_activation(v: QuaternionVector, kind: str) -> QuaternionVector:
    """Apply a real nonlinearity independently to all 4N components."""
    if kind == "sigmoid":
        return QuaternionVector(stable_sigmoid(v.components))
    if kind == "tanh":
        return QuaternionVector(np.tanh(v.components))
    raise ValueError(f"unknown activation kind {kind!r}")


def param_count(module_or_params) -> int:
    """Number of scalar learnable parameters in a module or (name, p) iterable."""
    if hasattr(module_or_params, "parameters"):
        items = module_or_params.parameters()
    else:
        items = module_or_params
    return sum(p.data.size for _, p in items)


# Closed-form counts, used by the CLI to audit architectures without
# allocating them.

def real_linear_params(out_dim: int, in_dim: int, bias: bool = False) -> int:
    return out_dim * in_dim + (out_dim if bias else 0)


def quaternion_linear_params(out_q: int, in_q: int, bias: bool = False) -> int:
    return 4 * out_q * in_q + (4 * out_q if bias else 0)


def lstm_params(hidden: int, input_dim: int) -> int:
    """Four gates, each input map + recurrent map + bias."""
    return 4 * (hidden * input_dim + hidden * hidden + hidden)


def qlstm_params(hidden_q: int, input_q: int) -> int:
    """Quaternion analogue of lstm_params, counted in real scalars."""
    return 4 * (4 * hidden_q * input_q + 4 * hidden_q * hidden_q + 4 * hidden_q)
