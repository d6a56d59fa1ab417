"""Probe parameterizations: feature maps, pairwise distances, loss, gradients.

A probe maps a word vector h to features phi(Bh) and predicts the tree
distance between words i and j as the Euclidean norm ||phi(Bh_i) - phi(Bh_j)||.
Its square is trained against the gold tree distance with an L1 objective
normalized by the squared sentence length, summed over ordered token pairs.

Kernels: linear (phi = identity), poly ((z + c)^p elementwise), rbf
(exp(-z^2 / 2 sigma^2) elementwise, or the literal scalar exp(-||z||^2 / 2 sigma^2)),
sigmoid (tanh(a z + b) elementwise), and a forward-only bilinear reference
distance |k(i,i) - 2 k(i,j) + k(j,j)| with k(x,y) = (Bx)·(By).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .binfmt import Frame, write_frame
from .treebank import TreeDistances

LINEAR = "linear"
POLY = "poly"
RBF = "rbf"
SIGMOID = "sigmoid"
BILINEAR_REF = "bilinear-ref"
KERNELS = (LINEAR, POLY, RBF, SIGMOID, BILINEAR_REF)
TRAINABLE_KERNELS = (LINEAR, POLY, RBF, SIGMOID)

RBF_ELEMENTWISE = "elementwise"
RBF_SCALAR = "scalar"
RBF_MODES = (RBF_ELEMENTWISE, RBF_SCALAR)

CHECKPOINT_MAGIC = b"SPP1"
CHECKPOINT_VERSION = 1


class NumericError(ArithmeticError):
    """A probe computation overflowed to NaN or Inf."""


class UnsupportedKernelError(ValueError):
    pass


@dataclass
class ProbeParams:
    B: np.ndarray  # (rank, dim) projection
    kernel: str = LINEAR
    c: float = 0.0  # polynomial shift
    p: int = 2  # polynomial degree
    sigma: float = 1.0  # rbf scale
    a: float = 1.0  # sigmoid gain
    b: float = 0.0  # sigmoid bias
    rbf_mode: str = RBF_ELEMENTWISE

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=np.float64)
        if self.B.ndim != 2 or self.B.shape[0] < 1 or self.B.shape[1] < 1:
            raise ValueError(f"B must be a (rank, dim) matrix, got shape {self.B.shape}")
        if not np.isfinite(self.B).all():
            raise ValueError("B contains non-finite entries")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}, expected one of {KERNELS}")
        if self.rbf_mode not in RBF_MODES:
            raise ValueError(f"unknown rbf_mode {self.rbf_mode!r}, expected one of {RBF_MODES}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.p < 1:
            raise ValueError("polynomial degree must be a positive integer")
        if self.c < 0:
            raise ValueError("polynomial shift must be non-negative")

    @property
    def rank(self) -> int:
        return self.B.shape[0]

    @property
    def dim(self) -> int:
        return self.B.shape[1]

    def hyperparameters(self) -> dict:
        return {
            "kernel": self.kernel,
            "c": self.c,
            "p": self.p,
            "sigma": self.sigma,
            "a": self.a,
            "b": self.b,
            "rbf_mode": self.rbf_mode,
        }


@dataclass
class DistanceMatrix:
    values: np.ndarray  # (T, T) squared predicted distances

    @property
    def n_tokens(self) -> int:
        return self.values.shape[0]


@dataclass
class Gradients:
    B: np.ndarray
    a: float | None = None
    b: float | None = None


def init_params(dim: int, rank: int = 128, kernel: str = LINEAR, seed: int = 0,
                **hyper) -> ProbeParams:
    """Fresh parameters with B ~ iid uniform on [-0.05, 0.05] from `seed`."""
    rng = np.random.default_rng(seed)
    B = rng.uniform(-0.05, 0.05, size=(rank, dim))
    return ProbeParams(B=B, kernel=kernel, **hyper)


def _check_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.isfinite(x).all():
        raise NumericError(f"{what} overflowed to a non-finite value")
    return x


def _features(params: ProbeParams, Z: np.ndarray) -> np.ndarray:
    """Feature values for projected points Z with shape (..., rank)."""
    with np.errstate(over="ignore", invalid="ignore"):
        if params.kernel == LINEAR:
            return Z
        if params.kernel == POLY:
            return (Z + params.c) ** params.p
        if params.kernel == SIGMOID:
            return np.tanh(params.a * Z + params.b)
        if params.kernel == RBF:
            s2 = 2.0 * params.sigma**2
            if params.rbf_mode == RBF_ELEMENTWISE:
                return np.exp(-(Z**2) / s2)
            return np.exp(-np.sum(Z**2, axis=-1, keepdims=True) / s2)
    raise UnsupportedKernelError(f"{params.kernel!r} has no per-token feature map")


def _feature_slopes(params: ProbeParams, Z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """d(phi)/dz elementwise; only for the elementwise-feature kernels."""
    if params.kernel == LINEAR:
        return np.ones_like(Z)
    if params.kernel == POLY:
        if params.p == 1:
            return np.ones_like(Z)
        return params.p * (Z + params.c) ** (params.p - 1)
    if params.kernel == SIGMOID:
        return params.a * (1.0 - phi**2)
    if params.kernel == RBF and params.rbf_mode == RBF_ELEMENTWISE:
        return phi * (-Z / params.sigma**2)
    raise UnsupportedKernelError(f"no elementwise slopes for kernel {params.kernel!r}")


def feature_map(params: ProbeParams, h: np.ndarray) -> np.ndarray:
    """phi(Bh) for one word vector; length rank (length 1 for scalar rbf)."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (params.dim,):
        raise ValueError(f"expected a vector of length {params.dim}, got shape {h.shape}")
    z = params.B @ h
    return _check_finite(_features(params, z), "feature map")


def pair_distance(params: ProbeParams, h_i: np.ndarray, h_j: np.ndarray) -> float:
    """Predicted (non-squared) distance between two word vectors."""
    if params.kernel == BILINEAR_REF:
        u = params.B @ np.asarray(h_i, dtype=np.float64)
        v = params.B @ np.asarray(h_j, dtype=np.float64)
        val = float(abs(u @ u - 2.0 * (u @ v) + v @ v))
        _check_finite(np.asarray(val), "pair distance")
        return val
    diff = feature_map(params, h_i) - feature_map(params, h_j)
    return float(_check_finite(np.linalg.norm(diff), "pair distance"))


def _squared_feature_distances(F: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of F, exactly symmetric."""
    with np.errstate(over="ignore", invalid="ignore"):
        diff = F[:, None, :] - F[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)


def distance_matrix(params: ProbeParams, H: np.ndarray) -> DistanceMatrix:
    """Squared predicted distances between all token pairs of one sentence."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != params.dim:
        raise ValueError(f"expected (T, {params.dim}) vectors, got shape {H.shape}")
    if params.kernel == BILINEAR_REF:
        U = H @ params.B.T
        values = _squared_feature_distances(U) ** 2  # d_B = ||u_i - u_j||^2, squared again
    else:
        F = _features(params, H @ params.B.T)
        values = _squared_feature_distances(F)
    return DistanceMatrix(values=_check_finite(values, "distance matrix"))


def sentence_loss(params: ProbeParams, H: np.ndarray, gold: TreeDistances) -> float:
    """Mean absolute gap between gold distances and squared predicted ones.

    (1/T^2) * sum over ordered pairs (i, j) of |d_T[i,j] - d_B(i,j)^2|.
    """
    loss, _ = loss_and_gradient(params, H, gold, need_gradient=False)
    return loss


def loss_gradient(params: ProbeParams, H: np.ndarray, gold: TreeDistances,
                  wrt_ab: bool = False) -> Gradients:
    """Analytic gradient of sentence_loss w.r.t. B (and a, b if requested).

    Subgradient convention: sign(0) = 0 at the |.| kink, so perfectly fit
    pairs contribute nothing.
    """
    _, grads = loss_and_gradient(params, H, gold, need_gradient=True, wrt_ab=wrt_ab)
    return grads


def loss_and_gradient(params: ProbeParams, H: np.ndarray, gold: TreeDistances,
                      need_gradient: bool = True, wrt_ab: bool = False):
    """Loss and gradient in one pass; the gradient is None when not needed."""
    H = np.asarray(H, dtype=np.float64)
    T = H.shape[0]
    if T != gold.n:
        raise ValueError(f"{T} vectors vs {gold.n} gold tokens")
    if need_gradient and params.kernel not in TRAINABLE_KERNELS:
        raise UnsupportedKernelError(
            f"kernel {params.kernel!r} supports forward evaluation only"
        )
    if T < 2:
        loss = 0.0
        if not need_gradient:
            return loss, None
        grads = Gradients(B=np.zeros_like(params.B))
        if wrt_ab and params.kernel == SIGMOID:
            grads.a, grads.b = 0.0, 0.0
        return loss, grads

    if params.kernel == BILINEAR_REF:  # forward-only
        D = distance_matrix(params, H).values
        loss = float(np.abs(gold.d - D).sum() / (T * T))
        _check_finite(np.asarray(loss), "sentence loss")
        return loss, None

    Z = H @ params.B.T  # (T, rank)
    scalar_rbf = params.kernel == RBF and params.rbf_mode == RBF_SCALAR
    phi = _features(params, Z)  # (T, rank) or (T, 1)
    D = _squared_feature_distances(phi)
    residual = gold.d - D
    loss = float(np.abs(residual).sum() / (T * T))
    _check_finite(np.asarray(loss), "sentence loss")
    if not need_gradient:
        return loss, None

    W = -np.sign(residual)  # dL/dD per ordered pair, sign(0) = 0
    G = 4.0 * (W.sum(axis=1, keepdims=True) * phi - W @ phi)  # dLsum/dphi, (T, k) or (T, 1)
    if scalar_rbf:
        coef = G * phi * (-1.0 / params.sigma**2)  # (T, 1)
        gB = (coef * Z).T @ H / (T * T)
    else:
        slopes = _feature_slopes(params, Z, phi)
        gB = (G * slopes).T @ H / (T * T)
    grads = Gradients(B=_check_finite(gB, "loss gradient"))
    if wrt_ab and params.kernel == SIGMOID:
        sech2 = 1.0 - phi**2
        grads.a = float((G * sech2 * Z).sum() / (T * T))
        grads.b = float((G * sech2).sum() / (T * T))
    return loss, grads


def save_checkpoint(params: ProbeParams, path, meta: dict | None = None) -> None:
    """Write a probe checkpoint: header JSON + B float32 row-major + CRC32."""
    header = {
        "rank": params.rank,
        "dim": params.dim,
        **params.hyperparameters(),
        "meta": meta or {},
    }
    payload = np.ascontiguousarray(params.B, dtype="<f4").tobytes()
    write_frame(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, header, payload)


def load_checkpoint(path) -> tuple[ProbeParams, dict]:
    """Read a checkpoint back; returns the params and the stored metadata."""
    frame = Frame.read(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    h = frame.header
    rank, dim = int(h["rank"]), int(h["dim"])
    payload = frame.take_payload(rank * dim * 4)
    B = np.frombuffer(payload, dtype="<f4").reshape(rank, dim).astype(np.float64)
    params = ProbeParams(
        B=B,
        kernel=h["kernel"],
        c=float(h["c"]),
        p=int(h["p"]),
        sigma=float(h["sigma"]),
        a=float(h["a"]),
        b=float(h["b"]),
        rbf_mode=h["rbf_mode"],
    )
    return params, dict(h.get("meta", {}))


def with_kernel(params: ProbeParams, kernel: str, rbf_mode: str | None = None) -> ProbeParams:
    """Same projection, different forward kernel (reference-kernel comparisons)."""
    changes = {"kernel": kernel}
    if rbf_mode is not None:
        changes["rbf_mode"] = rbf_mode
    return replace(params, **changes)
