"""Reverse-mode autodiff over dense float64 tensors.

Ops record onto a module-level tape during the forward pass; `backward`
replays the tape once in reverse and accumulates gradients into every
reachable tensor with ``requires_grad``.  There is no broadcasting anywhere:
shapes must match exactly and violations raise `ShapeError` naming the op.
All buffers are float64 and every op validates that its output is finite.

The tape also tracks a "kink margin": the smallest distance of any relu
input, norm, or log argument from its non-differentiable (or domain) point
during the forward pass.  Gradient checks use it to recognize evaluation
points where a finite difference is meaningless.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NumericError, ShapeError, TapeError

__all__ = [
    "Tensor",
    "constant",
    "parameter",
    "add",
    "sub",
    "scalar_mul",
    "matmul",
    "relu",
    "tanh",
    "log",
    "mean",
    "sum_all",
    "l2_norm",
    "euclidean_distance",
    "cosine_similarity",
    "softmax",
    "concat",
    "stack_rows",
    "stack_scalars",
    "row",
    "element",
    "slice_range",
    "backward",
    "no_grad",
    "reset_kink_margin",
    "kink_margin",
    "GradCheckResult",
    "finite_difference_check",
]


class _Tape:
    __slots__ = ("entries", "recording", "consumed", "kink_margin")

    def __init__(self) -> None:
        self.entries: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []
        self.recording = True
        self.consumed = False
        self.kink_margin = math.inf


_TAPE = _Tape()


class Tensor:
    """Dense float64 array plus gradient slot.

    ``data`` is a numpy array owned by the tensor; ``grad`` is populated by
    `backward` and has the same shape as ``data``.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NumericError("Tensor constructed from non-finite data")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != ():
            raise ShapeError(f"item() requires a scalar, got shape {self.data.shape}")
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, c: float) -> "Tensor":
        return scalar_mul(self, c)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return scalar_mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _note_kink(distance: float) -> None:
    if distance < _TAPE.kink_margin:
        _TAPE.kink_margin = float(distance)


def reset_kink_margin() -> None:
    _TAPE.kink_margin = math.inf


def kink_margin() -> float:
    """Smallest kink distance seen since the last reset."""
    return _TAPE.kink_margin


@contextlib.contextmanager
def no_grad():
    """Disable tape recording; ops return plain constants inside the block."""
    prev = _TAPE.recording
    _TAPE.recording = False
    try:
        yield
    finally:
        _TAPE.recording = prev


def _make(op: str, value: np.ndarray, inputs: Sequence[Tensor],
          backward_fn: Callable[[np.ndarray], None] | None) -> Tensor:
    if not np.isfinite(value).all():
        raise NumericError(f"{op}: non-finite output")
    needs = _TAPE.recording and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = value
    out.requires_grad = needs
    out.grad = None
    if needs:
        _TAPE.entries.append((out, backward_fn))
        _TAPE.consumed = False
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if not np.isfinite(g).all():
        raise NumericError("non-finite gradient during backward")
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def _require_vector(op: str, t: Tensor) -> None:
    if t.data.ndim != 1:
        raise ShapeError(f"{op}: expected 1-D tensor, got shape {t.data.shape}")


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("add", a, b)

    def bw(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, g)

    return _make("add", a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("sub", a, b)

    def bw(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, -g)

    return _make("sub", a.data - b.data, (a, b), bw)


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)
    if not math.isfinite(c):
        raise NumericError("scalar_mul: non-finite scalar")

    def bw(g: np.ndarray) -> None:
        _accumulate(a, c * g)

    return _make("scalar_mul", c * a.data, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for the explicit shape pairs (m,n)@(n,p),
    (m,n)@(n,), (m,)@(m,n) and (m,)@(m,)."""
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: inner dims differ {ad.shape} @ {bd.shape}")

        def bw(g: np.ndarray) -> None:
            _accumulate(a, g @ bd.T)
            _accumulate(b, ad.T @ g)

    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: inner dims differ {ad.shape} @ {bd.shape}")

        def bw(g: np.ndarray) -> None:
            _accumulate(a, np.outer(g, bd))
            _accumulate(b, ad.T @ g)

    elif ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: inner dims differ {ad.shape} @ {bd.shape}")

        def bw(g: np.ndarray) -> None:
            _accumulate(a, bd @ g)
            _accumulate(b, np.outer(ad, g))

    elif ad.ndim == 1 and bd.ndim == 1:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: length mismatch {ad.shape} @ {bd.shape}")

        def bw(g: np.ndarray) -> None:
            _accumulate(a, g * bd)
            _accumulate(b, g * ad)

    else:
        raise ShapeError(f"matmul: unsupported ranks {ad.shape} @ {bd.shape}")

    return _make("matmul", ad @ bd, (a, b), bw)


def relu(a: Tensor) -> Tensor:
    x = a.data
    if x.size:
        _note_kink(float(np.min(np.abs(x))))
    mask = x > 0.0

    def bw(g: np.ndarray) -> None:
        _accumulate(a, g * mask)

    return _make("relu", np.where(mask, x, 0.0), (a,), bw)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw(g: np.ndarray) -> None:
        _accumulate(a, g * (1.0 - y * y))

    return _make("tanh", y, (a,), bw)


def log(a: Tensor, floor: float = 0.0) -> Tensor:
    """Natural log. With ``floor`` > 0 the input is clamped from below and
    the gradient is zero on the clamped region; with floor == 0 any
    non-positive input is an error."""
    x = a.data
    if floor > 0.0:
        clamped = np.maximum(x, floor)
        active = x > floor
        _note_kink(float(np.min(np.abs(x - floor))) if x.size else math.inf)
    else:
        if np.any(x <= 0.0):
            raise NumericError("log: non-positive input")
        clamped = x
        active = np.ones_like(x, dtype=bool)
        _note_kink(float(np.min(x)) if x.size else math.inf)

    def bw(g: np.ndarray) -> None:
        _accumulate(a, np.where(active, g / clamped, 0.0))

    return _make("log", np.log(clamped), (a,), bw)


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    if n == 0:
        raise ShapeError("mean: empty tensor")

    def bw(g: np.ndarray) -> None:
        _accumulate(a, np.full_like(a.data, float(g) / n))

    return _make("mean", np.asarray(a.data.mean()), (a,), bw)


def sum_all(a: Tensor) -> Tensor:
    def bw(g: np.ndarray) -> None:
        _accumulate(a, np.full_like(a.data, float(g)))

    return _make("sum", np.asarray(a.data.sum()), (a,), bw)


# ---------------------------------------------------------------------------
# norms and similarities


def l2_norm(a: Tensor) -> Tensor:
    _require_vector("l2_norm", a)
    x = a.data
    norm = float(np.sqrt(np.sum(x * x)))
    _note_kink(norm)

    def bw(g: np.ndarray) -> None:
        # Subgradient 0 at the origin; the kink margin marks this point.
        if norm > 0.0:
            _accumulate(a, (float(g) / norm) * x)

    return _make("l2_norm", np.asarray(norm), (a,), bw)


def euclidean_distance(a: Tensor, b: Tensor) -> Tensor:
    _require_vector("euclidean_distance", a)
    _require_same_shape("euclidean_distance", a, b)
    diff = a.data - b.data
    dist = float(np.sqrt(np.sum(diff * diff)))
    _note_kink(dist)

    def bw(g: np.ndarray) -> None:
        if dist > 0.0:
            scaled = (float(g) / dist) * diff
            _accumulate(a, scaled)
            _accumulate(b, -scaled)

    return _make("euclidean_distance", np.asarray(dist), (a, b), bw)


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    _require_vector("cosine_similarity", a)
    _require_same_shape("cosine_similarity", a, b)
    na = float(np.sqrt(np.sum(a.data * a.data)))
    nb = float(np.sqrt(np.sum(b.data * b.data)))
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine_similarity: zero-norm input")
    dot = float(a.data @ b.data)
    c = dot / (na * nb)

    def bw(g: np.ndarray) -> None:
        gf = float(g)
        _accumulate(a, gf * (b.data / (na * nb) - (c / (na * na)) * a.data))
        _accumulate(b, gf * (a.data / (na * nb) - (c / (nb * nb)) * b.data))

    return _make("cosine_similarity", np.asarray(c), (a, b), bw)


def softmax(a: Tensor) -> Tensor:
    _require_vector("softmax", a)
    shifted = a.data - a.data.max()
    e = np.exp(shifted)
    s = e / e.sum()

    def bw(g: np.ndarray) -> None:
        _accumulate(a, s * (g - float(g @ s)))

    return _make("softmax", s, (a,), bw)


# ---------------------------------------------------------------------------
# shape plumbing


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Join 1-D tensors end to end."""
    ts = list(tensors)
    if not ts:
        raise ShapeError("concat: no inputs")
    for t in ts:
        _require_vector("concat", t)
    sizes = [t.data.shape[0] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def bw(g: np.ndarray) -> None:
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            _accumulate(t, g[lo:hi])

    return _make("concat", np.concatenate([t.data for t in ts]), ts, bw)


def stack_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into an (n, d) matrix."""
    ts = list(tensors)
    if not ts:
        raise ShapeError("stack_rows: no inputs")
    d = ts[0].data.shape
    for t in ts:
        _require_vector("stack_rows", t)
        if t.data.shape != d:
            raise ShapeError(f"stack_rows: row shapes differ {d} vs {t.data.shape}")

    def bw(g: np.ndarray) -> None:
        for i, t in enumerate(ts):
            _accumulate(t, g[i])

    return _make("stack_rows", np.stack([t.data for t in ts]), ts, bw)


def stack_scalars(tensors: Sequence[Tensor]) -> Tensor:
    """Pack scalar tensors into a 1-D vector."""
    ts = list(tensors)
    if not ts:
        raise ShapeError("stack_scalars: no inputs")
    for t in ts:
        if t.data.shape != ():
            raise ShapeError(f"stack_scalars: expected scalars, got shape {t.data.shape}")

    def bw(g: np.ndarray) -> None:
        for i, t in enumerate(ts):
            _accumulate(t, np.asarray(g[i]))

    return _make("stack_scalars", np.array([t.data for t in ts]), ts, bw)


def row(a: Tensor, i: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"row: expected 2-D tensor, got shape {a.data.shape}")
    n = a.data.shape[0]
    if not 0 <= i < n:
        raise ShapeError(f"row: index {i} out of range for {n} rows")

    def bw(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[i] = g
        _accumulate(a, full)

    return _make("row", a.data[i].copy(), (a,), bw)


def element(a: Tensor, i: int) -> Tensor:
    _require_vector("element", a)
    n = a.data.shape[0]
    if not 0 <= i < n:
        raise ShapeError(f"element: index {i} out of range for length {n}")

    def bw(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[i] = float(g)
        _accumulate(a, full)

    return _make("element", np.asarray(a.data[i]), (a,), bw)


def slice_range(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous sub-range of a 1-D tensor."""
    _require_vector("slice_range", a)
    n = a.data.shape[0]
    if not (0 <= start <= stop <= n):
        raise ShapeError(f"slice_range: [{start}:{stop}] invalid for length {n}")

    def bw(g: np.ndarray) -> None:
        full = np.zeros_like(a.data)
        full[start:stop] = g
        _accumulate(a, full)

    return _make("slice_range", a.data[start:stop].copy(), (a,), bw)


# ---------------------------------------------------------------------------
# backward and gradient checking


def backward(loss: Tensor) -> None:
    """Run one reverse traversal from ``loss`` and release the tape.

    Gradients accumulate into every tensor with ``requires_grad`` reachable
    from the loss; leaves keep their ``grad`` until explicitly cleared.
    """
    if loss.data.shape != ():
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    if _TAPE.consumed or not _TAPE.entries:
        raise TapeError("backward on a stale tape: run a fresh forward pass first")
    if not loss.requires_grad:
        raise TapeError("backward: loss does not depend on any recorded operation")
    loss.grad = np.asarray(1.0)
    try:
        for out, bw in reversed(_TAPE.entries):
            if out.grad is not None:
                bw(out.grad)
    finally:
        _TAPE.entries.clear()
        _TAPE.consumed = True


@dataclass
class GradCheckResult:
    """Outcome of a finite-difference comparison.

    ``near_kink`` marks evaluation points within ``kink_threshold`` of a
    non-differentiable point; callers resample those instead of asserting.
    """

    max_rel_error: float
    kink_margin: float
    kink_threshold: float

    @property
    def near_kink(self) -> bool:
        return self.kink_margin < self.kink_threshold


def finite_difference_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    h: float = 1e-5,
    kink_threshold: float = 1e-3,
) -> GradCheckResult:
    """Compare analytic gradients of scalar ``f()`` against central differences.

    ``f`` must rebuild its forward pass on every call and be deterministic;
    two baseline evaluations that disagree raise `NumericError`.  Returns the
    max over all parameter coordinates of
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    params = list(params)

    reset_kink_margin()
    loss = f()
    if loss.data.shape != ():
        raise ShapeError("finite_difference_check: f() must return a scalar")
    base_margin = kink_margin()
    backward(loss)
    analytic = [None if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.grad = None

    with no_grad():
        b1 = float(f().data)
        b2 = float(f().data)
    if b1 != b2:
        raise NumericError("finite_difference_check: f is not deterministic")

    max_rel = 0.0
    with no_grad():
        for p, ga in zip(params, analytic):
            flat = p.data.reshape(-1)
            gflat = None if ga is None else ga.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = float(f().data)
                flat[i] = orig - h
                fm = float(f().data)
                flat[i] = orig
                numeric = (fp - fm) / (2.0 * h)
                a_val = 0.0 if gflat is None else float(gflat[i])
                rel = abs(a_val - numeric) / max(1.0, abs(numeric))
                if rel > max_rel:
                    max_rel = rel

    return GradCheckResult(max_rel_error=max_rel, kink_margin=base_margin,
                           kink_threshold=kink_threshold)
