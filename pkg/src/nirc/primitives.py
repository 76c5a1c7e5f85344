"""Parameter bundles and continuous-time semantics of the IR primitives.

Every primitive is an immutable dataclass. Tensor parameters are stored as
read-only ``float64`` arrays; per-element parameters of one node are
broadcast to a common shape at construction time.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import numpy as np

from nirc.errors import NonODEKind, ParameterError, ShapeMismatch

Shape = tuple  # tuple[int, ...]

INPUT = "input"
OUTPUT = "output"
RESET = "reset"


def make_shape(dims) -> Shape:
    dims = tuple(int(d) for d in np.atleast_1d(np.asarray(dims, dtype=np.int64)))
    if not dims:
        raise ParameterError("shape must be non-empty")
    if any(d < 1 for d in dims):
        raise ParameterError(f"shape extents must be >= 1, got {dims}")
    return dims


def _tensor(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Port:
    name: str
    shape: Optional[Shape]
    direction: str  # "input" | "output"


@dataclass(frozen=True)
class PortSignature:
    inputs: tuple
    outputs: tuple

    def input(self, name: str) -> Port:
        for p in self.inputs:
            if p.name == name:
                return p
        raise KeyError(name)

    def output(self, name: str) -> Port:
        for p in self.outputs:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class Primitive:
    """Base class. Subclasses set ``kind`` and list their tensor fields."""

    kind: ClassVar[str] = ""
    tensor_fields: ClassVar[tuple] = ()
    # per-element fields broadcast together (neuron parameters)
    elementwise_fields: ClassVar[tuple] = ()
    stateful: ClassVar[bool] = False
    spiking: ClassVar[bool] = False

    def __post_init__(self):
        for name in self.tensor_fields:
            object.__setattr__(self, name, _tensor(getattr(self, name)))
        if self.elementwise_fields:
            arrays = [getattr(self, n) for n in self.elementwise_fields]
            try:
                bcast = np.broadcast_arrays(*arrays)
            except ValueError as exc:
                raise ParameterError(
                    f"{self.kind}: per-element parameters do not share a shape"
                ) from exc
            for name, arr in zip(self.elementwise_fields, bcast):
                object.__setattr__(self, name, _tensor(arr))
        self.check()

    def check(self) -> None:
        """Raise ParameterError when invariants are violated."""

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if a is None or b is None:
                    return False
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def shape(self) -> Optional[Shape]:
        """Per-element parameter shape for elementwise kinds."""
        if self.elementwise_fields:
            return tuple(getattr(self, self.elementwise_fields[0]).shape)
        return None

    def ports(self) -> PortSignature:
        raise NotImplementedError


def _sig(inputs, outputs) -> PortSignature:
    return PortSignature(
        tuple(Port(n, s, "input") for n, s in inputs),
        tuple(Port(n, s, "output") for n, s in outputs),
    )


def _positive(name, arr, kind):
    if not np.all(arr > 0):
        raise ParameterError(f"{kind}: {name} must be strictly positive")


def _finite(name, arr, kind):
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{kind}: {name} must be finite")


@dataclass(frozen=True, eq=False)
class Input(Primitive):
    shape: Shape = (1,)
    kind: ClassVar[str] = "input"

    def __post_init__(self):
        object.__setattr__(self, "shape", make_shape(self.shape))

    def ports(self):
        return _sig([], [(OUTPUT, self.shape)])


@dataclass(frozen=True, eq=False)
class Output(Primitive):
    shape: Optional[Shape] = None
    kind: ClassVar[str] = "output"

    def __post_init__(self):
        if self.shape is not None:
            object.__setattr__(self, "shape", make_shape(self.shape))

    def ports(self):
        return _sig([(INPUT, self.shape)], [])


@dataclass(frozen=True, eq=False)
class Affine(Primitive):
    weight: np.ndarray = None
    bias: np.ndarray = None
    kind: ClassVar[str] = "affine"
    tensor_fields: ClassVar[tuple] = ("weight", "bias")

    def check(self):
        if self.weight.ndim != 2:
            raise ParameterError("affine: weight must be a matrix")
        if self.bias.shape != (self.weight.shape[0],):
            raise ParameterError(
                f"affine: bias shape {self.bias.shape} does not match "
                f"output extent {self.weight.shape[0]}"
            )

    def ports(self):
        return _sig([(INPUT, (self.weight.shape[1],))], [(OUTPUT, (self.weight.shape[0],))])


@dataclass(frozen=True, eq=False)
class Linear(Primitive):
    weight: np.ndarray = None
    kind: ClassVar[str] = "linear"
    tensor_fields: ClassVar[tuple] = ("weight",)

    def check(self):
        if self.weight.ndim != 2:
            raise ParameterError("linear: weight must be a matrix")

    def ports(self):
        return _sig([(INPUT, (self.weight.shape[1],))], [(OUTPUT, (self.weight.shape[0],))])


@dataclass(frozen=True, eq=False)
class Scale(Primitive):
    scale: np.ndarray = None
    kind: ClassVar[str] = "scale"
    tensor_fields: ClassVar[tuple] = ("scale",)
    elementwise_fields: ClassVar[tuple] = ("scale",)

    def ports(self):
        return _sig([(INPUT, self.shape)], [(OUTPUT, self.shape)])


def _int_tuple(value, n, name):
    vals = tuple(int(v) for v in np.broadcast_to(np.asarray(value, dtype=np.int64), (n,)))
    return vals


@dataclass(frozen=True, eq=False)
class Conv(Primitive):
    """N-d cross-correlation. ``weight`` is ``C_out x C_in/groups x k...``."""

    weight: np.ndarray = None
    bias: np.ndarray = None
    stride: tuple = 1
    padding: tuple = 0
    dilation: tuple = 1
    groups: int = 1
    input_shape: Optional[Shape] = None
    kind: ClassVar[str] = "conv"
    tensor_fields: ClassVar[tuple] = ("weight", "bias")

    def __post_init__(self):
        object.__setattr__(self, "weight", _tensor(self.weight))
        w = self.weight
        if w.ndim < 3:
            raise ParameterError("conv: weight must be C_out x C_in x k...")
        nd = w.ndim - 2
        bias = np.zeros(w.shape[0]) if self.bias is None else self.bias
        object.__setattr__(self, "bias", _tensor(bias))
        for name in ("stride", "padding", "dilation"):
            object.__setattr__(self, name, _int_tuple(getattr(self, name), nd, name))
        object.__setattr__(self, "groups", int(self.groups))
        if self.input_shape is not None:
            object.__setattr__(self, "input_shape", make_shape(self.input_shape))
        self.check()

    def check(self):
        w = self.weight
        if self.bias.shape != (w.shape[0],):
            raise ParameterError("conv: bias must have C_out entries")
        if min(self.stride) < 1 or min(self.dilation) < 1 or self.groups < 1:
            raise ParameterError("conv: stride, dilation and groups must be positive")
        if min(self.padding) < 0:
            raise ParameterError("conv: padding must be non-negative")
        if w.shape[0] % self.groups:
            raise ParameterError("conv: groups must divide C_out")
        if self.input_shape is not None:
            if len(self.input_shape) != w.ndim - 1:
                raise ParameterError("conv: input rank does not match kernel rank")
            if w.shape[1] * self.groups != self.input_shape[0]:
                raise ParameterError("conv: C_in * groups must equal input channels")
            if any(d < 1 for d in self.output_shape(self.input_shape)):
                raise ParameterError("conv: kernel larger than padded input")

    def output_shape(self, input_shape):
        k = self.weight.shape[2:]
        spatial = tuple(
            (n + 2 * p - d * (kk - 1) - 1) // s + 1
            for n, p, d, kk, s in zip(input_shape[1:], self.padding, self.dilation, k, self.stride)
        )
        return (self.weight.shape[0],) + spatial

    def ports(self):
        if self.input_shape is None:
            return _sig([(INPUT, None)], [(OUTPUT, None)])
        return _sig([(INPUT, self.input_shape)], [(OUTPUT, self.output_shape(self.input_shape))])


@dataclass(frozen=True, eq=False)
class Delay(Primitive):
    """Pure transport delay; ``delay`` is per element, in seconds."""

    delay: np.ndarray = None
    kind: ClassVar[str] = "delay"
    tensor_fields: ClassVar[tuple] = ("delay",)
    elementwise_fields: ClassVar[tuple] = ("delay",)

    def check(self):
        if not np.all(self.delay >= 0):
            raise ParameterError("delay: delays must be non-negative")
        _finite("delay", self.delay, self.kind)

    def ports(self):
        return _sig([(INPUT, self.shape)], [(OUTPUT, self.shape)])

    def steps(self, dt: float) -> np.ndarray:
        return np.rint(self.delay / dt).astype(np.int64)


@dataclass(frozen=True, eq=False)
class Flatten(Primitive):
    start_dim: int = 0
    end_dim: int = -1
    input_shape: Optional[Shape] = None
    kind: ClassVar[str] = "flatten"

    def __post_init__(self):
        object.__setattr__(self, "start_dim", int(self.start_dim))
        object.__setattr__(self, "end_dim", int(self.end_dim))
        if self.input_shape is not None:
            object.__setattr__(self, "input_shape", make_shape(self.input_shape))
        self.check()

    def check(self):
        if self.input_shape is None:
            return
        rank = len(self.input_shape)
        start, end = self._dims(rank)
        if not (0 <= start <= end < rank):
            raise ParameterError(
                f"flatten: need 0 <= start <= end < rank, got {self.start_dim}, {self.end_dim}"
            )

    def _dims(self, rank):
        start = self.start_dim + rank if self.start_dim < 0 else self.start_dim
        end = self.end_dim + rank if self.end_dim < 0 else self.end_dim
        return start, end

    def output_shape(self, input_shape):
        start, end = self._dims(len(input_shape))
        collapsed = int(np.prod(input_shape[start : end + 1]))
        return tuple(input_shape[:start]) + (collapsed,) + tuple(input_shape[end + 1 :])

    def ports(self):
        if self.input_shape is None:
            return _sig([(INPUT, None)], [(OUTPUT, None)])
        return _sig([(INPUT, self.input_shape)], [(OUTPUT, self.output_shape(self.input_shape))])


class _Stateful(Primitive):
    stateful: ClassVar[bool] = True

    def ports(self):
        return _sig([(INPUT, self.shape), (RESET, self.shape)], [(OUTPUT, self.shape)])


@dataclass(frozen=True, eq=False)
class Integrator(_Stateful):
    r: np.ndarray = None
    kind: ClassVar[str] = "integrator"
    tensor_fields: ClassVar[tuple] = ("r",)
    elementwise_fields: ClassVar[tuple] = ("r",)

    def check(self):
        _finite("r", self.r, self.kind)


@dataclass(frozen=True, eq=False)
class LI(_Stateful):
    tau: np.ndarray = None
    r: np.ndarray = None
    v_leak: np.ndarray = None
    kind: ClassVar[str] = "li"
    tensor_fields: ClassVar[tuple] = ("tau", "r", "v_leak")
    elementwise_fields: ClassVar[tuple] = ("tau", "r", "v_leak")

    def check(self):
        _positive("tau", self.tau, self.kind)
        _finite("r", self.r, self.kind)
        _finite("v_leak", self.v_leak, self.kind)


@dataclass(frozen=True, eq=False)
class Spike(Primitive):
    threshold: np.ndarray = None
    kind: ClassVar[str] = "spike"
    tensor_fields: ClassVar[tuple] = ("threshold",)
    elementwise_fields: ClassVar[tuple] = ("threshold",)

    def check(self):
        _finite("threshold", self.threshold, self.kind)

    def ports(self):
        return _sig([(INPUT, self.shape)], [(OUTPUT, self.shape)])


@dataclass(frozen=True, eq=False)
class IF(_Stateful):
    r: np.ndarray = None
    threshold: np.ndarray = None
    kind: ClassVar[str] = "if"
    tensor_fields: ClassVar[tuple] = ("r", "threshold")
    elementwise_fields: ClassVar[tuple] = ("r", "threshold")
    spiking: ClassVar[bool] = True

    def check(self):
        _finite("r", self.r, self.kind)
        _finite("threshold", self.threshold, self.kind)


@dataclass(frozen=True, eq=False)
class LIF(_Stateful):
    tau: np.ndarray = None
    r: np.ndarray = None
    v_leak: np.ndarray = None
    threshold: np.ndarray = None
    kind: ClassVar[str] = "lif"
    tensor_fields: ClassVar[tuple] = ("tau", "r", "v_leak", "threshold")
    elementwise_fields: ClassVar[tuple] = ("tau", "r", "v_leak", "threshold")
    spiking: ClassVar[bool] = True

    def check(self):
        _positive("tau", self.tau, self.kind)
        for name in ("r", "v_leak", "threshold"):
            _finite(name, getattr(self, name), self.kind)


@dataclass(frozen=True, eq=False)
class CubaLIF(_Stateful):
    tau_syn: np.ndarray = None
    tau_mem: np.ndarray = None
    r: np.ndarray = None
    v_leak: np.ndarray = None
    w_in: np.ndarray = None
    threshold: np.ndarray = None
    kind: ClassVar[str] = "cuba_lif"
    tensor_fields: ClassVar[tuple] = ("tau_syn", "tau_mem", "r", "v_leak", "w_in", "threshold")
    elementwise_fields: ClassVar[tuple] = tensor_fields
    spiking: ClassVar[bool] = True

    def check(self):
        _positive("tau_syn", self.tau_syn, self.kind)
        _positive("tau_mem", self.tau_mem, self.kind)
        for name in ("r", "v_leak", "w_in", "threshold"):
            _finite(name, getattr(self, name), self.kind)


KINDS = {
    cls.kind: cls
    for cls in (Input, Output, Affine, Linear, Scale, Conv, Delay, Flatten,
                Integrator, LI, Spike, IF, LIF, CubaLIF)
}
STATEFUL_KINDS = frozenset(k for k, c in KINDS.items() if c.stateful)
HIGHER_ORDER_KINDS = frozenset({"if", "lif", "cuba_lif"})


def port_signature(params: Primitive) -> PortSignature:
    return params.ports()


def continuous_rhs(params: Primitive, state, i):
    """Right-hand side of the node's ODE, ``dx/dt = f(x, i)``.

    For ``CubaLIF`` the state is a ``(u, v)`` pair and so is the result.
    Threshold and reset jumps are not part of the flow.
    """
    i = np.asarray(i, dtype=np.float64)
    if isinstance(params, (Integrator, IF)):
        return params.r * i
    if isinstance(params, (LI, LIF)):
        v = np.asarray(state, dtype=np.float64)
        return ((params.v_leak - v) + params.r * i) / params.tau
    if isinstance(params, CubaLIF):
        u, v = (np.asarray(s, dtype=np.float64) for s in state)
        du = (-u + params.w_in * i) / params.tau_syn
        dv = ((params.v_leak - v) + params.r * u) / params.tau_mem
        return du, dv
    raise NonODEKind(f"{params.kind} has no continuous state")


def conv_nd(x, weight, bias, stride, padding, dilation, groups):
    """Cross-correlation over the trailing spatial axes of ``x`` (C, *spatial)."""
    k = weight.shape[2:]
    nd = len(k)
    c_in, c_out = x.shape[0], weight.shape[0]
    xp = np.pad(x, [(0, 0)] + [(p, p) for p in padding])
    out_sp = [
        (x.shape[1 + j] + 2 * padding[j] - dilation[j] * (k[j] - 1) - 1) // stride[j] + 1
        for j in range(nd)
    ]
    out = np.zeros((c_out, *out_sp))
    cin_g, cout_g = c_in // groups, c_out // groups
    for g in range(groups):
        xg = xp[g * cin_g:(g + 1) * cin_g]
        wg = weight[g * cout_g:(g + 1) * cout_g]
        for off in np.ndindex(*k):
            sl = tuple(
                slice(off[j] * dilation[j], off[j] * dilation[j] + stride[j] * (out_sp[j] - 1) + 1, stride[j])
                for j in range(nd)
            )
            patch = xg[(slice(None),) + sl]
            w_off = wg[(slice(None), slice(None)) + off]
            out[g * cout_g:(g + 1) * cout_g] += np.tensordot(w_off, patch, axes=([1], [0]))
    return out + bias.reshape((-1,) + (1,) * nd)


def _expect(i, shape):
    if shape is not None and tuple(i.shape) != tuple(shape):
        raise ShapeMismatch(f"expected input of shape {tuple(shape)}, got {tuple(i.shape)}")


def stateless_apply(params: Primitive, i):
    """Evaluate a memoryless primitive on one input sample."""
    i = np.asarray(i, dtype=np.float64)
    if isinstance(params, (Input, Output)):
        _expect(i, params.shape)
        return i
    if isinstance(params, Linear):
        _expect(i, (params.weight.shape[1],))
        return params.weight @ i
    if isinstance(params, Affine):
        _expect(i, (params.weight.shape[1],))
        return params.weight @ i + params.bias
    if isinstance(params, Scale):
        _expect(i, params.shape)
        return params.scale * i
    if isinstance(params, Conv):
        if params.input_shape is not None:
            _expect(i, params.input_shape)
        if i.ndim != params.weight.ndim - 1 or i.shape[0] != params.weight.shape[1] * params.groups:
            raise ShapeMismatch(f"conv: incompatible input shape {i.shape}")
        return conv_nd(i, params.weight, params.bias, params.stride, params.padding,
                       params.dilation, params.groups)
    if isinstance(params, Flatten):
        if params.input_shape is not None:
            _expect(i, params.input_shape)
        return i.reshape(params.output_shape(i.shape))
    if isinstance(params, Spike):
        _expect(i, params.shape)
        return (i >= params.threshold).astype(np.float64)
    raise TypeError(f"{params.kind} is not a stateless primitive")
