"""Discretization dialects and backend parameter translations.

A :class:`DialectConfig` fixes everything the continuous IR leaves open:
integration scheme, reset, threshold ordering, spike delay and numeric
representation. Step functions here are pure: state in, state out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np

from nirc import primitives as P
from nirc.errors import ParameterError, UnsatisfiableConstraint


class Decay(str, Enum):
    FORWARD_EULER = "forward_euler"
    EXPONENTIAL_EULER = "exponential_euler"
    BITSHIFT = "bitshift"


class Reset(str, Enum):
    HARD = "hard"
    SUBTRACTIVE = "subtractive"


class ThresholdOrder(str, Enum):
    POST_UPDATE = "post_update"
    PRE_LEAK = "pre_leak"


class Numeric(str, Enum):
    FLOAT64 = "float64"
    FIXED = "fixed"


@dataclass(frozen=True)
class DialectConfig:
    """Complete discretization policy for one simulation run.

    ``reset_value`` is the subtractive reset amount; ``None`` means "use the
    node's firing threshold". ``d_mem``/``d_syn`` are bit-shift decay
    constants; ``None`` derives them per node from ``tau / dt``.
    """

    dt: float = 1e-3
    decay: Decay = Decay.FORWARD_EULER
    reset: Reset = Reset.SUBTRACTIVE
    reset_value: Optional[float] = None
    threshold_order: ThresholdOrder = ThresholdOrder.POST_UPDATE
    spike_delay_steps: int = 0
    numeric: Numeric = Numeric.FLOAT64
    state_bits: int = 16
    weight_bits: int = 8
    accumulator_bits: int = 32
    d_mem: Optional[int] = None
    d_syn: Optional[int] = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "decay", Decay(self.decay))
        object.__setattr__(self, "reset", Reset(self.reset))
        object.__setattr__(self, "threshold_order", ThresholdOrder(self.threshold_order))
        object.__setattr__(self, "numeric", Numeric(self.numeric))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive and finite, got {self.dt}")
        if int(self.spike_delay_steps) != self.spike_delay_steps or self.spike_delay_steps < 0:
            raise ParameterError("spike_delay_steps must be a non-negative integer")
        if self.decay is Decay.BITSHIFT and self.numeric is not Numeric.FIXED:
            raise ParameterError("bitshift decay requires fixed numeric representation")
        for name in ("state_bits", "weight_bits", "accumulator_bits"):
            if getattr(self, name) < 2:
                raise ParameterError(f"{name} must be >= 2")
        for name in ("d_mem", "d_syn"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ParameterError(f"{name} must be non-negative")

    @property
    def fixed(self) -> bool:
        return self.numeric is Numeric.FIXED

    def to_json(self) -> dict:
        return {
            "name": self.name, "dt": self.dt, "decay": self.decay.value,
            "reset": self.reset.value, "reset_value": self.reset_value,
            "threshold_order": self.threshold_order.value,
            "spike_delay_steps": int(self.spike_delay_steps),
            "numeric": self.numeric.value, "state_bits": self.state_bits,
            "weight_bits": self.weight_bits, "accumulator_bits": self.accumulator_bits,
            "d_mem": self.d_mem, "d_syn": self.d_syn,
        }


class OverflowCounter:
    """Counts saturation events in fixed-point mode."""

    def __init__(self):
        self.count = 0


def saturate(x, bits: int, counter: Optional[OverflowCounter] = None):
    lo, hi = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
    x = np.asarray(x)
    if counter is not None:
        counter.count += int(np.count_nonzero((x < lo) | (x > hi)))
    return np.clip(x, lo, hi)


def _quantize_state(v, cfg: DialectConfig, counter):
    if not cfg.fixed:
        return v
    return saturate(np.rint(v), cfg.state_bits, counter)


def decay_coefficients(tau, cfg: DialectConfig):
    """``(keep, gain)`` so that one step is ``keep*v + gain*(v_leak + R*i)``."""
    if cfg.decay is Decay.EXPONENTIAL_EULER:
        alpha = np.exp(-cfg.dt / tau)
        return alpha, 1.0 - alpha
    a = cfg.dt / tau
    return 1.0 - a, a


def leaky_update(v, i, tau, r, v_leak, cfg: DialectConfig):
    """One leaky-integrator step. Returns ``(v_next, v_integrated)``.

    ``v_integrated`` has the input and leak potential added but the decay of
    the previous state not yet applied; pre-leak dialects threshold on it.
    """
    keep, gain = decay_coefficients(tau, cfg)
    drive = gain * v_leak + gain * r * i
    return keep * v + drive, v + drive


def integrator_update(v, i, r, cfg: DialectConfig):
    return v + cfg.dt * r * i


def reset_amount(threshold, cfg: DialectConfig):
    return threshold if cfg.reset_value is None else np.broadcast_to(cfg.reset_value, np.shape(threshold))


def apply_reset(v, spikes, threshold, cfg: DialectConfig):
    fired = spikes > 0
    if cfg.reset is Reset.HARD:
        return np.where(fired, 0.0, v)
    return np.where(fired, v - reset_amount(threshold, cfg), v)


def apply_reset_input(v, r, cfg: DialectConfig):
    """Same-step feedback arriving on a node's ``reset`` port.

    Subtractive dialects add the feedback (a decomposed neuron feeds back
    ``-theta_reset * spike``); hard-reset dialects zero every element whose
    feedback is non-zero.
    """
    if cfg.reset is Reset.HARD:
        return np.where(r != 0, 0.0, v)
    return v + r


def _fire(v_next, v_integrated, threshold, cfg):
    probe = v_integrated if cfg.threshold_order is ThresholdOrder.PRE_LEAK else v_next
    return (probe >= threshold).astype(np.float64)


def step_li(params: P.LI, cfg: DialectConfig, v, i, counter=None):
    v_next, _ = leaky_update(v, i, params.tau, params.r, params.v_leak, cfg)
    return _quantize_state(v_next, cfg, counter)


def step_integrator(params, cfg: DialectConfig, v, i, counter=None):
    return _quantize_state(integrator_update(v, i, params.r, cfg), cfg, counter)


def step_lif(params: P.LIF, cfg: DialectConfig, v, i, counter=None):
    """Advance a LIF population by one step; returns ``(v_next, spikes)``.

    Spikes are the threshold crossings of this step. ``spike_delay_steps``
    is applied by the caller (see :func:`simulate`), since it only shifts
    the emitted event train.
    """
    if cfg.decay is Decay.BITSHIFT:
        return step_bitshift(params, cfg, v, i, counter)
    v_next, v_int = leaky_update(v, i, params.tau, params.r, params.v_leak, cfg)
    v_next = _quantize_state(v_next, cfg, counter)
    spikes = _fire(v_next, v_int, params.threshold, cfg)
    return apply_reset(v_next, spikes, params.threshold, cfg), spikes


def step_if(params: P.IF, cfg: DialectConfig, v, i, counter=None):
    v_next = _quantize_state(integrator_update(v, i, params.r, cfg), cfg, counter)
    spikes = (v_next >= params.threshold).astype(np.float64)
    return apply_reset(v_next, spikes, params.threshold, cfg), spikes


def step_cuba_lif(params: P.CubaLIF, cfg: DialectConfig, state, i, counter=None):
    """Current-based LIF step; ``state`` is ``(u, v)``.

    The membrane integrates the synaptic current of the same step, so the
    cascade equals an LI synapse feeding a LIF membrane within one step.
    """
    if cfg.decay is Decay.BITSHIFT:
        return step_bitshift(params, cfg, state, i, counter)
    u, v = state
    zero = np.zeros_like(params.v_leak)
    u_next, _ = leaky_update(u, i, params.tau_syn, params.w_in, zero, cfg)
    u_next = _quantize_state(u_next, cfg, counter)
    v_next, v_int = leaky_update(v, u_next, params.tau_mem, params.r, params.v_leak, cfg)
    v_next = _quantize_state(v_next, cfg, counter)
    spikes = _fire(v_next, v_int, params.threshold, cfg)
    return (u_next, apply_reset(v_next, spikes, params.threshold, cfg)), spikes


# -- integer bit-shift dynamics ---------------------------------------------


def xylo_shift(tau, dt: float, state_bits: int = 16) -> np.ndarray:
    """Bit-shift decay constant ``d = round(log2(tau/dt))`` clamped to the state width."""
    d = np.rint(np.log2(np.asarray(tau, dtype=np.float64) / dt))
    return np.clip(d, 0, state_bits - 1).astype(np.int64)


def bitshift_decay(x, d):
    """``x - (x >> d)`` with a unit-decay floor, symmetric around zero."""
    x = np.asarray(x, dtype=np.int64)
    mag = np.abs(x)
    shifted = mag >> np.asarray(d, dtype=np.int64)
    mag = np.where(shifted > 0, mag - shifted, np.maximum(mag - 1, 0))
    return np.sign(x) * mag


def _shifts(params, cfg):
    tau_mem = params.tau_mem if isinstance(params, P.CubaLIF) else params.tau
    d_mem = xylo_shift(tau_mem, cfg.dt, cfg.state_bits) if cfg.d_mem is None else cfg.d_mem
    d_syn = None
    if isinstance(params, P.CubaLIF):
        d_syn = xylo_shift(params.tau_syn, cfg.dt, cfg.state_bits) if cfg.d_syn is None else cfg.d_syn
    return d_mem, d_syn


def step_bitshift(params, cfg: DialectConfig, state, i, counter=None):
    """Integer neuron step with bit-shift decay.

    LIF state is ``v``; CuBa-LIF state is ``(i_syn, v)``. Input is an integer
    event count per element. Weights ``w_in``/``r`` are expected to be folded
    into upstream integer weights and are not applied here.
    """
    bits = cfg.state_bits
    events = np.rint(np.asarray(i, dtype=np.float64)).astype(np.int64)
    theta = np.rint(params.threshold).astype(np.int64)
    d_mem, d_syn = _shifts(params, cfg)
    if isinstance(params, P.CubaLIF):
        syn, v = (np.asarray(s, dtype=np.int64) for s in state)
        syn = saturate(syn + events, bits, counter)
        syn = bitshift_decay(syn, d_syn)
        v = bitshift_decay(v, d_mem)
        v = saturate(v + syn, bits, counter)
    else:
        syn = None
        v = bitshift_decay(np.asarray(state, dtype=np.int64), d_mem)
        v = saturate(v + events, bits, counter)
    fired = v >= theta
    if cfg.reset is Reset.HARD:
        v = np.where(fired, 0, v)
    else:
        amount = theta if cfg.reset_value is None else int(round(cfg.reset_value))
        v = np.where(fired, v - amount, v)
        v = saturate(v, bits, counter)
    spikes = fired.astype(np.float64)
    if syn is None:
        return v, spikes
    return (syn, v), spikes


def initial_state(params, cfg: DialectConfig):
    """Membranes start at ``v_leak``; synaptic currents and integrators at 0."""
    shape = params.shape
    if isinstance(params, (P.LI, P.LIF)):
        v = params.v_leak.copy()
        if cfg.fixed:
            v = np.rint(v).astype(np.int64) if cfg.decay is Decay.BITSHIFT else np.rint(v)
        return v
    if isinstance(params, P.CubaLIF):
        v = params.v_leak.copy()
        if cfg.decay is Decay.BITSHIFT:
            return np.zeros(shape, dtype=np.int64), np.rint(v).astype(np.int64)
        return np.zeros(shape), (np.rint(v) if cfg.fixed else v)
    return np.zeros(shape)


def step(params, cfg: DialectConfig, state, i, counter=None):
    """Dispatch on the node kind. Returns ``(state, output)``."""
    if isinstance(params, P.LIF):
        return step_lif(params, cfg, state, i, counter)
    if isinstance(params, P.CubaLIF):
        return step_cuba_lif(params, cfg, state, i, counter)
    if isinstance(params, P.IF):
        return step_if(params, cfg, state, i, counter)
    if isinstance(params, P.LI):
        v = step_li(params, cfg, state, i, counter)
        return v, v
    if isinstance(params, P.Integrator):
        v = step_integrator(params, cfg, state, i, counter)
        return v, v
    raise TypeError(f"{params.kind} is not stateful")


def simulate(params, cfg: DialectConfig, inputs, state=None):
    """Run one stateful node over ``inputs`` (T x shape).

    Returns ``(states, events)``; ``states`` holds the membrane after each
    step. Events honour ``cfg.spike_delay_steps``.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    state = initial_state(params, cfg) if state is None else state
    counter = OverflowCounter()
    states, events = [], []
    for t in range(inputs.shape[0]):
        state, out = step(params, cfg, state, inputs[t], counter)
        states.append(np.array(state[1] if isinstance(state, tuple) else state, dtype=np.float64))
        events.append(out)
    states, events = np.array(states), np.array(events)
    k = int(cfg.spike_delay_steps)
    if params.spiking and k:
        events = shift_events(events, k)
    return states, events


def shift_events(events, k: int):
    out = np.zeros_like(events)
    if k < len(events):
        out[k:] = events[: len(events) - k]
    return out


def lif_exact(params, v0, i0, t):
    """Closed-form LIF membrane for constant input (no threshold).

    The decaying term carries ``v0 - v_leak`` so that ``v(0) = v0`` also
    holds for a non-zero leak potential.
    """
    decay = np.exp(-np.asarray(t, dtype=np.float64) / params.tau)
    return params.v_leak + params.r * i0 * (1.0 - decay) + (v0 - params.v_leak) * decay


# -- SpiNNaker2-style translated parameters -----------------------------------


@dataclass(frozen=True)
class TranslatedLIF:
    """Backend form ``w(t) = alpha*w(t-1) + I(t) + i_offset``, firing at ``theta``.

    ``state_scale`` maps an IR membrane value onto the backend state.
    ``alpha_syn`` is set for current-based neurons.
    """

    alpha_decay: np.ndarray
    theta: np.ndarray
    i_offset: np.ndarray
    state_scale: np.ndarray
    alpha_syn: Optional[np.ndarray] = None
    syn_scale: Optional[np.ndarray] = None


def _mode(mode):
    mode = {"exp": "exp_euler", "fwd": "fwd_euler"}.get(mode, mode)
    if mode not in ("exp_euler", "fwd_euler"):
        raise ValueError(f"unknown translation mode {mode!r}")
    return mode


def _gain(tau, dt, mode):
    """Returns ``(alpha, gain)`` with ``gain = 1 - alpha``."""
    if mode == "exp_euler":
        alpha = np.exp(-dt / tau)
        return alpha, 1.0 - alpha
    return 1.0 - dt / tau, dt / tau


def translate_spinnaker2_lif(params: P.LIF, dt: float, mode: str = "exp_euler",
                             i_bias=0.0) -> TranslatedLIF:
    mode = _mode(mode)
    if dt == 0 or np.any(params.r == 0):
        raise ZeroDivisionError("translation needs dt != 0 and R != 0")
    alpha, gain = _gain(params.tau, dt, mode)
    scale = 1.0 / (gain * params.r)
    return TranslatedLIF(
        alpha_decay=alpha,
        theta=params.threshold * scale,
        i_offset=params.v_leak / params.r + i_bias,
        state_scale=scale,
    )


def translate_spinnaker2_cuba(params: P.CubaLIF, dt: float, mode: str = "exp_euler",
                              i_bias=0.0) -> TranslatedLIF:
    mode = _mode(mode)
    if dt == 0 or np.any(params.r == 0) or np.any(params.w_in == 0):
        raise ZeroDivisionError("translation needs dt != 0, R != 0 and w_in != 0")
    alpha_mem, gain_mem = _gain(params.tau_mem, dt, mode)
    alpha_syn, gain_syn = _gain(params.tau_syn, dt, mode)
    syn_scale = 1.0 / (gain_syn * params.w_in)
    scale = syn_scale / (gain_mem * params.r)
    return TranslatedLIF(
        alpha_decay=alpha_mem,
        theta=params.threshold * scale,
        i_offset=params.v_leak / params.r * syn_scale + i_bias / gain_syn,
        state_scale=scale,
        alpha_syn=alpha_syn,
        syn_scale=syn_scale,
    )


def simulate_translated(tr: TranslatedLIF, inputs, reset: Reset = Reset.SUBTRACTIVE,
                        w0=None, syn0=None):
    """Run the backend update form; returns ``(states, spikes)``."""
    inputs = np.asarray(inputs, dtype=np.float64)
    reset = Reset(reset)
    w = np.zeros_like(tr.theta) if w0 is None else np.asarray(w0, dtype=np.float64)
    syn = np.zeros_like(tr.theta) if syn0 is None else np.asarray(syn0, dtype=np.float64)
    states, spikes = [], []
    for x in inputs:
        if tr.alpha_syn is not None:
            syn = tr.alpha_syn * syn + x
            drive = syn
        else:
            drive = x
        w = tr.alpha_decay * w + drive + tr.i_offset
        fired = w >= tr.theta
        w = np.where(fired, 0.0 if reset is Reset.HARD else w - tr.theta, w)
        states.append(w)
        spikes.append(fired.astype(np.float64))
    return np.array(states), np.array(spikes)


# -- named backend dialects -------------------------------------------------

NAMED_DIALECTS = (
    "norse", "snntorch", "lava_dl", "rockpool_sinabs",
    "spinnaker2_exp_euler", "spinnaker2_fwd_euler", "nengo", "xylo",
)

_NAMED = {
    "norse": dict(decay=Decay.FORWARD_EULER, reset=Reset.HARD),
    "snntorch": dict(decay=Decay.FORWARD_EULER, reset=Reset.SUBTRACTIVE),
    "lava_dl": dict(decay=Decay.FORWARD_EULER, reset=Reset.HARD, spike_delay_steps=1),
    "rockpool_sinabs": dict(decay=Decay.EXPONENTIAL_EULER, reset=Reset.SUBTRACTIVE,
                            threshold_order=ThresholdOrder.PRE_LEAK),
    "spinnaker2_exp_euler": dict(decay=Decay.EXPONENTIAL_EULER, reset=Reset.SUBTRACTIVE),
    "spinnaker2_fwd_euler": dict(decay=Decay.FORWARD_EULER, reset=Reset.SUBTRACTIVE),
    "nengo": dict(decay=Decay.EXPONENTIAL_EULER, reset=Reset.SUBTRACTIVE),
    "xylo": dict(decay=Decay.BITSHIFT, reset=Reset.SUBTRACTIVE, numeric=Numeric.FIXED,
                 state_bits=16, weight_bits=8, accumulator_bits=32),
}

_NEEDS_ZERO_LEAK = {"snntorch", "lava_dl", "xylo"}


def named_config(name: str, dt: float = 1e-3, **overrides) -> DialectConfig:
    if name not in _NAMED:
        raise ValueError(f"unknown dialect {name!r}; choose from {', '.join(NAMED_DIALECTS)}")
    kwargs = dict(_NAMED[name], dt=dt, name=name)
    kwargs.update(overrides)
    return DialectConfig(**kwargs)


@dataclass(frozen=True)
class NamedTranslation:
    """Dialect config plus the rescalings that make a backend match the IR update."""

    config: DialectConfig
    input_scale: np.ndarray
    threshold_scale: np.ndarray
    extras: dict = field(default_factory=dict)
    residuals: tuple = ()


def _tau_mem(params):
    return params.tau_mem if isinstance(params, P.CubaLIF) else params.tau


def translate_named(params, name: str, dt: float = 1e-3) -> NamedTranslation:
    """Map LIF/CuBa-LIF parameters onto a named backend's update rule."""
    if not isinstance(params, (P.LIF, P.CubaLIF)):
        raise TypeError("translate_named expects LIF or CuBa-LIF parameters")
    cfg = named_config(name, dt)
    cuba = isinstance(params, P.CubaLIF)
    tau = _tau_mem(params)
    a_mem = dt / tau
    a_syn = dt / params.tau_syn if cuba else None
    if name in _NEEDS_ZERO_LEAK and np.any(params.v_leak * a_mem != 0):
        raise UnsatisfiableConstraint(
            f"{name} requires v_leak * dt / tau = 0, got v_leak = {params.v_leak.tolist()}")
    ones = np.ones_like(tau)
    extras, residuals = {}, []
    input_scale, threshold_scale = ones, ones

    if name == "norse":
        # no resistance term: fold R (and w_in) into the input
        input_scale = params.w_in if cuba else params.r
        if cuba:
            extras["syn_to_mem_weight"] = params.r
    elif name in ("snntorch", "lava_dl"):
        input_scale = params.r * a_mem
        if cuba:
            input_scale = params.w_in * a_syn * params.r * a_mem
        if name == "snntorch":
            extras["beta"] = 1.0 - a_mem
            if cuba:
                extras["alpha"] = 1.0 - a_syn
        else:
            extras["alpha_v"] = a_mem
            extras["alpha_u"] = a_syn if cuba else ones
            residuals.append("events are emitted one step after the threshold crossing")
    elif name == "rockpool_sinabs":
        alpha = np.exp(-dt / tau)
        input_scale = params.r * (1.0 - alpha)
        extras["alpha"] = alpha
        if cuba:
            beta = np.exp(-dt / params.tau_syn)
            extras["beta"] = beta
            input_scale = params.w_in * (1.0 - beta) * params.r * (1.0 - alpha)
        residuals.append("threshold is checked before the leak is applied")
        residuals.append("the stochastic noise term is not modeled")
    elif name in ("spinnaker2_exp_euler", "spinnaker2_fwd_euler", "nengo"):
        mode = "fwd_euler" if name == "spinnaker2_fwd_euler" else "exp_euler"
        tr = (translate_spinnaker2_cuba if cuba else translate_spinnaker2_lif)(params, dt, mode)
        extras.update(alpha_decay=tr.alpha_decay, theta=tr.theta, i_offset=tr.i_offset)
        if tr.alpha_syn is not None:
            extras["alpha_syn"] = tr.alpha_syn
        threshold_scale = tr.state_scale
        if name == "nengo":
            # fixed unit threshold: scale every input by 1/theta instead
            extras["gain"] = 1.0 / tr.theta
            input_scale = extras["gain"]
            threshold_scale = ones / params.threshold
        if cuba:
            residuals.append("bias folded into i_offset is exact only at steady state")
    elif name == "xylo":
        d_mem = xylo_shift(tau, dt, cfg.state_bits)
        extras["d_mem"] = d_mem
        d_syn = xylo_shift(params.tau_syn, dt, cfg.state_bits) if cuba else np.zeros_like(d_mem)
        extras["d_syn"] = d_syn
        input_scale = params.w_in if cuba else ones
        residuals.append("exponential decay approximated by integer bit shifts")
        if not cuba:
            residuals.append("LIF realized as CuBa-LIF with a one-step synapse")
    return NamedTranslation(cfg, np.asarray(input_scale), np.asarray(threshold_scale),
                            extras, tuple(residuals))
