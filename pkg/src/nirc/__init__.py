"""Neuromorphic IR toolchain: graph model, dialect simulator, passes and analysis."""

from nirc.dialects import DialectConfig, named_config
from nirc.engine import SimulationTrace, build_schedule, run
from nirc.graph import Diagnostic, Edge, Graph, chain, fan_in, fan_out, infer_shapes, validate
from nirc.primitives import (
    IF,
    LI,
    LIF,
    Affine,
    Conv,
    CubaLIF,
    Delay,
    Flatten,
    Input,
    Integrator,
    Linear,
    Output,
    Scale,
    Spike,
)

__version__ = "0.1.0"
