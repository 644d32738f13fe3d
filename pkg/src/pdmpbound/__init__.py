"""Piecewise deterministic Markov process samplers on domains with boundaries."""

from .core import (
    ClockOutcome,
    ContractError,
    DominationError,
    EventCascadeError,
    EventRecord,
    PhasePoint,
    Skeleton,
    SpeedFunction,
    Streams,
    VanishingBoundaryError,
    flow_advance,
    ipp_sample_constant,
    ipp_sample_linear,
    ipp_sample_thinned,
    make_streams,
    race_clocks,
    run_sampler,
)
from .boundary import BoundaryHit, BoundaryPolicy, acceptance_ratio, resolve_boundary
from .sticky import StickySpec, stick, unstick, unstick_clock
from .zigzag import ZigZag, ZigZagConfig
from .bps import BouncyParticle, BpsConfig

__all__ = [
    "BouncyParticle", "BoundaryHit", "BoundaryPolicy", "BpsConfig", "ClockOutcome",
    "ContractError", "DominationError", "EventCascadeError", "EventRecord", "PhasePoint",
    "Skeleton", "SpeedFunction", "StickySpec", "Streams", "VanishingBoundaryError", "ZigZag",
    "ZigZagConfig", "acceptance_ratio", "flow_advance", "ipp_sample_constant",
    "ipp_sample_linear", "ipp_sample_thinned", "make_streams", "race_clocks",
    "resolve_boundary", "run_sampler", "stick", "unstick", "unstick_clock",
]
