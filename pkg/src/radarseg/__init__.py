"""radarseg: streaming segmentation toolkit for automotive radar detection
point clouds.

Pipeline stages: Doppler/density background filtering, sliding-window
density clustering with range-adaptive core rules, and domain-knowledge
cluster merging, plus scoring (entropy-based cluster quality) and a
two-phase derivative-free parameter optimizer. A deterministic synthetic
scene generator provides verification data.
"""

from .types import (  # noqa: F401
    BACKGROUND,
    NOISE,
    ClusterAssignment,
    Detection,
    EgoPose,
    ParamSpace,
    SensorMount,
    ValidationReport,
    validate_log,
)

__version__ = "0.1.0"
