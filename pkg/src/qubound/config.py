"""Shared numeric policy and resource caps."""

import os
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Tolerances:
    atol: float = 1e-9
    eig_reconstruction: float = 1e-10
    prob_floor: float = 1e-12
    violation: float = 1e-9
    # slack on the entropy window so exactly-on-boundary sequences are not
    # dropped by last-bit rounding of log2
    typicality_slack: float = 1e-12

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ResourceCaps:
    max_dim: int = 4096
    max_codebook: int = 2**16

    @classmethod
    def from_env(cls, **overrides):
        env = os.environ.get("QUBOUND_MAX_DIM")
        kwargs = {}
        if env:
            kwargs["max_dim"] = int(env)
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def to_dict(self):
        return asdict(self)


DEFAULT_TOL = Tolerances()
DEFAULT_CAPS = ResourceCaps()
