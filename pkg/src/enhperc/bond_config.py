"""Bernoulli bond configurations and the shared-uniform monotone coupling.

Edge ``i`` of trial ``t`` is open at parameter ``p`` iff its uniform
``u[t, i] < p`` (strict). All parameters therefore share one uniform field
per trial and the open sets are nested in ``p``.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .lattice import Box, Torus


def _check_p(p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p


@dataclass(frozen=True, eq=False)
class UniformField:
    domain: object
    uniforms: np.ndarray
    seed: int = 0
    trial_index: int = 0


@dataclass(frozen=True, eq=False)
class BondConfig:
    domain: object
    open_mask: np.ndarray
    p: float = float("nan")
    seed: int = 0
    trial_index: int = 0

    def __post_init__(self):
        mask = np.asarray(self.open_mask, dtype=bool)
        if mask.shape != (self.domain.num_edges,):
            raise ValueError(f"mask has shape {mask.shape}, domain has {self.domain.num_edges} edges")
        mask.setflags(write=False)
        object.__setattr__(self, "open_mask", mask)

    @property
    def open_edges(self):
        return np.nonzero(self.open_mask)[0]

    def is_open(self, lower, axis):
        idx = self.domain.edge_index(lower, axis)
        return bool(idx >= 0 and self.open_mask[idx])

    def __eq__(self, other):
        return (isinstance(other, BondConfig) and self.domain == other.domain
                and np.array_equal(self.open_mask, other.open_mask))

    __hash__ = None


def uniform_field(domain, seed, trial_index=0, stream=rng.STREAM_BOND):
    u = rng.uniforms(seed, [trial_index], np.arange(domain.num_edges), stream)[0]
    return UniformField(domain, u, seed, trial_index)


def threshold(field, p):
    p = _check_p(p)
    return BondConfig(field.domain, field.uniforms < p, p, field.seed, field.trial_index)


def sample(domain, p, seed, trial_index=0):
    """Bernoulli(p) bond configuration, deterministic in all inputs."""
    p = _check_p(p)
    return threshold(uniform_field(domain, seed, trial_index), p)


def from_open_edges(domain, edges, p=float("nan")):
    """Configuration with exactly the listed ``(lower, axis)`` edges open."""
    mask = np.zeros(domain.num_edges, dtype=bool)
    for lower, axis in edges:
        idx = domain.edge_index(lower, axis)
        if idx < 0:
            raise ValueError(f"edge {lower},{axis} not in domain")
        mask[idx] = True
    return BondConfig(domain, mask, p)


# -- text dump -------------------------------------------------------------

def _domain_text(domain):
    if isinstance(domain, Torus):
        return f"torus {domain.m}"
    return "box " + ",".join(map(str, domain.lo)) + " " + ",".join(map(str, domain.hi))


def _parse_domain(text, dim):
    parts = text.split()
    if parts[0] == "torus":
        return Torus(dim, int(parts[1]))
    if parts[0] == "box":
        lo = tuple(int(x) for x in parts[1].split(","))
        hi = tuple(int(x) for x in parts[2].split(","))
        return Box(lo, hi)
    raise ValueError(f"unknown domain {text!r}")


def header_line(config):
    return (f"dim {config.domain.dim}; domain {_domain_text(config.domain)}; "
            f"p {config.p!r}; seed {config.seed}; trial {config.trial_index}")


def dumps(config):
    """Header line, then one ``x1 y1 [z1] axis`` line per open edge."""
    lines = [header_line(config)]
    lower = config.domain.edge_lower
    axis = config.domain.edge_axis
    for i in config.open_edges:
        lines.append(" ".join(map(str, lower[i])) + f" {axis[i]}")
    return "\n".join(lines) + "\n"


def parse_header(line):
    fields = {}
    for chunk in line.split(";"):
        key, _, value = chunk.strip().partition(" ")
        fields[key] = value.strip()
    for key in ("dim", "domain", "p", "seed", "trial"):
        if key not in fields:
            raise ValueError(f"line 1: header missing {key!r}")
    return fields


def loads(text):
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty configuration dump")
    hdr = parse_header(lines[0])
    dim = int(hdr["dim"])
    domain = _parse_domain(hdr["domain"], dim)
    mask = np.zeros(domain.num_edges, dtype=bool)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line[0].isalpha() or line.startswith("#"):
            continue
        vals = line.split()
        if len(vals) != dim + 1:
            raise ValueError(f"line {lineno}: expected {dim + 1} integers, got {line!r}")
        try:
            nums = [int(v) for v in vals]
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer field in {line!r}") from None
        if not 0 <= nums[dim] < dim:
            raise ValueError(f"line {lineno}: axis {nums[dim]} out of range")
        idx = domain.edge_index(nums[:dim], nums[dim])
        if idx < 0:
            raise ValueError(f"line {lineno}: edge outside domain")
        mask[idx] = True
    return BondConfig(domain, mask, float(hdr["p"]), int(hdr["seed"]), int(hdr["trial"]))
