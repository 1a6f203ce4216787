"""Deterministic network simulation for offline runs and tests.

The simulator models pairwise latency as distance times a rate constant,
with optional per-pair overrides and optional Gaussian noise. Noise is keyed
by (seed, host pair, sample tag) through a cryptographic hash, so a given
draw is reproducible regardless of call order.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Union

from .candidate import candidate_peers, processor_invocations
from .errors import RegionRankError
from .geo import FixtureResolver, GeoPoint, haversine_km
from .metrics import ProbeError
from .regions import Region, RegionCatalog
from .workflow import WorkflowSpec, endpoint_host


class SimulationError(RegionRankError):
    """The simulated environment cannot answer a query."""


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class SimEnvironment:
    """A synthetic world: host positions plus link and service parameters.

    latency_overrides pins specific host pairs to a fixed one-way latency in
    ms (symmetric); every other pair costs base_latency_per_km times the
    great-circle distance. Keys may be given as (a, b) tuples or "a|b"
    strings and are normalised to sorted tuples.
    """

    node_locations: dict[str, GeoPoint] = field(default_factory=dict)
    latency_overrides: dict[tuple[str, str], float] = field(default_factory=dict)
    base_latency_per_km: float = 0.02
    bandwidth_mbps: float = 100.0
    service_overhead_ms: float = 3.0
    processing_s: float = 0.0
    noise_sigma_ms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "node_locations", dict(self.node_locations))
        normalized: dict[tuple[str, str], float] = {}
        for key, value in dict(self.latency_overrides).items():
            if isinstance(key, str):
                a, sep, b = key.partition("|")
                if not sep or not a or not b:
                    raise SimulationError(f"override key {key!r} is not of the form 'hostA|hostB'")
            else:
                a, b = key
            pair = _pair_key(str(a), str(b))
            value = float(value)
            if pair in normalized and normalized[pair] != value:
                raise SimulationError(f"conflicting override values for pair {pair!r}")
            if value < 0:
                raise SimulationError(f"override for {pair!r} must be non-negative")
            normalized[pair] = value
        object.__setattr__(self, "latency_overrides", normalized)
        for name in ("base_latency_per_km", "service_overhead_ms", "processing_s", "noise_sigma_ms"):
            if getattr(self, name) < 0:
                raise SimulationError(f"{name} must be non-negative")
        if self.bandwidth_mbps <= 0:
            raise SimulationError("bandwidth_mbps must be positive")

    def locate(self, host: str) -> GeoPoint:
        try:
            return self.node_locations[host]
        except KeyError:
            raise SimulationError(f"environment has no location for host {host!r}") from None

    def resolver(self) -> FixtureResolver:
        return FixtureResolver(self.node_locations)


def _noise_ms(env: SimEnvironment, pair: tuple[str, str], sample: Union[int, str]) -> float:
    key = f"{env.seed}|{pair[0]}|{pair[1]}|{sample}"
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    return rng.gauss(0.0, env.noise_sigma_ms)


def sim_latency(env: SimEnvironment, a: str, b: str, sample: Union[int, str] = 0) -> float:
    """One-way latency a<->b in ms: override or distance-based, plus noise.

    Both hosts must be located in the environment even when an override pins
    the pair; a typo in a host name should fail loudly and not silently
    bypass the geography.
    """
    pa, pb = env.locate(a), env.locate(b)
    pair = _pair_key(a, b)
    if pair in env.latency_overrides:
        base = env.latency_overrides[pair]
    else:
        base = env.base_latency_per_km * haversine_km(pa, pb)
    if env.noise_sigma_ms > 0:
        base += _noise_ms(env, pair, sample)
    return max(0.0, base)


def sim_execution_time(
    env: SimEnvironment,
    spec: WorkflowSpec,
    orchestrator_host: str,
    data_mb: float = 1.0,
    run: Union[int, str] = 0,
) -> float:
    """Predicted end-to-end seconds with the orchestrator at a given host.

    Each candidate edge costs its latency plus the serialisation time of
    data_mb megabytes at the environment bandwidth; each hop that targets a
    processor adds processing_s of service time.
    """
    if data_mb < 0:
        raise SimulationError("data_mb must be non-negative")
    transfer_s = data_mb * 8.0 / env.bandwidth_mbps
    total = 0.0
    for i, peer in enumerate(candidate_peers(spec)):
        latency = sim_latency(env, orchestrator_host, peer, sample=f"run{run}/edge{i}")
        total += latency / 1000.0 + transfer_s
    total += env.processing_s * processor_invocations(spec)
    return total


def best_region_oracle(
    env: SimEnvironment,
    spec: WorkflowSpec,
    catalog: RegionCatalog,
    data_mb: float = 1.0,
) -> tuple[str, tuple[tuple[str, float], ...]]:
    """Brute-force ground truth: simulate every region, pick the fastest.

    Returns (best region id, full (id, seconds) table sorted fastest first,
    ties broken by id).
    """
    times = [
        (sim_execution_time(env, spec, region.probe_host, data_mb), region.id)
        for region in catalog
    ]
    times.sort()
    table = tuple((region_id, t) for t, region_id in times)
    return table[0][0], table


class SimulatedProbe:
    """Probe backend that answers from a SimEnvironment instead of a network."""

    def __init__(self, env: SimEnvironment):
        self.env = env

    def measure_latency(self, region: Region, host: str, k: int) -> float:
        try:
            samples = [
                sim_latency(self.env, region.probe_host, host, sample=f"lat{i}")
                for i in range(k)
            ]
        except SimulationError as exc:
            raise ProbeError(str(exc)) from exc
        return sum(samples) / len(samples)

    def measure_http_rtt(self, region: Region, url: str) -> float:
        host = endpoint_host(url)
        try:
            one_way = sim_latency(self.env, region.probe_host, host, sample="rtt")
        except SimulationError as exc:
            raise ProbeError(str(exc)) from exc
        return 2.0 * one_way + self.env.service_overhead_ms


def load_env(text: str) -> SimEnvironment:
    """Parse an environment file (JSON; override keys are "hostA|hostB")."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SimulationError(f"malformed environment file: {exc}") from exc
    if not isinstance(doc, dict):
        raise SimulationError("malformed environment file: top-level value must be an object")
    known = {
        "node_locations",
        "latency_overrides",
        "base_latency_per_km",
        "bandwidth_mbps",
        "service_overhead_ms",
        "processing_s",
        "noise_sigma_ms",
        "seed",
    }
    unknown = set(doc) - known
    if unknown:
        raise SimulationError(f"unknown environment fields: {sorted(unknown)}")
    locations = {}
    for host, coords in dict(doc.get("node_locations", {})).items():
        try:
            point = GeoPoint(float(coords["lat"]), float(coords["lon"]))
        except (TypeError, KeyError, ValueError) as exc:
            raise SimulationError(f"bad location for host {host!r}: {exc}") from exc
        locations[str(host)] = point
    overrides = {str(k): float(v) for k, v in dict(doc.get("latency_overrides", {})).items()}
    return SimEnvironment(
        node_locations=locations,
        latency_overrides=overrides,
        base_latency_per_km=float(doc.get("base_latency_per_km", 0.02)),
        bandwidth_mbps=float(doc.get("bandwidth_mbps", 100.0)),
        service_overhead_ms=float(doc.get("service_overhead_ms", 3.0)),
        processing_s=float(doc.get("processing_s", 0.0)),
        noise_sigma_ms=float(doc.get("noise_sigma_ms", 0.0)),
        seed=int(doc.get("seed", 0)),
    )


def dump_env(env: SimEnvironment) -> str:
    doc = {
        "node_locations": {
            host: {"lat": point.lat, "lon": point.lon}
            for host, point in sorted(env.node_locations.items())
        },
        "latency_overrides": {
            f"{a}|{b}": value for (a, b), value in sorted(env.latency_overrides.items())
        },
        "base_latency_per_km": env.base_latency_per_km,
        "bandwidth_mbps": env.bandwidth_mbps,
        "service_overhead_ms": env.service_overhead_ms,
        "processing_s": env.processing_s,
        "noise_sigma_ms": env.noise_sigma_ms,
        "seed": env.seed,
    }
    return json.dumps(doc, indent=2) + "\n"
