"""Workflow DAG model: parse, render, validate, and generate specifications.

A workflow is a set of HTTP service nodes and directed dataflow hops between
them. Two on-disk formats are supported:

* ``lines``: one URL per non-comment line; the first URL is the data source
  and the remaining lines form a sequential processing chain.
* ``dag``: a JSON object describing arbitrary multi-source DAGs (see
  parse_workflow for the schema).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from urllib.parse import urlsplit

from .errors import RegionRankError

ROLE_SOURCE = "source"
ROLE_PROCESSOR = "processor"

_DEFAULT_PORTS = {"http": 80, "https": 443}


class WorkflowError(RegionRankError):
    """A workflow file or specification is invalid."""


def endpoint_host(url: str) -> str:
    """Canonical host key of a URL: lowercase hostname, ':port' only when non-default.

    Metrics are gathered per host, so two URLs on the same host:port share one
    key regardless of path.
    """
    parts = urlsplit(url)
    host = parts.hostname
    if host is None:
        raise WorkflowError(f"URL {url!r} has no host")
    port = parts.port
    if port is None or port == _DEFAULT_PORTS.get(parts.scheme):
        return host
    return f"{host}:{port}"


def _require_url(url: str, where: str) -> str:
    try:
        parts = urlsplit(url)
        host = parts.hostname
        parts.port  # may raise on an unparseable port
    except ValueError as exc:
        raise WorkflowError(f"malformed URL at {where}: {url!r} ({exc})") from exc
    if parts.scheme not in ("http", "https") or not host:
        raise WorkflowError(
            f"malformed URL at {where}: {url!r} (expected an absolute http(s) URL with a host)"
        )
    return url


@dataclass(frozen=True)
class ServiceNode:
    """One HTTP service taking part in a workflow."""

    id: str
    endpoint: str
    role: str  # ROLE_SOURCE or ROLE_PROCESSOR

    def __post_init__(self):
        if not self.id:
            raise WorkflowError("node id must be non-empty")
        if self.role not in (ROLE_SOURCE, ROLE_PROCESSOR):
            raise WorkflowError(f"unknown node role {self.role!r}")
        _require_url(self.endpoint, f"node {self.id!r}")

    @property
    def host(self) -> str:
        return endpoint_host(self.endpoint)


@dataclass(frozen=True)
class WorkflowSpec:
    """A validated DAG workflow.

    Hops are directed (from-id, to-id) dataflow transfers. The final delivery
    of each terminal node's output back to the orchestrator is implicit and
    added during candidate-graph construction, never stored here.
    """

    name: str
    nodes: tuple[ServiceNode, ...]
    hops: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "hops", tuple((str(a), str(b)) for a, b in self.hops))
        self._validate()

    def _validate(self):
        ids = [n.id for n in self.nodes]
        seen = set()
        for node_id in ids:
            if node_id in seen:
                raise WorkflowError(f"duplicate node id {node_id!r}")
            seen.add(node_id)
        for u, v in self.hops:
            for node_id in (u, v):
                if node_id not in seen:
                    raise WorkflowError(f"unknown id {node_id!r} in hop list")
        if not any(n.role == ROLE_SOURCE for n in self.nodes):
            raise WorkflowError("workflow needs at least one source node")
        self._check_acyclic()
        self._check_reachability()

    def _check_acyclic(self):
        indegree = {n.id: 0 for n in self.nodes}
        for _, v in self.hops:
            indegree[v] += 1
        ready = [i for i, d in indegree.items() if d == 0]
        removed = 0
        while ready:
            u = ready.pop()
            removed += 1
            for a, b in self.hops:
                if a == u:
                    indegree[b] -= 1
                    if indegree[b] == 0:
                        ready.append(b)
        if removed != len(self.nodes):
            raise WorkflowError("cycle detected in workflow hops")

    def _check_reachability(self):
        reached = {n.id for n in self.nodes if n.role == ROLE_SOURCE}
        changed = True
        while changed:
            changed = False
            for u, v in self.hops:
                if u in reached and v not in reached:
                    reached.add(v)
                    changed = True
        for node in self.nodes:
            if node.role == ROLE_PROCESSOR and node.id not in reached:
                raise WorkflowError(f"processor {node.id!r} is unreachable from any source")

    def node_by_id(self, node_id: str) -> ServiceNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise WorkflowError(f"unknown id {node_id!r}")

    @property
    def sources(self) -> tuple[ServiceNode, ...]:
        return tuple(n for n in self.nodes if n.role == ROLE_SOURCE)

    @property
    def processors(self) -> tuple[ServiceNode, ...]:
        return tuple(n for n in self.nodes if n.role == ROLE_PROCESSOR)


class _IdAllocator:
    """Derives unique node ids from host keys, suffixing '#k' on repeats."""

    def __init__(self):
        self._counts: dict[str, int] = {}

    def allocate(self, base: str) -> str:
        count = self._counts.get(base, 0) + 1
        self._counts[base] = count
        return base if count == 1 else f"{base}#{count}"


def _chain_spec(name: str, source_url: str, processor_urls: list[str]) -> WorkflowSpec:
    ids = _IdAllocator()
    nodes = [ServiceNode(ids.allocate(endpoint_host(source_url)), source_url, ROLE_SOURCE)]
    for url in processor_urls:
        nodes.append(ServiceNode(ids.allocate(endpoint_host(url)), url, ROLE_PROCESSOR))
    hops = tuple((a.id, b.id) for a, b in zip(nodes, nodes[1:]))
    return WorkflowSpec(name=name, nodes=tuple(nodes), hops=hops)


def _parse_lines(text: str) -> WorkflowSpec:
    name = "workflow"
    urls: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("name:"):
                name = body[5:].strip() or name
            continue
        urls.append(_require_url(line, f"line {lineno}"))
    if not urls:
        raise WorkflowError("empty workflow file: no node URLs found")
    return _chain_spec(name, urls[0], urls[1:])


def _parse_dag(text: str) -> WorkflowSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkflowError(f"malformed dag file: {exc}") from exc
    if not isinstance(doc, dict):
        raise WorkflowError("malformed dag file: top-level value must be an object")

    name = str(doc.get("name", "workflow"))
    sources = doc.get("sources", [])
    raw_nodes = doc.get("nodes", [])
    raw_hops = doc.get("hops", [])
    if not isinstance(sources, list) or not isinstance(raw_nodes, list) or not isinstance(raw_hops, list):
        raise WorkflowError("malformed dag file: sources, nodes and hops must be arrays")

    source_urls = {_require_url(str(u), "sources") for u in sources}
    declared_urls = set()
    nodes = []
    for entry in raw_nodes:
        try:
            node_id, url = str(entry["id"]), str(entry["url"])
        except (TypeError, KeyError) as exc:
            raise WorkflowError(f"malformed dag node entry {entry!r}") from exc
        declared_urls.add(url)
        role = ROLE_SOURCE if url in source_urls else ROLE_PROCESSOR
        nodes.append(ServiceNode(node_id, _require_url(url, f"node {node_id!r}"), role))
    for url in source_urls:
        if url not in declared_urls:
            raise WorkflowError(f"source URL {url!r} is not declared in nodes")

    hops = []
    for entry in raw_hops:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise WorkflowError(f"malformed hop entry {entry!r}: expected [from_id, to_id]")
        hops.append((str(entry[0]), str(entry[1])))
    return WorkflowSpec(name=name, nodes=tuple(nodes), hops=tuple(hops))


def parse_workflow(text: str, format: str = "lines") -> WorkflowSpec:
    """Parse workflow file content.

    ``lines`` format: UTF-8 text, '#'-prefixed comment lines ignored (a
    '# name: X' comment carries the workflow name), one URL per line, first
    URL is the source. Duplicate hosts get distinct '#k'-suffixed node ids.

    ``dag`` format: JSON object {"name": str, "sources": [url...],
    "nodes": [{"id": str, "url": str}...], "hops": [[from_id, to_id]...]}.
    "nodes" declares every node; a node whose url appears in "sources" is a
    data source.
    """
    if not text.strip():
        raise WorkflowError("empty workflow file")
    if format == "lines":
        return _parse_lines(text)
    if format == "dag":
        return _parse_dag(text)
    raise WorkflowError(f"unknown workflow format {format!r}")


def render_workflow(spec: WorkflowSpec, format: str = "lines") -> str:
    """Render a spec back to file content; parse(render(spec)) == spec.

    The lines format can only express sequential chains and regenerates node
    ids from hosts on re-parse, so it is reserved for chain-shaped specs.
    """
    if format == "lines":
        ids = [n.id for n in spec.nodes]
        expected_hops = tuple(zip(ids, ids[1:]))
        if spec.hops != expected_hops or len(spec.sources) != 1 or spec.nodes[0].role != ROLE_SOURCE:
            raise WorkflowError("lines format requires a single-source sequential chain")
        lines = [f"# name: {spec.name}"] + [n.endpoint for n in spec.nodes]
        return "\n".join(lines) + "\n"
    if format == "dag":
        doc = {
            "name": spec.name,
            "sources": [n.endpoint for n in spec.nodes if n.role == ROLE_SOURCE],
            "nodes": [{"id": n.id, "url": n.endpoint} for n in spec.nodes],
            "hops": [list(hop) for hop in spec.hops],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise WorkflowError(f"unknown workflow format {format!r}")


def distinct_nodes(spec: WorkflowSpec) -> list[ServiceNode]:
    """Distinct workflow nodes by endpoint host, ordered by first appearance.

    Probing the same host twice would waste measurement budget, so metric
    gathering keys off this list.
    """
    seen: set[str] = set()
    out = []
    for node in spec.nodes:
        if node.host not in seen:
            seen.add(node.host)
            out.append(node)
    return out


def generate_random_workflow(
    pool: list[str], length: int, seed: int, source: str
) -> WorkflowSpec:
    """Build a sequential chain of `length` processors sampled from `pool`.

    Sampling is uniform with replacement from a generator seeded with `seed`,
    so identical (pool, length, seed, source) inputs give identical specs.
    """
    if not pool:
        raise WorkflowError("empty endpoint pool")
    if length < 1:
        raise WorkflowError("length must be at least 1")
    _require_url(source, "source")
    for i, url in enumerate(pool):
        _require_url(url, f"pool entry {i}")
    rng = random.Random(seed)
    chosen = [rng.choice(pool) for _ in range(length)]
    return _chain_spec(f"random-len{length}-seed{seed}", source, chosen)
