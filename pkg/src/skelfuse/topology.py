"""Joint-graph topology: vertices, edges and the parent map defining bones.

A topology is data, not code: the built-in 17-joint body graph ships as a
plain-text file under ``skelfuse/data`` and custom graphs load from the same
format. The ``edges`` list drives graph convolution adjacency; the ``parent``
map drives bone-style modality derivations. The two are stored independently
(an adjacency may contain cross links that are not bones).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError


@dataclass
class Topology:
    """Fixed joint graph shared by every sequence of a dataset.

    Attributes:
        name: Identifier, e.g. ``coco17``.
        num_joints: Number of vertices V.
        edges: Undirected (i, j) joint pairs, i != j, no duplicates.
        parent: Parent joint index per joint; the single root maps to itself.
        parent2: Two-hop ancestor per joint, derived as parent[parent[j]].
    """

    name: str
    num_joints: int
    edges: list[tuple[int, int]]
    parent: list[int]
    parent2: list[int] = field(init=False)

    def __post_init__(self):
        v = self.num_joints
        if v < 1:
            raise ConfigError(f"num_joints must be >= 1, got {v}")
        if len(self.parent) != v:
            raise ConfigError(
                f"parent map has {len(self.parent)} entries for {v} joints")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < v and 0 <= j < v):
                raise ConfigError(f"edge ({i}, {j}) out of range for V={v}")
            if i == j:
                raise ConfigError(f"self-edge ({i}, {j}) not allowed")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ConfigError(f"duplicate edge ({i}, {j})")
            seen.add(key)
        roots = [j for j in range(v) if self.parent[j] == j]
        if len(roots) != 1:
            raise ConfigError(
                f"parent map must have exactly one self-rooted joint, got {roots}")
        root = roots[0]
        for j in range(v):
            if not 0 <= self.parent[j] < v:
                raise ConfigError(f"parent[{j}]={self.parent[j]} out of range")
            node, steps = j, 0
            while node != root:
                node = self.parent[node]
                steps += 1
                if steps >= v:
                    raise ConfigError(
                        f"parent chain from joint {j} does not reach root {root}")
        self.parent2 = [self.parent[self.parent[j]] for j in range(v)]

    @property
    def root(self) -> int:
        return next(j for j in range(self.num_joints) if self.parent[j] == j)

    def parent_index(self) -> np.ndarray:
        """Parent map as an int array usable for fancy indexing."""
        return np.asarray(self.parent, dtype=np.int64)

    def parent2_index(self) -> np.ndarray:
        return np.asarray(self.parent2, dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        """Symmetric 0/1 adjacency from the edge list, no self-loops."""
        a = np.zeros((self.num_joints, self.num_joints))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a


def write_topology(topo: Topology, path: str | Path) -> None:
    """Write the plain-text topology document (parent2 is derived, not stored)."""
    lines = [
        f"name = {topo.name}",
        f"num_joints = {topo.num_joints}",
        "edges = " + " ".join(f"{i}-{j}" for i, j in topo.edges),
        "parent = " + " ".join(str(p) for p in topo.parent),
        "",
    ]
    Path(path).write_text("\n".join(lines))


def _parse_kv_lines(text: str, path) -> dict[str, str]:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def parse_topology(text: str, source: str = "<topology>") -> Topology:
    fields = _parse_kv_lines(text, source)
    for key in ("name", "num_joints", "edges", "parent"):
        if key not in fields:
            raise FormatError(f"{source}: missing field '{key}'")
    try:
        num_joints = int(fields["num_joints"])
        edges = []
        if fields["edges"]:
            for token in fields["edges"].split():
                i, j = token.split("-")
                edges.append((int(i), int(j)))
        parent = [int(p) for p in fields["parent"].split()]
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from exc
    return Topology(name=fields["name"], num_joints=num_joints,
                    edges=edges, parent=parent)


def load_topology(path: str | Path) -> Topology:
    return parse_topology(Path(path).read_text(), source=str(path))


def builtin_topology(name: str = "coco17") -> Topology:
    """Load a topology shipped with the package (currently ``coco17``)."""
    ref = resources.files("skelfuse").joinpath("data", f"{name}.topo")
    if not ref.is_file():
        raise ConfigError(f"no built-in topology named '{name}'")
    return parse_topology(ref.read_text(), source=f"builtin:{name}")


def resolve_topology(spec: str) -> Topology:
    """Accept either a built-in name or a path to a topology file."""
    p = Path(spec)
    if p.exists():
        return load_topology(p)
    return builtin_topology(spec)
