"""All-pairs shortest-path distances over the capped neighbor graph.

Per-source Dijkstra with a lazy-deletion binary heap provides the production
path; a cubic Floyd-Warshall relaxation provides the independent oracle used
in tests. Unreachable pairs carry the UNREACHABLE sentinel (+inf in memory,
a quiet NaN in the serialized block) so no arithmetic can silently mix them
with real path lengths.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path

import numpy as np

from .errors import BadMagic, TooLarge, TruncatedFile
from .graph import NeighborGraph

UNREACHABLE = math.inf

_FW_LIMIT = 500
_MAGIC = b"PRGM"
_VERSION = 1


@dataclass
class GeodesicMatrix:
    """Symmetric matrix of shortest-path lengths with unreachable sentinels."""

    values: np.ndarray
    finite_fraction: float
    fingerprint: dict

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def is_fully_connected(self) -> bool:
        return self.finite_fraction == 1.0


def _adjacency_lists(graph: NeighborGraph) -> list[list[tuple[int, float]]]:
    return [
        list(zip((int(j) for j in nbrs), (float(w) for w in wts)))
        for nbrs, wts in zip(graph.neighbors, graph.weights)
    ]


def dijkstra_from(graph: NeighborGraph, source: int,
                  adj: list[list[tuple[int, float]]] | None = None):
    """Single-source shortest paths; returns (distances, parents).

    Unreached vertices get UNREACHABLE and parent -1. When several shortest
    paths tie, the parent is the smallest predecessor index; heap ties pop
    the smaller vertex first, so output is deterministic.
    """
    n = graph.n
    if not 0 <= source < n:
        raise ValueError(f"source must be in [0, {n}), got {source}")
    if adj is None:
        adj = _adjacency_lists(graph)
    dist = [math.inf] * n
    parent = [-1] * n
    done = bytearray(n)
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    while heap:
        du, u = heappop(heap)
        if done[u]:
            continue
        done[u] = 1
        for v, w in adj[u]:
            if done[v]:
                continue
            alt = du + w
            dv = dist[v]
            if alt < dv:
                dist[v] = alt
                parent[v] = u
                heappush(heap, (alt, v))
            elif alt == dv and u < parent[v]:
                parent[v] = u
    return np.array(dist, dtype=np.float64), np.array(parent, dtype=np.int64)


def all_pairs(graph: NeighborGraph, threads: int = 1) -> GeodesicMatrix:
    """All-pairs shortest paths by running Dijkstra from every source.

    Rows are independent, so the optional thread pool cannot change results.
    Asymmetry beyond 1e-12 would indicate a relaxation bug and is asserted
    away; the returned matrix is exactly symmetric.
    """
    n = graph.n
    adj = _adjacency_lists(graph)
    if __debug__ and n:
        longest = max((float(w.max()) for w in graph.weights if len(w)), default=0.0)
        assert longest <= graph.h, f"edge weight {longest} exceeds cap h={graph.h}"

    out = np.full((n, n), math.inf, dtype=np.float64)
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for s, (row, _) in enumerate(
                pool.map(lambda s: dijkstra_from(graph, s, adj), range(n))
            ):
                out[s] = row
    else:
        for s in range(n):
            out[s] = dijkstra_from(graph, s, adj)[0]

    finite = np.isfinite(out)
    if n:
        both = finite & finite.T
        if both.any():
            # forward/reverse path sums differ only by summation order, so any
            # asymmetry beyond rounding at the distance scale is a bug
            scale = max(1.0, float(out[both].max()))
            asym = float(np.max(np.abs(out[both] - out.T[both])))
            assert asym <= 1e-12 * scale, f"asymmetry {asym} exceeds 1e-12 * {scale}"
        assert (finite == finite.T).all(), "reachability must be symmetric"
    out = np.minimum(out, out.T)

    return GeodesicMatrix(
        values=out,
        finite_fraction=float(finite.mean()) if n else 1.0,
        fingerprint=graph.fingerprint(),
    )


def floyd_warshall_oracle(graph: NeighborGraph) -> GeodesicMatrix:
    """Cubic-time all-pairs oracle, identical contract to all_pairs.

    Guarded to n <= 500 because of the O(n^3) cost.
    """
    n = graph.n
    if n > _FW_LIMIT:
        raise TooLarge(f"Floyd-Warshall oracle limited to n <= {_FW_LIMIT}, got {n}")
    d = np.full((n, n), math.inf, dtype=np.float64)
    np.fill_diagonal(d, 0.0)
    for i in range(n):
        for j, w in zip(graph.neighbors[i], graph.weights[i]):
            d[i, j] = w
    for mid in range(n):
        np.minimum(d, d[:, mid : mid + 1] + d[mid : mid + 1, :], out=d)
    finite_fraction = float(np.isfinite(d).mean()) if n else 1.0
    return GeodesicMatrix(values=d, finite_fraction=finite_fraction,
                          fingerprint=graph.fingerprint())


# -- serialization -------------------------------------------------------------


def save_geodesics(gm: GeodesicMatrix, path) -> None:
    """Write the binary block: header, fingerprint JSON, row-major float64.

    Unreachable entries are encoded as quiet NaN.
    """
    fp = json.dumps(gm.fingerprint, sort_keys=True).encode("utf-8")
    body = gm.values.copy()
    body[~np.isfinite(body)] = np.nan
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIdI", _VERSION, gm.n, gm.finite_fraction, len(fp)))
        fh.write(fp)
        fh.write(body.astype("<f8").tobytes(order="C"))


def load_geodesics(path) -> GeodesicMatrix:
    """Read a block written by save_geodesics, restoring inf sentinels."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _MAGIC:
        raise BadMagic(f"{path}: not a geodesic block")
    header_size = 4 + struct.calcsize("<IIdI")
    if len(raw) < header_size:
        raise TruncatedFile(f"{path}: header incomplete")
    version, n, finite_fraction, fp_len = struct.unpack("<IIdI", raw[4:header_size])
    if version != _VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    fp_end = header_size + fp_len
    body_end = fp_end + n * n * 8
    if len(raw) < body_end:
        raise TruncatedFile(f"{path}: expected {body_end} bytes, got {len(raw)}")
    fingerprint = json.loads(raw[header_size:fp_end].decode("utf-8"))
    values = np.frombuffer(raw[fp_end:body_end], dtype="<f8").reshape(n, n).copy()
    values[np.isnan(values)] = math.inf
    return GeodesicMatrix(values=values, finite_fraction=finite_fraction,
                          fingerprint=fingerprint)
