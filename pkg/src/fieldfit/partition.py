"""Half-open domain decomposition, parallel fitting, and global surrogates.

Subdomains are equal axis-aligned boxes aligned with whole cells; internal
upper faces are open so every cell centroid belongs to exactly one box.
Local fits run independently per subdomain, so results do not depend on the
worker count or scheduling order.
"""

from __future__ import annotations

import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .adaptive import AdaptiveConfig, RoundReport, fit_adaptive
from .errors import DataError
from .fields import FieldData, SubdomainField
from .geometry import Box, Mesh, build_mesh, locate_many
from .rbf import LocalSurrogate, RbfDictionary, centroid_dictionary, lattice_dictionary

SURROGATE_FORMAT = "fieldfit-surrogate"
SURROGATE_VERSION = 1


@dataclass(frozen=True)
class Partition:
    """Decomposition of a mesh into a (px, py) grid of half-open boxes."""

    mesh: Mesh
    shape: tuple[int, ...]
    boxes: tuple[Box, ...]
    cell_to_subdomain: np.ndarray

    @property
    def n_subdomains(self) -> int:
        return len(self.boxes)

    def subdomain_fields(self, data: FieldData) -> list[SubdomainField]:
        return [data.subdomain(b) for b in self.boxes]


def make_partition(mesh: Mesh, px: int, py: int = 1) -> Partition:
    """Split a mesh into px (by py) equal boxes of whole cells."""
    shape = (px,) if mesh.dim == 1 else (px, py)
    if mesh.dim == 1 and py != 1:
        raise ValueError("py must be 1 for a 1-D mesh")
    for n, p, axis in zip(mesh.counts, shape, "xy"):
        if p < 1:
            raise ValueError(f"p{axis} must be >= 1, got {p}")
        if n % p != 0:
            raise ValueError(f"p{axis}={p} does not divide n{axis}={n}")

    per_axis = []
    for k, (n, p) in enumerate(zip(mesh.counts, shape)):
        lo, hi = mesh.bounds[k]
        edges = lo + (hi - lo) * np.arange(p + 1) / p
        per_axis.append(edges)

    boxes = []
    if mesh.dim == 1:
        for i in range(shape[0]):
            boxes.append(
                Box(
                    lo=(float(per_axis[0][i]),),
                    hi=(float(per_axis[0][i + 1]),),
                    open_hi=(i < shape[0] - 1,),
                )
            )
    else:
        for j in range(shape[1]):
            for i in range(shape[0]):
                boxes.append(
                    Box(
                        lo=(float(per_axis[0][i]), float(per_axis[1][j])),
                        hi=(float(per_axis[0][i + 1]), float(per_axis[1][j + 1])),
                        open_hi=(i < shape[0] - 1, j < shape[1] - 1),
                    )
                )

    # integer index arithmetic keeps every cell in exactly one subdomain
    cells_per = [n // p for n, p in zip(mesh.counts, shape)]
    nx = mesh.counts[0]
    cell_idx = np.arange(mesh.n_cells)
    sx = (cell_idx % nx) // cells_per[0]
    if mesh.dim == 1:
        owner = sx
    else:
        sy = (cell_idx // nx) // cells_per[1]
        owner = sy * shape[0] + sx
    return Partition(mesh=mesh, shape=shape, boxes=tuple(boxes), cell_to_subdomain=owner)


@dataclass(frozen=True)
class DictionarySpec:
    """Initial dictionary layout: one center per cell, or a g-lattice."""

    sigma: float
    lattice: int | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.lattice is not None and self.lattice < 1:
            raise ValueError(f"lattice resolution must be >= 1, got {self.lattice}")

    def build(self, sub: SubdomainField) -> RbfDictionary:
        if self.lattice is None:
            return centroid_dictionary(sub.centroids, self.sigma)
        return lattice_dictionary(sub.box, self.lattice, self.sigma)


@dataclass(frozen=True)
class GlobalSurrogate:
    """Per-subdomain surrogates assembled over a partition.

    Evaluation dispatches each point to its owning box, so the global field
    is positive everywhere but only piecewise continuous across internal
    subdomain faces.
    """

    partition: Partition
    locals: tuple[LocalSurrogate, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.locals) != self.partition.n_subdomains:
            raise ValueError("one local surrogate required per subdomain")

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            dim = self.partition.mesh.dim
            pts = pts[:, None] if dim == 1 else pts[None, :]
        owner = locate_many(pts, self.partition.boxes)
        out = np.empty(pts.shape[0])
        for i in range(self.partition.n_subdomains):
            sel = owner == i
            if np.any(sel):
                out[sel] = self.locals[i].evaluate(pts[sel])
        return out


@dataclass(frozen=True)
class ParallelFitReport:
    """Timings and per-subdomain round histories from a parallel fit."""

    rounds: tuple[tuple[RoundReport, ...], ...]
    seconds: tuple[float, ...]
    total_seconds: float
    workers: int
    max_concurrent: int


def _fit_one(args):
    index, sub, spec, cfg = args
    t0 = time.perf_counter()
    try:
        surrogate, reports = fit_adaptive(sub, spec.build(sub), cfg)
    except Exception as exc:  # noqa: BLE001 - annotate with the subdomain index
        raise RuntimeError(f"fit failed on subdomain {index}: {exc}") from exc
    return index, surrogate, tuple(reports), time.perf_counter() - t0


def fit_parallel(
    data: FieldData,
    partition: Partition,
    configs,
    spec,
    workers: int = 1,
    metadata: dict | None = None,
) -> tuple[GlobalSurrogate, ParallelFitReport]:
    """Fit every subdomain independently and assemble the global surrogate.

    ``configs`` and ``spec`` may be single values (broadcast) or sequences
    with one entry per subdomain.  Results are gathered by subdomain index
    and are identical for any worker count.
    """
    n = partition.n_subdomains
    cfgs = _broadcast(configs, n, AdaptiveConfig, "configs")
    specs = _broadcast(spec, n, DictionarySpec, "spec")
    subs = partition.subdomain_fields(data)
    tasks = [(i, subs[i], specs[i], cfgs[i]) for i in range(n)]

    t0 = time.perf_counter()
    if workers <= 1 or n == 1:
        results = [_fit_one(t) for t in tasks]
        used = 1
    else:
        used = min(workers, n)
        with ProcessPoolExecutor(max_workers=used) as pool:
            results = list(pool.map(_fit_one, tasks))
    total = time.perf_counter() - t0

    results.sort(key=lambda r: r[0])
    locals_ = tuple(r[1] for r in results)
    report = ParallelFitReport(
        rounds=tuple(r[2] for r in results),
        seconds=tuple(r[3] for r in results),
        total_seconds=total,
        workers=workers,
        max_concurrent=used,
    )
    meta = dict(metadata or {})
    meta.setdefault("field_checksum", data.checksum())
    return GlobalSurrogate(partition=partition, locals=locals_, metadata=meta), report


def _broadcast(value, n, klass, name):
    if isinstance(value, klass):
        return [value] * n
    values = list(value)
    if len(values) != n:
        raise ValueError(f"{name} has {len(values)} entries for {n} subdomains")
    return values


# ---------------------------------------------------------------------------
# serialization: a self-describing text format with lossless float round-trip


def save(surrogate: GlobalSurrogate, sink) -> None:
    """Write a surrogate as a version-tagged text document."""
    mesh = surrogate.partition.mesh
    lines = [f"{SURROGATE_FORMAT} {SURROGATE_VERSION}"]
    lines.append(f"dim {mesh.dim}")
    lines.append("counts " + " ".join(str(n) for n in mesh.counts))
    lines.append("bounds " + " ".join(f"{v:.17g}" for b in mesh.bounds for v in b))
    lines.append("grid " + " ".join(str(p) for p in surrogate.partition.shape))
    for key in sorted(surrogate.metadata):
        value = str(surrogate.metadata[key]).replace("\n", " ")
        lines.append(f"meta {key} {value}")
    for i, loc in enumerate(surrogate.locals):
        d = loc.dictionary
        lines.append(f"subdomain {i} entries {len(d)} log {int(loc.log_transform)}")
        for c, w, b, g in zip(d.centers, d.widths, loc.beta, d.generations):
            coords = " ".join(f"{v:.17g}" for v in c)
            lines.append(f"{coords} {w:.17g} {b:.17g} {int(g)}")
    lines.append("end")
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w") as fh:
            fh.write(text)


def load(source) -> GlobalSurrogate:
    """Read a surrogate written by :func:`save`."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read {source}: {exc}") from exc
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        if pos >= len(lines):
            raise DataError("surrogate file truncated: unexpected end of input")
        line = lines[pos]
        pos += 1
        return line

    header = next_line().split()
    if len(header) != 2 or header[0] != SURROGATE_FORMAT:
        raise DataError(f"not a surrogate file (header {header!r})")
    if int(header[1]) != SURROGATE_VERSION:
        raise DataError(f"unsupported surrogate format version {header[1]}")

    try:
        dim = int(_expect(next_line(), "dim")[0])
        counts = tuple(int(v) for v in _expect(next_line(), "counts"))
        flat = [float(v) for v in _expect(next_line(), "bounds")]
        bounds = tuple((flat[2 * k], flat[2 * k + 1]) for k in range(dim))
        grid = tuple(int(v) for v in _expect(next_line(), "grid"))
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed surrogate header: {exc}") from exc

    metadata = {}
    line = next_line()
    while line.startswith("meta "):
        _, key, value = line.split(" ", 2)
        metadata[key] = value
        line = next_line()

    mesh = build_mesh(dim, counts, bounds)
    part = make_partition(mesh, *grid)
    locals_ = []
    for i in range(part.n_subdomains):
        toks = line.split()
        try:
            if toks[0] != "subdomain" or int(toks[1]) != i:
                raise ValueError(f"expected subdomain {i}, got {line!r}")
            n_entries = int(toks[3])
            log_flag = bool(int(toks[5]))
        except (ValueError, IndexError) as exc:
            raise DataError(f"malformed subdomain header: {exc}") from exc
        centers = np.empty((n_entries, dim))
        widths = np.empty(n_entries)
        beta = np.empty(n_entries)
        gens = np.empty(n_entries, dtype=int)
        for m in range(n_entries):
            toks = next_line().split()
            if len(toks) != dim + 3:
                raise DataError(f"malformed dictionary entry at subdomain {i} row {m}")
            try:
                centers[m] = [float(v) for v in toks[:dim]]
                widths[m] = float(toks[dim])
                beta[m] = float(toks[dim + 1])
                gens[m] = int(toks[dim + 2])
            except ValueError as exc:
                raise DataError(f"malformed number at subdomain {i} row {m}: {exc}") from exc
        locals_.append(
            LocalSurrogate(
                dictionary=RbfDictionary(centers=centers, widths=widths, generations=gens),
                beta=beta,
                log_transform=log_flag,
            )
        )
        line = next_line()
    if line.strip() != "end":
        raise DataError(f"surrogate file missing end marker, found {line!r}")
    return GlobalSurrogate(partition=part, locals=tuple(locals_), metadata=metadata)


def _expect(line: str, key: str):
    toks = line.split()
    if not toks or toks[0] != key:
        raise ValueError(f"expected '{key}' line, got {line!r}")
    return toks[1:]


def dumps(surrogate: GlobalSurrogate) -> str:
    buf = io.StringIO()
    save(surrogate, buf)
    return buf.getvalue()


def loads(text: str) -> GlobalSurrogate:
    return load(io.StringIO(text))
