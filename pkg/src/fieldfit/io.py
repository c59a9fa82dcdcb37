"""Field-file parsing, SPE10 ingestion, and CSV export.

The field file is a plain text format chosen for auditability: a header line
``dim nx [ny]``, a bounds line ``x0 x1 [y0 y1]``, then the cell values in
row-major order (y outer, x inner), whitespace separated.  SPE10 ingestion
reads the community-standard ``spe_perm.dat`` layout: kx, ky, kz blocks
stored consecutively, each holding 85 layers of 220 rows by 60 columns.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .fields import FieldData
from .geometry import build_mesh

SPE10_NX = 60
SPE10_NY = 220
SPE10_LAYERS = 85
SPE10_LAYER_VALUES = SPE10_NX * SPE10_NY
SPE10_TOTAL_VALUES = 3 * SPE10_LAYERS * SPE10_LAYER_VALUES


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    try:
        with open(source) as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {source}: {exc}") from exc


def read_field(source) -> FieldData:
    """Parse a field file into cell data plus its mesh."""
    tokens = _read_text(source).split()
    if len(tokens) < 2:
        raise DataError("field file too short to contain a header")
    try:
        dim = int(tokens[0])
    except ValueError as exc:
        raise DataError(f"malformed dimension token {tokens[0]!r}") from exc
    if dim not in (1, 2):
        raise DataError(f"dimension must be 1 or 2, got {dim}")
    n_counts = dim
    n_bounds = 2 * dim
    header_len = 1 + n_counts + n_bounds
    if len(tokens) < header_len:
        raise DataError("field file header truncated")
    try:
        counts = tuple(int(t) for t in tokens[1 : 1 + n_counts])
        bounds = [float(t) for t in tokens[1 + n_counts : header_len]]
    except ValueError as exc:
        raise DataError(f"malformed field header: {exc}") from exc
    try:
        mesh = build_mesh(dim, counts, bounds)
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    raw = tokens[header_len:]
    if len(raw) != mesh.n_cells:
        raise DataError(
            f"field file has {len(raw)} values but the header implies {mesh.n_cells}"
        )
    try:
        values = np.array(raw, dtype=float)
    except ValueError:
        values = _parse_reporting_index(raw)
    bad = ~(values > 0) | ~np.isfinite(values)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise DataError(f"field value at cell {j} is not positive: {raw[j]}")
    return FieldData(mesh=mesh, values=values)


def _parse_reporting_index(raw):
    out = np.empty(len(raw))
    for j, tok in enumerate(raw):
        try:
            out[j] = float(tok)
        except ValueError as exc:
            raise DataError(f"non-numeric value {tok!r} at cell {j}") from exc
    return out


def write_field(data: FieldData, sink) -> None:
    """Write a field in the grammar accepted by :func:`read_field`."""
    mesh = data.mesh
    lines = [
        " ".join([str(mesh.dim)] + [str(n) for n in mesh.counts]),
        " ".join(f"{v:.17g}" for b in mesh.bounds for v in b),
    ]
    lines.extend(f"{v:.17g}" for v in data.values)
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w") as fh:
            fh.write(text)


def read_spe10(source, layer: int) -> FieldData:
    """Extract the kx slice of one layer from an SPE10 permeability file.

    Values stay in native millidarcy on a 60x220 mesh with bounds
    [0, 60] x [0, 220] in grid units.
    """
    if not 0 <= layer < SPE10_LAYERS:
        raise DataError(f"layer must lie in [0, {SPE10_LAYERS}), got {layer}")
    tokens = _read_text(source).split()
    if len(tokens) != SPE10_TOTAL_VALUES:
        raise DataError(
            f"SPE10 permeability file must hold exactly {SPE10_TOTAL_VALUES} values "
            f"(kx, ky, kz of {SPE10_LAYERS} layers of {SPE10_NY}x{SPE10_NX}); "
            f"got {len(tokens)}"
        )
    start = layer * SPE10_LAYER_VALUES
    raw = tokens[start : start + SPE10_LAYER_VALUES]
    try:
        values = np.array(raw, dtype=float)
    except ValueError:
        values = _parse_spe10_reporting_offset(raw, start)
    bad = ~(values > 0) | ~np.isfinite(values)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise DataError(f"SPE10 value at token offset {start + j} is not positive: {raw[j]}")
    mesh = build_mesh(2, (SPE10_NX, SPE10_NY), ((0.0, SPE10_NX), (0.0, SPE10_NY)))
    return FieldData(mesh=mesh, values=values)


def _parse_spe10_reporting_offset(raw, start):
    out = np.empty(len(raw))
    for j, tok in enumerate(raw):
        try:
            out[j] = float(tok)
        except ValueError as exc:
            raise DataError(f"non-numeric token {tok!r} at offset {start + j}") from exc
    return out


def write_grid_csv(points, values, sink, provenance: str | None = None) -> None:
    """Write point/value rows as CSV with 17 significant digits.

    Points are (n, 1) or (n, 2); rows preserve the input ordering, so a
    row-major grid exports deterministically.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(values, dtype=float).ravel()
    if pts.shape[0] != vals.shape[0]:
        raise ValueError(f"{pts.shape[0]} points but {vals.shape[0]} values")
    lines = []
    if provenance:
        lines.append(f"# {provenance}")
    if pts.shape[1] == 1:
        lines.append("x,value")
        lines.extend(f"{p[0]:.17g},{v:.17g}" for p, v in zip(pts, vals))
    else:
        lines.append("x,y,value")
        lines.extend(f"{p[0]:.17g},{p[1]:.17g},{v:.17g}" for p, v in zip(pts, vals))
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w") as fh:
            fh.write(text)
