"""Residual-driven fit/mark/enrich loop on a single subdomain.

Each round fits the log-data by Elastic Net on Shepard-normalized features,
scores every cell with a quadrature residual indicator, marks the worst
cells, and inserts narrower bases near their centroids.  The loop stops on a
residual tolerance, a budget of added bases, an empty mark or enrichment
step, or a round cap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .elastic_net import ElasticNetConfig, fit_log_field
from .fields import SubdomainField, l2_misfit_parts
from .geometry import QuadratureRule
from .rbf import LocalSurrogate, RbfDictionary, shepard_features

# new-center offsets per marked cell, in units of the cell size
DEFAULT_OFFSETS_1D = ((-0.25,), (0.25,), (0.0,))
DEFAULT_OFFSETS_2D = ((-0.5, 0.0), (0.5, 0.0), (0.0, 0.5))

# two entries are duplicates when centers and widths agree to this tolerance
DUPLICATE_TOL = 1e-12


@dataclass(frozen=True)
class AdaptiveConfig:
    """Controls for the enrichment loop.

    ``m_max`` bounds the number of *added* bases; 0 gives a plain one-shot
    fit.  ``eps_tol`` is an absolute bound on the worst cell residual
    (field-units^2 times area) and defaults to 0, i.e. disabled, so runs
    stop on the basis budget or on empty marks.  ``offsets`` overrides the
    per-dimension default new-center pattern; entries are in units of the
    cell size and the tuple length must equal ``m_q``.
    """

    k_top: int = 1
    m_max: int = 0
    eps_tol: float = 0.0
    eta: float = 0.5
    m_q: int = 3
    max_rounds: int = 50
    elastic: ElasticNetConfig = field(default_factory=ElasticNetConfig)
    offsets: tuple[tuple[float, ...], ...] | None = None
    quad_order: int = 1

    def __post_init__(self):
        if self.k_top < 1:
            raise ValueError(f"k_top must be >= 1, got {self.k_top}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.m_q < 1:
            raise ValueError(f"m_q must be >= 1, got {self.m_q}")
        if self.m_max < 0:
            raise ValueError(f"m_max must be >= 0, got {self.m_max}")
        if self.eps_tol < 0:
            raise ValueError(f"eps_tol must be >= 0, got {self.eps_tol}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.offsets is not None and len(self.offsets) != self.m_q:
            raise ValueError(
                f"offsets has {len(self.offsets)} entries but m_q={self.m_q}"
            )

    def offsets_for_dim(self, dim: int) -> tuple[tuple[float, ...], ...]:
        if self.offsets is not None:
            return self.offsets
        if self.m_q != 3:
            raise ValueError("default offsets exist only for m_q=3; pass offsets explicitly")
        return DEFAULT_OFFSETS_1D if dim == 1 else DEFAULT_OFFSETS_2D


@dataclass(frozen=True)
class RoundReport:
    """Per-round fitting record.

    ``centers`` is the dictionary size used by this round's fit and
    ``added`` the number of bases appended before it, so both the
    total-count and added-count readings of a refinement history are
    available.  ``rel_l2``/``abs_l2`` are the quadrature misfits against the
    cell data.  ``seconds`` is wall time and is the only
    non-reproducible field.
    """

    round: int
    centers: int
    added: int
    max_residual: float
    rel_l2: float
    abs_l2: float
    objective: float
    seconds: float


REPORT_CSV_COLUMNS = ("round", "centers", "max_RT", "rel_L2", "objective", "seconds")


def reports_to_csv(reports, sink, provenance: str | None = None) -> None:
    """Write round reports as CSV; timing stays isolated in its own column."""
    lines = []
    if provenance:
        lines.append(f"# {provenance}")
    lines.append(",".join(REPORT_CSV_COLUMNS))
    for r in reports:
        lines.append(
            f"{r.round},{r.centers},{r.max_residual:.17g},{r.rel_l2:.17g},"
            f"{r.objective:.17g},{r.seconds:.6f}"
        )
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w") as fh:
            fh.write(text)


def residual_indicator(surrogate, cell_value: float, quad: QuadratureRule) -> float:
    """Quadrature residual sum_l w_l (K*(x_l) - K_T)^2 on one cell.

    The surrogate is compared after any log-transform is undone, i.e. in
    field units, so the indicator vanishes exactly when the reconstruction
    matches the data at every quadrature point.
    """
    vals = np.asarray(surrogate.evaluate(quad.points), dtype=float)
    return float(np.sum(quad.weights * (vals - cell_value) ** 2))


def residual_indicators(surrogate, sub: SubdomainField, order: int = 1) -> np.ndarray:
    """Vectorized residual indicator for every cell of a subdomain."""
    pts, wts = sub.quadrature(order)
    n, n_q, dim = pts.shape
    vals = np.asarray(surrogate.evaluate(pts.reshape(-1, dim)), dtype=float).reshape(n, n_q)
    return ((vals - sub.values[:, None]) ** 2) @ wts


def mark(indicators, k_top: int) -> np.ndarray:
    """Indices of the k_top worst cells, by residual then by cell index.

    Cells with zero residual are never marked, so the result may be shorter
    than ``k_top``; an empty result signals the caller to stop refining.
    """
    r = np.asarray(indicators, dtype=float)
    if k_top > r.shape[0]:
        raise ValueError(f"k_top={k_top} exceeds cell count {r.shape[0]}")
    order = np.lexsort((np.arange(r.shape[0]), -r))
    order = order[r[order] > 0.0]
    return order[:k_top]


def _nearest_entry(dictionary: RbfDictionary, point: np.ndarray) -> int:
    """Nearest dictionary entry; ties resolve to the narrowest, then oldest.

    Preferring the narrowest width among equidistant entries lets a cell that
    is marked repeatedly keep spawning strictly finer bases instead of
    regenerating duplicates of the previous round.
    """
    d2 = np.sum((dictionary.centers - point[None, :]) ** 2, axis=1)
    idx = np.lexsort((np.arange(len(dictionary)), dictionary.widths, d2))
    return int(idx[0])


def enrich(
    dictionary: RbfDictionary,
    marked,
    sub: SubdomainField,
    eta: float,
    m_q: int,
    offsets=None,
):
    """New (center, width) entries for the marked cells.

    Each marked cell contributes up to ``m_q`` centers at fixed offsets from
    its centroid (clamped into the subdomain box) with width eta times the
    width of the nearest existing entry.  Candidates that duplicate an
    existing dictionary entry are dropped; an empty result signals the
    caller to stop refining.
    """
    marked = np.asarray(marked, dtype=int)
    if marked.size == 0:
        raise ValueError("marked cell set must not be empty")
    dim = sub.centroids.shape[1]
    if offsets is None:
        offsets = DEFAULT_OFFSETS_1D if dim == 1 else DEFAULT_OFFSETS_2D
    offsets = np.asarray(offsets, dtype=float)[:m_q]
    scale = np.asarray(sub.cell_size, dtype=float)

    new_centers: list[np.ndarray] = []
    new_widths: list[float] = []
    for cell in marked:
        x_t = sub.centroids[cell]
        parent = _nearest_entry(dictionary, x_t)
        width = eta * float(dictionary.widths[parent])
        for off in offsets:
            cand = sub.box.clamp(x_t + off * scale)
            same_center = np.all(
                np.abs(dictionary.centers - cand[None, :]) <= DUPLICATE_TOL, axis=1
            )
            same_width = np.abs(dictionary.widths - width) <= DUPLICATE_TOL
            if np.any(same_center & same_width):
                continue
            new_centers.append(cand)
            new_widths.append(width)
    if not new_centers:
        return np.empty((0, dim)), np.empty(0)
    return np.asarray(new_centers), np.asarray(new_widths)


def fit_adaptive(
    sub: SubdomainField,
    initial: RbfDictionary,
    config: AdaptiveConfig,
) -> tuple[LocalSurrogate, list[RoundReport]]:
    """Run the enrichment loop and return the fitted surrogate plus history.

    Every report corresponds to a completed fit; the dictionary is only ever
    extended after a fit, so the returned surrogate always carries fitted
    coefficients for all of its entries.
    """
    dictionary = initial
    beta = np.zeros(len(dictionary))
    added_total = 0
    reports: list[RoundReport] = []
    surrogate = None

    for rnd in range(config.max_rounds):
        t0 = time.perf_counter()
        W = shepard_features(sub.centroids, dictionary)
        result, log_flag = fit_log_field(sub.values, W, config.elastic, beta0=beta)
        beta = result.beta
        surrogate = LocalSurrogate(dictionary=dictionary, beta=beta, log_transform=log_flag)

        residuals = residual_indicators(surrogate, sub, config.quad_order)
        num, den = l2_misfit_parts(sub, surrogate.evaluate, config.quad_order)
        reports.append(
            RoundReport(
                round=rnd,
                centers=len(dictionary),
                added=added_total,
                max_residual=float(residuals.max()),
                rel_l2=float(np.sqrt(num / den)),
                abs_l2=float(np.sqrt(num)),
                objective=result.objective,
                seconds=time.perf_counter() - t0,
            )
        )

        if float(residuals.max()) < config.eps_tol:
            break
        if added_total >= config.m_max:
            break
        if rnd == config.max_rounds - 1:
            break
        marked = mark(residuals, min(config.k_top, sub.n_cells))
        if marked.size == 0:
            break
        centers, widths = enrich(
            dictionary, marked, sub, config.eta, config.m_q,
            offsets=config.offsets_for_dim(sub.centroids.shape[1]),
        )
        if centers.shape[0] == 0:
            break
        dictionary = dictionary.extended(centers, widths, generation=rnd + 1)
        beta = np.concatenate([beta, np.zeros(centers.shape[0])])
        added_total += centers.shape[0]

    return surrogate, reports
