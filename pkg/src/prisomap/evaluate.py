"""Embedding quality metrics and the cross-validated downstream classifier.

Distance preservation (normalized stress, residual variance), rank-based
neighborhood preservation (trustworthiness/continuity), a coefficient of
variation over the window density, and stratified k-NN classification. All
metrics are pure; fold assignment is deterministic per seed so paired
comparisons can share folds.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ClassTooSmall, NoFinitePairs, ZeroMeanDensity
from .graph import DensityEstimate
from .linalg import as_matrix, pairwise_dists

EVAL_SCHEMA = "evalreport/1"


def _upper_pairs(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    iu = np.triu_indices(n, k=1)
    return values[iu]


def stress(d_hd, d_ld) -> float:
    """Normalized Kruskal stress-1 over finite pairs i<j.

    sqrt(sum((d_hd - d_ld)^2) / sum(d_hd^2)); unreachable pairs in d_hd are
    excluded. Raises NoFinitePairs if no finite pair remains.
    """
    a = _upper_pairs(as_matrix(d_hd, "d_hd"))
    b = _upper_pairs(as_matrix(d_ld, "d_ld"))
    if a.shape != b.shape:
        raise ValueError("distance matrices must have matching shapes")
    mask = np.isfinite(a)
    if not mask.any():
        raise NoFinitePairs("no finite high-dimensional pairs to score")
    diff = a[mask] - b[mask]
    denom = float(np.sum(a[mask] ** 2))
    num = float(np.sum(diff**2))
    if denom == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(np.sqrt(num / denom))


def sentinel_excluded_pairs(d_hd) -> int:
    """Count of i<j pairs carrying the unreachable sentinel."""
    a = _upper_pairs(as_matrix(d_hd, "d_hd"))
    return int(np.sum(~np.isfinite(a)))


def residual_variance(d_hd, d_ld) -> float:
    """1 - r^2 between high- and low-dimensional distances over finite pairs."""
    a = _upper_pairs(as_matrix(d_hd, "d_hd"))
    b = _upper_pairs(as_matrix(d_ld, "d_ld"))
    mask = np.isfinite(a)
    if not mask.any():
        raise NoFinitePairs("no finite high-dimensional pairs to score")
    a, b = a[mask], b[mask]
    sa, sb = float(np.std(a)), float(np.std(b))
    if sa == 0.0 or sb == 0.0:
        return 0.0 if sa == sb else 1.0
    r = float(np.corrcoef(a, b)[0, 1])
    return 1.0 - r * r


def _neighbor_order(dists: np.ndarray) -> np.ndarray:
    """Per-row neighbor orderings by (distance, index), self excluded."""
    n = dists.shape[0]
    order = np.empty((n, n - 1), dtype=np.int64)
    idx = np.arange(n)
    for i in range(n):
        row = dists[i].copy()
        row[i] = np.inf
        full = np.lexsort((idx, row))
        order[i] = full[full != i][: n - 1]
    return order


def _ranks_from_order(order: np.ndarray) -> np.ndarray:
    """rank[i, j] = 1-based position of j in i's neighbor ordering."""
    n = order.shape[0]
    ranks = np.zeros((n, n), dtype=np.int64)
    pos = np.arange(1, n, dtype=np.int64)
    for i in range(n):
        ranks[i, order[i]] = pos
    return ranks


def trustworthiness_continuity(d_hd, d_ld, m: int) -> tuple[float, float]:
    """Rank-based neighborhood preservation scores at neighborhood size m.

    Trustworthiness penalizes embedded neighbors that are not true
    neighbors; continuity penalizes true neighbors lost by the embedding.
    Exact O(n^2) ranks; ties break by point index. Requires 1 <= m < n/2 and
    finite distance matrices.
    """
    a = as_matrix(d_hd, "d_hd")
    b = as_matrix(d_ld, "d_ld")
    n = a.shape[0]
    if a.shape != b.shape:
        raise ValueError("distance matrices must have matching shapes")
    if not 1 <= m < n / 2:
        raise ValueError(f"neighborhood size must satisfy 1 <= m < n/2 = {n / 2}, got {m}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("trustworthiness/continuity require finite distances; "
                         "resolve sentinels first")

    order_hd = _neighbor_order(a)
    order_ld = _neighbor_order(b)
    ranks_hd = _ranks_from_order(order_hd)
    ranks_ld = _ranks_from_order(order_ld)

    scale = 2.0 / (n * m * (2.0 * n - 3.0 * m - 1.0))
    t_penalty = 0.0
    c_penalty = 0.0
    for i in range(n):
        hd_set = set(order_hd[i, :m].tolist())
        for j in order_ld[i, :m]:
            if int(j) not in hd_set:
                t_penalty += ranks_hd[i, j] - m
        ld_set = set(order_ld[i, :m].tolist())
        for j in order_hd[i, :m]:
            if int(j) not in ld_set:
                c_penalty += ranks_ld[i, j] - m
    return 1.0 - scale * t_penalty, 1.0 - scale * c_penalty


# -- downstream classification ---------------------------------------------------


def make_stratified_folds(labels, folds: int, seed: int) -> np.ndarray:
    """Deterministic stratified fold assignment (round-robin within class)."""
    y = np.asarray(labels, dtype=np.int64)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise ValueError("need at least 2 classes")
    small = counts < folds
    if small.any():
        bad = {int(c): int(k) for c, k in zip(classes[small], counts[small])}
        raise ClassTooSmall(f"classes with fewer members than folds={folds}: {bad}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.size, dtype=np.int64)
    for c in classes:
        members = np.where(y == c)[0]
        rng.shuffle(members)
        assignment[members] = np.arange(members.size) % folds
    return assignment


def _knn_predict(train_x, train_y, test_x, k_clf: int) -> np.ndarray:
    classes, compact = np.unique(train_y, return_inverse=True)
    d = pairwise_dists(test_x, train_x)
    idx = np.arange(train_x.shape[0])
    preds = np.empty(test_x.shape[0], dtype=np.int64)
    for i in range(test_x.shape[0]):
        order = np.lexsort((idx, d[i]))[:k_clf]
        votes = np.bincount(compact[order], minlength=classes.size)
        preds[i] = classes[int(np.argmax(votes))]  # vote ties: smallest label
    return preds


@dataclass(frozen=True)
class CvResult:
    mean: float
    sd: float
    fold_accuracies: np.ndarray
    fold_assignment: np.ndarray


def knn_classify_cv(coords, labels, k_clf: int = 5, folds: int = 10, seed: int = 0,
                    assignment: np.ndarray | None = None) -> CvResult:
    """Stratified cross-validated majority-vote k-NN accuracy in embedding space.

    Pass a precomputed assignment to reuse one fold split across paired
    method comparisons. sd is the population deviation over fold accuracies.
    """
    x = as_matrix(coords, "coords")
    y = np.asarray(labels, dtype=np.int64)
    if y.size != x.shape[0]:
        raise ValueError(f"{y.size} labels for {x.shape[0]} observations")
    if assignment is None:
        assignment = make_stratified_folds(y, folds, seed)
    else:
        assignment = np.asarray(assignment, dtype=np.int64)
        folds = int(assignment.max()) + 1
    accs = np.empty(folds, dtype=np.float64)
    for f in range(folds):
        test = assignment == f
        train = ~test
        preds = _knn_predict(x[train], y[train], x[test], k_clf)
        accs[f] = float(np.mean(preds == y[test]))
    return CvResult(
        mean=float(np.mean(accs)),
        sd=float(np.std(accs)),
        fold_accuracies=accs,
        fold_assignment=assignment,
    )


def uniformity_cv(density: DensityEstimate) -> float:
    """Coefficient of variation of the window density; lower = more uniform.

    Computed from occupancy counts when available: the constant window
    normalization cancels in sd/mean, and counts stay finite even when the
    density values under- or overflow in high ambient dimension.
    """
    source = density.counts if density.counts is not None else density.values
    values = np.asarray(source, dtype=np.float64)
    mean = float(np.mean(values))
    if mean == 0.0:
        raise ZeroMeanDensity("density is identically zero")
    return float(np.std(values) / mean)


# -- report -----------------------------------------------------------------------


@dataclass
class EvalReport:
    """Scores for one embedding run, JSON/CSV serializable with provenance."""

    stress: float
    residual_variance: float
    trustworthiness: float
    continuity: float
    tc_neighborhood: int
    knn_accuracy_mean: float | None = None
    knn_accuracy_sd: float | None = None
    knn_folds: int | None = None
    density_cv: float | None = None
    sentinel_excluded_pairs: int = 0
    kept_fraction: float = 1.0
    timings: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    CSV_FIELDS = (
        "stress", "residual_variance", "trustworthiness", "continuity",
        "tc_neighborhood", "knn_accuracy_mean", "knn_accuracy_sd", "knn_folds",
        "density_cv", "sentinel_excluded_pairs", "kept_fraction",
    )

    def to_dict(self) -> dict:
        from .embed import json_safe

        out = {"schema": EVAL_SCHEMA}
        for name in self.CSV_FIELDS:
            out[name] = getattr(self, name)
        out["timings"] = self.timings
        out["run"] = self.run
        return json_safe(out)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def csv_header(self) -> str:
        return ",".join(self.CSV_FIELDS)

    def to_csv_line(self) -> str:
        cells = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(format(v, ".17g"))
            else:
                cells.append(str(v))
        return ",".join(cells)


def evaluate_embedding(
    reference_dists,
    coordinates,
    m: int = 10,
    labels=None,
    k_clf: int = 5,
    folds: int = 10,
    seed: int = 0,
    fold_assignment: np.ndarray | None = None,
    density: DensityEstimate | None = None,
    run: dict | None = None,
    timings: dict | None = None,
) -> EvalReport:
    """Score an embedding against reference high-dimensional distances.

    reference_dists and coordinates must cover the same (kept) vertices in
    the same order. Classification runs only when labels are given.
    """
    ref = as_matrix(reference_dists, "reference_dists")
    coords = as_matrix(coordinates, "coordinates")
    if ref.shape[0] != coords.shape[0]:
        raise ValueError("reference and embedding cover different vertex counts")
    emb_d = pairwise_dists(coords)

    if np.isfinite(ref).all():
        t, c = trustworthiness_continuity(ref, emb_d, m)
    else:
        t, c = float("nan"), float("nan")

    report = EvalReport(
        stress=stress(ref, emb_d),
        residual_variance=residual_variance(ref, emb_d),
        trustworthiness=t,
        continuity=c,
        tc_neighborhood=m,
        sentinel_excluded_pairs=sentinel_excluded_pairs(ref),
        timings=dict(timings or {}),
        run=dict(run or {}),
    )
    if labels is not None:
        cv = knn_classify_cv(coords, labels, k_clf=k_clf, folds=folds, seed=seed,
                             assignment=fold_assignment)
        report.knn_accuracy_mean = cv.mean
        report.knn_accuracy_sd = cv.sd
        report.knn_folds = int(cv.fold_accuracies.size)
    if density is not None:
        report.density_cv = uniformity_cv(density)
    return report


def save_eval_csv(report: EvalReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.CSV_FIELDS)
        writer.writerow(report.to_csv_line().split(","))
