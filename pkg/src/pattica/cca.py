"""Joint correspondence analysis and k-means clustering.

The embedding and the partition are optimized together: starting from a
random partition, a correspondence analysis of the cluster-by-category
contingency table quantifies the categories, the quantifications place
observations in a low-dimensional space, k-means reclusters them there,
and the loop repeats until the partition stabilizes. Restarts guard
against local optima; the best restart minimizes wcss/tss, which makes
objectives comparable across embeddings of different dimension.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import CategoricalDataset, ContingencyMatrix, IndicatorMatrix, contingency
from .errors import DataError, NumericalError
from .seeding import substream


@dataclass(frozen=True)
class CaResult:
    """Category quantifications from one correspondence analysis."""

    B: np.ndarray  # (J, d) category quantification matrix
    singular_values: np.ndarray  # (d,) non-increasing
    row_masses: np.ndarray
    col_masses: np.ndarray
    zero_mass_columns: tuple[int, ...] = ()

    @property
    def d(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class CcaSolution:
    K: int
    assign: np.ndarray  # (n,) int32 labels
    Y: np.ndarray  # (n, d) object coordinates
    G: np.ndarray  # (K, d) centroids, means of assigned rows
    B: np.ndarray  # (J, d) category quantifications
    gamma: float
    wcss: float
    tss: float
    sizes: np.ndarray  # (K,) int64
    iterations: int
    restarts_used: int
    seed: int

    @property
    def normalized_wcss(self) -> float:
        # a zero-scatter embedding carries no structure to explain
        return 1.0 if self.tss == 0.0 else self.wcss / self.tss

    @property
    def B_star(self) -> np.ndarray:
        return self.B / self.gamma

    @property
    def G_star(self) -> np.ndarray:
        return self.G * self.gamma


@dataclass(frozen=True)
class ElbowCurve:
    points: tuple[tuple[int, float], ...]  # (K, wcss/tss)
    knee: int
    solutions: dict[int, CcaSolution] = field(default_factory=dict, compare=False)


def correspondence_analysis(F: ContingencyMatrix | np.ndarray, d: int) -> CaResult:
    """Category quantifications B from the SVD of the standardized residuals.

    With P = F/total and masses r, c, the residual matrix is
    S = D_r^{-1/2} (P - r c^T) D_c^{-1/2}; B holds the d leading standard
    column coordinates D_c^{-1/2} V. Columns whose singular value is
    numerically zero are zeroed rather than filled with arbitrary
    null-space vectors.
    """
    F_arr = np.asarray(getattr(F, "F", F), dtype=np.float64)
    if F_arr.ndim != 2:
        raise DataError("contingency input must be a 2-D table")
    if d < 1:
        raise DataError(f"embedding dimension must be >= 1, got {d}")
    total = F_arr.sum()
    if total <= 0:
        raise DataError("contingency table has no counts")
    P = F_arr / total
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    if np.any(r <= 0):
        rows = np.nonzero(r <= 0)[0]
        raise DataError(f"contingency rows {rows.tolist()} are empty; repair clusters first")
    zero_cols = np.nonzero(c <= 0)[0]
    if zero_cols.size:
        warnings.warn(
            f"categories at columns {zero_cols.tolist()} never occur; "
            "their quantifications are set to zero",
            stacklevel=2,
        )
    c_safe = np.where(c > 0, c, 1.0)
    S = (P - np.outer(r, c)) / np.sqrt(r)[:, None] / np.sqrt(c_safe)[None, :]
    S[:, zero_cols] = 0.0

    U, sigma, Vt = np.linalg.svd(S, full_matrices=False)
    tol = max(S.shape) * np.finfo(np.float64).eps * (sigma[0] if sigma.size else 0.0)
    rank = int(np.sum(sigma > tol))
    avail = max(rank, 1)
    if d > avail:
        warnings.warn(
            f"requested {d} dimensions but the residual matrix supports {avail}; truncating",
            stacklevel=2,
        )
        d = avail
    V = Vt[:d].T.copy()
    sigma = sigma[:d].copy()
    # deterministic orientation: the largest-magnitude loading points up
    for i in range(d):
        anchor = np.argmax(np.abs(V[:, i]))
        if V[anchor, i] < 0:
            V[:, i] = -V[:, i]
    V[:, sigma <= tol] = 0.0
    sigma[sigma <= tol] = 0.0
    B = V / np.sqrt(c_safe)[:, None]
    B[zero_cols, :] = 0.0
    return CaResult(
        B=B,
        singular_values=sigma,
        row_masses=r,
        col_masses=c,
        zero_mass_columns=tuple(int(j) for j in zero_cols),
    )


def object_coordinates(Z: IndicatorMatrix | np.ndarray, B: np.ndarray, q: int | None = None) -> np.ndarray:
    """Observation coordinates: column-centered Z @ B scaled by 1/q."""
    if isinstance(Z, IndicatorMatrix):
        q = Z.q
        Z_arr = Z.Z
    else:
        Z_arr = np.asarray(Z)
        if q is None:
            raise DataError("q (number of variables) is required for a raw indicator array")
    if Z_arr.shape[1] != B.shape[0]:
        raise DataError(
            f"indicator width {Z_arr.shape[1]} does not match quantification rows {B.shape[0]}"
        )
    ZB = Z_arr.astype(np.float64) @ B
    return (ZB - ZB.mean(axis=0)) / q


def _centroids(Y: np.ndarray, labels: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(labels, minlength=K)
    G = np.zeros((K, Y.shape[1]), dtype=np.float64)
    np.add.at(G, labels, Y)
    nonzero = counts > 0
    G[nonzero] /= counts[nonzero, None]
    return G, counts

def _point_d2(Y: np.ndarray, G: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # same per-dimension accumulation order as the assignment kernel
    d2 = np.zeros(Y.shape[0], dtype=np.float64)
    for j in range(Y.shape[1]):
        diff = Y[:, j] - G[labels, j]
        d2 += diff * diff
    return d2


def _repair_empties(Y: np.ndarray, G: np.ndarray, counts: np.ndarray, labels: np.ndarray) -> None:
    """Hand every empty cluster the point farthest from its own centroid, in place."""
    for k in np.nonzero(counts == 0)[0]:
        d2 = _point_d2(Y, G, labels)
        # only donors that keep their own cluster populated
        d2[counts[labels] <= 1] = -1.0
        victim = int(np.argmax(d2))
        old = labels[victim]
        labels[victim] = k
        counts[old] -= 1
        counts[k] += 1
        G[k] = Y[victim]
        G[old] = Y[labels == old].mean(axis=0)


def kmeans(
    Y: np.ndarray,
    K: int,
    init: np.ndarray | int,
    max_iter: int = 100,
    history: list[float] | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd iterations from an initial labeling (or a seed that draws one).

    Ties in the assignment step go to the lowest centroid index. A cluster
    left empty by an update seizes the point currently farthest from its own
    centroid, so every cluster stays populated. `history`, when given,
    collects the per-iteration wcss values.
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    n = Y.shape[0]
    if not 1 <= K <= n:
        raise DataError(f"K={K} outside [1, {n}]")
    if isinstance(init, (int, np.integer)):
        labels = np.random.default_rng(int(init)).integers(0, K, n).astype(np.int32)
    else:
        labels = np.asarray(init, dtype=np.int32).copy()
        if labels.shape != (n,):
            raise DataError("initial assignment length does not match data")
        if labels.min() < 0 or labels.max() >= K:
            raise DataError(f"initial label out of range [0, {K})")

    for _ in range(max_iter):
        G, counts = _centroids(Y, labels, K)
        _repair_empties(Y, G, counts, labels)
        new_labels, d2 = _kernels.kmeans_assign(Y, G)
        if history is not None:
            history.append(float(d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    G, counts = _centroids(Y, labels, K)
    _repair_empties(Y, G, counts, labels)
    wcss = float(_point_d2(Y, G, labels).sum())
    return labels, G, wcss


def _initial_labels(rng: np.random.Generator, n: int, K: int) -> np.ndarray:
    labels = rng.integers(0, K, n).astype(np.int32)
    anchors = rng.permutation(n)[:K]
    labels[anchors] = np.arange(K, dtype=np.int32)
    return labels


def _run_restart(
    Z: IndicatorMatrix,
    K: int,
    d: int,
    labels: np.ndarray,
    tol: float,
    max_iter: int,
) -> dict:
    """One alternation run from a given initial partition."""
    labels = labels.astype(np.int32).copy()
    prev_ratio = np.inf
    best = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        F = contingency(Z, labels, K)
        ca = correspondence_analysis(F, d)
        Y = object_coordinates(Z, ca.B)
        new_labels, G, wcss = kmeans(Y, K, labels)
        tss = float((Y * Y).sum())
        ratio = 1.0 if tss == 0.0 else wcss / tss
        if best is None or ratio < best["ratio"]:
            best = {
                "ratio": ratio,
                "labels": new_labels,
                "Y": Y,
                "G": G,
                "B": ca.B,
                "wcss": wcss,
                "tss": tss,
            }
        stable = np.array_equal(new_labels, labels)
        labels = new_labels
        if stable or abs(prev_ratio - ratio) < tol:
            break
        prev_ratio = ratio
    best["iterations"] = iterations
    return best


def cluster_ca(
    Z: IndicatorMatrix,
    K: int,
    restarts: int = 20,
    tol: float = 1e-10,
    max_iter: int = 100,
    seed: int = 0,
    d: int | None = None,
    threads: int = 1,
    extra_inits: list[np.ndarray] | None = None,
) -> CcaSolution:
    """Best-of-restarts joint embedding and partition for a fixed K.

    `extra_inits` appends deterministic warm starts (used by `elbow` to seed
    K from the best K-1 solution) after the random restarts.
    """
    n = Z.n
    if not 1 <= K <= n:
        raise DataError(f"K={K} outside [1, {n}]")
    if restarts < 1:
        raise DataError("restarts must be >= 1")
    if d is None:
        d = max(K - 1, 1)

    if K == 1:
        d_eff = min(d, 1)
        Y = np.zeros((n, d_eff))
        return CcaSolution(
            K=1,
            assign=np.zeros(n, dtype=np.int32),
            Y=Y,
            G=np.zeros((1, d_eff)),
            B=np.zeros((Z.J, d_eff)),
            gamma=1.0,
            wcss=0.0,
            tss=0.0,
            sizes=np.array([n], dtype=np.int64),
            iterations=1,
            restarts_used=1,
            seed=seed,
        )

    inits = [_initial_labels(substream(seed, "cca", K, r), n, K) for r in range(restarts)]
    for extra in extra_inits or []:
        extra = np.asarray(extra, dtype=np.int32)
        if extra.shape != (n,) or extra.min() < 0 or extra.max() >= K:
            raise DataError("extra initial assignment malformed")
        inits.append(extra)

    def run(labels: np.ndarray) -> dict:
        return _run_restart(Z, K, d, labels, tol, max_iter)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, inits))
    else:
        results = [run(labels) for labels in inits]

    best = min(enumerate(results), key=lambda item: (item[1]["ratio"], item[0]))[1]
    sizes = np.bincount(best["labels"], minlength=K).astype(np.int64)
    if np.any(sizes == 0):
        raise DataError(
            f"K={K} leaves an empty cluster even after repair; use a smaller K"
        )
    gamma, _, _ = rescale(best["B"], best["G"], K, Z.q)
    return CcaSolution(
        K=K,
        assign=best["labels"],
        Y=best["Y"],
        G=best["G"],
        B=best["B"],
        gamma=gamma,
        wcss=best["wcss"],
        tss=best["tss"],
        sizes=sizes,
        iterations=best["iterations"],
        restarts_used=len(inits),
        seed=seed,
    )


def rescale(B: np.ndarray, G: np.ndarray, K: int, Q: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Equalize category and centroid spreads for a joint biplot.

    gamma = ((K/Q) * Tr(B'B) / Tr(G'G))^{1/4}; B shrinks by gamma, G grows
    by gamma, after which Tr(B*'B*)/Q = Tr(G*'G*)/K.
    """
    tr_b = float((B * B).sum())
    tr_g = float((G * G).sum())
    if tr_g <= 0.0:
        raise NumericalError(
            "all centroids sit at the origin; the biplot rescaling is undefined"
        )
    gamma = ((K / Q) * tr_b / tr_g) ** 0.25
    return gamma, B / gamma, G * gamma


def project_supplementary(
    var: str,
    ds: CategoricalDataset,
    Z: IndicatorMatrix,
    solution: CcaSolution,
) -> dict[str, np.ndarray]:
    """Overlay a passive variable's categories on the solution space.

    Each category maps to the mean coordinate of the observations holding
    it, scaled by gamma so the points share the centroid scale G*.
    """
    if var in Z.var_names:
        raise DataError(f"variable {var!r} is active in the clustering; supplementary only")
    names = [v.name for v in ds.schema.variables]
    if var not in names:
        raise DataError(f"variable {var!r} not in the dataset")
    col = names.index(var)
    codes = ds.codes[:, col]
    cats = ds.schema.variables[col].categories
    points: dict[str, np.ndarray] = {}
    for ci, cat in enumerate(cats):
        mask = codes == ci
        if not mask.any():
            warnings.warn(f"category {var}={cat} has no observations; omitted", stacklevel=2)
            continue
        points[cat] = solution.gamma * solution.Y[mask].mean(axis=0)
    return points


def _wcss_of(Y: np.ndarray, labels: np.ndarray, K: int) -> float:
    G, _ = _centroids(Y, labels, K)
    return float(_point_d2(Y, G, labels).sum())


def _solution_for_labels(
    Z: IndicatorMatrix, labels: np.ndarray, K: int, seed: int, restarts_used: int
) -> CcaSolution:
    """Full solution snapshot for a fixed partition: one CA half-step."""
    F = contingency(Z, labels, K)
    ca = correspondence_analysis(F, max(K - 1, 1))
    Y = object_coordinates(Z, ca.B)
    G, counts = _centroids(Y, labels, K)
    wcss = float(_point_d2(Y, G, labels).sum())
    tss = float((Y * Y).sum())
    gamma, _, _ = rescale(ca.B, G, K, Z.q)
    return CcaSolution(
        K=K,
        assign=labels.astype(np.int32),
        Y=Y,
        G=G,
        B=ca.B,
        gamma=gamma,
        wcss=wcss,
        tss=tss,
        sizes=counts.astype(np.int64),
        iterations=1,
        restarts_used=restarts_used,
        seed=seed,
    )


def _split_largest(labels: np.ndarray, Y: np.ndarray, K_target: int) -> np.ndarray:
    """Grow a labeling to K_target clusters by halving the largest cluster.

    The far half (by distance to the cluster centroid, strictly above the
    median) becomes the new cluster; degenerate ties move the single
    farthest point.
    """
    labels = labels.astype(np.int32).copy()
    K_cur = int(labels.max()) + 1
    while K_cur < K_target:
        sizes = np.bincount(labels, minlength=K_cur)
        k = int(np.argmax(sizes))
        members = np.nonzero(labels == k)[0]
        center = Y[members].mean(axis=0)
        dist = ((Y[members] - center) ** 2).sum(axis=1)
        far = dist > np.median(dist)
        if not far.any() or far.all():
            far = np.zeros(len(members), dtype=bool)
            far[int(np.argmax(dist))] = True
        labels[members[far]] = K_cur
        K_cur += 1
    return labels


def elbow(
    Z: IndicatorMatrix,
    K_range: tuple[int, ...] = tuple(range(1, 11)),
    restarts: int = 20,
    tol: float = 1e-10,
    max_iter: int = 100,
    seed: int = 0,
    threads: int = 1,
) -> ElbowCurve:
    """Normalized wcss across K plus the knee of the curve.

    Partitions for different K live in embeddings of different dimension,
    so their raw objectives are incomparable. The curve therefore scores
    every partition in one common reference embedding: the full-rank
    quantification of the indicator matrix itself. In that fixed space a
    warm start that splits the largest cluster of the previous best
    partition can only lower wcss, so the curve is non-increasing by
    construction. The knee maximizes perpendicular distance to the chord
    joining the curve's endpoints.
    """
    Ks = tuple(int(k) for k in K_range)
    if not Ks or any(b <= a for a, b in zip(Ks, Ks[1:])):
        raise DataError("K range must be non-empty and strictly increasing")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # rank truncation on degenerate data is fine here
        ref = correspondence_analysis(Z.Z, min(Z.J - Z.q, Z.n - 1))
    Y_ref = object_coordinates(Z, ref.B)
    tss_ref = float((Y_ref * Y_ref).sum())
    if tss_ref <= 0.0:
        raise NumericalError("indicator matrix carries no variation; elbow is undefined")

    solutions: dict[int, CcaSolution] = {}
    prev_labels: np.ndarray | None = None
    points = []
    for K in Ks:
        extra = None
        if prev_labels is not None:
            extra = [_split_largest(prev_labels, Y_ref, K)]
        sol = cluster_ca(
            Z, K, restarts=restarts, tol=tol, max_iter=max_iter,
            seed=seed, threads=threads, extra_inits=extra,
        )
        labels = sol.assign
        wcss_ref = _wcss_of(Y_ref, labels, K)
        if extra is not None:
            # refine the warm start in the reference space; this candidate
            # is what guarantees monotonicity
            lab_b, _, w_b = kmeans(Y_ref, K, extra[0], max_iter=max_iter)
            if w_b < wcss_ref:
                labels, wcss_ref = lab_b, w_b
                sol = _solution_for_labels(Z, labels, K, seed, sol.restarts_used + 1)
        solutions[K] = sol
        points.append((K, wcss_ref / tss_ref))
        prev_labels = labels
    return ElbowCurve(points=tuple(points), knee=_knee(points), solutions=solutions)


def _knee(points: list[tuple[int, float]]) -> int:
    if len(points) < 3:
        return points[0][0]
    x0, y0 = points[0]
    x1, y1 = points[-1]
    chord = np.hypot(x1 - x0, y1 - y0)
    best_k, best_d = points[0][0], -1.0
    for x, y in points:
        dist = abs((x1 - x0) * (y0 - y) - (x0 - x) * (y1 - y0)) / chord
        if dist > best_d + 1e-15:
            best_k, best_d = x, dist
    return best_k
