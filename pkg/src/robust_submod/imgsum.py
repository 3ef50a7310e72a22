"""Image summarization as multi-task facility location.

Every image is simultaneously a candidate summary element and its own
task: task i scores a summary S by how close its nearest element is to
image i in a min-max normalized cosine distance. Selecting K images that
are robust across all tasks summarizes the collection.
"""

import math

import numpy as np

from .bitset import iter_bits
from .errors import DomainError, FormatError, IoError
from .objective import TaskFamily


def load_embeddings(path) -> np.ndarray:
    """Read a CSV of row-vector embeddings.

    Malformed input raises FormatError naming the offending row and
    column (1-based). Rows must be equally long, numeric, finite, and
    nonzero (cosine similarity needs a direction).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise IoError(f"cannot read embeddings file {path}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: no data rows")
    rows = []
    width = None
    for i, ln in enumerate(lines, start=1):
        fields = ln.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise FormatError(f"{path}: row {i} has {len(fields)} fields, expected {width}")
        row = []
        for j, tok in enumerate(fields, start=1):
            try:
                val = float(tok)
            except ValueError:
                raise FormatError(f"{path}: row {i}, column {j}: not a number: {tok!r}") from None
            if not math.isfinite(val):
                raise FormatError(f"{path}: row {i}, column {j}: non-finite value")
            row.append(val)
        rows.append(row)
    emb = np.array(rows, dtype=float)
    norms = np.linalg.norm(emb, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise FormatError(f"{path}: row {int(zero[0]) + 1}: zero-norm embedding")
    return emb


def save_embeddings(path, embeddings: np.ndarray) -> None:
    """Write embeddings as CSV with 17 significant digits (round-trip exact)."""
    emb = np.asarray(embeddings, dtype=float)
    if emb.ndim != 2:
        raise DomainError("embeddings must be a 2-d array")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for row in emb:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write embeddings file {path}: {exc}") from exc


def cosine_similarities(embeddings: np.ndarray) -> np.ndarray:
    emb = np.asarray(embeddings, dtype=float)
    if emb.ndim != 2 or emb.shape[0] < 2:
        raise DomainError("need at least two embedding rows")
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms == 0.0):
        raise DomainError("zero-norm embedding row")
    unit = emb / norms[:, None]
    return unit @ unit.T


def distance_matrix(embeddings: np.ndarray) -> np.ndarray:
    """Min-max normalized cosine distance with a zero diagonal.

    Similarities are rescaled over the off-diagonal extremes so the most
    similar pair is at distance 0 and the least similar at 1; each image
    is at distance 0 from itself.
    """
    sims = cosine_similarities(embeddings)
    n = sims.shape[0]
    off = ~np.eye(n, dtype=bool)
    s_min, s_max = sims[off].min(), sims[off].max()
    if s_max <= s_min:
        raise DomainError("degenerate embeddings: all pairwise similarities equal")
    dist = (s_max - sims) / (s_max - s_min)
    np.fill_diagonal(dist, 0.0)
    return dist


def facility_tasks(dist: np.ndarray) -> TaskFamily:
    """One facility-location task per image over the image ground set.

    f_i(S) = 1 - min_{e in S} d(i, e), and f_i(empty) = 0. Each task is
    normalized (f_i maxes out at 1 because d(i, i) = 0), monotone, and
    submodular.
    """
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DomainError("distance matrix must be square")
    if np.any(d < 0.0) or np.any(d > 1.0 + 1e-12):
        raise DomainError("distances must lie in [0, 1]")
    n = d.shape[0]

    def values_fn(mask: int) -> np.ndarray:
        idx = list(iter_bits(mask))
        if not idx:
            return np.zeros(n)
        return 1.0 - d[:, idx].min(axis=1)

    return TaskFamily(n, n, values_fn)


def synthetic_embeddings(count: int = 819, dim: int = 64, n_clusters: int = 8,
                         seed: int = 0) -> np.ndarray:
    """Clustered Gaussian stand-in for real image embeddings."""
    if count < 2 or dim < 1 or n_clusters < 1:
        raise DomainError("need count >= 2, dim >= 1, n_clusters >= 1")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 3.0, (n_clusters, dim))
    labels = rng.integers(0, n_clusters, count)
    emb = centers[labels] + rng.normal(0.0, 1.0, (count, dim))
    norms = np.linalg.norm(emb, axis=1)
    emb[norms == 0.0] += 1e-9
    return emb
