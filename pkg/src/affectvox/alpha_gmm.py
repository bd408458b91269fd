"""alpha-integrated Gaussian mixture models with diagonal covariances.

The mixture density is a weighted power mean of the component densities,

    p(x) = C * (sum_i pi_i * b_i(x) ** k) ** (1 / k),   k = (1 - alpha) / 2,

so alpha = -1 (k = 1) is the ordinary GMM. C is taken as 1: every model
compared by ``classify_sequence`` shares M and alpha, so it cancels in the
argmax, but log-likelihoods reported for alpha != -1 are unnormalised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
VAR_FLOOR_REL = 1e-6
# absolute floor in feature units; clamped Hurst slots are otherwise near-constant
VAR_FLOOR_ABS = 1e-4
EMPTY_MASS = 1e-8
LOG_2PI = np.log(2 * np.pi)


@dataclass
class AlphaGmmModel:
    label: str
    alpha: float
    weights: np.ndarray     # (M,)
    means: np.ndarray       # (M, D)
    variances: np.ndarray   # (M, D)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if self.alpha > -1:
            raise ValueError("alpha must be <= -1")
        if self.means.shape != self.variances.shape or self.means.shape[0] != self.weights.size:
            raise ValueError("inconsistent mixture parameter shapes")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to one")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be positive")

    @property
    def k(self) -> float:
        return (1.0 - self.alpha) / 2.0

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def component_log_densities(X: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """log b_i(x_t) for all frames and components, shape (T, M)."""
    X = np.atleast_2d(X)
    prec = 1.0 / variances
    const = -0.5 * (means.shape[1] * LOG_2PI + np.sum(np.log(variances), axis=1))
    # expanded quadratic form keeps memory at O(T*M)
    quad = (X ** 2) @ prec.T - 2 * X @ (means * prec).T + np.sum(means ** 2 * prec, axis=1)
    return const - 0.5 * quad


def _weighted_log_terms(log_b: np.ndarray, weights: np.ndarray, k: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return log_w + k * log_b


def frame_log_likelihoods(X, model: AlphaGmmModel) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.dim:
        raise ValueError(f"feature dimension {X.shape[1]} does not match model dimension {model.dim}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    log_b = component_log_densities(X, model.means, model.variances)
    return logsumexp(_weighted_log_terms(log_b, model.weights, model.k), axis=1) / model.k


def alpha_log_likelihood(x, model: AlphaGmmModel) -> float:
    """log p(x | model) for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a single feature vector")
    return float(frame_log_likelihoods(x[None, :], model)[0])


def responsibilities(X, model: AlphaGmmModel) -> np.ndarray:
    """r_ti proportional to pi_i * b_i(x_t) ** k, normalised per frame."""
    log_b = component_log_densities(np.atleast_2d(X), model.means, model.variances)
    t = _weighted_log_terms(log_b, model.weights, model.k)
    return np.exp(t - logsumexp(t, axis=1, keepdims=True))


# --------------------------------------------------------------------------
# training


def kmeans_init(X: np.ndarray, M: int, rng: np.random.Generator, iters: int = 10) -> np.ndarray:
    """Farthest-point seeding from a random first centre, then Lloyd iterations."""
    centres = [X[rng.integers(X.shape[0])]]
    d2 = np.sum((X - centres[0]) ** 2, axis=1)
    for _ in range(1, M):
        centres.append(X[int(np.argmax(d2))])
        d2 = np.minimum(d2, np.sum((X - centres[-1]) ** 2, axis=1))
    C = np.array(centres)
    for _ in range(iters):
        dist = np.sum(X ** 2, axis=1)[:, None] - 2 * X @ C.T + np.sum(C ** 2, axis=1)[None, :]
        assign = np.argmin(dist, axis=1)
        for i in range(M):
            members = X[assign == i]
            if members.size:
                C[i] = members.mean(axis=0)
    return C


def m_step(X: np.ndarray, resp: np.ndarray, var_floor: np.ndarray):
    """Weighted sample statistics; returns (weights, means, variances, mass)."""
    mass = resp.sum(axis=0)
    safe = np.maximum(mass, 1e-300)
    means = (resp.T @ X) / safe[:, None]
    variances = (resp.T @ X ** 2) / safe[:, None] - means ** 2
    variances = np.maximum(variances, var_floor[None, :])
    weights = mass / mass.sum()
    return weights, means, variances, mass


def train_alpha_gmm(X, M: int = 32, alpha: float = -4.0, max_iters: int = 200, tol: float = 1e-5,
                    seed: int = 0, label: str = "", return_history: bool = False,
                    min_variance: float = VAR_FLOOR_ABS):
    """Fit an alpha-GMM by EM with alpha-weighted responsibilities.

    Convergence is declared when the mean per-frame objective improves by
    less than ``tol``. Only alpha = -1 carries the usual monotonic-ascent
    guarantee.
    """
    X = np.asarray(getattr(X, "rows", X), dtype=float)
    if X.ndim != 2:
        raise ValueError("training data must be a 2-D matrix")
    T, D = X.shape
    if T < 2 * M:
        raise ValueError(f"need at least {2 * M} training vectors for {M} components, got {T}")
    if not np.all(np.isfinite(X)):
        raise ValueError("training data contains non-finite values")
    rng = np.random.default_rng(seed)
    data_var = X.var(axis=0)
    var_floor = np.maximum(VAR_FLOOR_REL * data_var, min_variance)
    if not np.all(var_floor > 0):
        raise ValueError("a feature column is constant; set min_variance > 0")

    C = kmeans_init(X, M, rng)
    assign = np.argmin(np.sum(X ** 2, axis=1)[:, None] - 2 * X @ C.T + np.sum(C ** 2, axis=1), axis=1)
    resp = np.zeros((T, M))
    resp[np.arange(T), assign] = 1.0
    w, mu, var, mass = m_step(X, resp, var_floor)
    # components the k-means left empty start at the global statistics
    empty = mass < EMPTY_MASS
    if empty.any():
        w = np.where(empty, 1.0 / M, w)
        w = w / w.sum()
        mu[empty] = C[empty]
        var[empty] = np.maximum(data_var, var_floor)
    model = AlphaGmmModel(label, alpha, w, mu, var)

    history = [float(frame_log_likelihoods(X, model).mean())]
    for it in range(max_iters):
        resp = responsibilities(X, model)
        w, mu, var, mass = m_step(X, resp, var_floor)
        empty = np.flatnonzero(mass < EMPTY_MASS)
        if empty.size:
            dens = frame_log_likelihoods(X, model)
            order = np.argsort(dens)
            for j, i in enumerate(empty):
                mu[i] = X[order[j]]
                var[i] = np.maximum(data_var, var_floor)
                w[i] = 1.0 / T
            w = w / w.sum()
            log.info("reseeded %d empty component(s) at iteration %d", empty.size, it)
        model = AlphaGmmModel(label, alpha, w, mu, var)
        history.append(float(frame_log_likelihoods(X, model).mean()))
        if abs(history[-1] - history[-2]) < tol:
            break
    if return_history:
        return model, history
    return model


# --------------------------------------------------------------------------
# classification


def sequence_score(X, model: AlphaGmmModel) -> float:
    return float(frame_log_likelihoods(np.asarray(getattr(X, "rows", X)), model).sum())


def classify_sequence(X, models: Sequence[AlphaGmmModel]) -> Tuple[str, dict]:
    """Label of the model with the largest summed frame log-likelihood."""
    if not models:
        raise ValueError("no models to score against")
    rows = np.asarray(getattr(X, "rows", X), dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValueError("empty feature matrix")
    if len({m.dim for m in models}) != 1 or len({m.alpha for m in models}) != 1:
        raise ValueError("models must share feature dimension and alpha")
    scores = {m.label: sequence_score(rows, m) for m in models}
    best = max(scores.values())
    tied = sorted(lbl for lbl, s in scores.items() if s == best)
    if len(tied) > 1:
        log.info("score tie between %s; picking %s", tied, tied[0])
    return tied[0], scores


# --------------------------------------------------------------------------
# model files


def _fmt(v: float) -> str:
    return repr(float(v))


def write_model(model: AlphaGmmModel, path) -> None:
    lines = [
        f"format_version = {FORMAT_VERSION}",
        f"label = {model.label}",
        f"alpha = {_fmt(model.alpha)}",
        f"M = {model.n_components}",
        f"D = {model.dim}",
        "weights",
        " ".join(_fmt(v) for v in model.weights),
        "means",
        *(" ".join(_fmt(v) for v in row) for row in model.means),
        "variances",
        *(" ".join(_fmt(v) for v in row) for row in model.variances),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_model(path) -> AlphaGmmModel:
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    header = {}
    i = 0
    while i < len(lines) and "=" in lines[i]:
        key, val = (s.strip() for s in lines[i].split("=", 1))
        header[key] = val
        i += 1
    if int(header.get("format_version", -1)) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {header.get('format_version')}")
    M, D = int(header["M"]), int(header["D"])

    def block(name, rows):
        nonlocal i
        if lines[i] != name:
            raise ValueError(f"{path}: expected section {name!r}, found {lines[i]!r}")
        vals = np.array([[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)])
        i += 1 + rows
        return vals

    weights = block("weights", 1)[0]
    means = block("means", M)
    variances = block("variances", M)
    if weights.size != M or means.shape != (M, D) or variances.shape != (M, D):
        raise ValueError(f"{path}: parameter block sizes disagree with header")
    return AlphaGmmModel(header.get("label", ""), float(header["alpha"]), weights, means, variances)


def load_models(paths: Sequence) -> List[AlphaGmmModel]:
    return [read_model(p) for p in paths]
