"""Partial least squares regression with a recursive single-pair update.

The fitting routine is classic NIPALS without centering or scaling: an
intercept is modeled as a constant input column supplied by the caller.
Latent components are extracted until the X-residual's Frobenius norm
drops to the requested tolerance, the component count reaches the
numerical rank of X, or the response residual is exhausted (nothing left
to regress on).

The recursive update compresses a fitted model into its loading rows and
refits on those rows plus the new observation, so a stream of pairs can
be absorbed one at a time without retaining past data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatch,
    EmptyBlock,
    InternalInvariantError,
    NoConvergence,
    NonFiniteInput,
    SingularReconstruction,
)

DEFAULT_EPSILON = 1e-8
INNER_MAX_ITER = 500
INNER_TOL = 1e-12

# Relative floor under which the Y-residual counts as exhausted.
_Y_FLOOR = 1e-14
# Scores must stay pairwise orthogonal to this relative tolerance.
_ORTHO_TOL = 1e-8


def _as_float_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.size and not np.isfinite(arr).all():
        raise NonFiniteInput(f"{name} contains NaN or infinity")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class DataBlock:
    """Paired observation matrices: X rows are factor vectors, Y rows responses."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _as_float_matrix(self.X, "X")
        Y = _as_float_matrix(self.Y, "Y")
        if X.shape[0] == 0 or X.shape[1] == 0:
            raise EmptyBlock("X must have at least one row and one column")
        if Y.shape[1] == 0:
            raise EmptyBlock("Y must have at least one column")
        if X.shape[0] != Y.shape[0]:
            raise DimensionMismatch(
                f"X has {X.shape[0]} rows but Y has {Y.shape[0]}"
            )
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "Y", _frozen(Y))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_factors(self) -> int:
        return self.X.shape[1]

    @property
    def n_responses(self) -> int:
        return self.Y.shape[1]


@dataclass(frozen=True)
class PLSComponent:
    """One latent component: unit weight w, loading p, inner scalar b, output loading q."""

    w: np.ndarray
    p: np.ndarray
    b: float
    q: np.ndarray

    def __post_init__(self):
        for name in ("w", "p", "q"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if abs(np.linalg.norm(self.w) - 1.0) > 1e-9:
            raise InternalInvariantError("component weight is not unit norm")
        if self.b < 0:
            raise InternalInvariantError("inner scalar must be nonnegative")


@dataclass(frozen=True, eq=False)
class PLSModel:
    """Immutable fitted model; all operations return new models."""

    n_factors: int
    n_responses: int
    components: tuple[PLSComponent, ...]
    epsilon: float
    samples_absorbed: int

    def __post_init__(self):
        if self.n_factors < 1:
            raise DimensionMismatch("n_factors must be positive")
        if self.epsilon < 0:
            raise InternalInvariantError("epsilon must be nonnegative")
        if self.samples_absorbed < 0:
            raise InternalInvariantError("samples_absorbed must be nonnegative")
        if len(self.components) > self.n_factors:
            raise InternalInvariantError("more components than factors")
        for c in self.components:
            if c.w.shape != (self.n_factors,) or c.p.shape != (self.n_factors,):
                raise InternalInvariantError("component shape mismatch")
            if c.q.shape != (self.n_responses,):
                raise InternalInvariantError("output loading shape mismatch")

    @property
    def n_components(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class CoefficientVector:
    """Linear coefficients equivalent to the fitted model, one per factor."""

    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen(np.asarray(self.beta, dtype=np.float64)))


def numerical_rank(x, tol: float | None = None) -> int:
    """Count singular values above ``tol`` times the largest one.

    ``tol=None`` uses the usual machine-precision threshold
    ``max(x.shape) * eps``. An empty matrix has rank 0.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.size == 0:
        return 0
    if not np.isfinite(arr).all():
        raise NonFiniteInput("matrix contains NaN or infinity")
    s = np.linalg.svd(arr, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    if tol is None:
        tol = max(arr.shape) * np.finfo(np.float64).eps
    elif tol < 0:
        raise DimensionMismatch("tol must be nonnegative")
    return int(np.count_nonzero(s > tol * s[0]))


def _component_direction(E, F, max_iter, inner_tol):
    """Unit weight vector for the next component from the residual cross-covariance.

    A single response column admits the exact one-step weight; multi-response
    blocks run the alternating power iteration. Returns w, or None when no
    direction with signal remains. Raises NoConvergence past the iteration cap.
    """
    if F.shape[1] == 1:
        w = E.T @ F[:, 0]
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return None
        return w / nw

    u = F[:, int(np.argmax(np.linalg.norm(F, axis=0)))]
    w_prev = None
    for _ in range(max_iter):
        w = E.T @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return None
        w = w / nw
        t = E @ w
        tt = float(t @ t)
        if tt == 0.0:
            return None
        c = F.T @ t / tt
        if w_prev is not None and np.linalg.norm(w - w_prev) <= inner_tol:
            return w
        cc = float(c @ c)
        if cc == 0.0:
            # t carries no response loading; caller stops on b == 0.
            return w
        u = F @ c / cc
        w_prev = w
    raise NoConvergence(f"weight iteration did not stabilize in {max_iter} steps")


def _extract_components(
    X: np.ndarray,
    Y: np.ndarray,
    epsilon: float,
    max_iter: int,
    inner_tol: float,
) -> list[PLSComponent]:
    """Run NIPALS deflation on copies of X and Y, returning the component list.

    Scores are normalized to unit length with their magnitude absorbed into
    the loadings, so the loading rows carry the block's full second-moment
    information: stacking Pᵀ over diag(b)Qᵀ preserves XᵀX and XᵀY exactly
    once extraction exhausts the rank. That is what makes the single-pair
    recursive refit agree with a batch fit over everything ever absorbed.
    """
    E = X.copy()
    F = Y.copy()
    rank_cap = numerical_rank(X)
    y_floor = _Y_FLOOR * max(1.0, float(np.linalg.norm(Y)))

    components: list[PLSComponent] = []
    scores: list[np.ndarray] = []
    while len(components) < rank_cap:
        if np.linalg.norm(E) <= epsilon:
            break
        if np.linalg.norm(F) <= y_floor:
            break
        w = _component_direction(E, F, max_iter, inner_tol)
        if w is None:
            break
        t = E @ w
        norm_t = float(np.linalg.norm(t))
        if norm_t == 0.0:
            break
        t = t / norm_t
        c = F.T @ t
        b = float(np.linalg.norm(c))
        if b == 0.0:
            break
        q = c / b
        p = E.T @ t

        E = E - np.outer(t, p)
        F = F - b * np.outer(t, q)
        components.append(PLSComponent(w=w, p=p, b=b, q=q))
        scores.append(t)

    for i in range(len(scores)):
        for j in range(i + 1, len(scores)):
            if abs(float(scores[i] @ scores[j])) > _ORTHO_TOL:
                raise NoConvergence("score vectors lost orthogonality; data is degenerate")
    return components


def nipals_fit(
    block: DataBlock,
    epsilon: float = DEFAULT_EPSILON,
    *,
    max_iter: int = INNER_MAX_ITER,
    inner_tol: float = INNER_TOL,
) -> PLSModel:
    """Fit a PLS model on a data block by NIPALS deflation.

    Parameters
    ----------
    block : DataBlock
        Observations; no centering or scaling is applied.
    epsilon : float
        Absolute Frobenius tolerance on the X-residual; extraction stops
        once the residual norm is at or below it.
    max_iter, inner_tol
        Cap and convergence tolerance for the per-component weight
        iteration. Exceeding the cap raises :class:`NoConvergence`.

    Returns
    -------
    PLSModel with ``samples_absorbed`` equal to the block's row count.
    """
    if epsilon < 0:
        raise DimensionMismatch("epsilon must be nonnegative")
    components = _extract_components(block.X, block.Y, epsilon, max_iter, inner_tol)
    return PLSModel(
        n_factors=block.n_factors,
        n_responses=block.n_responses,
        components=tuple(components),
        epsilon=float(epsilon),
        samples_absorbed=block.n_samples,
    )


def coefficient_matrix(model: PLSModel) -> np.ndarray:
    """Dense (n_factors, n_responses) coefficient matrix of the fitted map.

    Reconstructed as W (PᵀW)⁻¹ diag(b) Qᵀ. PᵀW is upper triangular by
    construction (its diagonal holds the score magnitudes), so a triangular
    solve suffices; no explicit inverse is formed.
    """
    k, m = model.n_factors, model.n_responses
    if model.n_components == 0:
        return np.zeros((k, m))
    W = np.column_stack([c.w for c in model.components])
    P = np.column_stack([c.p for c in model.components])
    D = np.array([c.b * c.q for c in model.components])  # rows b_i * q_i
    PtW = P.T @ W
    diag = np.abs(np.diag(PtW))
    if np.min(diag) <= 1e-14 * np.max(diag):
        raise SingularReconstruction("redundant components; system is numerically singular")
    Z = solve_triangular(PtW, D, lower=False)
    return W @ Z


def extract_coefficients(model: PLSModel) -> CoefficientVector:
    """Coefficients beta with predict(model, x) == dot(x, beta).

    For single-response models beta is a vector of length ``n_factors``;
    multi-response models yield an (n_factors, n_responses) matrix.
    """
    beta = coefficient_matrix(model)
    if model.n_responses == 1:
        beta = beta[:, 0]
    return CoefficientVector(beta=beta)


def _check_probe(model: PLSModel, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape != (model.n_factors,):
        raise DimensionMismatch(
            f"expected {model.n_factors} factor values, got {arr.shape[0]}"
        )
    if not np.isfinite(arr).all():
        raise NonFiniteInput("factor vector contains NaN or infinity")
    return arr


def predict(model: PLSModel, x):
    """Evaluate the fitted linear map on one factor vector.

    Returns a float for single-response models, else a response vector.
    """
    arr = _check_probe(model, x)
    out = arr @ coefficient_matrix(model)
    if model.n_responses == 1:
        return float(out[0])
    return out


def rpls_augmented_block(model: PLSModel, x_new, y_new) -> DataBlock:
    """Compressed refit block: loading rows Pᵀ over diag(b)Qᵀ, plus the new pair."""
    x = _check_probe(model, x_new)
    y = np.asarray(y_new, dtype=np.float64).reshape(-1)
    if y.shape != (model.n_responses,):
        raise DimensionMismatch(
            f"expected {model.n_responses} response values, got {y.shape[0]}"
        )
    if not np.isfinite(y).all():
        raise NonFiniteInput("response contains NaN or infinity")
    rows_x = [c.p for c in model.components] + [x]
    rows_y = [c.b * c.q for c in model.components] + [y]
    return DataBlock(X=np.array(rows_x), Y=np.array(rows_y))


def rpls_update(
    model: PLSModel,
    x_new,
    y_new,
    epsilon: float | None = None,
    *,
    max_iter: int = INNER_MAX_ITER,
    inner_tol: float = INNER_TOL,
) -> PLSModel:
    """Absorb one (x, y) pair into the model and return the refitted model.

    A cold model (zero components) is fitted directly on the single pair.
    ``samples_absorbed`` increases by exactly one regardless of how many
    rows the compressed refit block has.
    """
    eps = model.epsilon if epsilon is None else float(epsilon)
    if eps < 0:
        raise DimensionMismatch("epsilon must be nonnegative")
    block = rpls_augmented_block(model, x_new, y_new)
    components = _extract_components(block.X, block.Y, eps, max_iter, inner_tol)
    return PLSModel(
        n_factors=model.n_factors,
        n_responses=model.n_responses,
        components=tuple(components),
        epsilon=eps,
        samples_absorbed=model.samples_absorbed + 1,
    )


def cold_model(n_factors: int, n_responses: int = 1, epsilon: float = DEFAULT_EPSILON) -> PLSModel:
    """A model with no components that has absorbed nothing yet."""
    return PLSModel(
        n_factors=n_factors,
        n_responses=n_responses,
        components=(),
        epsilon=float(epsilon),
        samples_absorbed=0,
    )


def models_equal(a: PLSModel, b: PLSModel) -> bool:
    """Bitwise equality of two models, used for replay and merge checks."""
    if (a.n_factors, a.n_responses, a.epsilon, a.samples_absorbed) != (
        b.n_factors,
        b.n_responses,
        b.epsilon,
        b.samples_absorbed,
    ):
        return False
    if len(a.components) != len(b.components):
        return False
    for ca, cb in zip(a.components, b.components):
        if ca.b != cb.b:
            return False
        if not (
            np.array_equal(ca.w, cb.w)
            and np.array_equal(ca.p, cb.p)
            and np.array_equal(ca.q, cb.q)
        ):
            return False
    return True


def fit_stream(
    pairs: Sequence[tuple[np.ndarray, float]],
    n_factors: int,
    epsilon: float = DEFAULT_EPSILON,
) -> PLSModel:
    """Feed (x, y) pairs one at a time through the recursive update."""
    model = cold_model(n_factors, 1, epsilon)
    for x, y in pairs:
        model = rpls_update(model, x, y, epsilon)
    return model
