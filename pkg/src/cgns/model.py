"""Model definition: coefficient evaluation, noise Gramians, and the
auxiliary matrices consumed by the filter, smoother, and samplers.

A model couples an observed process x (dimension k) to hidden variables y
(dimension l) through eight coefficient arrays evaluated at the current
(t, x). The hidden dynamics are linear in y given x, which is what makes the
posterior of y exactly Gaussian and everything downstream closed-form.

State spaces are real-valued; adjoints are plain transposes.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteCoefficient
from .linalg import TOL_PSD, chol_solve, spd_cholesky, symmetrize

__all__ = [
    "CoefficientSnapshot",
    "CgnsModel",
    "GramianSet",
    "AuxiliaryMatrices",
    "StepContext",
    "evaluate",
    "gramians",
    "auxiliary",
    "step_context",
    "linear_model",
    "build_model",
]


@dataclass(frozen=True)
class CoefficientSnapshot:
    """The eight coefficient arrays at one (t, x).

    Shapes: lambda_x (k, l), lambda_y (l, l), f_x (k,), f_y (l,),
    sigma1_x (k, d), sigma2_x (k, r), sigma1_y (l, d), sigma2_y (l, r).
    """

    lambda_x: np.ndarray
    lambda_y: np.ndarray
    f_x: np.ndarray
    f_y: np.ndarray
    sigma1_x: np.ndarray
    sigma2_x: np.ndarray
    sigma1_y: np.ndarray
    sigma2_y: np.ndarray

    def arrays(self):
        return (self.lambda_x, self.lambda_y, self.f_x, self.f_y,
                self.sigma1_x, self.sigma2_x, self.sigma1_y, self.sigma2_y)


@dataclass(frozen=True)
class CgnsModel:
    """Dimensions plus a pure coefficient evaluator ``(t, x) -> snapshot``.

    The evaluator must be deterministic and depend on the instantaneous state
    only. Instances are immutable and safe to share between threads.
    """

    k: int
    l: int
    d: int
    r: int
    coeffs: Callable[[float, np.ndarray], CoefficientSnapshot]
    name: str = "model"
    #: True when the coefficients do not depend on (t, x); lets sequential
    #: passes hoist the per-step derived matrices out of their loops.
    constant: bool = False

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be >= 1")
        if self.d < 0 or self.r < 0 or self.d + self.r < 1:
            raise ValueError("need d >= 0, r >= 0 and d + r >= 1")

    def expected_shapes(self):
        k, l, d, r = self.k, self.l, self.d, self.r
        return ((k, l), (l, l), (k,), (l,), (k, d), (k, r), (l, d), (l, r))


@dataclass(frozen=True)
class GramianSet:
    """Row-wise noise Gramians of one snapshot.

    sxx (k, k) and syy (l, l) are symmetric; sxx must be positive definite
    for the observation update to exist. syx is assembled as sxy.T, never
    recomputed.
    """

    sxx: np.ndarray
    syy: np.ndarray
    sxy: np.ndarray
    syx: np.ndarray


@dataclass(frozen=True)
class AuxiliaryMatrices:
    """Derived matrices: damping A, backward noise B, observability Gamma,
    and (when a filter covariance was supplied) the Kalman gain."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    gamma: np.ndarray
    kalman_gain: Optional[np.ndarray] = None


def evaluate(model: CgnsModel, t, x) -> CoefficientSnapshot:
    """Evaluate the model coefficients at (t, x) with runtime guards.

    Raises :class:`NonFiniteCoefficient` on NaN/Inf entries and ValueError on
    shape mismatches.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.k,):
        raise ValueError(f"x has shape {x.shape}, expected ({model.k},)")
    snap = model.coeffs(t, x)
    names = ("lambda_x", "lambda_y", "f_x", "f_y",
             "sigma1_x", "sigma2_x", "sigma1_y", "sigma2_y")
    for arr, shape, name in zip(snap.arrays(), model.expected_shapes(), names):
        if arr.shape != shape:
            raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteCoefficient(t, name)
    return snap


def gramians(snap: CoefficientSnapshot, t=None) -> GramianSet:
    """Noise Gramians sxx, syy, sxy (and syx = sxy.T) of one snapshot.

    Raises :class:`SingularObservationGramian` if sxx fails a Cholesky test.
    """
    s1x, s2x = snap.sigma1_x, snap.sigma2_x
    s1y, s2y = snap.sigma1_y, snap.sigma2_y
    sxx = symmetrize(s1x @ s1x.T + s2x @ s2x.T)
    syy = symmetrize(s1y @ s1y.T + s2y @ s2y.T)
    sxy = s1x @ s1y.T + s2x @ s2y.T
    spd_cholesky(sxx, t=t)
    return GramianSet(sxx=sxx, syy=syy, sxy=sxy, syx=sxy.T)


def auxiliary(snap: CoefficientSnapshot, gr: GramianSet, r_f=None,
              t=None, tol_psd=TOL_PSD) -> AuxiliaryMatrices:
    """A, B, Gamma, and optionally the Kalman gain for filter covariance r_f.

    The inverse of sxx is applied through its Cholesky factor; no explicit
    inverse is ever formed. B is symmetrized and eigenvalue-clamped at zero;
    an eigenvalue below -tol_psd raises :class:`NotPsd` since B is a
    covariance and provably PSD.
    """
    from .errors import NotPsd

    lam_x, lam_y = snap.lambda_x, snap.lambda_y
    chol = spd_cholesky(gr.sxx, t=t)
    sxx_inv_lam_x = chol_solve(chol, lam_x)       # (k, l)
    sxx_inv_sxy = chol_solve(chol, gr.sxy)        # (k, l)

    a_mat = lam_y - gr.syx @ sxx_inv_lam_x
    b_raw = symmetrize(gr.syy - gr.syx @ sxx_inv_sxy)
    w, v = np.linalg.eigh(b_raw)
    if w[0] < -tol_psd:
        raise NotPsd("B", w[0])
    b_mat = symmetrize((v * np.clip(w, 0.0, None)) @ v.T) if w[0] < 0.0 else b_raw
    gamma = symmetrize(lam_x.T @ sxx_inv_lam_x)

    kalman_gain = None
    if r_f is not None:
        kalman_gain = chol_solve(chol, (gr.syx + r_f @ lam_x.T).T).T
    return AuxiliaryMatrices(a_mat=a_mat, b_mat=b_mat, gamma=gamma,
                             kalman_gain=kalman_gain)


@dataclass(frozen=True)
class StepContext:
    """Everything derivable from one coefficient snapshot, precomputed.

    Sequential passes (filter, smoother, samplers) build one context per
    step — or a single shared one when the model is constant — so the
    Gramian assembly, Cholesky factorization, and eigenvalue clamp of B run
    exactly once per distinct (t, x).
    """

    snap: CoefficientSnapshot
    gr: GramianSet
    chol_sxx: np.ndarray
    a_mat: np.ndarray
    b_mat: np.ndarray
    gamma: np.ndarray
    obs_gain: np.ndarray  # syx sxx^{-1}, (l, k)

    def kalman_gain(self, r_f):
        """(syx + R_f Lambda_x^T) sxx^{-1} for the filter covariance r_f."""
        return chol_solve(self.chol_sxx,
                          (self.gr.syx + r_f @ self.snap.lambda_x.T).T).T


def step_context(model: CgnsModel, t, x) -> StepContext:
    """Evaluate coefficients at (t, x) and derive all step-invariant matrices."""
    snap = evaluate(model, t, x)
    gr = gramians(snap, t=t)
    chol = spd_cholesky(gr.sxx, t=t)
    aux = auxiliary(snap, gr, t=t)
    obs_gain = chol_solve(chol, gr.sxy).T
    return StepContext(snap=snap, gr=gr, chol_sxx=chol, a_mat=aux.a_mat,
                       b_mat=aux.b_mat, gamma=aux.gamma, obs_gain=obs_gain)


def linear_model(lambda_x, lambda_y, f_x=None, f_y=None,
                 sigma1_x=None, sigma2_x=None, sigma1_y=None, sigma2_y=None,
                 name="linear") -> CgnsModel:
    """Constant-coefficient model from flat arrays.

    Unspecified noise blocks default to zero with d = k, r = l; f terms
    default to zero. The evaluator returns one frozen snapshot.
    """
    lam_x = np.atleast_2d(np.asarray(lambda_x, dtype=float))
    lam_y = np.atleast_2d(np.asarray(lambda_y, dtype=float))
    k, l = lam_x.shape
    if lam_y.shape != (l, l):
        raise ValueError("lambda_y must be square with side matching lambda_x columns")

    def as_vec(v, n):
        return np.zeros(n) if v is None else np.asarray(v, dtype=float).reshape(n)

    s1x = np.zeros((k, k)) if sigma1_x is None else np.atleast_2d(np.asarray(sigma1_x, float))
    s1y = None if sigma1_y is None else np.atleast_2d(np.asarray(sigma1_y, float))
    d = s1x.shape[1]
    if s1y is None:
        s1y = np.zeros((l, d))
    s2y = np.zeros((l, l)) if sigma2_y is None else np.atleast_2d(np.asarray(sigma2_y, float))
    r = s2y.shape[1]
    s2x = np.zeros((k, r)) if sigma2_x is None else np.atleast_2d(np.asarray(sigma2_x, float))

    snap = CoefficientSnapshot(
        lambda_x=lam_x, lambda_y=lam_y,
        f_x=as_vec(f_x, k), f_y=as_vec(f_y, l),
        sigma1_x=s1x, sigma2_x=s2x, sigma1_y=s1y, sigma2_y=s2y,
    )

    def coeffs(t, x, _snap=snap):
        return _snap

    return CgnsModel(k=k, l=l, d=d, r=r, coeffs=coeffs, name=name,
                     constant=True)


def build_model(name: str, params: Optional[dict] = None) -> CgnsModel:
    """Built-in model registry: ``triad`` and ``linear``."""
    params = dict(params or {})
    if name == "triad":
        from .triad import TriadParams, default_params, triad_model
        if params:
            base = default_params()
            merged = {f: params.get(f, getattr(base, f)) for f in base.field_names()}
            return triad_model(TriadParams(**merged))
        return triad_model(default_params())
    if name == "linear":
        return linear_model(**params)
    raise KeyError(f"unknown model {name!r}; available: triad, linear")
