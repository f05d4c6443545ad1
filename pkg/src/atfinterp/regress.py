"""Kernel ridge regression on source-receiver pair measurements.

Solves (K + lambda I) c = y for the reverberant-field coefficients, predicts
reverberant and full transfer values at new pairs, and evaluates the
leave-one-out error of a kernel/regularization choice in closed form. The
closed-form LOO identity is validated against explicit refits in the test
suite before anything downstream relies on it.
"""

from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import configio, roomsim
from .geometry import FrequencyContext, PairSet
from .kernelcore import KernelModel, NumericalError, gram, kernel_vector

_PSD_SLACK = 1e-8  # eigenvalue tolerance relative to trace
_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class RegressionFit:
    """Solved ridge system: coefficients for kappa(., q_n) expansions."""

    coefficients: np.ndarray
    lam: float
    pairs: PairSet
    model: KernelModel

    def __post_init__(self):
        # copy so the caller's array is never locked
        c = np.array(self.coefficients, dtype=complex, order="C")
        if c.shape != (len(self.pairs),):
            raise ValueError("one coefficient per training pair required")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)


def _solve_system(a_mat: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve the Hermitian system with a residual guarantee.

    Cholesky first; if that fails and the indefiniteness is within the PSD
    slack, fall back to a pivoted LU. One step of iterative refinement keeps
    the residual at the 1e-10 relative contract even for large marginally
    conditioned systems.
    """
    try:
        factor = scipy.linalg.cho_factor(a_mat, lower=True)
        solve = lambda rhs: scipy.linalg.cho_solve(factor, rhs)
    except np.linalg.LinAlgError:
        min_eig = float(scipy.linalg.eigvalsh(a_mat, subset_by_index=[0, 0])[0])
        if min_eig < -_PSD_SLACK * float(np.trace(a_mat).real):
            raise NumericalError(
                f"system matrix is not positive semidefinite "
                f"(min eigenvalue {min_eig:.3e})", min_eigenvalue=min_eig)
        lu = scipy.linalg.lu_factor(a_mat)
        solve = lambda rhs: scipy.linalg.lu_solve(lu, rhs)
    c = solve(y)
    ynorm = np.linalg.norm(y)
    for _ in range(3):
        r = y - a_mat @ c
        if np.linalg.norm(r) <= _RESIDUAL_TOL * ynorm:
            return c
        c = c + solve(r)
    r = y - a_mat @ c
    if np.linalg.norm(r) > _RESIDUAL_TOL * ynorm:
        raise NumericalError(
            "iterative refinement failed to reach the residual tolerance")
    return c


def fit(model: KernelModel, pairs: PairSet, y, lam: float) -> RegressionFit:
    """Fit ridge coefficients c = (K + lam I)^{-1} y.

    Parameters
    ----------
    model : KernelModel
        Weighting variant bound to a frequency context.
    pairs : PairSet
        The N measured source-receiver pairs.
    y : array_like
        Measured reverberant values, complex, length N.
    lam : float
        Positive ridge regularizer.

    Returns
    -------
    RegressionFit
    """
    y = np.asarray(y, dtype=complex)
    if len(pairs) < 1:
        raise ValueError("at least one measurement required")
    if y.shape != (len(pairs),):
        raise ValueError("y must hold one value per pair")
    if not lam > 0:
        raise ValueError("lam must be positive")
    a_mat = gram(model, pairs)
    idx = np.arange(len(pairs))
    a_mat[idx, idx] += lam
    c = _solve_system(a_mat, y)
    return RegressionFit(coefficients=c, lam=float(lam), pairs=pairs, model=model)


def predict_reverberant(fit_result: RegressionFit, queries: PairSet) -> np.ndarray:
    """Reverberant-field estimate kappa(query) . c at each query pair."""
    kv = kernel_vector(fit_result.model, queries, fit_result.pairs)
    return kv @ fit_result.coefficients


def predict_full(fit_result: RegressionFit, queries: PairSet) -> np.ndarray:
    """Full transfer estimate: reverberant part plus the free-field term."""
    direct = roomsim.green(queries.receivers, queries.sources,
                           fit_result.model.context)
    return predict_reverberant(fit_result, queries) + direct


def _hermitian_inverse(a_mat: np.ndarray):
    """Inverse of a Hermitian positive-definite matrix, or None if not PD."""
    potrf, potri = scipy.linalg.get_lapack_funcs(("potrf", "potri"), (a_mat,))
    c, info = potrf(a_mat, lower=1)
    if info != 0:
        return None
    inv, info = potri(c, lower=1)
    if info != 0:
        return None
    lower = np.tril(inv)
    return lower + np.tril(inv, -1).conj().T


def loo_terms(k_matrix: np.ndarray, y: np.ndarray, lam: float):
    """Closed-form LOO ingredients from an assembled Gram matrix.

    Returns (value, a, b, p) with p = (K + lam I)^{-1}, a = p y,
    b = diag(p) (real, positive for a PD system) and
    value = mean |a_n / b_n|^2. The n-th leave-one-out residual is
    a_n / b_n; exposing the pieces lets the hyperparameter optimizer reuse
    the inverse for gradient work.
    """
    n = len(y)
    a_mat = np.array(k_matrix)
    idx = np.arange(n)
    a_mat[idx, idx] += lam
    p = _hermitian_inverse(a_mat)
    if p is None:
        min_eig = float(scipy.linalg.eigvalsh(a_mat, subset_by_index=[0, 0])[0])
        if min_eig < -_PSD_SLACK * float(np.trace(a_mat).real):
            raise NumericalError(
                f"system matrix is not positive semidefinite "
                f"(min eigenvalue {min_eig:.3e})", min_eigenvalue=min_eig)
        p = scipy.linalg.inv(a_mat)
    b = p.diagonal().real.copy()
    if np.any(b <= 1e-14 * np.max(np.abs(b))):
        raise NumericalError("leave-one-out is ill-posed: near-zero inverse "
                             "diagonal", min_eigenvalue=float(np.min(b)))
    a = p @ np.asarray(y, dtype=complex)
    value = float(np.mean(np.abs(a / b) ** 2))
    return value, a, b, p


def loo_error(model: KernelModel, pairs: PairSet, y, lam: float) -> float:
    """Closed-form leave-one-out mean squared prediction error."""
    y = np.asarray(y, dtype=complex)
    if len(pairs) < 2:
        raise ValueError("leave-one-out needs at least two measurements")
    if y.shape != (len(pairs),):
        raise ValueError("y must hold one value per pair")
    k_matrix = gram(model, pairs)
    return loo_terms(k_matrix, y, lam)[0]


def loo_error_bruteforce(model: KernelModel, pairs: PairSet, y, lam: float) -> float:
    """Reference LOO by N explicit refits; quadratic cost, for validation."""
    y = np.asarray(y, dtype=complex)
    if len(pairs) < 2:
        raise ValueError("leave-one-out needs at least two measurements")
    n = len(pairs)
    total = 0.0
    for i in range(n):
        keep = np.flatnonzero(np.arange(n) != i)
        sub = fit(model, pairs.subset(keep), y[keep], lam)
        pred = predict_reverberant(sub, pairs.subset(np.asarray([i])))
        total += float(np.abs(pred[0] - y[i]) ** 2)
    return total / n


def save_fit(fit_result: RegressionFit, path) -> None:
    """Write coefficients+pairs as CSV and a .meta sidecar with the model."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "rx", "ry", "rz", "sx", "sy", "sz", "re", "im"])
        for n in range(len(fit_result.pairs)):
            r = fit_result.pairs.receivers[n]
            s = fit_result.pairs.sources[n]
            c = fit_result.coefficients[n]
            writer.writerow([n, *(f"{float(v)!r}" for v in r),
                             *(f"{float(v)!r}" for v in s),
                             repr(float(c.real)), repr(float(c.imag))])
    meta = configparser.ConfigParser()
    ctx = fit_result.model.context
    pairs = fit_result.pairs
    meta["regression"] = {
        "lambda": repr(float(fit_result.lam)),
        "frequency_hz": repr(float(ctx.frequency)),
        "speed_of_sound": repr(float(ctx.speed_of_sound)),
        "grid_receivers": "" if not pairs.is_grid else str(len(pairs.receiver_points)),
        "grid_sources": "" if not pairs.is_grid else str(len(pairs.source_points)),
    }
    configio.write_weighting(meta, fit_result.model.weighting, aux_prefix=path)
    with open(roomsim._sidecar(path), "w") as fh:
        meta.write(fh)


def load_fit(path) -> RegressionFit:
    """Inverse of save_fit."""
    path = str(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["n"]:
            raise ValueError(f"{path}: unexpected fit CSV header")
        rows = [row for row in reader if row]
    receivers = np.asarray([[float(c) for c in row[1:4]] for row in rows])
    sources = np.asarray([[float(c) for c in row[4:7]] for row in rows])
    coeff = np.asarray([float(row[7]) + 1j * float(row[8]) for row in rows])
    meta = configparser.ConfigParser()
    with open(roomsim._sidecar(path)) as fh:
        meta.read_file(fh)
    sec = meta["regression"]
    ctx = FrequencyContext(frequency=float(sec["frequency_hz"]),
                           speed_of_sound=float(sec["speed_of_sound"]))
    if sec["grid_receivers"]:
        m = int(sec["grid_receivers"])
        pairs = PairSet.from_grid(receivers[:m], sources[::m])
    else:
        pairs = PairSet(receivers=receivers, sources=sources)
    weighting = configio.read_weighting(meta, base_dir=os.path.dirname(path) or ".")
    model = KernelModel(weighting=weighting, context=ctx)
    return RegressionFit(coefficients=coeff, lam=float(sec["lambda"]),
                         pairs=pairs, model=model)
