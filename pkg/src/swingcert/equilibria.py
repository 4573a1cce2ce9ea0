"""Static angle balance: Newton solving, frame pinning, SEP/UEP labels.

An equilibrium is a zero of the reduced model's right-hand side. The
dynamics are invariant under a uniform angle shift, so solutions are
made unique by pinning one reference machine's angle to zero. Balance
(power references summing to zero) is enforced internally by shifting
to the co-rotating frame; the offset used is recorded on the result.

Classification looks at the reduced Jacobian with its structural zero
mode (the uniform shift) deflated exactly: the Jacobian is similar to a
symmetric matrix via a droop-weighted scaling, so the spectrum is real
and the shift mode can be projected out with an orthogonal basis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dynamics import coupling_flow, reduced_rhs
from .errors import ConvergenceError, ValidationError
from .network import NetworkModel, coupled_pairs

log = logging.getLogger(__name__)

SEP = "SEP"
UEP = "UEP"
DEGENERATE = "degenerate"

# eigenvalue real-part threshold separating SEP / degenerate / UEP
_CLASSIFY_EPS = 1e-8


@dataclass(frozen=True)
class EquilibriumPoint:
    """Pinned equilibrium angles with classification and spectrum.

    ``theta_star[reference] == 0``; ``jacobian_spectrum`` holds the
    deflated reduced-Jacobian eigenvalues in ascending order;
    ``residual_norm`` is the power-mismatch infinity norm at the point;
    ``omega_offset`` is the co-rotating-frame shift that was applied to
    balance the model (0 for balanced input).
    """

    theta_star: np.ndarray
    classification: str
    jacobian_spectrum: np.ndarray
    residual_norm: float
    reference: int
    k_matrix: np.ndarray
    omega_offset: float = 0.0

    def __post_init__(self):
        for attr in ("theta_star", "jacobian_spectrum", "k_matrix"):
            arr = np.asarray(getattr(self, attr), dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)

    @property
    def n(self) -> int:
        return self.theta_star.size

    def pair_angle(self, m: int, k: int) -> float:
        return float(self.theta_star[m] - self.theta_star[k])

    def coupled_pair_angles(self):
        """[(m, n, delta*_mn)] over coupled pairs."""
        return [(m, q, self.pair_angle(m, q)) for m, q in coupled_pairs(self.k_matrix)]


def synchronous_offset(model: NetworkModel) -> float:
    """Steady common frequency deviation sum(P*)/sum(D).

    Shifting every reference by ``P*_m - D_m * offset`` moves the model
    into the co-rotating frame where the shifted references sum to zero
    and a constant-angle equilibrium is feasible.
    """
    total_droop = model.droop.sum()
    if total_droop <= 0.0:
        raise ValidationError("synchronous offset undefined: total droop is zero")
    return float(model.p_ref.sum() / total_droop)


def balanced_references(model: NetworkModel):
    """(shifted p_ref, offset) for the co-rotating frame."""
    offset = synchronous_offset(model)
    return model.p_ref - model.droop * offset, offset


def _cos_laplacian(theta, k) -> np.ndarray:
    """Weighted Laplacian of the linearized coupling, L = diag(sum w) - w."""
    w = k * np.cos(theta[:, None] - theta[None, :])
    np.fill_diagonal(w, 0.0)
    lap = -w
    lap[np.diag_indices_from(lap)] = w.sum(axis=1)
    return lap


def _shift_complement_basis(droop) -> np.ndarray:
    """Orthonormal basis (N x N-1) orthogonal to the scaled shift mode."""
    v = np.sqrt(droop)
    u = v / np.linalg.norm(v)
    e1 = np.zeros_like(u)
    e1[0] = 1.0
    w = u - e1
    norm = np.linalg.norm(w)
    if norm < 1e-14:
        return np.eye(u.size)[:, 1:]
    w /= norm
    house = np.eye(u.size) - 2.0 * np.outer(w, w)
    return house[:, 1:]


def deflated_spectrum(theta, model: NetworkModel, k=None) -> np.ndarray:
    """Reduced-Jacobian eigenvalues with the uniform-shift zero removed.

    The Jacobian -D^-1 L is similar to the symmetric -D^-1/2 L D^-1/2,
    whose shift eigenvector is sqrt(D); projecting onto its orthogonal
    complement removes exactly that structural mode, so a genuine extra
    zero (a degenerate point) remains visible.
    """
    theta = np.asarray(theta, dtype=float)
    k = model.k_matrix if k is None else np.asarray(k, dtype=float)
    if (model.droop <= 0.0).any():
        raise ValidationError("spectrum classification needs D > 0 on every machine")
    if model.n == 1:
        return np.empty(0)
    lap = _cos_laplacian(theta, k)
    inv_sqrt_d = 1.0 / np.sqrt(model.droop)
    sym = -(inv_sqrt_d[:, None] * lap * inv_sqrt_d[None, :])
    sym = 0.5 * (sym + sym.T)
    basis = _shift_complement_basis(model.droop)
    return np.linalg.eigvalsh(basis.T @ sym @ basis)


def _classify_from_spectrum(spectrum: np.ndarray) -> str:
    if spectrum.size == 0:
        return SEP
    if (spectrum < -_CLASSIFY_EPS).all():
        return SEP
    if (spectrum > _CLASSIFY_EPS).any():
        return UEP
    return DEGENERATE


def classify_equilibrium(model: NetworkModel, k=None, point=None,
                         residual_tol: float = 1e-8) -> str:
    """Label an equilibrium point as SEP, UEP or degenerate.

    Refuses to classify when the point does not satisfy the balance to
    ``residual_tol`` (infinity norm, per-unit power).
    """
    theta = np.asarray(point, dtype=float)
    k_arr = model.k_matrix if k is None else np.asarray(k, dtype=float)
    p_bal, _ = balanced_references(model)
    residual = np.abs(p_bal - coupling_flow(theta, k_arr)).max()
    if residual > residual_tol:
        raise ValidationError(
            f"point is not an equilibrium (residual {residual:.3e} > {residual_tol:.1e}); "
            "refusing to classify"
        )
    return _classify_from_spectrum(deflated_spectrum(theta, model, k_arr))


def solve_equilibrium(model: NetworkModel, k=None, guess=None, reference: int = 0,
                      tol: float = 1e-12, max_iter: int = 50) -> EquilibriumPoint:
    """Newton-solve the static balance with the reference angle pinned.

    Damped Newton on the power mismatch: the step is halved (up to 8
    times) whenever the residual norm would increase. Convergence is
    declared when the mismatch infinity norm drops below ``tol``.
    Unbalanced models are shifted to the co-rotating frame first, with a
    logged warning.
    """
    k_arr = model.k_matrix if k is None else np.asarray(k, dtype=float)
    n = model.n
    if not 0 <= reference < n:
        raise ValidationError(f"reference index {reference} out of range")
    if (model.droop <= 0.0).any():
        raise ValidationError("equilibrium solving needs D > 0 on every machine")
    theta = np.zeros(n) if guess is None else np.asarray(guess, dtype=float).copy()
    if theta.shape != (n,) or not np.isfinite(theta).all():
        raise ValidationError("guess must be a finite angle vector of model size")
    theta = theta - theta[reference]

    p_bal, offset = balanced_references(model)
    if abs(offset) > 1e-12 * max(1.0, np.abs(model.p_ref).max()):
        log.warning(
            "model is unbalanced (sum P* = %.3e); solving in the co-rotating "
            "frame with offset %.6g rad/s", model.p_ref.sum(), offset)

    free = [i for i in range(n) if i != reference]
    mismatch = p_bal - coupling_flow(theta, k_arr)
    res = np.abs(mismatch).max()
    for _ in range(max_iter):
        if res < tol:
            break
        jac = -_cos_laplacian(theta, k_arr)
        jac_red = jac[np.ix_(free, free)]
        try:
            step = np.linalg.solve(jac_red, -mismatch[free])
        except np.linalg.LinAlgError:
            raise ConvergenceError(
                "singular Jacobian at iterate: the model is at or beyond its "
                "static transfer limit", last_iterate=theta.copy())
        if not np.isfinite(step).all():
            raise ConvergenceError(
                "non-finite Newton step (model near static limit)",
                last_iterate=theta.copy())
        scale = 1.0
        for _halving in range(9):
            trial = theta.copy()
            trial[free] += scale * step
            trial_mismatch = p_bal - coupling_flow(trial, k_arr)
            trial_res = np.abs(trial_mismatch).max()
            if trial_res < res or _halving == 8:
                theta, mismatch, res = trial, trial_mismatch, trial_res
                break
            scale *= 0.5
    else:
        raise ConvergenceError(
            f"no equilibrium found in {max_iter} Newton iterations "
            f"(residual {res:.3e})", last_iterate=theta.copy())

    spectrum = deflated_spectrum(theta, model, k_arr)
    classification = _classify_from_spectrum(spectrum)
    if classification == SEP:
        wide = [(m, q, dv) for m, q, dv in
                ((m, q, abs(theta[m] - theta[q])) for m, q in coupled_pairs(k_arr))
                if dv >= np.pi / 2]
        if wide:
            m, q, dv = wide[0]
            log.warning("SEP with coupled pair angle |delta*_%d%d| = %.3f rad >= pi/2",
                        m, q, dv)
    return EquilibriumPoint(
        theta_star=theta,
        classification=classification,
        jacobian_spectrum=spectrum,
        residual_norm=float(res),
        reference=reference,
        k_matrix=k_arr,
        omega_offset=offset,
    )


def seed_ueps(model: NetworkModel, k=None, sep: EquilibriumPoint | None = None,
              tol: float = 1e-12):
    """Unstable equilibria found by reflecting the SEP pairwise.

    For each coupled pair the pair angle is reflected across pi/2
    (delta* -> pi - delta*) and Newton is restarted there. Exhaustive
    enumeration is not attempted; duplicates are merged.
    """
    k_arr = model.k_matrix if k is None else np.asarray(k, dtype=float)
    if sep is None:
        sep = solve_equilibrium(model, k_arr, tol=tol)
    found = []
    for m, q in coupled_pairs(k_arr):
        delta = sep.theta_star[m] - sep.theta_star[q]
        guess = sep.theta_star.copy()
        guess[m] += np.pi - 2.0 * delta
        try:
            point = solve_equilibrium(model, k_arr, guess=guess,
                                      reference=sep.reference, tol=tol)
        except ConvergenceError:
            continue
        if point.classification != UEP:
            continue
        if any(np.abs(point.theta_star - other.theta_star).max() < 1e-6
               for other in found):
            continue
        found.append(point)
    return found
