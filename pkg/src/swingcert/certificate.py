"""Region-of-attraction certificate for the droop-only reduced model.

The certificate energy is the droop-weighted squared angle deviation
from the stable equilibrium,

    H(theta) = sum_m 0.5 * D_m * (theta*_m - theta_m)^2,

and its rate along the reduced flow collapses, using K's symmetry, to a
sum over coupled pairs:

    Hdot = sum_{m<n} K_mn (d_mn - d*_mn) (sin d*_mn - sin d_mn),

with d_mn the pairwise angle difference. Each pair term is strictly
negative while d_mn stays inside the open interval between the two
unstable equilibria adjacent to d*_mn, i.e. (-pi - d*_mn, pi - d*_mn);
the box test below checks exactly that interval for every coupled pair.

H is defined in the fixed frame in which the equilibrium was pinned.
Trajectory samples are evaluated as-is (no per-sample re-pinning): the
reduced flow conserves the droop-weighted angle sum, so descent of H
holds along reduced trajectories in that frame. Uniform shifts of the
equilibrium have zero rate by construction; that is a property of the
pairwise form, not a defect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TrajectoryRecord, coupling_flow
from .equilibria import EquilibriumPoint, balanced_references, deflated_spectrum
from .errors import CertificateError, FrameError, ValidationError
from .network import NetworkModel, coupled_pairs

# |pairwise - direct| agreement required of the two rate forms
_FORM_AGREEMENT = 1e-9


@dataclass(frozen=True)
class BoxStatus:
    """Result of the pairwise interval test."""

    inside: bool
    min_margin: float
    binding_pair: tuple | None


@dataclass(frozen=True)
class CertificateSample:
    time: float
    h_value: float
    h_rate: float
    in_box: bool
    min_margin: float
    binding_pair: tuple | None


@dataclass(frozen=True)
class TimescaleReport:
    """Frequency-subsystem time constant against the angle-flow rate.

    ``exponent`` is the largest magnitude, over the sampled states, of
    the deflated reduced-Jacobian spectral abscissa: a cheap local proxy
    for the reduced flow's characteristic exponent along the transient.
    ``separated`` flags ``tau_max * exponent < threshold``.
    """

    tau_max: float
    exponent: float
    ratio: float
    separated: bool
    threshold: float = 0.1


def _require_pinned(eq: EquilibriumPoint):
    if abs(eq.theta_star[eq.reference]) != 0.0:
        raise FrameError(
            f"equilibrium is not pinned: theta*[{eq.reference}] = "
            f"{eq.theta_star[eq.reference]!r} (expected exactly 0)"
        )


def _check_theta(theta, eq: EquilibriumPoint) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != eq.theta_star.shape:
        raise ValidationError(
            f"angle vector shape {theta.shape} does not match equilibrium "
            f"{eq.theta_star.shape}"
        )
    return theta


def lyapunov_value(theta, eq: EquilibriumPoint, model: NetworkModel) -> float:
    """Certificate energy H at an angle vector (same fixed frame as eq)."""
    _require_pinned(eq)
    theta = _check_theta(theta, eq)
    dev = eq.theta_star - theta
    return float(0.5 * (model.droop * dev**2).sum())


def lyapunov_rate(theta, eq: EquilibriumPoint, model: NetworkModel, k=None) -> float:
    """dH/dt along the reduced flow, evaluated at ``theta``.

    Computed in the pairwise form and cross-checked against the direct
    chain-rule form sum_m (theta_m - theta*_m)(P*_m - flow_m); a
    disagreement beyond 1e-9 means the coupling matrix lost symmetry or
    the equilibrium is stale for this ``k``, and raises.
    """
    _require_pinned(eq)
    theta = _check_theta(theta, eq)
    k_arr = eq.k_matrix if k is None else np.asarray(k, dtype=float)

    delta = theta[:, None] - theta[None, :]
    delta_star = eq.theta_star[:, None] - eq.theta_star[None, :]
    terms = k_arr * (delta - delta_star) * (np.sin(delta_star) - np.sin(delta))
    iu, ju = np.triu_indices(theta.size, k=1)
    pairwise = float(terms[iu, ju].sum())

    p_bal, _ = balanced_references(model)
    direct = float(((theta - eq.theta_star) * (p_bal - coupling_flow(theta, k_arr))).sum())
    scale = max(1.0, abs(pairwise), abs(direct))
    if abs(pairwise - direct) > _FORM_AGREEMENT * scale:
        raise CertificateError(
            f"certificate rate forms disagree (pairwise {pairwise:.12e} vs "
            f"direct {direct:.12e}): broken K symmetry or stale equilibrium"
        )
    return pairwise


def in_uep_box(theta, eq: EquilibriumPoint) -> BoxStatus:
    """Strict pairwise interval test against the adjacent unstable points.

    True when every coupled pair angle lies strictly inside
    (-pi - d*_mn, pi - d*_mn). ``min_margin`` is the smallest distance
    to an interval end over all coupled pairs (negative once outside),
    and ``binding_pair`` names the pair attaining it.
    """
    _require_pinned(eq)
    theta = _check_theta(theta, eq)
    pairs = coupled_pairs(eq.k_matrix)
    if not pairs:
        return BoxStatus(inside=True, min_margin=float("inf"), binding_pair=None)
    min_margin = float("inf")
    binding = None
    for m, q in pairs:
        d_star = eq.theta_star[m] - eq.theta_star[q]
        d = theta[m] - theta[q]
        lower = -np.pi - d_star
        upper = np.pi - d_star
        margin = min(d - lower, upper - d)
        if margin < min_margin:
            min_margin = margin
            binding = (m, q)
    return BoxStatus(inside=bool(min_margin > 0.0), min_margin=float(min_margin),
                     binding_pair=binding)


def certificate_trace(trajectory: TrajectoryRecord, eq: EquilibriumPoint,
                      model: NetworkModel, k=None, start_time: float | None = None):
    """Certificate samples (H, Hdot, box status) along a trajectory.

    Samples before ``start_time`` are skipped, so a post-fault trace can
    be taken against the post-fault equilibrium only where it applies.
    """
    start = trajectory.times[0] if start_time is None else start_time
    begin = trajectory.first_index_at(start)
    samples = []
    for i in range(begin, trajectory.n_samples):
        theta = trajectory.theta[i]
        box = in_uep_box(theta, eq)
        samples.append(CertificateSample(
            time=float(trajectory.times[i]),
            h_value=lyapunov_value(theta, eq, model),
            h_rate=lyapunov_rate(theta, eq, model, k),
            in_box=box.inside,
            min_margin=box.min_margin,
            binding_pair=box.binding_pair,
        ))
    return samples


def timescale_ratio(model: NetworkModel, trajectory: TrajectoryRecord, k=None,
                    threshold: float = 0.1, max_evaluations: int = 2000) -> TimescaleReport:
    """Timescale-separation report for a transient trajectory.

    ``tau_max`` is max_m J_m/D_m. The flow exponent is estimated as the
    largest spectral-abscissa magnitude of the deflated reduced Jacobian
    over the sampled states (thinned to at most ``max_evaluations``
    evaluations, endpoints always included).
    """
    if trajectory.n_samples == 0:
        raise ValidationError("cannot assess timescales of an empty trajectory")
    if (model.droop <= 0.0).any():
        raise ValidationError("timescale ratio needs D > 0 on every machine")
    k_arr = model.k_matrix if k is None else np.asarray(k, dtype=float)
    tau_max = float((model.inertia / model.droop).max())

    n_s = trajectory.n_samples
    if n_s <= max_evaluations:
        idx = range(n_s)
    else:
        idx = np.unique(np.linspace(0, n_s - 1, max_evaluations).astype(int))
    exponent = 0.0
    for i in idx:
        spectrum = deflated_spectrum(trajectory.theta[i], model, k_arr)
        if spectrum.size:
            exponent = max(exponent, abs(float(spectrum.max())))
    ratio = tau_max * exponent
    return TimescaleReport(tau_max=tau_max, exponent=exponent, ratio=ratio,
                           separated=bool(ratio < threshold), threshold=threshold)
