"""Single-machine-infinite-bus analysis: equal-area criterion and the
inertia-free extension of the admissible clearing angle.

The classic criterion balances accelerating area against decelerating
area for the undamped machine and yields the critical clearing angle in
closed form. With inertia removed and droop doing the damping, the
admissible clearing angle extends all the way to the unstable
equilibrium ``pi - asin(P*/K)``, which is strictly beyond the classic
boundary (and beyond 90 degrees).

A two-machine antisymmetric twin maps the infinite bus into the general
network machinery: two identical machines with opposite power
references and doubled (J, D) reproduce the single-machine dynamics
exactly in their angle difference, including the reduced-Jacobian
eigenvalue and the time constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoEquilibriumError, SwingcertError, ValidationError
from .network import NetworkModel


class NoCriticalAngle(SwingcertError):
    """The equal-area balance has no solution for this case.

    ``kind`` is ``"never_unstable"`` (fault too weak to destabilize) or
    ``"always_unstable"`` (no clearing angle saves the machine).
    """

    def __init__(self, message, kind):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class SmibCase:
    """One machine against an infinite bus through a three-stage fault."""

    p_ref: float
    k_pre: float
    k_fault: float
    k_post: float
    inertia: float = 1.0
    droop: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_ref:
            raise ValidationError(f"p_ref must be >= 0, got {self.p_ref}")
        if not (self.k_pre >= self.k_fault >= 0.0):
            raise ValidationError(
                f"need k_pre >= k_fault >= 0, got {self.k_pre}, {self.k_fault}"
            )
        if not self.k_post > 0.0:
            raise ValidationError(f"k_post must be > 0, got {self.k_post}")
        if not self.p_ref < self.k_post:
            raise ValidationError(
                f"p_ref = {self.p_ref} >= k_post = {self.k_post}: no post-fault "
                "operating point"
            )
        if self.p_ref > self.k_pre:
            raise ValidationError(
                f"p_ref = {self.p_ref} > k_pre = {self.k_pre}: no pre-fault "
                "operating point"
            )
        if self.inertia < 0.0 or self.droop < 0.0:
            raise ValidationError("inertia and droop must be >= 0")


def smib_equilibria(p_ref: float, k: float):
    """Stable and unstable equilibrium angles (asin(p/k), pi - asin(p/k)).

    The marginal loading ``p_ref == k`` returns the degenerate pair
    (pi/2, pi/2); heavier loading has no equilibrium.
    """
    if k <= 0.0:
        raise ValidationError(f"coupling must be > 0, got {k}")
    if p_ref < 0.0:
        raise ValidationError(f"p_ref must be >= 0, got {p_ref}")
    if p_ref > k:
        raise NoEquilibriumError(
            f"p_ref = {p_ref} exceeds coupling k = {k}: no equilibrium"
        )
    sep = math.asin(p_ref / k)
    return sep, math.pi - sep


def critical_clearing_angle(case: SmibCase) -> float:
    """Classic equal-area critical clearing angle (undamped criterion).

    Solves cos(d_cr) = [P*(d_max - d_0) + k_post cos d_max
    - k_fault cos d_0] / (k_post - k_fault) and clamps the result to
    [d_0, d_max]. Raises NoCriticalAngle when the balance has no
    solution (fault too weak, or no angle saves the machine).
    """
    if not case.k_post > case.k_fault:
        raise ValidationError(
            f"critical angle needs k_post > k_fault, got {case.k_post} <= {case.k_fault}"
        )
    d0 = math.asin(case.p_ref / case.k_pre) if case.k_pre > 0 else 0.0
    dmax = math.pi - math.asin(case.p_ref / case.k_post)
    rhs = (case.p_ref * (dmax - d0) + case.k_post * math.cos(dmax)
           - case.k_fault * math.cos(d0)) / (case.k_post - case.k_fault)
    if rhs > 1.0:
        raise NoCriticalAngle(
            f"no stable clearing angle exists (balance rhs = {rhs:.6f} > 1)",
            kind="always_unstable")
    if rhs < -1.0:
        raise NoCriticalAngle(
            f"the machine cannot lose stability for this fault "
            f"(balance rhs = {rhs:.6f} < -1)", kind="never_unstable")
    d_cr = math.acos(rhs)
    return min(max(d_cr, d0), dmax)


def extended_boundary(p_ref: float, k_post: float) -> float:
    """Inertia-free admissible clearing angle: the post-fault UEP."""
    _, uep = smib_equilibria(p_ref, k_post)
    return uep


def clearing_time_for_angle(case: SmibCase, delta_clear: float, mode: str = "full",
                            step: float = 1e-5) -> float:
    """Fault-on time at which the angle first reaches ``delta_clear``.

    Closed forms are used for a bolted fault (k_fault = 0): the inertial
    response solves J dd/dt2 = -D dd/dt + P* exactly, and the reduced
    drift is linear at rate P*/D. A retained fault coupling falls back
    to fine-step numerical integration of the scalar fault-on equation.
    """
    d0 = math.asin(case.p_ref / case.k_pre) if case.k_pre > 0 else 0.0
    if delta_clear < d0:
        raise ValidationError(
            f"clearing angle {delta_clear} is below the initial angle {d0:.6f}"
        )
    if delta_clear == d0:
        return 0.0
    p = case.p_ref
    if p <= 0.0:
        raise ValidationError("fault-on drift needs p_ref > 0")

    if mode == "reduced":
        if case.droop <= 0.0:
            raise ValidationError("reduced mode needs droop > 0")
        if case.k_fault == 0.0:
            return case.droop * (delta_clear - d0) / p
        # quadrature of dt = D dd / (P* - k_fault sin d)
        grid = np.linspace(d0, delta_clear, 20001)
        drive = p - case.k_fault * np.sin(grid)
        if (drive <= 0.0).any():
            raise ValidationError(
                "fault-on reduced drift stalls before the requested angle"
            )
        return float(np.trapezoid(case.droop / drive, grid))

    if mode != "full":
        raise ValidationError(f"unknown mode {mode!r}")
    if case.inertia <= 0.0:
        raise ValidationError("full mode needs inertia > 0")
    if case.k_fault == 0.0:
        if case.droop == 0.0:
            return math.sqrt(2.0 * case.inertia * (delta_clear - d0) / p)
        tau = case.inertia / case.droop
        vel = p / case.droop

        def angle(t):
            return d0 + vel * (t - tau * (1.0 - math.exp(-t / tau)))

        t_hi = math.sqrt(2.0 * case.inertia * (delta_clear - d0) / p) + \
            case.droop * (delta_clear - d0) / p + tau
        lo, hi = 0.0, t_hi
        while angle(hi) < delta_clear:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if angle(mid) < delta_clear:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    # retained fault coupling: integrate the scalar fault-on swing
    delta, vel, t = d0, 0.0, 0.0
    while delta < delta_clear:
        acc = (p - case.droop * vel - case.k_fault * math.sin(delta)) / case.inertia
        new_vel = vel + step * acc
        new_delta = delta + step * 0.5 * (vel + new_vel)
        if new_delta >= delta_clear:
            frac = (delta_clear - delta) / (new_delta - delta)
            return t + frac * step
        delta, vel, t = new_delta, new_vel, t + step
        if t > 1e4:
            raise ValidationError("fault-on trajectory never reaches the angle")
    return t


def smib_model(p_ref: float, k: float, inertia: float = 1.0, droop: float = 1.0,
               ids=("gen", "inf")) -> NetworkModel:
    """Two-machine antisymmetric twin of the single-machine case.

    Machines carry (2J, 2D) and references (+P*, -P*); the pair angle
    theta_0 - theta_1 then satisfies the single-machine swing equation
    with the given (J, D, P*, K), so every single-machine quantity maps
    onto the pair difference of this model.
    """
    if k <= 0.0:
        raise ValidationError(f"coupling must be > 0, got {k}")
    return NetworkModel(
        ids=tuple(ids),
        p_ref=np.array([p_ref, -p_ref]),
        inertia=np.array([2.0 * inertia, 2.0 * inertia]),
        droop=np.array([2.0 * droop, 2.0 * droop]),
        k_matrix=np.array([[0.0, k], [k, 0.0]]),
        name="smib-twin",
    )


def eac_curve_dataset(case: SmibCase, n_points: int = 361):
    """Plot-ready rows for the power-angle picture.

    Returns (curve_rows, marker_rows): curve rows are
    (delta, p_pre, p_fault, p_post, p_ref) over [0, pi]; marker rows are
    (name, delta, power) for the post-fault SEP and UEP, the classic
    critical clearing angle and the extended (inertia-free) boundary.
    """
    grid = np.linspace(0.0, math.pi, n_points)
    curve = [
        (float(d), case.k_pre * math.sin(d), case.k_fault * math.sin(d),
         case.k_post * math.sin(d), case.p_ref)
        for d in grid
    ]
    sep, uep = smib_equilibria(case.p_ref, case.k_post)
    markers = [
        ("sep", sep, case.k_post * math.sin(sep)),
        ("uep", uep, case.k_post * math.sin(uep)),
    ]
    try:
        d_cr = critical_clearing_angle(case)
        markers.append(("critical_clearing_angle", d_cr, case.k_post * math.sin(d_cr)))
    except NoCriticalAngle:
        pass
    markers.append(("extended_boundary", uep, case.k_post * math.sin(uep)))
    return curve, markers
