"""Fault scenarios, stability verdicts, clearing-time search, tau sweeps.

A scenario is three coupling matrices (pre-fault, during-fault,
post-fault) and two switch instants. Runs start at rest at the
pre-fault operating point, integrate through the switches, and are
classified against the post-fault operating point:

* unstable -- some coupled pair's angle deviation exceeded the unwind
  threshold (a pole slip), or the integration blew up;
* stable -- over the final stretch of the horizon every coupled pair is
  settled near its post-fault angle and every frequency deviation is
  small;
* inconclusive -- neither: bounded but not yet settled.

The clearing-time search bisects on the *first-swing* boundary by
default: the surviving side is "not unstable" rather than "settled",
because a lightly damped machine can stay bounded for hundreds of
seconds without meeting the settling thresholds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .certificate import certificate_trace, timescale_ratio
from .dynamics import (FULL, REDUCED, IntegratorConfig, SwitchSchedule,
                       SystemState, TrajectoryRecord, integrate)
from .equilibria import EquilibriumPoint, solve_equilibrium, synchronous_offset
from .errors import BracketError, SwingcertError, ValidationError
from .network import NetworkModel, coupled_pairs, validate_k_matrix

log = logging.getLogger(__name__)

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"

RESYNCHRONISED = "resynchronised"
POLE_SLIP = "pole_slip"
DIVERGED = "diverged"
HORIZON_EXHAUSTED = "horizon_exhausted"
NO_POST_EQUILIBRIUM = "no_post_equilibrium"


@dataclass(frozen=True)
class FaultScenario:
    """Timed three-stage topology: pre-fault, during-fault, post-fault."""

    pre_k: np.ndarray
    fault_k: np.ndarray
    post_k: np.ndarray
    t_fault: float
    t_clear: float
    horizon: float
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for attr in ("pre_k", "fault_k", "post_k"):
            arr = np.asarray(getattr(self, attr), dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)
        if not 0.0 <= self.t_fault < self.t_clear < self.horizon:
            raise ValidationError(
                f"need 0 <= t_fault < t_clear < horizon, got "
                f"{self.t_fault}, {self.t_clear}, {self.horizon}"
            )

    def validate(self, n: int):
        # the during-fault topology may legally split the network
        validate_k_matrix(self.pre_k, n, require_connected=n > 1)
        validate_k_matrix(self.fault_k, n, require_connected=False)
        validate_k_matrix(self.post_k, n, require_connected=n > 1)

    def schedule(self) -> SwitchSchedule:
        return SwitchSchedule([
            (self.t_fault, self.fault_k, "fault_on"),
            (self.t_clear, self.post_k, "clear"),
        ])

    def with_clearing_time(self, t_clear: float) -> "FaultScenario":
        return replace(self, t_clear=t_clear)


def bus_fault_scenario(model: NetworkModel, bus, t_fault: float, t_clear: float,
                       horizon: float, during_factor: float = 0.0,
                       post_factor: float = 1.0, name="") -> FaultScenario:
    """Bolted (or scaled) fault at one machine's terminal couplings."""
    m = model.index_of(bus) if isinstance(bus, str) else int(bus)
    pre = model.k_matrix.copy()
    fault = pre.copy()
    fault[m, :] *= during_factor
    fault[:, m] *= during_factor
    post = pre.copy()
    if post_factor != 1.0:
        post[m, :] *= post_factor
        post[:, m] *= post_factor
    return FaultScenario(pre_k=pre, fault_k=fault, post_k=post, t_fault=t_fault,
                         t_clear=t_clear, horizon=horizon,
                         name=name or f"bus-fault@{model.ids[m]}")


def line_fault_scenario(model: NetworkModel, pair, t_fault: float, t_clear: float,
                        horizon: float, during_factor: float = 0.0,
                        post_factor: float = 1.0, name="") -> FaultScenario:
    """Fault on one coupling: scaled during the fault, optionally removed after."""
    m, q = (model.index_of(b) if isinstance(b, str) else int(b) for b in pair)
    if model.k_matrix[m, q] == 0.0:
        raise ValidationError(f"machines {model.ids[m]} and {model.ids[q]} are not coupled")
    pre = model.k_matrix.copy()
    fault = pre.copy()
    fault[m, q] *= during_factor
    fault[q, m] *= during_factor
    post = pre.copy()
    post[m, q] *= post_factor
    post[q, m] *= post_factor
    return FaultScenario(pre_k=pre, fault_k=fault, post_k=post, t_fault=t_fault,
                         t_clear=t_clear, horizon=horizon,
                         name=name or f"line-fault@{model.ids[m]}-{model.ids[q]}")


@dataclass(frozen=True)
class VerdictThresholds:
    """Settling and pole-slip thresholds for trajectory classification."""

    settle_angle: float = 0.05      # rad, per coupled pair, final window
    settle_omega: float = 0.05      # rad/s, every machine, final window
    unwind: float = 2.0 * math.pi   # rad, pairwise deviation = pole slip
    settle_window: float = 0.1      # final fraction of the horizon checked


@dataclass(frozen=True)
class StabilityVerdict:
    status: str
    reason: str
    pair: tuple | None = None
    max_pairwise_excursion: float = 0.0
    settling_time: float | None = None
    diagnostic: str = ""

    def __post_init__(self):
        if self.status == STABLE and self.reason != RESYNCHRONISED:
            raise ValidationError("a stable verdict must be 'resynchronised'")


def classify_stability(trajectory: TrajectoryRecord, post_eq: EquilibriumPoint,
                       thresholds: VerdictThresholds | None = None) -> StabilityVerdict:
    """Verdict for a trajectory against the post-fault operating point.

    Pairwise deviations are measured on coupled pairs of the post-fault
    coupling matrix, against their post-fault equilibrium differences,
    on unwrapped angles.
    """
    th = thresholds or VerdictThresholds()
    pairs = coupled_pairs(post_eq.k_matrix)
    theta = trajectory.theta
    times = trajectory.times

    max_exc = 0.0
    slip_pair = None
    slip_idx = None
    two_pi = 2.0 * math.pi
    dev_rows = np.zeros((trajectory.n_samples, max(len(pairs), 1)))
    for col, (m, q) in enumerate(pairs):
        dev = np.abs((theta[:, m] - theta[:, q]) - post_eq.pair_angle(m, q))
        dev_rows[:, col] = dev
        peak = float(dev.max())
        max_exc = max(max_exc, peak)
        crossed = np.nonzero(dev > th.unwind)[0]
        if crossed.size and (slip_idx is None or crossed[0] < slip_idx):
            slip_idx = int(crossed[0])
            slip_pair = (m, q)

    if slip_pair is not None:
        return StabilityVerdict(status=UNSTABLE, reason=POLE_SLIP, pair=slip_pair,
                                max_pairwise_excursion=max_exc)
    if trajectory.diverged:
        return StabilityVerdict(status=UNSTABLE, reason=DIVERGED,
                                max_pairwise_excursion=max_exc,
                                diagnostic="integration left the finite range")

    t0, t_end = float(times[0]), float(times[-1])
    window_start = t_end - th.settle_window * (t_end - t0)
    in_window = times >= window_start - 1e-12
    # settledness is measured modulo whole pole turns: a pair captured at
    # a 2*pi-shifted balance point has slipped even though its deviation
    # approaches the unwind threshold from below and never crosses it
    turns = np.round(dev_rows / two_pi)
    dev_mod = np.abs(dev_rows - turns * two_pi)
    settled = (dev_mod < th.settle_angle).all(axis=1) & \
              (np.abs(trajectory.omega) < th.settle_omega).all(axis=1)
    if settled[in_window].all():
        slipped = np.nonzero(turns[-1] >= 1.0)[0]
        if slipped.size:
            return StabilityVerdict(status=UNSTABLE, reason=POLE_SLIP,
                                    pair=pairs[int(slipped[0])],
                                    max_pairwise_excursion=max_exc,
                                    diagnostic="settled at a pole-slipped balance point")
        # earliest sample after which the run stays settled
        idx = trajectory.n_samples - 1
        while idx > 0 and settled[idx - 1]:
            idx -= 1
        return StabilityVerdict(status=STABLE, reason=RESYNCHRONISED,
                                max_pairwise_excursion=max_exc,
                                settling_time=float(times[idx]))
    return StabilityVerdict(status=INCONCLUSIVE, reason=HORIZON_EXHAUSTED,
                            max_pairwise_excursion=max_exc)


@dataclass
class ScenarioResult:
    trajectory: TrajectoryRecord
    verdict: StabilityVerdict
    certificate: list
    pre_eq: EquilibriumPoint | None
    post_eq: EquilibriumPoint | None
    timescale: object = None


def run_scenario(model: NetworkModel, scenario: FaultScenario, mode: str = FULL,
                 config: IntegratorConfig | None = None,
                 thresholds: VerdictThresholds | None = None,
                 separation_threshold: float = 0.1,
                 diagnostics: bool = True) -> ScenarioResult:
    """Simulate a fault scenario and certify the outcome.

    The run starts at rest at the pre-fault operating point. The verdict
    is taken against the post-fault operating point; certificate samples
    (H, Hdot, box status) are recorded from the clearing instant onward
    against that same point. An unsolvable post-fault balance yields an
    inconclusive verdict with a diagnostic instead of raising.
    ``diagnostics=False`` skips the certificate and timescale reports
    (repeated verdict-only runs, e.g. inside the clearing-time search).
    """
    scenario.validate(model.n)
    offset = synchronous_offset(model)
    if abs(offset) > 1e-12 * max(1.0, float(np.abs(model.p_ref).max())):
        log.warning("unbalanced model: shifting to co-rotating frame "
                    "(offset %.6g rad/s)", offset)
        model = model.with_params(p_ref=model.p_ref - model.droop * offset)

    pre_eq = solve_equilibrium(model, scenario.pre_k)
    try:
        post_eq = solve_equilibrium(model, scenario.post_k, guess=pre_eq.theta_star)
    except SwingcertError as err:
        verdict = StabilityVerdict(
            status=INCONCLUSIVE, reason=NO_POST_EQUILIBRIUM,
            diagnostic=f"post-fault equilibrium unsolvable: {err}")
        return ScenarioResult(trajectory=None, verdict=verdict, certificate=[],
                              pre_eq=pre_eq, post_eq=None)

    initial = SystemState.at_rest(pre_eq.theta_star, time=0.0)
    trajectory = integrate(model, initial, scenario.schedule(), t_end=scenario.horizon,
                           config=config, mode=mode)
    verdict = classify_stability(trajectory, post_eq, thresholds)
    certificate = []
    report = None
    if diagnostics:
        certificate = certificate_trace(trajectory, post_eq, model, scenario.post_k,
                                        start_time=scenario.t_clear)
        report = timescale_ratio(model, trajectory, scenario.post_k,
                                 threshold=separation_threshold)
    return ScenarioResult(trajectory=trajectory, verdict=verdict,
                          certificate=certificate, pre_eq=pre_eq, post_eq=post_eq,
                          timescale=report)


def cct_search(model: NetworkModel, scenario_template: FaultScenario, mode: str,
               t_lo: float, t_hi: float, tol: float = 1e-3,
               config: IntegratorConfig | None = None,
               thresholds: VerdictThresholds | None = None,
               strict: bool = False) -> float:
    """Bisect the clearing time on the first-swing stability boundary.

    ``t_lo`` must survive and ``t_hi`` must be unstable, both measured
    against the fault template with the clearing instant replaced; the
    bracket is validated before bisecting and a BracketError reports
    both verdicts otherwise. "Survives" means "not unstable" unless
    ``strict`` is set, in which case the low side must fully settle.
    Returns the last surviving clearing time once the bracket width is
    within ``tol``.
    """
    if not (scenario_template.t_fault < t_lo <= t_hi < scenario_template.horizon):
        raise ValidationError(
            f"bracket [{t_lo}, {t_hi}] must lie after the fault at "
            f"{scenario_template.t_fault} and before the horizon "
            f"{scenario_template.horizon}")
    if tol <= 0.0:
        raise ValidationError(f"tol must be positive, got {tol}")

    def survives(t_clear: float) -> bool:
        result = run_scenario(model, scenario_template.with_clearing_time(t_clear),
                              mode=mode, config=config, thresholds=thresholds,
                              diagnostics=False)
        if strict:
            return result.verdict.status == STABLE
        return result.verdict.status != UNSTABLE

    lo_result = run_scenario(model, scenario_template.with_clearing_time(t_lo),
                             mode=mode, config=config, thresholds=thresholds,
                             diagnostics=False)
    hi_result = run_scenario(model, scenario_template.with_clearing_time(t_hi),
                             mode=mode, config=config, thresholds=thresholds,
                             diagnostics=False)
    lo_ok = lo_result.verdict.status != UNSTABLE if not strict \
        else lo_result.verdict.status == STABLE
    hi_bad = hi_result.verdict.status == UNSTABLE
    if not lo_ok or not hi_bad:
        raise BracketError(
            f"invalid bracket: verdict({t_lo}) = {lo_result.verdict.status}/"
            f"{lo_result.verdict.reason}, verdict({t_hi}) = "
            f"{hi_result.verdict.status}/{hi_result.verdict.reason}",
            lo_verdict=lo_result.verdict, hi_verdict=hi_result.verdict)

    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        if survives(mid):
            t_lo = mid
        else:
            t_hi = mid
    return t_lo


@dataclass(frozen=True)
class SweepRow:
    tau: float
    verdict: StabilityVerdict | None
    timescale: object = None
    error: str = ""


def tau_sweep(model: NetworkModel, scenario: FaultScenario, taus,
              keep_droop: bool = True, mode: str = FULL,
              config: IntegratorConfig | None = None,
              thresholds: VerdictThresholds | None = None,
              separation_threshold: float = 0.1):
    """Re-run one scenario over uniform machine time constants.

    ``keep_droop=True`` holds D and sets J = tau * D per machine; with
    ``keep_droop=False`` J is held and D = J / tau. Failures are
    reported per row and do not stop the sweep; rows keep input order.
    """
    rows = []
    for tau in taus:
        try:
            scaled = model.with_uniform_tau(float(tau), keep_droop=keep_droop)
            result = run_scenario(scaled, scenario, mode=mode, config=config,
                                  thresholds=thresholds,
                                  separation_threshold=separation_threshold)
            rows.append(SweepRow(tau=float(tau), verdict=result.verdict,
                                 timescale=result.timescale))
        except SwingcertError as err:
            log.warning("tau sweep row tau=%g failed: %s", tau, err)
            rows.append(SweepRow(tau=float(tau), verdict=None, error=str(err)))
    return rows


# ---------------------------------------------------------------------------
# reference fixtures
# ---------------------------------------------------------------------------

# Two-area surrogate: two tightly coupled pairs joined by one weak tie,
# gfm1--gfm2 ~~tie~~ gfm3--gfm4. Area one exports 0.2 pu over the tie.
# The default (J, D) is the quasi-inertia-free configuration; sweeps and
# the case table below derive the other configurations from it.
_TWO_AREA_IDS = ("gfm1", "gfm2", "gfm3", "gfm4")
_TWO_AREA_PREF = (0.28, -0.08, 0.08, -0.28)
_K_INTRA = 0.89
_K_TIE = 0.40
_DROOP_FAST = 0.0567          # primary-control sizing for the fast cases
TAU_HIGH_INERTIA = 79.6       # s
TAU_INERTIA_FREE = 1.33e-3    # s
TAU_QUASI_INERTIA_FREE = 13.3e-3  # s
_INERTIA_HIGH_CASE = 2.5e-3   # J for the high-inertia, low-droop case


def two_area_surrogate(tau: float = TAU_QUASI_INERTIA_FREE,
                       droop: float = _DROOP_FAST) -> NetworkModel:
    """Four-machine two-area model with a uniform time constant."""
    n = 4
    k = np.zeros((n, n))
    for m, q, val in ((0, 1, _K_INTRA), (2, 3, _K_INTRA), (1, 2, _K_TIE)):
        k[m, q] = k[q, m] = val
    d = np.full(n, droop)
    return NetworkModel(
        ids=_TWO_AREA_IDS,
        p_ref=np.array(_TWO_AREA_PREF),
        inertia=tau * d,
        droop=d,
        k_matrix=k,
        name=f"two-area(tau={tau:g})",
    )


def paper_case_models():
    """The three (J, D) configurations of the two-area study.

    The fast cases share one droop sizing and differ only in inertia
    (time constants 1.33 ms and 13.3 ms); the high-inertia case combines
    large inertia with a weak droop at tau = 79.6 s. Returns
    [(label, tau, model)] in sweep order (fast first).
    """
    base = two_area_surrogate()
    high = base.with_params(
        inertia=np.full(base.n, _INERTIA_HIGH_CASE),
        droop=np.full(base.n, _INERTIA_HIGH_CASE / TAU_HIGH_INERTIA),
        name=f"two-area(tau={TAU_HIGH_INERTIA:g})",
    )
    return [
        ("inertia_free", TAU_INERTIA_FREE,
         two_area_surrogate(tau=TAU_INERTIA_FREE)),
        ("quasi_inertia_free", TAU_QUASI_INERTIA_FREE, base),
        ("high_inertia_low_droop", TAU_HIGH_INERTIA, high),
    ]


def local_fault(model: NetworkModel, t_fault: float = 0.1,
                cycles: float = 10.0, system_hz: float = 60.0,
                horizon: float = 8.0) -> FaultScenario:
    """Bolted fault at the first machine, cleared after a cycle count."""
    t_clear = t_fault + cycles / system_hz
    return bus_fault_scenario(model, 0, t_fault, t_clear, horizon,
                              name="local-mode")


def tie_fault(model: NetworkModel, t_fault: float = 0.1,
              duration: float = 0.5, horizon: float = 8.0) -> FaultScenario:
    """Open the inter-area tie for ``duration`` seconds."""
    return line_fault_scenario(model, (1, 2), t_fault, t_fault + duration,
                               horizon, name="inter-area-mode")


def ring3(tau: float = 0.01, droop: float = 1.0, coupling: float = 1.0) -> NetworkModel:
    """Three identical machines on a ring; handy small test system."""
    k = np.full((3, 3), coupling)
    np.fill_diagonal(k, 0.0)
    d = np.full(3, droop)
    return NetworkModel(
        ids=("m1", "m2", "m3"),
        p_ref=np.array([0.2, 0.1, -0.3]),
        inertia=tau * d,
        droop=d,
        k_matrix=k,
        name=f"ring3(tau={tau:g})",
    )
