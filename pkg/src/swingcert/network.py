"""Network models for droop-controlled machine dynamics.

Everything is per-unit on a common base. A network is given either as
buses and lossless inductive branches, from which passive nodes are
eliminated by Kron reduction, or directly as a machine list plus a
synchronisation-coefficient matrix ``K``. ``K[m, n]`` is the peak
electric power machine ``m`` can exchange with machine ``n``
(``V_m * V_n * B_mn`` for the equivalent branch susceptance ``B_mn``);
it is symmetric with a zero diagonal, and the graph of its nonzero
entries must be connected for a model to be valid.

Voltage magnitudes are absorbed into ``K`` at build time; models carry
only machine parameters (inertia ``J``, droop ``D``, power reference)
and ``K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConnectivityError, ReductionError, ValidationError

MACHINE = "machine"
PASSIVE = "passive"

# absolute floor below which a reduced coupling is treated as zero
_COUPLING_EPS = 1e-12


@dataclass(frozen=True)
class Bus:
    """One network node: a droop-controlled machine or a passive junction."""

    id: str
    kind: str = MACHINE
    voltage_mag: float = 1.0
    p_ref: float = 0.0
    inertia: float = 0.0
    droop: float = 0.0

    def __post_init__(self):
        if self.kind not in (MACHINE, PASSIVE):
            raise ValidationError(f"bus {self.id!r}: unknown kind {self.kind!r}")
        if not self.voltage_mag > 0.0:
            raise ValidationError(
                f"bus {self.id!r}: voltage_mag must be > 0, got {self.voltage_mag}"
            )
        if self.kind == MACHINE:
            if not self.droop > 0.0:
                raise ValidationError(
                    f"bus {self.id!r}: machine droop must be > 0, got {self.droop}"
                )
            if self.inertia < 0.0:
                raise ValidationError(
                    f"bus {self.id!r}: machine inertia must be >= 0, got {self.inertia}"
                )


@dataclass(frozen=True)
class Branch:
    """Lossless inductive line between two buses."""

    from_bus: str
    to_bus: str
    susceptance: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"branch {self.from_bus!r}: self-loops not allowed")
        if not self.susceptance > 0.0:
            raise ValidationError(
                f"branch {self.from_bus!r}-{self.to_bus!r}: susceptance must be > 0, "
                f"got {self.susceptance}"
            )


@dataclass(frozen=True)
class NetworkModel:
    """Machine parameters plus the synchronisation-coefficient matrix.

    Immutable after construction; arrays are marked read-only so a model
    can be shared across concurrent simulations.

    Construction accepts ``droop == 0`` so that undamped energy studies
    remain expressible, but any droop-divided (reduced-model) operation
    rejects such models; user-facing builders require strictly positive
    droop.
    """

    ids: tuple
    p_ref: np.ndarray
    inertia: np.ndarray
    droop: np.ndarray
    k_matrix: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        n = len(ids)
        if n == 0:
            raise ValidationError("a model needs at least one machine")
        if len(set(ids)) != n:
            raise ValidationError("machine ids must be unique")
        object.__setattr__(self, "ids", ids)
        for attr in ("p_ref", "inertia", "droop"):
            arr = np.asarray(getattr(self, attr), dtype=float).copy()
            if arr.shape != (n,):
                raise ValidationError(f"{attr} must have shape ({n},), got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValidationError(f"{attr} contains non-finite entries")
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)
        if (self.inertia < 0.0).any():
            raise ValidationError("inertia must be >= 0 for every machine")
        if (self.droop < 0.0).any():
            raise ValidationError("droop must be >= 0 for every machine")
        k = np.asarray(self.k_matrix, dtype=float).copy()
        validate_k_matrix(k, n, ids=ids)
        k.flags.writeable = False
        object.__setattr__(self, "k_matrix", k)

    @property
    def n(self) -> int:
        return len(self.ids)

    def index_of(self, bus_id: str) -> int:
        try:
            return self.ids.index(bus_id)
        except ValueError:
            raise ValidationError(f"unknown machine id {bus_id!r}") from None

    def with_params(self, p_ref=None, inertia=None, droop=None, name=None):
        """Copy of the model with some machine parameter arrays replaced."""
        return NetworkModel(
            ids=self.ids,
            p_ref=self.p_ref if p_ref is None else np.asarray(p_ref, dtype=float),
            inertia=self.inertia if inertia is None else np.asarray(inertia, dtype=float),
            droop=self.droop if droop is None else np.asarray(droop, dtype=float),
            k_matrix=self.k_matrix,
            name=self.name if name is None else name,
        )

    def with_uniform_tau(self, tau: float, keep_droop: bool = True):
        """Rescale so every machine has time constant ``tau = J/D``.

        ``keep_droop=True`` keeps D and sets ``J = tau * D``; otherwise J
        is kept and ``D = J / tau``.
        """
        if tau < 0.0:
            raise ValidationError(f"tau must be >= 0, got {tau}")
        if keep_droop:
            return self.with_params(inertia=tau * self.droop)
        if tau == 0.0:
            raise ValidationError("tau = 0 with keep_droop=False would need D = inf")
        return self.with_params(droop=self.inertia / tau)

    @classmethod
    def from_k(cls, ids, p_ref, inertia, droop, k_matrix, name=""):
        """Build a model from a user-supplied K matrix.

        Near-symmetric input (relative skew below 1e-12) is symmetrized
        to absorb rounding; anything worse is rejected.
        """
        k = np.asarray(k_matrix, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValidationError(f"k_matrix must be square, got shape {k.shape}")
        skew = np.abs(k - k.T).max()
        scale = max(np.abs(k).max(), 1.0)
        if skew > 1e-12 * scale:
            raise ValidationError(
                f"k_matrix is not symmetric (max |K - K^T| = {skew:.3e})"
            )
        if skew > 0.0:
            k = 0.5 * (k + k.T)
        return cls(ids=tuple(ids), p_ref=p_ref, inertia=inertia, droop=droop,
                   k_matrix=k, name=name)


def coupled_pairs(k: np.ndarray):
    """Index pairs (m, n), m < n, with nonzero coupling."""
    m_idx, n_idx = np.nonzero(np.triu(k, k=1))
    return list(zip(m_idx.tolist(), n_idx.tolist()))


def _components(adjacency: np.ndarray):
    """Connected components of a boolean adjacency matrix, as index lists."""
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in np.nonzero(adjacency[v])[0]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        comps.append(sorted(comp))
    return comps


def validate_k_matrix(k: np.ndarray, n: int, ids=None, require_connected: bool = True):
    """Assert the structural invariants of a coupling matrix.

    Exact symmetry, zero diagonal, nonnegative finite entries and (by
    default) a connected coupling graph. Raises ValidationError /
    ConnectivityError naming the offending entries.
    """
    if k.shape != (n, n):
        raise ValidationError(f"k_matrix must have shape ({n}, {n}), got {k.shape}")
    if not np.isfinite(k).all():
        raise ValidationError("k_matrix contains non-finite entries")
    if (k != k.T).any():
        skew = np.abs(k - k.T).max()
        raise ValidationError(
            f"k_matrix must be exactly symmetric (max |K - K^T| = {skew:.3e}); "
            "symmetrize with (K + K.T)/2 before use"
        )
    if np.diag(k).any():
        raise ValidationError("k_matrix diagonal must be exactly zero")
    if (k < 0.0).any():
        m, q = np.argwhere(k < 0.0)[0]
        raise ValidationError(
            f"k_matrix[{m}, {q}] = {k[m, q]} is negative; couplings must be >= 0"
        )
    if require_connected and n > 1:
        comps = _components(k != 0.0)
        if len(comps) > 1:
            smallest = min(comps, key=len)
            names = [ids[i] if ids else str(i) for i in smallest]
            raise ConnectivityError(
                "coupling graph is disconnected; isolated component: "
                + ", ".join(names),
                component=names,
            )


def kron_reduce(susceptance_matrix: np.ndarray, retained) -> np.ndarray:
    """Eliminate non-retained nodes from a branch-susceptance matrix.

    ``susceptance_matrix[m, n]`` is the (nonnegative) line susceptance
    between nodes m and n, zero on the diagonal. Elimination is the
    Schur complement on the nodal susceptance Laplacian; the result is
    converted back to branch form over the retained nodes (in ascending
    index order) and symmetrized to machine precision.

    With all nodes retained the input is returned unchanged, so the
    operation is idempotent on already-reduced matrices.
    """
    b = np.asarray(susceptance_matrix, dtype=float)
    n = b.shape[0]
    if b.ndim != 2 or b.shape != (n, n):
        raise ValidationError(f"susceptance matrix must be square, got {b.shape}")
    if np.abs(b - b.T).max() > 0.0:
        b = 0.5 * (b + b.T)
    keep = sorted(set(int(i) for i in retained))
    if not keep:
        raise ValidationError("retained index set must not be empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValidationError(f"retained indices out of range for {n} nodes")
    drop = [i for i in range(n) if i not in set(keep)]
    if not drop:
        return np.asarray(susceptance_matrix, dtype=float).copy()

    # Every eliminated component must connect to a retained node, or the
    # eliminated Laplacian block is singular.
    sub = (b[np.ix_(drop, drop)] != 0.0)
    for comp in _components(sub):
        nodes = [drop[i] for i in comp]
        if b[np.ix_(nodes, keep)].sum() == 0.0:
            raise ReductionError(
                "cannot eliminate isolated passive nodes: "
                + ", ".join(str(i) for i in nodes),
                isolated=nodes,
            )

    lap = np.diag(b.sum(axis=1)) - b
    l_kk = lap[np.ix_(keep, keep)]
    l_kd = lap[np.ix_(keep, drop)]
    l_dd = lap[np.ix_(drop, drop)]
    reduced_lap = l_kk - l_kd @ np.linalg.solve(l_dd, l_kd.T)

    out = -reduced_lap
    np.fill_diagonal(out, 0.0)
    out = 0.5 * (out + out.T)
    out[np.abs(out) < _COUPLING_EPS] = 0.0
    return out


def sync_coefficients(voltage_mags, reduced_susceptance) -> np.ndarray:
    """Couplings K_mn = V_m * V_n * B_mn from an equivalent branch matrix."""
    v = np.asarray(voltage_mags, dtype=float)
    b = np.asarray(reduced_susceptance, dtype=float)
    if (v <= 0.0).any():
        raise ValidationError("voltage magnitudes must be > 0")
    if b.shape != (v.size, v.size):
        raise ValidationError(
            f"susceptance matrix shape {b.shape} does not match {v.size} voltages"
        )
    neg = np.triu(b, k=1) < 0.0
    if neg.any():
        m, q = np.argwhere(neg)[0]
        raise ValidationError(
            f"reduced susceptance B[{m}, {q}] = {b[m, q]} is negative; "
            "the network is not representable as lossless-inductive"
        )
    k = np.outer(v, v) * b
    np.fill_diagonal(k, 0.0)
    return 0.5 * (k + k.T)


def build_network(buses, branches, name="") -> NetworkModel:
    """Assemble a validated model from buses and branches.

    Passive buses are eliminated by Kron reduction; voltages are folded
    into the coupling matrix. Machine order follows bus order.
    """
    buses = list(buses)
    branches = list(branches)
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValidationError(f"duplicate bus ids: {', '.join(dupes)}")
    index = {b.id: i for i, b in enumerate(buses)}
    machines = [b for b in buses if b.kind == MACHINE]
    if not machines:
        raise ValidationError("a network needs at least one machine bus")

    n = len(buses)
    b_full = np.zeros((n, n))
    for br in branches:
        for end in (br.from_bus, br.to_bus):
            if end not in index:
                raise ValidationError(
                    f"branch {br.from_bus!r}-{br.to_bus!r} references unknown bus {end!r}"
                )
        i, jx = index[br.from_bus], index[br.to_bus]
        b_full[i, jx] += br.susceptance
        b_full[jx, i] += br.susceptance

    machine_idx = [index[b.id] for b in machines]
    # a single machine with no other buses is the one tolerated case of an
    # empty branch set (empty coupling matrix)
    if n > 1:
        comps = _components(b_full != 0.0)
        if len(comps) > 1:
            smallest = min(comps, key=len)
            names = [ids[i] for i in smallest]
            raise ConnectivityError(
                "network graph is disconnected; isolated component: "
                + ", ".join(names),
                component=names,
            )

    b_red = kron_reduce(b_full, machine_idx)
    volts = np.array([b.voltage_mag for b in machines])
    k = sync_coefficients(volts, b_red)
    return NetworkModel(
        ids=tuple(b.id for b in machines),
        p_ref=np.array([b.p_ref for b in machines]),
        inertia=np.array([b.inertia for b in machines]),
        droop=np.array([b.droop for b in machines]),
        k_matrix=k,
        name=name,
    )
