"""Document formats and artifact writers.

Networks and scenarios are YAML documents; results are CSV files plus
plain-text reports. All numeric output goes through one 9-significant-
digit formatter so repeated runs produce byte-identical artifacts, and
every file is written atomically (temp file, then rename).

Network document, bus/branch form::

    name: two-bus
    buses:
      - {id: gfm1, kind: machine, voltage: 1.0, p_ref: 0.5, inertia: 1.0, droop: 1.0}
      - {id: mid, kind: passive}
    branches:
      - {from: gfm1, to: mid, susceptance: 2.0}

or direct coupling form::

    machines:
      - {id: gfm1, p_ref: 0.5, inertia: 1.0, droop: 1.0}
    k_matrix:
      - [0.0, 1.0]
      - [1.0, 0.0]

Scenario document::

    network: two_area.yaml      # resolved relative to this file
    mode: full
    fault: {kind: line, at: [gfm2, gfm3], during_factor: 0.0}
    t_fault: 0.1
    t_clear: 0.6
    horizon: 8.0
    tau: {value: 0.0133, keep: droop}   # optional uniform override
"""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np
import yaml

from .errors import ValidationError
from .network import Branch, Bus, NetworkModel, build_network
from .scenarios import (FaultScenario, bus_fault_scenario, line_fault_scenario)


def fmt(x) -> str:
    """Fixed 9-significant-digit decimal form used in every artifact."""
    return f"{float(x):.9g}"


def atomic_write_text(path, text: str):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# network documents
# ---------------------------------------------------------------------------

def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise ValidationError(f"{where}: missing required field {key!r}")
    return entry[key]


def _num(entry: dict, key: str, where: str, default=None):
    if key not in entry:
        if default is None:
            raise ValidationError(f"{where}: missing required field {key!r}")
        return float(default)
    try:
        return float(entry[key])
    except (TypeError, ValueError):
        raise ValidationError(
            f"{where}: field {key!r} must be a number, got {entry[key]!r}"
        ) from None


def network_from_document(doc: dict, name="") -> NetworkModel:
    if not isinstance(doc, dict):
        raise ValidationError("network document must be a mapping")
    has_buses = "buses" in doc
    has_k = "k_matrix" in doc
    if has_buses == has_k:
        raise ValidationError(
            "network document needs either 'buses'+'branches' or "
            "'machines'+'k_matrix', not both or neither"
        )
    doc_name = str(doc.get("name", name))

    if has_buses:
        buses = []
        for entry in doc.get("buses") or []:
            bus_id = str(_require(entry, "id", "bus"))
            where = f"bus {bus_id!r}"
            kind = str(entry.get("kind", "machine"))
            if kind == "machine":
                buses.append(Bus(
                    id=bus_id, kind=kind,
                    voltage_mag=_num(entry, "voltage", where, default=1.0),
                    p_ref=_num(entry, "p_ref", where, default=0.0),
                    inertia=_num(entry, "inertia", where, default=0.0),
                    droop=_num(entry, "droop", where),
                ))
            else:
                buses.append(Bus(
                    id=bus_id, kind=kind,
                    voltage_mag=_num(entry, "voltage", where, default=1.0),
                ))
        branches = []
        for entry in doc.get("branches") or []:
            where = "branch"
            branches.append(Branch(
                from_bus=str(_require(entry, "from", where)),
                to_bus=str(_require(entry, "to", where)),
                susceptance=_num(entry, "susceptance", where),
            ))
        return build_network(buses, branches, name=doc_name)

    machines = doc.get("machines")
    if not machines:
        raise ValidationError("direct-coupling document needs a 'machines' list")
    ids, p_ref, inertia, droop = [], [], [], []
    for entry in machines:
        mid = str(_require(entry, "id", "machine"))
        where = f"machine {mid!r}"
        ids.append(mid)
        p_ref.append(_num(entry, "p_ref", where, default=0.0))
        inertia.append(_num(entry, "inertia", where, default=0.0))
        d = _num(entry, "droop", where)
        if d <= 0.0:
            raise ValidationError(f"{where}: droop must be > 0, got {d}")
        droop.append(d)
    k = np.asarray(doc["k_matrix"], dtype=float)
    return NetworkModel.from_k(ids, p_ref, inertia, droop, k, name=doc_name)


def parse_network_file(path) -> NetworkModel:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        raise ValidationError(f"{path}: not valid YAML: {err}") from None
    try:
        return network_from_document(doc, name=path.stem)
    except ValidationError as err:
        raise ValidationError(f"{path}: {err}") from None


def network_to_document(model: NetworkModel) -> dict:
    """Canonical direct-coupling document for a model."""
    def r9(x):
        return float(fmt(x))
    doc = {
        "name": model.name or "network",
        "machines": [
            {"id": model.ids[i], "p_ref": r9(model.p_ref[i]),
             "inertia": r9(model.inertia[i]), "droop": r9(model.droop[i])}
            for i in range(model.n)
        ],
        "k_matrix": [[r9(v) for v in row] for row in model.k_matrix],
    }
    return doc


def serialize_network(model: NetworkModel) -> str:
    return yaml.safe_dump(network_to_document(model), sort_keys=False,
                          default_flow_style=None)


# ---------------------------------------------------------------------------
# scenario documents
# ---------------------------------------------------------------------------

def scenario_from_document(doc: dict, model: NetworkModel):
    """(model, scenario, mode) from a parsed scenario document.

    A ``tau`` override rescales the model before the scenario matrices
    are derived from it.
    """
    if not isinstance(doc, dict):
        raise ValidationError("scenario document must be a mapping")
    mode = str(doc.get("mode", "full"))
    if mode not in ("full", "reduced"):
        raise ValidationError(f"scenario mode must be full or reduced, got {mode!r}")

    tau_entry = doc.get("tau")
    if tau_entry is not None:
        if isinstance(tau_entry, dict):
            value = _num(tau_entry, "value", "tau override")
            keep = str(tau_entry.get("keep", "droop"))
        else:
            value = float(tau_entry)
            keep = "droop"
        if keep not in ("droop", "inertia"):
            raise ValidationError(f"tau override 'keep' must be droop or inertia, got {keep!r}")
        model = model.with_uniform_tau(value, keep_droop=(keep == "droop"))

    t_fault = _num(doc, "t_fault", "scenario")
    t_clear = _num(doc, "t_clear", "scenario")
    horizon = _num(doc, "horizon", "scenario")
    fault = doc.get("fault")
    if not isinstance(fault, dict):
        raise ValidationError("scenario needs a 'fault' mapping")
    kind = str(_require(fault, "kind", "fault"))
    during = _num(fault, "during_factor", "fault", default=0.0)
    post = _num(fault, "post_factor", "fault", default=1.0)
    name = str(doc.get("name", ""))

    if kind == "bus":
        at = _require(fault, "at", "fault")
        scenario = bus_fault_scenario(model, at, t_fault, t_clear, horizon,
                                      during_factor=during, post_factor=post,
                                      name=name)
    elif kind == "line":
        at = _require(fault, "at", "fault")
        if not isinstance(at, (list, tuple)) or len(at) != 2:
            raise ValidationError("line fault 'at' must name two machines")
        scenario = line_fault_scenario(model, tuple(at), t_fault, t_clear, horizon,
                                       during_factor=during, post_factor=post,
                                       name=name)
    elif kind == "matrices":
        fault_k = np.asarray(_require(fault, "during_k", "fault"), dtype=float)
        post_k = np.asarray(fault.get("post_k", model.k_matrix), dtype=float)
        scenario = FaultScenario(pre_k=model.k_matrix, fault_k=fault_k, post_k=post_k,
                                 t_fault=t_fault, t_clear=t_clear, horizon=horizon,
                                 name=name)
    else:
        raise ValidationError(f"unknown fault kind {kind!r}")
    return model, scenario, mode


def parse_scenario_file(path, model: NetworkModel | None = None):
    """(model, scenario, mode) from a scenario file.

    Unless ``model`` is supplied, the document's ``network`` entry is
    loaded, resolved relative to the scenario file.
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        raise ValidationError(f"{path}: not valid YAML: {err}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: scenario document must be a mapping")
    if model is None:
        net = doc.get("network")
        if not net:
            raise ValidationError(
                f"{path}: scenario names no 'network' file and none was supplied"
            )
        net_path = Path(net)
        if not net_path.is_absolute():
            net_path = path.parent / net_path
        model = parse_network_file(net_path)
    try:
        return scenario_from_document(doc, model)
    except ValidationError as err:
        raise ValidationError(f"{path}: {err}") from None


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trajectory_csv(trajectory) -> str:
    n = trajectory.n_machines
    header = (["time"] + [f"theta_{i}" for i in range(n)]
              + [f"omega_{i}" for i in range(n)])
    rows = []
    for i in range(trajectory.n_samples):
        rows.append([fmt(trajectory.times[i])]
                    + [fmt(v) for v in trajectory.theta[i]]
                    + [fmt(v) for v in trajectory.omega[i]])
    return _csv_text(header, rows)


def events_csv(trajectory) -> str:
    return _csv_text(["time", "label"],
                     [[fmt(t), label] for t, label in trajectory.events])


def certificate_csv(samples) -> str:
    rows = []
    for s in samples:
        pair = f"{s.binding_pair[0]}-{s.binding_pair[1]}" if s.binding_pair else ""
        rows.append([fmt(s.time), fmt(s.h_value), fmt(s.h_rate),
                     "1" if s.in_box else "0", fmt(s.min_margin), pair])
    return _csv_text(["time", "H", "Hdot", "in_box", "min_margin", "binding_pair"], rows)


def sweep_csv(rows) -> str:
    out = []
    for row in rows:
        if row.verdict is None:
            out.append([fmt(row.tau), "error", row.error, "", "", ""])
            continue
        ts = row.timescale
        out.append([
            fmt(row.tau), row.verdict.status, row.verdict.reason,
            fmt(row.verdict.max_pairwise_excursion),
            fmt(ts.ratio) if ts else "",
            ("1" if ts.separated else "0") if ts else "",
        ])
    return _csv_text(["tau", "status", "reason", "max_excursion", "ratio", "separated"], out)


def eac_curve_csv(curve) -> str:
    return _csv_text(["delta", "p_pre", "p_fault", "p_post", "p_ref"],
                     [[fmt(v) for v in row] for row in curve])


def eac_markers_csv(markers) -> str:
    return _csv_text(["name", "delta", "power"],
                     [[name, fmt(d), fmt(p)] for name, d, p in markers])


def equilibrium_report(eq, model) -> str:
    lines = [
        "equilibrium report",
        f"machines: {model.n}",
        f"reference: {eq.reference} ({model.ids[eq.reference]})",
        f"classification: {eq.classification}",
        f"residual (p.u. power, inf-norm): {fmt(eq.residual_norm)}",
        f"co-rotating offset (rad/s): {fmt(eq.omega_offset)}",
        "",
        "theta* (rad):",
    ]
    for i in range(model.n):
        lines.append(f"  {model.ids[i]:16s} {fmt(eq.theta_star[i])}")
    lines.append("")
    lines.append("coupled pair angles delta*_mn (rad):")
    for m, q, d in eq.coupled_pair_angles():
        lines.append(f"  {model.ids[m]}-{model.ids[q]:14s} {fmt(d)}")
    lines.append("")
    lines.append("deflated Jacobian spectrum (1/s):")
    for val in eq.jacobian_spectrum:
        lines.append(f"  {fmt(val)}")
    lines.append("")
    return "\n".join(lines)


def verdict_report(verdict, timescale=None) -> str:
    lines = [
        f"status: {verdict.status}",
        f"reason: {verdict.reason}",
        f"max_pairwise_excursion_rad: {fmt(verdict.max_pairwise_excursion)}",
    ]
    if verdict.pair is not None:
        lines.append(f"pair: {verdict.pair[0]}-{verdict.pair[1]}")
    if verdict.settling_time is not None:
        lines.append(f"settling_time_s: {fmt(verdict.settling_time)}")
    if verdict.diagnostic:
        lines.append(f"diagnostic: {verdict.diagnostic}")
    if timescale is not None:
        lines.append(f"tau_max_s: {fmt(timescale.tau_max)}")
        lines.append(f"flow_exponent_per_s: {fmt(timescale.exponent)}")
        lines.append(f"timescale_ratio: {fmt(timescale.ratio)}")
        lines.append(f"separated: {'yes' if timescale.separated else 'no'}")
    lines.append("")
    return "\n".join(lines)
