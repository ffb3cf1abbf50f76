"""Crack state on internal boundaries and quasi-static propagation loops.

Cracking an internal boundary severs the bond between its two subdomains:
the boundary's penalty/flux terms vanish and both faces become traction-free
(and charge-free when impermeable; electrically tied when permeable).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import _get_assembler
from .errors import FpmError, InvalidInputError, PropagationError
from .solve import solve_linear, solve_newton


@dataclass
class CrackState:
    """Set of cracked internal boundaries plus replayable history."""

    cracked: frozenset = frozenset()
    permeability: str = "impermeable"
    crack_tips: tuple = ()
    history: tuple = ()  # (step, boundary_id, criterion_value)

    def __post_init__(self):
        if self.permeability not in ("impermeable", "permeable"):
            raise InvalidInputError(f"unknown permeability '{self.permeability}'")

    def with_cracked(self, step, new_ids, values, tips):
        hist = self.history + tuple(
            (step, int(e), float(v)) for e, v in zip(new_ids, values)
        )
        return replace(
            self,
            cracked=self.cracked | set(int(e) for e in new_ids),
            crack_tips=tuple(tips),
            history=hist,
        )


@dataclass(frozen=True)
class CriterionConfig:
    """Crack-growth criterion: max hoop stress or bonding-energy rate.

    ``critical_value`` may be None, in which case it is calibrated as
    ``critical_fraction`` times the maximum criterion value observed in the
    first step (deterministic given inputs).
    """

    kind: str = "max_hoop_stress"
    critical_value: float = None
    load_steps: int = 1
    candidate_scope: str = "tip_adjacent"
    critical_fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in ("max_hoop_stress", "bonding_energy_rate"):
            raise InvalidInputError(f"unknown criterion '{self.kind}'")
        if self.candidate_scope not in ("tip_adjacent", "all_boundaries"):
            raise InvalidInputError(f"unknown scope '{self.candidate_scope}'")
        if self.critical_value is not None and self.critical_value <= 0:
            raise InvalidInputError("critical_value must be positive")
        if self.load_steps < 1:
            raise InvalidInputError("load_steps must be >= 1")


def apply_crack(problem, crack):
    """ProblemSpec with the crack state baked into the assembly inputs."""
    n_int = len(problem.partition.internal_boundaries)
    for eid in crack.cracked:
        if not (0 <= eid < n_int):
            raise InvalidInputError(f"id {eid} is not an internal boundary")
    return replace(
        problem,
        cracked_edges=frozenset(crack.cracked),
        permeable=(crack.permeability == "permeable"),
    )


def crack_tips(partition, cracked):
    """Tip vertices of the cracked edge set: incident to exactly one cracked
    edge and not on the domain boundary."""
    count = {}
    for eid in cracked:
        e = partition.internal_boundaries[eid]
        count[e.v1] = count.get(e.v1, 0) + 1
        count[e.v2] = count.get(e.v2, 0) + 1
    boundary = set()
    for seg in partition.external_boundaries:
        boundary.add(seg.v1)
        boundary.add(seg.v2)
    return sorted(v for v, c in count.items() if c == 1 and v not in boundary)


def _tip_candidates(partition, cracked, tips):
    table = partition.edges_at_vertex()
    out = {}
    for v in tips:
        cands = [e for e in table.get(v, ()) if e not in cracked]
        out[v] = sorted(cands)
    return out


def hoop_stress_step(solution, problem, crack, config, step=0):
    """Advance the crack by the maximum-normal-stress rule.

    tip_adjacent: per tip, crack the single candidate with the largest
    boundary-normal stress when it exceeds the critical value (ties to the
    lower id).  all_boundaries: crack every exceeding boundary at once.
    """
    asm = _get_assembler(problem)
    part = problem.partition
    d = solution.raw
    if config.candidate_scope == "tip_adjacent":
        tips = crack_tips(part, crack.cracked)
        cands_by_tip = _tip_candidates(part, crack.cracked, tips)
        new_ids = []
        vals = []
        for v in tips:
            cands = cands_by_tip[v]
            if not cands:
                continue
            snn = asm.edge_normal_stress(d, cands)
            best = int(np.argmax(snn))
            # deterministic tie-break: lower id among equal maxima
            m = snn[best]
            for j, s in enumerate(snn):
                if s == m and cands[j] < cands[best]:
                    best = j
            if config.critical_value is None or snn[best] > config.critical_value:
                if cands[best] not in new_ids:
                    new_ids.append(cands[best])
                    vals.append(float(snn[best]))
    else:
        cands = [
            e.id for e in part.internal_boundaries if e.id not in crack.cracked
        ]
        snn = asm.edge_normal_stress(d, cands)
        thr = config.critical_value
        mask = snn > thr
        new_ids = [c for c, m in zip(cands, mask) if m]
        vals = [float(s) for s, m in zip(snn, mask) if m]
    if not new_ids:
        return crack, []
    updated = crack.with_cracked(step, new_ids, vals, ())
    tips = crack_tips(part, updated.cracked)
    tip_xy = tuple(tuple(part.vertices[v]) for v in tips)
    return replace(updated, crack_tips=tip_xy), new_ids


def ber_step(solution, previous_solution, problem, crack, config, step=0):
    """Crack every internal boundary whose bonding-energy rate exceeds the
    critical value (computed from the current solution)."""
    asm = _get_assembler(problem)
    part = problem.partition
    cands = [e.id for e in part.internal_boundaries if e.id not in crack.cracked]
    ber = asm.edge_bond_energy(solution.raw, cands)
    thr = config.critical_value
    mask = ber > thr
    new_ids = [c for c, m in zip(cands, mask) if m]
    vals = [float(b) for b, m in zip(ber, mask) if m]
    if not new_ids:
        return crack, []
    updated = crack.with_cracked(step, new_ids, vals, ())
    tips = crack_tips(part, updated.cracked)
    tip_xy = tuple(tuple(part.vertices[v]) for v in tips)
    return replace(updated, crack_tips=tip_xy), new_ids


def _criterion_values(asm, solution, problem, crack, config):
    part = problem.partition
    if config.kind == "max_hoop_stress":
        if config.candidate_scope == "tip_adjacent":
            tips = crack_tips(part, crack.cracked)
            cands = sorted(
                {e for v, es in _tip_candidates(part, crack.cracked, tips).items() for e in es}
            )
        else:
            cands = [e.id for e in part.internal_boundaries if e.id not in crack.cracked]
        if not cands:
            return np.array([]), []
        return asm.edge_normal_stress(solution.raw, cands), cands
    cands = [e.id for e in part.internal_boundaries if e.id not in crack.cracked]
    return asm.edge_bond_energy(solution.raw, cands), cands


def propagate(problem, crack0, config, observer=None):
    """Quasi-static propagation loop: assemble -> solve -> criterion -> crack.

    Returns (final CrackState, list of per-step FieldSolutions).  The load is
    held constant; the loop stops at ``config.load_steps`` or on arrest.
    Incremental stiffness updates keep the per-step cost proportional to the
    crack-front neighborhood.
    """
    problem = apply_crack(problem, crack0)
    asm = _get_assembler(problem)
    system = asm.assemble()
    crack = crack0
    if crack.cracked and not crack.crack_tips:
        tips = crack_tips(problem.partition, crack.cracked)
        crack = replace(
            crack, crack_tips=tuple(tuple(problem.partition.vertices[v]) for v in tips)
        )
    solutions = []
    config_live = config
    prev = None
    for step in range(1, config.load_steps + 1):
        try:
            if problem.theory == "full":
                sol = solve_newton(problem)
            else:
                sol = solve_linear(system)
        except FpmError as err:
            raise PropagationError(
                f"solver failed at step {step}: {err}", history=list(crack.history)
            ) from err
        solutions.append(sol)
        if observer is not None:
            observer(step, crack, sol)

        if config_live.critical_value is None:
            vals, _ = _criterion_values(asm, sol, problem, crack, config_live)
            if len(vals) == 0:
                break
            config_live = replace(
                config_live,
                critical_value=float(config_live.critical_fraction * vals.max()),
            )

        if config_live.kind == "max_hoop_stress":
            crack, new_ids = hoop_stress_step(sol, problem, crack, config_live, step)
        else:
            crack, new_ids = ber_step(sol, prev, problem, crack, config_live, step)
        prev = sol
        if not new_ids:
            break  # arrested
        if step < config.load_steps:
            system = asm.crack_update(system, new_ids)
            problem.cracked_edges = frozenset(asm.cracked)
    return crack, solutions


def crack_face_values(problem, solution, crack):
    """Midpoint (x, y, u1, u2, phi) on both faces of every cracked boundary.

    Returns an array of rows (x, y, u1_L, u2_L, phi_L, u1_R, u2_R, phi_R)
    sorted by midpoint x then y."""
    asm = _get_assembler(problem)
    part = problem.partition
    ids = sorted(crack.cracked)
    if not ids:
        return np.zeros((0, 8))
    vals = asm.edge_field_values(solution.raw, ids)
    mids = np.array(
        [
            0.5
            * (
                part.vertices[part.internal_boundaries[e].v1]
                + part.vertices[part.internal_boundaries[e].v2]
            )
            for e in ids
        ]
    )
    rows = np.hstack([mids, vals[:, 0, :], vals[:, 1, :]])
    order = np.lexsort((rows[:, 1], rows[:, 0]))
    return rows[order]


def export_history(partition, crack, path):
    """CSV with columns step, boundary_id, criterion_value, tip_x, tip_y.

    The tip sample per row is the midpoint of the boundary cracked at that
    event, i.e. the advancing crack-front position."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "boundary_id", "criterion_value", "tip_x", "tip_y"])
        for (step, eid, val) in crack.history:
            e = partition.internal_boundaries[eid]
            mid = 0.5 * (partition.vertices[e.v1] + partition.vertices[e.v2])
            w.writerow([step, eid, repr(val), repr(float(mid[0])), repr(float(mid[1]))])


def path_polyline(partition, edge_ids):
    """Midpoints of the given edges ordered along the crack (by history order)."""
    pts = []
    for eid in edge_ids:
        e = partition.internal_boundaries[eid]
        pts.append(0.5 * (partition.vertices[e.v1] + partition.vertices[e.v2]))
    return np.array(pts) if pts else np.zeros((0, 2))


def hausdorff_distance(A, B):
    """Symmetric Hausdorff distance between two point sets."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if len(A) == 0 or len(B) == 0:
        return float("inf")
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    return float(np.sqrt(max(d2.min(axis=1).max(), d2.min(axis=0).max())))
