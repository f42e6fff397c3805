"""Second-order Trotter evolution of a Pauli-basis MPO towards the steady state."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .dense_oracle import dissipator_superop, hamiltonian_superop
from .mpo import (
    PauliMpo,
    apply_two_site_gate,
    identity_mpo,
    local_expectations,
    move_center,
    save_snapshot,
)
from .operators import (
    I2,
    PAULIS,
    SpinChainModel,
    boundary_lindblads,
    build_hamiltonian,
    dephasing_lindblads,
)

log = logging.getLogger(__name__)

# columns are vec(P_a x P_b), row-major, ordered 4a + b
_PAULI_BASIS = np.stack([np.kron(PAULIS[a], PAULIS[b]).reshape(-1) for a in range(4) for b in range(4)], axis=1)


def to_pauli_basis(superop: np.ndarray) -> np.ndarray:
    """Convert a 16x16 two-site superoperator (row-major vec) to the real Pauli basis."""
    m = _PAULI_BASIS.conj().T @ superop @ _PAULI_BASIS / 4
    if np.max(np.abs(m.imag)) > 1e-12 * max(1.0, np.max(np.abs(m.real))):
        raise ValueError("superoperator does not preserve Hermiticity")
    return np.ascontiguousarray(m.real)


def _embed_one(op: np.ndarray, left: bool) -> np.ndarray:
    return np.kron(op, I2) if left else np.kron(I2, op)


def bond_generators(model: SpinChainModel) -> list[np.ndarray]:
    """Two-site generators (ket-bra, row-major vec) whose sum is the full Liouvillian.

    Boundary baths go entirely to the first and last bond. Dephasing on an
    interior site is split equally between its two bonds; an edge site's
    dephasing belongs to its only bond.
    """
    n = model.n
    if n < 2:
        raise ValueError("TEBD needs at least two sites")
    gens = [hamiltonian_superop(h) for _, h in build_hamiltonian(model)]
    for term in boundary_lindblads(model.mu, n, model.baths):
        site = term.sites[0]
        bond = 1 if site == 1 else n - 1
        gens[bond - 1] = gens[bond - 1] + dissipator_superop(_embed_one(term.operator, site == bond))
    for term in dephasing_lindblads(n, model.gamma):
        site = term.sites[0]
        for bond, w in dephasing_weights(site, n):
            op = _embed_one(term.operator, site == bond)
            gens[bond - 1] = gens[bond - 1] + w * dissipator_superop(op)
    return gens


def dephasing_weights(site: int, n: int) -> list[tuple[int, float]]:
    """``[(bond, weight), ...]`` sharing one site's dephasing between its bonds."""
    bonds = [b for b in (site - 1, site) if 1 <= b <= n - 1]
    return [(b, 1.0 / len(bonds)) for b in bonds]


@dataclass
class GateSet:
    dt: float
    half: list[np.ndarray]
    full: list[np.ndarray]
    generators: list[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def n(self) -> int:
        return len(self.full) + 1


def build_gates(model: SpinChainModel, dt: float) -> GateSet:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    gens = [to_pauli_basis(g) for g in bond_generators(model)]
    half = [sla.expm(g * (dt / 2)) for g in gens]
    full = [sla.expm(g * dt) for g in gens]
    return GateSet(dt, half, full, gens)


@dataclass
class StepDiagnostics:
    discarded_weight: float = 0.0
    max_bond: int = 1
    gates: int = 0


def _sweep(mpo, gates, bonds, D_max, eps_trunc, diag: StepDiagnostics, reverse=False):
    # centre kept on the bond being updated so every truncation is optimal
    for j in reversed(bonds) if reverse else bonds:
        move_center(mpo, j if reverse else j - 1)
        _, rep = apply_two_site_gate(
            mpo, gates[j - 1], j, D_max, eps_trunc, absorb="left" if reverse else "right"
        )
        diag.discarded_weight += rep.discarded_weight
        diag.max_bond = max(diag.max_bond, rep.kept)
        diag.gates += 1


def _odd_even(n: int) -> tuple[list[int], list[int]]:
    bonds = range(1, n)
    return [b for b in bonds if b % 2 == 1], [b for b in bonds if b % 2 == 0]


def strang_step(
    mpo: PauliMpo, gates: GateSet, D_max: int = 64, eps_trunc: float = 1e-12
) -> tuple[PauliMpo, StepDiagnostics]:
    """One step: half on odd bonds, full on even bonds, half on odd bonds."""
    odd, even = _odd_even(mpo.n)
    diag = StepDiagnostics()
    _sweep(mpo, gates.half, odd, D_max, eps_trunc, diag)
    _sweep(mpo, gates.full, even, D_max, eps_trunc, diag, reverse=True)
    _sweep(mpo, gates.half, odd, D_max, eps_trunc, diag)
    return mpo, diag


def strang_steps(
    mpo: PauliMpo, gates: GateSet, steps: int, D_max: int = 64, eps_trunc: float = 1e-12
) -> tuple[PauliMpo, StepDiagnostics]:
    """``steps`` Strang steps with adjacent odd half-steps merged into full steps.

    Same operator product as repeated :func:`strang_step`; the trace is reset
    to one at the end.
    """
    odd, even = _odd_even(mpo.n)
    diag = StepDiagnostics()
    if steps <= 0:
        return mpo, diag
    _sweep(mpo, gates.half, odd, D_max, eps_trunc, diag)
    for i in range(steps):
        _sweep(mpo, gates.full, even, D_max, eps_trunc, diag, reverse=True)
        _sweep(mpo, gates.half if i == steps - 1 else gates.full, odd, D_max, eps_trunc, diag)
    mpo.normalize()
    return mpo, diag


@dataclass
class ConvergenceCriterion:
    check_interval: int = 10
    window: float = 10.0
    eps_conv: float = 1e-6
    t_max: float = 5000.0

    def __post_init__(self):
        if self.eps_conv <= 0 or self.t_max <= 0 or self.window <= 0 or self.check_interval < 1:
            raise ValueError("convergence criterion parameters must be positive")


@dataclass
class NessReport:
    magnetization: np.ndarray
    current: np.ndarray
    current_spread: float
    time: float
    steps: int
    discarded_weight: float
    max_bond: int
    converged: bool
    trace: float = 1.0
    last_change: float = float("nan")

    @property
    def mean_current(self) -> float:
        if self.current.size == 0:
            return 0.0
        return float(np.mean(self.current))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["magnetization"] = [float(x) for x in self.magnetization]
        d["current"] = [float(x) for x in self.current]
        return d


def current_spread(current: np.ndarray) -> float:
    if current.size == 0:
        return 0.0
    return float(np.max(np.abs(current - current[0])))


def jsonl_sink(fh) -> Callable[[dict], None]:
    def write(record: dict):
        fh.write(json.dumps(record, sort_keys=True) + "\n")
        fh.flush()

    return write


def evolve_to_ness(
    model: SpinChainModel,
    dt: float = 0.1,
    D_max: int = 64,
    eps_trunc: float = 1e-12,
    criterion: Optional[ConvergenceCriterion] = None,
    initial: Optional[PauliMpo] = None,
    progress: Optional[Callable[[dict], None]] = None,
    checkpoint: Optional[str] = None,
    t_start: float = 0.0,
) -> tuple[NessReport, PauliMpo]:
    """Evolve until every magnetization and current changes less than
    ``eps_conv`` over the last ``window`` time units, or ``t_max`` is hit.

    Hitting ``t_max`` is reported with ``converged=False``.
    """
    criterion = criterion or ConvergenceCriterion()
    gates = build_gates(model, dt)
    mpo = initial.copy() if initial is not None else identity_mpo(model.n)
    if mpo.n != model.n:
        raise ValueError(f"initial MPO has {mpo.n} sites, model has {model.n}")
    mpo.normalize()

    lag = max(1, int(round(criterion.window / (dt * criterion.check_interval))))
    history: list[np.ndarray] = []
    total_discarded = 0.0
    max_bond = mpo.max_bond
    steps = 0
    t = t_start
    converged = False
    change = float("nan")
    max_steps = int(np.ceil((criterion.t_max - t_start) / dt))

    exp = local_expectations(mpo)
    history.append(np.concatenate([exp.magnetization, exp.current]))
    while steps < max_steps:
        chunk = min(criterion.check_interval, max_steps - steps)
        mpo, diag = strang_steps(mpo, gates, chunk, D_max, eps_trunc)
        steps += chunk
        t = t_start + steps * dt
        total_discarded += diag.discarded_weight
        max_bond = max(max_bond, diag.max_bond)
        exp = local_expectations(mpo)
        obs = np.concatenate([exp.magnetization, exp.current])
        if not np.all(np.isfinite(obs)):
            raise FloatingPointError(f"non-finite observables at t={t}")
        history.append(obs)
        if len(history) > lag:
            change = float(np.max(np.abs(obs - history[-1 - lag])))
            history = history[-(lag + 1):]
            if change < criterion.eps_conv:
                converged = True
        if progress is not None:
            progress(
                {
                    "t": t,
                    "steps": steps,
                    "current": [float(x) for x in exp.current],
                    "trace": exp.trace,
                    "max_bond": mpo.max_bond,
                    "discarded_weight": total_discarded,
                    "change": change,
                }
            )
        if converged:
            break
    if checkpoint is not None:
        save_snapshot(mpo, checkpoint, {"t": t, "steps": steps, "dt": dt})
    if not converged:
        log.warning("no convergence by t=%.1f (last change %.3e)", t, change)
    report = NessReport(
        magnetization=exp.magnetization,
        current=exp.current,
        current_spread=current_spread(exp.current),
        time=t,
        steps=steps,
        discarded_weight=total_discarded,
        max_bond=max_bond,
        converged=converged,
        trace=mpo.trace(),
        last_change=change,
    )
    return report, mpo


def richardson_ness(
    model: SpinChainModel,
    dt: float = 0.1,
    D_max: int = 64,
    eps_trunc: float = 1e-12,
    criterion: Optional[ConvergenceCriterion] = None,
    initial: Optional[PauliMpo] = None,
    progress: Optional[Callable[[dict], None]] = None,
) -> tuple[NessReport, PauliMpo]:
    """Steady state at ``dt`` and ``dt/2`` combined as ``(4 o(dt/2) - o(dt)) / 3``.

    The Strang fixed point carries an O(dt^2) bias; the combination cancels
    it. The fine run starts from the coarse steady state, so the extra cost
    is one relaxation from a nearby state. Returns the combined report and
    the ``dt/2`` MPO.
    """
    coarse, mpo = evolve_to_ness(model, dt, D_max, eps_trunc, criterion, initial, progress)
    fine, mpo = evolve_to_ness(model, dt / 2, D_max, eps_trunc, criterion, mpo, progress, t_start=coarse.time)
    mag = (4 * fine.magnetization - coarse.magnetization) / 3
    cur = (4 * fine.current - coarse.current) / 3
    report = NessReport(
        magnetization=mag,
        current=cur,
        current_spread=current_spread(cur),
        time=fine.time,
        steps=coarse.steps + fine.steps,
        discarded_weight=coarse.discarded_weight + fine.discarded_weight,
        max_bond=max(coarse.max_bond, fine.max_bond),
        converged=coarse.converged and fine.converged,
        trace=fine.trace,
        last_change=max(coarse.last_change, fine.last_change),
    )
    return report, mpo
