"""Rotating-frame Hamiltonian and Lindblad dissipators.

All frequencies and rates are ordinary frequencies in MHz (the values quoted
as "x 2pi MHz" elsewhere); the 2pi shows up only inside propagators.  The
rotating frame assigns each atomic level its own rotation frequency, which
makes every coupling term static, so absolute optical/microwave frequencies
never appear: only the detunings delta1, delta2, Delta_a, Delta_b survive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .qspace import (
    CompositeSpace,
    Operator,
    atomic_projector,
    atomic_transition,
    fock_lowering,
    fock_raising,
)


@dataclass(frozen=True)
class SystemParams:
    """Model constants in MHz.

    omega1, omega2: laser Rabi frequencies on g->a (atom 1) and g->b (atom 2).
    delta1, delta2: laser detunings, delta1 = omega_ag - omega_laser1 and
        delta2 = omega_bg - omega_laser2 (signed).
    g_a, g_b: atom-cavity couplings on r<->a and r<->b.
    Delta_a, Delta_b: cavity detunings Delta_a = omega_ar - omega_c and
        Delta_b = omega_rb - omega_c (signed).
    Gamma: population decay rate of r, a, b (same for all three).
    gamma_deph: dephasing rate of every excited level against g.
    kappa: cavity decay rate (default 0: cavity dissipation off).
    nbar_th: mean thermal photon number seen by the cavity dissipator.
    """

    omega1: float
    omega2: float
    delta1: float
    delta2: float
    g_a: float
    g_b: float
    Delta_a: float
    Delta_b: float
    Gamma: float = 0.0
    gamma_deph: float = 0.0
    kappa: float = 0.0
    nbar_th: float = 0.0

    def __post_init__(self):
        for name in ("omega1", "omega2", "g_a", "g_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0 (phases are absorbed), "
                                 f"got {getattr(self, name)}")
        for name in ("delta1", "delta2", "Delta_a", "Delta_b"):
            if getattr(self, name) == 0:
                raise ValueError(f"{name} must be nonzero (it divides "
                                 "perturbative expressions)")
        for name in ("Gamma", "gamma_deph", "kappa", "nbar_th"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace as _replace

        return _replace(self, **changes)


def frame_energies(params: SystemParams) -> dict[int, dict[str, float]]:
    """Diagonal frame energy (MHz) of each atomic level, per atom.

    Atom 1 rotates as g->0, a->w1, r->w1-wc, b->w1-2wc; atom 2 as g->0,
    b->w2, r->w2+wc, a->w2+2wc.  Both tables follow from requiring every
    laser and cavity coupling to be time independent.
    """
    p = params
    return {
        1: {"g": 0.0, "a": p.delta1, "r": p.delta1 - p.Delta_a,
            "b": p.delta1 - p.Delta_a - p.Delta_b},
        2: {"g": 0.0, "b": p.delta2, "r": p.delta2 + p.Delta_b,
            "a": p.delta2 + p.Delta_a + p.Delta_b},
    }


def rotating_frame_hamiltonian(params: SystemParams, space: CompositeSpace) -> Operator:
    """Time-independent rotating-frame Hamiltonian (hermitian, MHz units).

    Diagonal: the frame energies above, replicated over the photon band (the
    cavity contributes no diagonal term because the frame co-rotates with it;
    the zero-point offset is dropped as a global phase).  Couplings:
    omega1 |a><g| on atom 1, omega2 |b><g| on atom 2, and for each atom
    g_a c |a><r| + g_b c^dag |b><r|, all plus hermitian conjugates.
    """
    energies = frame_energies(params)
    h = None

    def _acc(op):
        nonlocal h
        h = op if h is None else h + op

    for atom in (1, 2):
        for level, energy in energies[atom].items():
            if energy != 0.0:
                _acc(atomic_projector(space, atom, level) * energy)

    lower = fock_lowering(space)
    raise_ = fock_raising(space)
    _acc(atomic_transition(space, 1, "g", "a") * params.omega1)
    _acc(atomic_transition(space, 1, "a", "g") * params.omega1)
    _acc(atomic_transition(space, 2, "g", "b") * params.omega2)
    _acc(atomic_transition(space, 2, "b", "g") * params.omega2)
    for atom in (1, 2):
        ra = lower @ atomic_transition(space, atom, "r", "a")   # g_a c |a><r|
        rb = raise_ @ atomic_transition(space, atom, "r", "b")  # g_b c^dag |b><r|
        _acc(ra * params.g_a)
        _acc(ra.dagger() * params.g_a)
        _acc(rb * params.g_b)
        _acc(rb.dagger() * params.g_b)

    return Operator(space, h.matrix, hermitian=True)


def rydberg_offset(space: CompositeSpace) -> Operator:
    """Sum of both atoms' |r><r| projectors.

    Adding epsilon times this to the Hamiltonian shifts both Rydberg frame
    energies uniformly, the knob the resonance calibration turns.
    """
    op = atomic_projector(space, 1, "r") + atomic_projector(space, 2, "r")
    return Operator(space, op.matrix, hermitian=True)


def lindblad_set(params: SystemParams, space: CompositeSpace) -> list[Operator]:
    """Lindblad generators (MHz^(1/2) units, angular 2pi applied downstream).

    Decay: sqrt(Gamma) |g><nu| for nu in (r, a, b) on each atom.  Dephasing:
    sqrt(gamma/2) (|g><g| - sum_nu |nu><nu|) per atom.  If kappa > 0, the
    thermal cavity pair sqrt(kappa (nbar+1)) c and sqrt(kappa nbar) c^dag is
    appended; the paper's simulations keep kappa = 0, the pair exists for
    robustness studies.  Zero-rate generators are omitted.
    """
    ops: list[Operator] = []
    if params.Gamma > 0:
        root = params.Gamma ** 0.5
        for atom in (1, 2):
            for nu in ("r", "a", "b"):
                ops.append(atomic_transition(space, atom, nu, "g") * root)
    if params.gamma_deph > 0:
        root = (params.gamma_deph / 2.0) ** 0.5
        for atom in (1, 2):
            op = atomic_projector(space, atom, "g")
            for nu in ("a", "b", "r"):
                op = op - atomic_projector(space, atom, nu)
            ops.append(op * root)
    if params.kappa > 0:
        ops.append(fock_lowering(space) * (params.kappa * (params.nbar_th + 1)) ** 0.5)
        if params.nbar_th > 0:
            ops.append(fock_raising(space) * (params.kappa * params.nbar_th) ** 0.5)
    return ops
