"""Time evolution and derived observables.

Propagators apply the angular-frequency factor 2pi internally, so a state
evolving under a Hamiltonian entry of x MHz accumulates phase exp(-i 2pi x t)
with t in microseconds.  Reported frequencies follow the same ordinary-MHz
convention (an oscillation with first population maximum at t has frequency
1 / (2 t) MHz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import liouville
from .effective import effective_rabi, thermal_weights
from .liouville import PropagationError
from .model import SystemParams, lindblad_set, rotating_frame_hamiltonian, rydberg_offset
from .qspace import CompositeSpace, Operator, QuantumState, build_space

TRACE_TOL = 1e-8
HERM_TOL = 1e-10
POSITIVITY_TOL = 1e-8
EDGE_TOL = 1e-6
SERIES_TOL = 1e-8


@dataclass
class TimeSeries:
    """Observables sampled on a strictly increasing time grid (us)."""

    times: np.ndarray
    pop_gg: np.ndarray
    pop_rr: np.ndarray
    coh_gg_rr: np.ndarray
    photon_mean: np.ndarray
    edge_population: np.ndarray

    def validate(self) -> "TimeSeries":
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name in ("pop_gg", "pop_rr"):
            arr = getattr(self, name)
            if np.any(arr < -SERIES_TOL) or np.any(arr > 1 + SERIES_TOL):
                raise ValueError(f"{name} outside [0, 1] beyond tolerance")
        bound = np.sqrt(np.maximum(self.pop_gg * self.pop_rr, 0.0)) + SERIES_TOL
        if np.any(np.abs(self.coh_gg_rr) > bound):
            raise ValueError("|coh_gg_rr| exceeds sqrt(pop_gg * pop_rr)")
        return self


class _ObservableMap:
    """Cached index arrays for the standard observables on one space."""

    def __init__(self, space: CompositeSpace):
        band = range(space.fock_min, space.fock_max + 1)
        self.space = space
        self.gg = np.array([space.encode("g", "g", n) for n in band])
        self.rr = np.array([space.encode("r", "r", n) for n in band])
        self.photons = space.photon_numbers().astype(float)
        # only artificial truncation boundaries count as band edges: the
        # physical floor n = 0 cannot leak
        edge = self.photons == space.fock_max
        if space.fock_min > 0:
            edge |= self.photons == space.fock_min
        self.edge_idx = np.nonzero(edge)[0]

    def from_pure(self, psi: np.ndarray):
        probs = np.abs(psi) ** 2
        return (
            float(probs[self.gg].sum()),
            float(probs[self.rr].sum()),
            complex(np.sum(psi[self.gg] * np.conj(psi[self.rr]))),
            float(np.dot(probs, self.photons)),
            float(probs[self.edge_idx].sum()),
        )

    def from_mixed(self, rho: np.ndarray):
        diag = np.real(np.diagonal(rho))
        return (
            float(diag[self.gg].sum()),
            float(diag[self.rr].sum()),
            complex(rho[self.gg, self.rr].sum()),
            float(np.dot(diag, self.photons)),
            float(diag[self.edge_idx].sum()),
        )


def _series_from_records(times, records) -> TimeSeries:
    cols = list(zip(*records))
    return TimeSeries(
        times=np.asarray(times, dtype=float),
        pop_gg=np.array(cols[0]),
        pop_rr=np.array(cols[1]),
        coh_gg_rr=np.array(cols[2]),
        photon_mean=np.array(cols[3]),
        edge_population=np.array(cols[4]),
    ).validate()


class UnitaryPropagator:
    """Eigendecomposition of a hermitian Hamiltonian, reusable across states."""

    def __init__(self, hamiltonian: Operator):
        defect = hamiltonian.hermiticity_defect()
        if not hamiltonian.hermitian and defect >= 1e-12:
            raise ValueError(
                f"unitary propagation requires a hermitian Hamiltonian "
                f"(defect {defect:.3e})"
            )
        self.space = hamiltonian.space
        self.energies, self.vectors = np.linalg.eigh(hamiltonian.to_dense())

    def evolve(self, psi0: np.ndarray, t: float) -> np.ndarray:
        coeff = self.vectors.conj().T @ psi0
        return self.vectors @ (np.exp(-2j * np.pi * self.energies * t) * coeff)

    def series(self, psi0: np.ndarray, times) -> tuple[TimeSeries, np.ndarray]:
        omap = _ObservableMap(self.space)
        coeff = self.vectors.conj().T @ psi0
        records = []
        psi = psi0
        for t in times:
            psi = self.vectors @ (np.exp(-2j * np.pi * self.energies * t) * coeff)
            records.append(omap.from_pure(psi))
        return _series_from_records(times, records), psi


def propagate_unitary(hamiltonian: Operator, psi0: QuantumState,
                      times) -> tuple[TimeSeries, QuantumState]:
    """Evolve a pure state exactly via dense eigendecomposition."""
    if psi0.kind != "pure":
        raise ValueError("propagate_unitary expects a pure state")
    psi0.validate()
    prop = UnitaryPropagator(hamiltonian)
    series, psi = prop.series(psi0.amplitudes, np.asarray(times, dtype=float))
    final = QuantumState.pure(hamiltonian.space, psi)
    final.validate()
    return series, final


def propagate_lindblad(hamiltonian: Operator, lindblads: list[Operator],
                       rho0: QuantumState, times, method: str = "auto",
                       rtol: float = 1e-8, check: str = "full",
                       ) -> tuple[TimeSeries, QuantumState]:
    """Solve the Lindblad master equation on the given output grid.

    The generator is time independent, so the default engine advances with
    its exact exponential on conserved-charge slices of the vectorized
    density matrix; `method` selects alternatives (dense / krylov / rk) for
    cross-checks.  check: "full" verifies trace, hermiticity and positivity
    at every output time, "final" only at the last, "none" skips.
    """
    space = hamiltonian.space
    defect = hamiltonian.hermiticity_defect()
    if not hamiltonian.hermitian and defect >= 1e-12:
        raise ValueError(f"non-hermitian Hamiltonian (defect {defect:.3e})")
    rho_init = rho0.density_matrix()
    times = np.asarray(times, dtype=float)
    omap = _ObservableMap(space)
    records = []

    def observer(k, rho):
        records.append(omap.from_mixed(rho))
        if check == "full" or (check == "final" and k == len(times) - 1):
            _check_density(rho, float(times[k]))

    final = liouville.evolve_lindblad(
        hamiltonian.matrix, [op.matrix for op in lindblads], rho_init,
        times, method=method, rtol=rtol, observer=observer,
    )
    series = _series_from_records(times, records)
    return series, QuantumState.mixed(space, final)


def _check_density(rho: np.ndarray, t: float):
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) >= TRACE_TOL:
        raise PropagationError(f"trace drifted to {tr}", time_reached=t)
    herm = float(np.abs(rho - rho.conj().T).max())
    if herm >= HERM_TOL:
        raise PropagationError(f"hermiticity defect {herm:.3e}", time_reached=t)
    min_eig = float(np.linalg.eigvalsh(rho).min())
    if min_eig < -POSITIVITY_TOL:
        raise PropagationError(f"negative eigenvalue {min_eig:.3e}", time_reached=t)


def first_peak(times: np.ndarray, values: np.ndarray,
               prominence: float = 0.5) -> tuple[float, float]:
    """First prominent interior maximum, refined by quadratic interpolation.

    Residual fast beats put micro-wiggles on top of the slow oscillation, so
    a local maximum only counts once it reaches `prominence` times the
    global maximum of the window.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    floor = prominence * float(values.max())
    for k in range(1, len(values) - 1):
        left, mid, right = values[k - 1], values[k], values[k + 1]
        if mid < floor:
            continue
        if mid >= left and mid >= right and (mid > left or mid > right):
            curv = left - 2 * mid + right
            if curv >= 0:
                continue
            shift = 0.5 * (left - right) / curv
            dt = 0.5 * (times[k + 1] - times[k - 1])
            t_peak = times[k] + shift * dt
            v_peak = mid - 0.25 * (left - right) * shift
            return float(t_peak), float(v_peak)
    raise ValueError(
        "no interior maximum of pop_rr found; extend the time horizon"
    )


def extract_frequency(series: TimeSeries) -> float:
    """Oscillation frequency (MHz) from the first maximum of pop_rr.

    A population following sin^2(pi f t) peaks first at t = 1/(2 f), so the
    returned value is 1 / (2 t_peak).
    """
    t_peak, _ = first_peak(series.times, series.pop_rr)
    if t_peak <= 0:
        raise ValueError("degenerate peak time; extend the time horizon")
    return 1.0 / (2.0 * t_peak)


@dataclass(frozen=True)
class CalibrationResult:
    offset: float        # MHz added to both Rydberg frame energies
    peak_pop_rr: float   # contrast at that offset
    unimodal: bool       # False when the coarse scan saw multiple humps


def _peak_objective(params: SystemParams, space: CompositeSpace, n: int,
                    offset: float, t_max: float, samples: int) -> float:
    h = rotating_frame_hamiltonian(params, space) + rydberg_offset(space) * offset
    prop = UnitaryPropagator(Operator(space, h.matrix, hermitian=True))
    psi0 = space.basis_state("g", "g", n)
    rr_idx = _ObservableMap(space).rr
    coeff = prop.vectors.conj().T @ psi0
    rows = prop.vectors[rr_idx, :]
    times = np.linspace(0.0, t_max, samples)
    phases = np.exp(-2j * np.pi * np.outer(prop.energies, times))
    pop_rr = np.abs(rows @ (phases * coeff[:, None])) ** 2
    # contrast objective: the window spans >= 1.3 oscillations, so the global
    # maximum is the oscillation amplitude regardless of residual detuning
    return float(pop_rr.sum(axis=0).max())


def calibrate_resonance(params: SystemParams, n: int, search_width: float,
                        base_offset: float = 0.0, band_halfwidth: int = 4,
                        coarse_points: int = 33) -> CalibrationResult:
    """Find the Rydberg-level offset that maximizes |gg,n> <-> |rr,n> contrast.

    Scans epsilon in [-search_width, +search_width] MHz (added on top of
    base_offset to both atoms' r levels), coarse grid first, then
    golden-section refinement inside the bracketing triple.  Deterministic
    for fixed inputs.
    """
    if search_width <= 0:
        raise ValueError(f"search_width must be > 0, got {search_width}")
    space = build_space(max(0, n - band_halfwidth), n + band_halfwidth)
    guess = abs(effective_rabi(params, n))
    if guess == 0:
        raise ValueError("effective Rabi frequency vanishes; nothing to calibrate")
    t_max = 1.3 / guess
    samples = 320

    def objective(eps):
        return _peak_objective(params, space, n, base_offset + eps, t_max, samples)

    grid = np.linspace(-search_width, search_width, coarse_points)
    values = np.array([objective(e) for e in grid])
    best = int(np.argmax(values))

    # a dip (decrease followed later by an increase) breaks unimodality
    decreases = np.flatnonzero(np.diff(values) < -1e-9)
    increases = np.flatnonzero(np.diff(values) > 1e-9)
    unimodal = not (len(decreases) and len(increases)
                    and (decreases.min() < increases.max()))
    if not unimodal:
        return CalibrationResult(offset=float(base_offset + grid[best]),
                                 peak_pop_rr=float(values[best]), unimodal=False)

    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    while (b - a) > max(1e-6, 1e-4 * search_width):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    eps = 0.5 * (a + b)
    return CalibrationResult(offset=float(base_offset + eps),
                             peak_pop_rr=float(objective(eps)), unimodal=True)


def effective_gap(hamiltonian: Operator, n: int) -> float:
    """Spectral gap (MHz) of the dressed |gg,n> / |rr,n> pair.

    Picks the two eigenvectors carrying the most combined weight on the two
    target states; at exact resonance the gap equals the effective Rabi
    frequency.  Raises when the targets hybridize with other states (joint
    overlap < 0.5) or when they are exactly decoupled (no avoided crossing).
    """
    space = hamiltonian.space
    prop = UnitaryPropagator(hamiltonian)
    gg = space.encode("g", "g", n)
    rr = space.encode("r", "r", n)
    w_gg = np.abs(prop.vectors[gg, :]) ** 2
    w_rr = np.abs(prop.vectors[rr, :]) ** 2
    k1, k2 = np.argsort(w_gg + w_rr)[-2:]
    for name, weights in (("gg", w_gg), ("rr", w_rr)):
        if weights[k1] + weights[k2] < 0.5:
            raise ValueError(
                f"|{name},n> carries weight {weights[k1] + weights[k2]:.3f} < 0.5 "
                "on the dressed pair; states too hybridized"
            )
    k_gg, k_rr = (k1, k2) if w_gg[k1] >= w_gg[k2] else (k2, k1)
    if w_rr[k_gg] + w_gg[k_rr] < 1e-12:
        raise ValueError("targets are decoupled; no avoided crossing to measure")
    return float(abs(prop.energies[k1] - prop.energies[k2]))


def fidelity_terms_on_band(params: SystemParams, ns: list[int],
                           band: tuple[int, int], t_pi: float,
                           gamma_mhz: float, big_gamma_mhz: float,
                           resonance_offset: float = 0.0,
                           method: str = "auto") -> dict[int, dict]:
    """<rr,n| rho(t_pi) |rr,n> for each listed n, sharing one band/propagator.

    All listed photon numbers are evolved from |gg,n><gg,n| on the same
    photon band, so a single exact propagator (one matrix exponential, or
    one eigendecomposition in the coherent case) serves every n.
    """
    space = build_space(*band)
    run_params = params.replace(Gamma=big_gamma_mhz, gamma_deph=gamma_mhz)
    h = rotating_frame_hamiltonian(run_params, space)
    if resonance_offset != 0.0:
        h = Operator(space, (h + rydberg_offset(space) * resonance_offset).matrix,
                     hermitian=True)
    lindblads = lindblad_set(run_params, space)
    omap = _ObservableMap(space)
    out: dict[int, dict] = {}

    if not lindblads:
        prop = UnitaryPropagator(h)
        for n in ns:
            psi = prop.evolve(space.basis_state("g", "g", n), t_pi)
            probs = np.abs(psi) ** 2
            out[n] = {
                "value": float(probs[space.encode("r", "r", n)]),
                "trace_defect": abs(float(probs.sum()) - 1.0),
                "edge_population": float(probs[omap.edge_idx].sum()),
            }
        return out

    h_mat = h.matrix
    l_mats = [op.matrix for op in lindblads]
    labels = liouville.detect_charges(h_mat, l_mats)
    if labels is None:
        for n in ns:
            rho0 = QuantumState.basis(space, "g", "g", n)
            _, final = propagate_lindblad(h, lindblads, rho0, [t_pi],
                                          method=method, check="final")
            rho = final.matrix
            out[n] = _fidelity_record(rho, space, omap, n)
        return out

    pairs = liouville.pairs_of_offset(labels[0], 0)
    prop = liouville.SlicePropagator(h_mat, l_mats, pairs, space.dim)
    step = prop.step_matrix(t_pi)
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    for n in ns:
        rho0 = np.outer(space.basis_state("g", "g", n),
                        space.basis_state("g", "g", n).conj())
        vec = step @ prop.project(rho0)
        rho.fill(0.0)
        prop.embed(vec, rho)
        _check_density(rho, t_pi)
        out[n] = _fidelity_record(rho, space, omap, n)
    return out


def _fidelity_record(rho, space, omap, n) -> dict:
    diag = np.real(np.diagonal(rho))
    return {
        "value": float(diag[space.encode("r", "r", n)]),
        "trace_defect": abs(float(diag.sum()) - 1.0),
        "edge_population": float(diag[omap.edge_idx].sum()),
    }


def transfer_fidelity(params: SystemParams, t_pi: float, nbar: float,
                      gamma_fig_units: float, big_gamma_fig_units: float,
                      band_halfwidth: int = 4, coverage: float = 1.0 - 1e-4,
                      resonance_offset=0.0, method: str = "auto",
                      ) -> tuple[float, dict]:
    """Thermal-averaged |gg> -> |rr> transfer fidelity at time t_pi.

    Rates arrive in figure units of Omega_bar(0)/2pi, resolved through the
    reference frequency implied by t_pi = pi / Omega_bar(0) (ordinary value
    1 / (2 t_pi) MHz).  Each photon number evolves on its own band
    [max(0, n-4), n+4]; thermal tail mass beyond the coverage target
    contributes zero, so the result is a lower bound.  resonance_offset may
    be a number (MHz) or a callable n -> offset.
    """
    if t_pi <= 0:
        raise ValueError(f"t_pi must be > 0, got {t_pi}")
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    omega_ref = 1.0 / (2.0 * t_pi)
    gamma_mhz = gamma_fig_units * omega_ref
    big_gamma_mhz = big_gamma_fig_units * omega_ref
    weights = thermal_weights(nbar, coverage)

    fidelity = 0.0
    per_n = {}
    for n, p in weights:
        offset = resonance_offset(n) if callable(resonance_offset) else resonance_offset
        halfwidth = band_halfwidth
        while True:
            band = (max(0, n - halfwidth), n + halfwidth)
            try:
                rec = fidelity_terms_on_band(
                    params, [n], band, t_pi, gamma_mhz, big_gamma_mhz,
                    resonance_offset=offset, method=method)[n]
            except PropagationError as exc:
                raise PropagationError(
                    f"fidelity term n={n} failed: {exc}", exc.time_reached
                ) from exc
            if rec["edge_population"] < EDGE_TOL:
                break
            halfwidth += 2  # band too narrow: retry wider
        rec["band"] = band
        rec["weight"] = p
        per_n[n] = rec
        fidelity += p * rec["value"]

    details = {
        "per_n": per_n,
        "weights_sum": sum(p for _, p in weights),
        "omega_ref": omega_ref,
        "gamma_mhz": gamma_mhz,
        "big_gamma_mhz": big_gamma_mhz,
    }
    return fidelity, details
