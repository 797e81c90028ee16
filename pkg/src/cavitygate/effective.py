"""Perturbative effective quantities and parameter-condition checks.

Everything here evaluates closed-form expressions; no dynamics.  Signs are
kept exactly as the source expressions define them, including the (n-1)
factor of the second intermediate detuning evaluated literally at n = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.constants import Boltzmann, Planck

from .model import SystemParams


@dataclass(frozen=True)
class EffectiveParams:
    """All perturbative quantities for one photon number (MHz)."""

    n: int
    tilde_omega1: float
    tilde_omega2: float
    Delta1: float
    Delta2: float
    bar_omega: float
    s_gg: float
    resonance_residual: float


@dataclass(frozen=True)
class ConditionThresholds:
    """Numeric cutoffs that turn the >> / << conditions into verdicts."""

    forster_margin_min: float = 100.0
    stark_rel_tol: float = 1e-3
    sgg_rel_tol: float = 1e-2
    resonance_ratio_max: float = 1.0


@dataclass(frozen=True)
class ConditionReport:
    forster_margin: float
    stark_match_residual: float
    sgg_match_residual: float
    resonance_ratios: dict[int, float]
    bound_omega_max: float
    thresholds: ConditionThresholds
    forster_pass: bool
    stark_pass: bool
    sgg_pass: bool
    resonance_pass: bool

    @property
    def all_pass(self) -> bool:
        return (self.forster_pass and self.stark_pass and self.sgg_pass
                and self.resonance_pass)


def _tilde1(params: SystemParams, n: int) -> float:
    # Omega1 g_a sqrt(n+1) / delta1; sqrt(0) at n = -1 keeps path sums tidy.
    if n < -1:
        return 0.0
    return params.omega1 * params.g_a * math.sqrt(n + 1) / params.delta1


def _tilde2(params: SystemParams, n: int) -> float:
    if n < 1:
        return 0.0
    return params.omega2 * params.g_b * math.sqrt(n) / params.delta2


def two_photon_rabi(params: SystemParams, n: int) -> tuple[float, float]:
    """Signed two-photon Rabi frequencies (Omega~_1(n), Omega~_2(n)) in MHz."""
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    return _tilde1(params, n), _tilde2(params, n)


def intermediate_detunings(params: SystemParams, n: int) -> tuple[float, float]:
    """Stark-shifted detunings (Delta_1(n), Delta_2(n)) in MHz.

    Evaluated exactly as printed; the (n-1) factor in Delta_2 is kept
    literal, so n = 0 contributes -1 there.
    """
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    p = params
    d1 = (p.delta1 + p.omega1 ** 2 / p.delta1 - p.Delta_a
          - p.g_a ** 2 * (n + 1) / p.delta1 + p.g_b ** 2 * (n + 2) / p.Delta_b)
    d2 = (p.delta2 + p.omega2 ** 2 / p.delta2 + p.Delta_b
          - p.g_a ** 2 * (n - 1) / p.Delta_a - p.g_b ** 2 * n / p.delta2)
    return d1, d2


def effective_rabi(params: SystemParams, n: int) -> float:
    """Four-photon Rabi frequency Omega_bar(n) in MHz (two-path sum)."""
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    d1, d2 = intermediate_detunings(params, n)
    if d1 == 0.0 or d2 == 0.0:
        raise ZeroDivisionError(
            f"intermediate detuning vanishes at n={n}: Delta1={d1}, Delta2={d2}"
        )
    return (_tilde1(params, n) * _tilde2(params, n + 1) / d1
            + _tilde2(params, n) * _tilde1(params, n - 1) / d2)


def effective_rabi_closed_form(params: SystemParams, delta: float | None = None) -> float:
    """Closed form Omega1 Omega2 g_a g_b / (delta1 delta2 Delta) in MHz.

    Delta defaults to the Stark-corrected Delta_1(0); pass the bare
    delta1 - Delta_a to compare against the uncorrected variant.
    """
    if delta is None:
        delta = intermediate_detunings(params, 0)[0]
    if delta == 0.0:
        raise ZeroDivisionError("Delta = 0 in the closed-form effective Rabi")
    p = params
    return p.omega1 * p.omega2 * p.g_a * p.g_b / (p.delta1 * p.delta2 * delta)


def rabi_scaling_factor(params: SystemParams, n: int) -> float:
    """Linear n-scaling 1 - (g_a/Delta_a)^2 n of the effective Rabi frequency."""
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    return 1.0 - (params.g_a / params.Delta_a) ** 2 * n


def ground_shift(params: SystemParams, n: int) -> float:
    """Fourth-order shift S_gg(n) of the two-atom ground state, in MHz."""
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    d1, d2 = intermediate_detunings(params, n)
    if d1 == 0.0 or d2 == 0.0:
        raise ZeroDivisionError(
            f"intermediate detuning vanishes at n={n}: Delta1={d1}, Delta2={d2}"
        )
    p = params
    return (p.omega1 ** 2 * p.g_a ** 2 * (n + 1) / (p.delta1 ** 2 * d1)
            + p.omega2 ** 2 * p.g_b ** 2 * n / (p.delta2 ** 2 * d2))


def srr_diagnostic(params: SystemParams, n: int) -> float:
    """Order-of-magnitude proxy for the double-Rydberg shift S_rr(n).

    Only the proportionality g^4 n^2 / Delta^3 is known, so the prefactor is
    taken as 1; use this to confirm the shift stays small, not as a value.
    """
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    p = params
    return (p.g_a ** 4 * n ** 2 / p.Delta_a ** 3
            + p.g_b ** 4 * n ** 2 / p.Delta_b ** 3)


def compute_effective(params: SystemParams, n: int) -> EffectiveParams:
    """Bundle every perturbative quantity for photon number n."""
    t1, t2 = two_photon_rabi(params, n)
    d1, d2 = intermediate_detunings(params, n)
    return EffectiveParams(
        n=n,
        tilde_omega1=t1,
        tilde_omega2=t2,
        Delta1=d1,
        Delta2=d2,
        bar_omega=effective_rabi(params, n),
        s_gg=ground_shift(params, n),
        resonance_residual=d1 + d2,
    )


def max_rabi_bound(g_b: float, eta: float, eta_tilde: float, n_max: int) -> float:
    """Upper bound g_b / (eta eta~ sqrt(n_max + 1)) on the gate rate, MHz."""
    if g_b <= 0 or eta <= 0 or eta_tilde <= 0:
        raise ValueError("g_b, eta, eta_tilde must all be > 0")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    return g_b / (eta * eta_tilde * math.sqrt(n_max + 1))


def check_conditions(params: SystemParams, n_max: int | None = None,
                     thresholds: ConditionThresholds | None = None) -> ConditionReport:
    """Evaluate the four parameter conditions over n in [0, n_max].

    n_max defaults to ceil(2 * nbar_th).  The cutoffs that operationalize
    the >> / << statements live in ``thresholds``.
    """
    if n_max is None:
        n_max = math.ceil(2 * params.nbar_th)
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    th = thresholds or ConditionThresholds()
    p = params

    forster_denom = max(
        p.g_a * p.g_b * abs((n + 1) / p.Delta_b - n / p.Delta_a)
        for n in range(n_max + 1)
    )
    forster_margin = math.inf if forster_denom == 0 else (
        abs(p.Delta_a - p.Delta_b) / forster_denom
    )

    stark_residual = abs(p.g_a ** 2 / p.Delta_a - p.g_b ** 2 / p.Delta_b)
    stark_scale = p.g_a ** 2 / abs(p.Delta_a)

    sgg_residual = abs(p.omega1 * p.g_a / abs(p.delta1)
                       - p.omega2 * p.g_b / abs(p.delta2))
    sgg_scale = p.omega1 * p.g_a / abs(p.delta1)

    ratios = {}
    for n in range(n_max + 1):
        bar = effective_rabi(params, n)
        d1, d2 = intermediate_detunings(params, n)
        ratios[n] = math.inf if bar == 0 else abs(d1 + d2) / abs(bar)

    eta = abs(p.delta2) / p.omega2 if p.omega2 > 0 else math.inf
    t1_0 = abs(_tilde1(params, 0))
    eta_tilde = abs(intermediate_detunings(params, 0)[0]) / t1_0 if t1_0 > 0 else math.inf
    bound = (0.0 if not math.isfinite(eta) or not math.isfinite(eta_tilde)
             else p.g_b / (eta * eta_tilde * math.sqrt(n_max + 1)))

    return ConditionReport(
        forster_margin=forster_margin,
        stark_match_residual=stark_residual,
        sgg_match_residual=sgg_residual,
        resonance_ratios=ratios,
        bound_omega_max=bound,
        thresholds=th,
        forster_pass=forster_margin > th.forster_margin_min,
        stark_pass=stark_residual < th.stark_rel_tol * stark_scale,
        sgg_pass=sgg_residual < th.sgg_rel_tol * sgg_scale,
        resonance_pass=all(r < th.resonance_ratio_max for r in ratios.values()),
    )


def thermal_occupation(frequency_ghz: float, temperature_k: float) -> float:
    """Bose-Einstein mean photon number at the given mode frequency."""
    if frequency_ghz <= 0:
        raise ValueError(f"frequency must be > 0, got {frequency_ghz}")
    if temperature_k < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature_k}")
    if temperature_k == 0:
        return 0.0
    x = Planck * frequency_ghz * 1e9 / (Boltzmann * temperature_k)
    return 1.0 / math.expm1(x)


def thermal_distribution(nbar: float, n: int) -> float:
    """Thermal photon-number probability p(n | nbar)."""
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if nbar == 0:
        return 1.0 if n == 0 else 0.0
    return nbar ** n / (nbar + 1) ** (n + 1)


def thermal_weights(nbar: float, coverage: float = 1.0 - 1e-4) -> list[tuple[int, float]]:
    """Smallest prefix [(0, p0), (1, p1), ...] whose mass reaches `coverage`."""
    if not 0 < coverage < 1 + 1e-12:
        raise ValueError(f"coverage must be in (0, 1], got {coverage}")
    weights = []
    total = 0.0
    n = 0
    while total < coverage:
        p = thermal_distribution(nbar, n)
        weights.append((n, p))
        total += p
        if nbar == 0:
            break
        n += 1
        if n > 100000:
            raise RuntimeError("thermal weight accumulation failed to converge")
    return weights
