"""Moment-convergence reports for preamplified heterodyning and the K counterexample."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..amplifiers import AmplifierSpec, grid_operator_expectation, k_amplifier_apply, preamp_moment
from ..errors import ConfigError, GridResolutionError
from ..fock import (
    DensityOperator,
    PhaseSpacePolynomial,
    StateVector,
    fock_state,
    k_operator,
    number_operator,
    quadrature_operator,
    squeezed_vacuum,
)
from ..grid import GridSpec, GridWavefunction, default_grid, fock_to_grid
from ..heterodyne import _as_rho, _eff

CONVERGENCE_EXPONENT = 0.8
EXACT_TOL = 1e-6
K_AGREEMENT_TOL = 1e-6
DIVERGENCE_RATIO = 1.2
EVEN_DIVERGENT_GAIN = 2.0
EVEN_AMPLITUDE_TOL = 1e-12
DIVERGENT_FLAG = "divergent: amplified <Y^2> is infinite for states with psi(0) != 0 at g <= 2"


# ----------------------------------------------------------------------------
# target moments <W^l>
# ----------------------------------------------------------------------------


def _padded_power_moments(op_builder, rho: DensityOperator, l_max: int, reach: int) -> list[float]:
    """``<W^l>`` for ``l = 0..l_max`` with enough padding that truncation never enters."""
    dim = rho.dim + reach * l_max + 1
    W = op_builder(dim).matrix
    w, vecs = rho.eigenstates()
    out = np.zeros(l_max + 1)
    for weight, col in zip(w, vecs.T):
        psi = np.zeros(dim, dtype=complex)
        psi[: rho.dim] = col
        v = psi
        for l in range(l_max + 1):
            out[l] += weight * float(np.real(np.vdot(psi, v)))
            v = W @ v
    return list(out)


def observable_moments(spec: AmplifierSpec, state, l_max: int) -> list[float]:
    """``<W^l>`` for the amplified observable ``W`` of ``spec``."""
    rho = _as_rho(state)
    if spec.kind == "number":
        return _padded_power_moments(number_operator, rho, l_max, 0)
    if spec.kind == "quadrature":
        return _padded_power_moments(lambda d: quadrature_operator(spec.phi, d), rho, l_max, 1)
    return _padded_power_moments(k_operator, rho, l_max, 2)


def grid_k_moments(psi: GridWavefunction) -> list[float]:
    """``<K^j>`` for ``j = 0..4`` from grid stencils (second application via splines)."""
    n2 = psi.norm2()
    k1 = psi.apply_k()
    kpsi = GridWavefunction(psi.spec, k1)
    k2 = kpsi.apply_k()
    integ = psi.spec.integrate
    return [
        1.0,
        float(np.real(integ(psi.values.conj() * k1))) / n2,
        float(integ(np.abs(k1) ** 2)) / n2,
        float(np.real(integ(k1.conj() * k2))) / n2,
        float(integ(np.abs(k2) ** 2)) / n2,
    ]


# ----------------------------------------------------------------------------
# convergence fit
# ----------------------------------------------------------------------------


def fit_exponent(gains, errors, scale: float = 1.0) -> tuple[float | None, bool]:
    """``p`` from ``|error| ~ g^{-p}`` on the last three gains; exact zeros count as converged."""
    g = np.asarray(gains, dtype=float)[-3:]
    e = np.abs(np.asarray(errors, dtype=float))[-3:]
    if np.all(e <= EXACT_TOL * max(1.0, scale)):
        return None, True
    if np.any(e == 0):
        return None, False
    p = float(-np.polyfit(np.log(g), np.log(e), 1)[0])
    return p, p >= CONVERGENCE_EXPONENT


@dataclass
class MomentReport:
    observable: str
    f: str
    eta: float
    states: list[str]
    rows: list[dict] = field(default_factory=list)
    fit: list[dict] = field(default_factory=list)
    verdict: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "observable": self.observable,
            "f": self.f,
            "eta": self.eta,
            "states": self.states,
            "rows": self.rows,
            "fit": self.fit,
            "verdict": self.verdict,
        }
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(jsonable(self.to_dict()), indent=2, allow_nan=False)


def jsonable(obj):
    """Recursively convert numpy scalars and arrays to plain Python values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _named_states(states) -> list[tuple[str, object]]:
    if isinstance(states, dict):
        return list(states.items())
    return [(s[0], s[1]) if isinstance(s, tuple) else (f"state{i}", s) for i, s in enumerate(states)]


def moment_condition_report(
    spec: AmplifierSpec,
    gains,
    f: PhaseSpacePolynomial,
    states,
    eta=1.0,
    l_max: int = 2,
) -> MomentReport:
    """Tabulate ``preamp_moment - <W^l>`` along a gain ladder and fit its decay.

    The verdict is ``converges`` when every ``l >= 1`` error decays with fitted
    exponent at least 0.8 (or vanishes), else ``diverges-from-target``.
    """
    gains = [float(g) for g in gains]
    if len(gains) < 2 or any(b <= a for a, b in zip(gains, gains[1:])):
        raise ConfigError("gains must be strictly ascending with at least two entries")
    eff = _eff(eta)
    named = _named_states(states)
    report = MomentReport(spec.kind, f.name, eff.eta, [n for n, _ in named])
    ok = True
    ratios = {}
    for name, state in named:
        targets = observable_moments(spec, state, l_max)
        errs: dict[int, list[float]] = {l: [] for l in range(l_max + 1)}
        fit_gains: dict[int, list[float]] = {l: [] for l in range(l_max + 1)}
        even = spec.kind == "k" and isinstance(state, StateVector) and _has_even_part(fock_to_grid(state))
        for g in gains:
            s = spec.with_gain(int(g) if spec.kind == "number" else g)
            for l in range(l_max + 1):
                value = preamp_moment(s, f, l, state, eff)
                err = value - targets[l]
                row = {"state": name, "g": g, "l": l, "value": value, "target": targets[l], "error": err}
                if even and l >= 2 and g <= EVEN_DIVERGENT_GAIN:
                    row["flag"] = DIVERGENT_FLAG
                else:
                    errs[l].append(err)
                    fit_gains[l].append(g)
                    if l == 2 and abs(targets[2]) > 0:
                        ratios.setdefault(name, {})[g] = value / targets[2]
                report.rows.append(row)
        for l in range(1, l_max + 1):
            if len(fit_gains[l]) < 2:
                raise ConfigError(f"fewer than two usable gains for l={l} on state {name!r}")
            p, conv = fit_exponent(fit_gains[l], errs[l], abs(targets[l]))
            report.fit.append({"state": name, "l": l, "exponent": p, "converges": conv})
            ok &= conv
    report.verdict = "converges" if ok else "diverges-from-target"
    if ratios:
        report.extra["ratio_l2"] = {k: {repr(g): r for g, r in v.items()} for k, v in ratios.items()}
    return report


# ----------------------------------------------------------------------------
# K counterexample
# ----------------------------------------------------------------------------


def _has_even_part(psi: GridWavefunction) -> bool:
    """True when ``psi(0) != 0``, which makes ``<Y^2>`` of the amplified state infinite for ``g <= 2``."""
    zero = psi.spec.size // 2
    return bool(abs(psi.values[zero]) ** 2 > EVEN_AMPLITUDE_TOL)


def asymptotic_k_moments(k_moments: list[float], c: float, g: float) -> tuple[float, float, float]:
    """Moments ``l = 0, 1, 2`` of the infinite-gain Gaussian outcome.

    Mean ``K + g c K^2 / 8``, variance ``K^2 / 4``, averaged over the state.
    """
    k1, k2, k3, k4 = k_moments[1:5]
    s = g * c / 8.0
    m1 = k1 + s * k2
    m2 = k2 + 2.0 * s * k3 + s * s * k4 + 0.25 * k2
    return 1.0, m1, m2


def k_counterexample_report(c: float = 0.0, states=None, gains=(2.0, 4.0, 8.0), grid: GridSpec | None = None) -> MomentReport:
    """Three routes for the preamplified K measurement with ``f = Im(alpha^2) + (c/2)|alpha|^2``.

    (i) grid: amplify with the K amplifier and evaluate anti-normal moments;
    (ii) asymptotic: moments of the infinite-gain Gaussian outcome;
    (iii) l = 0, 1 exactness of route (i).
    """
    spec_grid = default_grid() if grid is None else grid
    if states is None:
        states = {
            "fock:1": fock_state(1, 8),
            "fock:3": fock_state(3, 8),
            "squeezed:0.5,-pi/2": squeezed_vacuum(0.5, -np.pi / 2, 60),
        }
    named = _named_states(states)
    gains = [float(g) for g in gains]
    f = PhaseSpacePolynomial.k_family(c)
    report = MomentReport("k", f.name, 1.0, [n for n, _ in named])
    report.extra["c"] = c
    kmom = {}
    agreement = {}
    exactness = []
    ratios: dict[str, dict[str, float]] = {}
    flags = []
    for name, state in named:
        if not isinstance(state, StateVector):
            raise ConfigError("counterexample states must be pure Fock state vectors")
        fock_m = _padded_power_moments(k_operator, state.density(), 4, 2)
        psi = fock_to_grid(state, spec_grid)
        grid_m = grid_k_moments(psi)
        diff = max(abs(a - b) / max(1.0, abs(a)) for a, b in zip(fock_m, grid_m))
        kmom[name] = {"fock": fock_m, "grid": grid_m}
        agreement[name] = {"max_rel_diff": diff, "agrees": diff <= K_AGREEMENT_TOL}
        even = _has_even_part(psi)
        k2 = fock_m[2]
        for g in gains:
            asym = asymptotic_k_moments(fock_m, c, g)
            for l in (0, 1, 2):
                report.rows.append(
                    {"state": name, "g": g, "l": l, "route": "asymptotic", "value": asym[l], "target": fock_m[l], "error": asym[l] - fock_m[l]}
                )
            try:
                out = k_amplifier_apply(psi, g)
            except GridResolutionError as exc:
                flags.append({"state": name, "g": g, "flag": f"grid failure: {exc}"})
                continue
            levels = (0, 1, 2) if c == 0 else (0, 1)
            for l in levels:
                value = _grid_preamp(f, l, out, g)
                row = {"state": name, "g": g, "l": l, "route": "grid", "value": value, "target": fock_m[l], "error": value - fock_m[l]}
                if l == 2 and even and g <= EVEN_DIVERGENT_GAIN:
                    row["flag"] = DIVERGENT_FLAG
                report.rows.append(row)
                if l == 2 and k2 > 0 and "flag" not in row:
                    ratios.setdefault(name, {})[repr(g)] = value / k2
                if l in (0, 1) and c == 0:
                    exactness.append({"state": name, "g": g, "l": l, "error": value - fock_m[l], "exact": abs(value - fock_m[l]) <= 1e-6})
        if c == 0 and k2 > 0:
            report.fit.append({"state": name, "l": 2, "asymptotic_ratio": asymptotic_k_moments(fock_m, 0.0, 1.0)[2] / k2})
    report.extra.update(
        {
            "k_moments": kmom,
            "k_moment_agreement": agreement,
            "l01_exactness": exactness,
            "ratio_l2_grid": ratios,
            "flags": flags,
        }
    )
    if c != 0:
        report.extra["note"] = "c != 0: the asymptotic mean carries g c <K^2>/8, which grows with g; only l <= 1 is evaluated on the grid"
    top = repr(gains[-1])
    final = [r[top] for r in ratios.values() if top in r]
    if c == 0 and final:
        report.extra["min_ratio_at_top_gain"] = min(final)
        report.verdict = "diverges-from-target" if min(final) >= DIVERGENCE_RATIO else "inconclusive"
    else:
        report.verdict = "inconclusive"
    return report


def _grid_preamp(f: PhaseSpacePolynomial, l: int, amplified: GridWavefunction, g: float) -> float:
    if l == 0:
        return 1.0
    return grid_operator_expectation(f**l, amplified) / g**l
