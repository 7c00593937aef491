"""Command-line front end writing CSV/JSON artifacts.

Exit codes: 0 success, 2 configuration error, 3 numerical-resolution
failure, 4 a requested ``--assert-*`` check failed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from . import artifacts
from .amplifiers import AmplifierSpec, preamp_number_density, preamp_quadrature_density
from .errors import (
    BranchError,
    ConfigError,
    EnvelopeError,
    GridResolutionError,
    TruncationError,
    UnsupportedObservableError,
)
from .experiments import FIG1_GAINS, comb_peaks, comb_table, is_unimodal
from .fock import (
    PhaseSpacePolynomial,
    StateVector,
    cat_state,
    coherent_state,
    fock_state,
    squeezed_vacuum,
    vacuum,
)
from .grid import make_grid
from .heterodyne import (
    generic_marginal_density,
    heterodyne_sample,
    number_marginal_density,
    quadrature_marginal_density,
)
from .verification.bch import remainder_exponents, residual_summary
from .verification.moments import k_counterexample_report, moment_condition_report
from .verification.stirling import stirling_first_kind

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOLUTION = 3
EXIT_VERDICT = 4

MAX_AUTO_DIM = 4096


class VerdictFailure(Exception):
    pass


# ----------------------------------------------------------------------------
# state descriptors
# ----------------------------------------------------------------------------


def _parse_complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex amplitude {text!r}") from exc


def _parse_angle(text: str) -> float:
    t = text.strip().replace(" ", "")
    sign = -1.0 if t.startswith("-") else 1.0
    t = t.lstrip("+-")
    if "pi" in t:
        num, _, den = t.partition("/")
        coeff = num.replace("*", "").replace("pi", "")
        val = (float(coeff) if coeff else 1.0) * np.pi / (float(den) if den else 1.0)
        return sign * val
    try:
        return sign * float(t)
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle {text!r}") from exc


def _build(kind: str, arg: str, dim: int) -> StateVector:
    if kind == "vacuum":
        return vacuum(dim)
    if kind == "fock":
        return fock_state(int(arg), dim)
    if kind == "coherent":
        if arg.startswith("n="):
            mean = float(arg[2:])
            if mean < 0:
                raise ConfigError("mean photon number must be nonnegative")
            return coherent_state(np.sqrt(mean), dim)
        return coherent_state(_parse_complex(arg), dim)
    if kind == "squeezed":
        parts = arg.split(",")
        theta = _parse_angle(parts[1]) if len(parts) > 1 else 0.0
        return squeezed_vacuum(float(parts[0]), theta, dim)
    if kind == "cat":
        parts = arg.split(",")
        parity = int(parts[1]) if len(parts) > 1 else 1
        return cat_state(_parse_complex(parts[0]), dim, parity)
    raise ConfigError(f"unknown state kind {kind!r}; use vacuum, fock:n, coherent:beta, coherent:n=N, squeezed:r[,theta], cat:beta[,parity]")


def parse_state(descriptor: str, dim: int | None = None) -> StateVector:
    """Build a state from ``vacuum``, ``fock:n``, ``coherent:beta``, ``coherent:n=N``, ``squeezed:r[,theta]`` or ``cat:beta[,parity]``.

    Without ``dim`` the smallest power-of-two truncation (from 16) that holds
    the state to the default tail tolerance is used.
    """
    kind, _, arg = descriptor.strip().partition(":")
    if kind != "vacuum" and not arg:
        raise ConfigError(f"state {descriptor!r} needs a parameter")
    try:
        if dim is not None:
            return _build(kind, arg, dim)
        d = 16
        if kind == "fock":
            d = max(d, int(arg) + 3)
        while True:
            try:
                return _build(kind, arg, d)
            except TruncationError:
                d *= 2
                if d > MAX_AUTO_DIM:
                    raise
    except (ValueError, IndexError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed state descriptor {descriptor!r}: {exc}") from exc


def parse_observable(name: str, phi: float, c: float) -> PhaseSpacePolynomial:
    table = {
        "abs_alpha2": PhaseSpacePolynomial.number,
        "number": PhaseSpacePolynomial.number,
        "re_alpha": lambda: PhaseSpacePolynomial.quadrature(phi),
        "quadrature": lambda: PhaseSpacePolynomial.quadrature(phi),
        "im_alpha2": PhaseSpacePolynomial.im_alpha2,
        "k": lambda: PhaseSpacePolynomial.k_family(c),
    }
    if name not in table:
        raise ConfigError(f"unknown function {name!r}; choose from {sorted(table)}")
    return table[name]()


def _parse_gains(text: str) -> list[float]:
    try:
        gains = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse gains {text!r}") from exc
    if not gains or any(g < 1 for g in gains):
        raise ConfigError("gains must be >= 1")
    return gains


def _int_gain(g: float) -> int:
    if g != int(g):
        raise ConfigError(f"number-amplifier gain must be an integer, got {g!r}")
    return int(g)


# ----------------------------------------------------------------------------
# shared plumbing
# ----------------------------------------------------------------------------


@dataclass
class Output:
    args: argparse.Namespace

    def csv(self, header, columns, metadata):
        meta = {"command": self.args.command, **metadata}
        if self.args.out:
            artifacts.write_csv(self.args.out, header, columns, meta)
        else:
            sys.stdout.write(artifacts.csv_text(header, columns, meta))

    def json(self, obj):
        if self.args.out:
            artifacts.write_json(self.args.out, obj)
        else:
            sys.stdout.write(artifacts.json_text(obj))


def _grid(args):
    if args.grid_points is None and args.grid_max is None and args.grid_floor is None:
        return None
    kw = {}
    if args.grid_points is not None:
        kw["points_per_side"] = args.grid_points
    if args.grid_max is not None:
        kw["half_width"] = args.grid_max
    if args.grid_floor is not None:
        kw["log_floor"] = args.grid_floor
    return make_grid(**kw)


def _check_eta(eta: float) -> float:
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"--eta must lie in (0, 1], got {eta}")
    return eta


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_fig1(args) -> int:
    state = parse_state(args.state, args.dim)
    gains = [_int_gain(g) for g in (_parse_gains(args.gains) if args.gains else FIG1_GAINS)]
    table = comb_table(state, gains, args.h_max, args.h_points)
    meta = {"state": args.state, "gains": ",".join(map(str, gains)), "h_max": args.h_max, "eta": 1.0}
    Output(args).csv(["h"] + [f"p_g{g}" for g in gains], [table.h] + [table.columns[g] for g in gains], meta)
    if args.assert_comb:
        mean = float(np.real(np.sum(np.arange(state.dim) * np.abs(state.amplitudes) ** 2)))
        failures = []
        for g in gains:
            p = table.columns[g]
            if g == 1 and not is_unimodal(p):
                failures.append("g=1 density is not unimodal")
            if g >= 1000:
                for pk in comb_peaks(table.h, p, mean):
                    if pk.offset is None or pk.offset >= 0.02 or pk.mass_rel_error >= 0.02:
                        failures.append(f"g={g} peak n={pk.n}: offset={pk.offset} mass error={pk.mass_rel_error:.3g}")
        if failures:
            raise VerdictFailure("; ".join(failures))
    return EXIT_OK


def cmd_density(args) -> int:
    state = parse_state(args.state, args.dim)
    eta = _check_eta(args.eta)
    f = parse_observable(args.f, args.phi, args.c)
    method = args.method
    if method == "analytic":
        if args.f in ("abs_alpha2", "number"):
            h = np.linspace(0.0, args.h_max if args.h_max else 4.0 * state.dim, args.h_points or 4001)
            if eta != 1.0:
                raise ConfigError("the analytic |alpha|^2 density needs --eta 1; use --method monte-carlo")
            dens = number_marginal_density(state, 1.0, h)
        elif args.f in ("re_alpha", "quadrature"):
            dens = quadrature_marginal_density(state, args.phi, eta, _grid(args))
        else:
            raise ConfigError(f"no analytic density for {args.f!r}; use --method monte-carlo or quadrature2d")
    else:
        bins = "fd" if args.bins is None else args.bins
        dens = generic_marginal_density(state, f, eta, bins, method, args.samples, args.seed)
    meta = {"state": args.state, "f": f.name, "eta": eta, "method": dens.method, "samples": dens.samples, "seed": dens.seed}
    Output(args).csv(["u", "p"], [dens.support, dens.density], meta)
    return EXIT_OK


def cmd_sample(args) -> int:
    state = parse_state(args.state, args.dim)
    eta = _check_eta(args.eta)
    count = args.n if args.n is not None else args.samples
    sample = heterodyne_sample(state, count, eta, args.seed, args.acceptance_floor)
    meta = {"state": args.state, "eta": eta, "seed": args.seed, "count": count}
    Output(args).csv(["re", "im"], [sample.values.real, sample.values.imag], meta)
    return EXIT_OK


def cmd_preamp(args) -> int:
    state = parse_state(args.state, args.dim)
    eta = _check_eta(args.eta)
    g = args.gain
    if args.amplifier == "number":
        gi = _int_gain(g)
        h = None
        if args.h_points:
            h = np.linspace(0.0, args.h_max or 30.0, args.h_points)
        pd = preamp_number_density(state, gi, eta, h, args.samples, args.seed)
    elif args.amplifier == "quadrature":
        pd = preamp_quadrature_density(state, args.phi, g, eta, _grid(args))
    else:
        raise ConfigError("the K amplifier has no density route; use the moments or counterexample commands")
    meta = {"state": args.state, **pd.metadata(), "method": pd.density.method}
    Output(args).csv(["u", "p"], [pd.support, pd.values], meta)
    return EXIT_OK


DEFAULT_MOMENT_STATES = {
    "number": ["coherent:2"],
    "quadrature": ["vacuum", "coherent:1+1j"],
    "k": ["squeezed:0.5,-pi/2"],
}
DEFAULT_MOMENT_GAINS = {"number": "2,4,8,16", "quadrature": "2,4,8,16", "k": "4,8,16"}


def cmd_moments(args) -> int:
    eta = _check_eta(args.eta)
    kind = args.observable
    gains = _parse_gains(args.gains or DEFAULT_MOMENT_GAINS[kind])
    if kind == "number":
        spec = AmplifierSpec.number(_int_gain(gains[0]))
        f = PhaseSpacePolynomial.number()
    elif kind == "quadrature":
        spec = AmplifierSpec.quadrature(args.phi, max(gains[0], 1.0 + 1e-9))
        f = PhaseSpacePolynomial.quadrature(args.phi)
    else:
        spec = AmplifierSpec.k(max(gains[0], 1.0 + 1e-9))
        f = PhaseSpacePolynomial.k_family(args.c)
    names = args.state or DEFAULT_MOMENT_STATES[kind]
    states = {n: parse_state(n, args.dim) for n in names}
    report = moment_condition_report(spec, gains, f, states, eta, args.l_max)
    Output(args).json(report.to_dict())
    if args.assert_converges and report.verdict != "converges":
        raise VerdictFailure(f"verdict is {report.verdict!r}, expected 'converges'")
    if args.assert_diverges and report.verdict != "diverges-from-target":
        raise VerdictFailure(f"verdict is {report.verdict!r}, expected 'diverges-from-target'")
    return EXIT_OK


def cmd_counterexample(args) -> int:
    gains = _parse_gains(args.gains or "2,4,8")
    states = {n: parse_state(n, args.dim) for n in args.state} if args.state else None
    report = k_counterexample_report(args.c, states, gains, _grid(args))
    Output(args).json(report.to_dict())
    if args.assert_ratio_min is not None:
        got = report.extra.get("min_ratio_at_top_gain")
        if got is None or got < args.assert_ratio_min:
            raise VerdictFailure(f"minimum grid ratio {got} below {args.assert_ratio_min}")
    return EXIT_OK


def cmd_bch(args) -> int:
    summary = residual_summary(args.trials, args.radius, args.seed)
    summary["remainder_exponents"] = {
        f"c={c!r}": remainder_exponents(1.0, c) for c in sorted({0.0, args.c if args.c else 1.0})
    }
    Output(args).json(summary)
    if args.assert_residual is not None and summary["max_residual"] >= args.assert_residual:
        raise VerdictFailure(f"max residual {summary['max_residual']:.3e} >= {args.assert_residual}")
    return EXIT_OK


def cmd_stirling(args) -> int:
    table = stirling_first_kind(args.l_max)
    ls, ks, ss = [], [], []
    for l in range(table.l_max + 1):
        for k in range(l + 1):
            ls.append(l)
            ks.append(k)
            ss.append(table(l, k))
    # exact integers are written verbatim (they may exceed 64 bits)
    rows = "\n".join(f"{l},{k},{s}" for l, k, s in zip(ls, ks, ss))
    text = f"# command=stirling\n# l_max={table.l_max}\nl,k,s\n{rows}\n"
    if args.out:
        artifacts._atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "fig1": cmd_fig1,
    "density": cmd_density,
    "sample": cmd_sample,
    "preamp": cmd_preamp,
    "moments": cmd_moments,
    "counterexample": cmd_counterexample,
    "bch": cmd_bch,
    "stirling": cmd_stirling,
}


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=None, help="Fock truncation (default: automatic)")
    p.add_argument("--eta", type=float, default=1.0, help="detector efficiency in (0, 1]")
    p.add_argument("--gain", type=float, default=2.0)
    p.add_argument("--gains", type=str, default=None, help="comma-separated gain ladder")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-points", type=int, default=None, help="log-grid points per side")
    p.add_argument("--grid-max", type=float, default=None, help="grid half width")
    p.add_argument("--grid-floor", type=float, default=None, help="center-exclusion radius")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="accepted for uniformity; each command has one format")
    p.add_argument("--out", type=str, default=None, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetpreamp", description="Preamplified heterodyne detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fig1", help="photon-number comb densities for several gains")
    _shared(p)
    p.add_argument("--state", default="coherent:n=12")
    p.add_argument("--h-max", type=float, default=30.0)
    p.add_argument("--h-points", type=int, default=None, help="default: just resolves the narrowest comb tooth")
    p.add_argument("--assert-comb", action="store_true", help="check comb peak positions and masses (g>=1000) and g=1 unimodality")

    p = sub.add_parser("density", help="heterodyne marginal density of f")
    _shared(p)
    p.add_argument("--state", default="vacuum")
    p.add_argument("--f", default="abs_alpha2")
    p.add_argument("--method", choices=("analytic", "monte-carlo", "quadrature2d"), default="monte-carlo")
    p.add_argument("--h-max", type=float, default=None)
    p.add_argument("--h-points", type=int, default=None)

    p = sub.add_parser("sample", help="heterodyne outcomes")
    _shared(p)
    p.add_argument("--state", default="vacuum")
    p.add_argument("--n", type=int, default=None, help="sample count (overrides --samples)")
    p.add_argument("--acceptance-floor", type=float, default=0.05, help="minimum envelope acceptance rate")

    p = sub.add_parser("preamp", help="preamplified outcome density")
    _shared(p)
    p.add_argument("--state", default="vacuum")
    p.add_argument("--amplifier", choices=("number", "quadrature", "k"), default="number")
    p.add_argument("--h-max", type=float, default=None)
    p.add_argument("--h-points", type=int, default=None)

    p = sub.add_parser("moments", help="moment-convergence report along a gain ladder")
    _shared(p)
    p.add_argument("--observable", choices=("number", "quadrature", "k"), default="number")
    p.add_argument("--state", action="append", default=None, help="repeatable state descriptor")
    p.add_argument("--l-max", type=int, default=2)
    p.add_argument("--assert-converges", action="store_true")
    p.add_argument("--assert-diverges", action="store_true")

    p = sub.add_parser("counterexample", help="preamplified K measurement report")
    _shared(p)
    p.add_argument("--state", action="append", default=None, help="repeatable state descriptor")
    p.add_argument("--assert-ratio-min", type=float, default=None, help="e.g. 1.2")

    p = sub.add_parser("bch", help="su(1,1) disentangling residuals")
    _shared(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--assert-residual", type=float, default=None, help="e.g. 1e-10")

    p = sub.add_parser("stirling", help="signed Stirling numbers of the first kind")
    _shared(p)
    p.add_argument("--l-max", type=int, default=12)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.samples < 1:
            raise ConfigError("--samples must be >= 1")
        return COMMANDS[args.command](args)
    except (ConfigError, UnsupportedObservableError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridResolutionError, TruncationError, EnvelopeError, BranchError) as exc:
        print(f"numerical resolution failure: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except VerdictFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
