"""Command line front end: ``classevo {kerr,jc,ensemble,engine} ...``.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import ensemble as ens
from . import jc, kerr
from .errors import ClassevoError, DomainError
from .io import metadata, write_csv, write_json
from .manifold import (
    ClassicalParameter,
    HamiltonianModel,
    IntegratorOptions,
    evolve_constrained,
    quadratic_form_model,
)
from .phasespace import GridGeometry

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_int_list(text: str) -> list:
    """``"2,3,5"`` or an arithmetic progression ``"2,3,...,10"``."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        if "..." in parts:
            i = parts.index("...")
            if i < 2 or i != len(parts) - 2:
                raise ValueError
            head = [int(p) for p in parts[:i]]
            stop = int(parts[i + 1])
            step = head[1] - head[0]
            if step <= 0:
                raise ValueError
            return head[:-1] + list(range(head[-1], stop + 1, step))
        return [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None


def parse_float_list(text: str) -> list:
    try:
        return [float(eval_float(p)) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def eval_float(text: str) -> float:
    """Float with optional ``pi`` multiples, e.g. ``pi``, ``2pi``, ``0.5*pi``."""
    t = text.strip().lower().replace("*", "")
    if t.endswith("pi"):
        head = t[:-2]
        factor = 1.0 if head in ("", "+") else -1.0 if head == "-" else float(head)
        return factor * math.pi
    return float(t)


def _pifloat(text):
    try:
        return eval_float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None


def _complex(text):
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid complex number {text!r}") from None


def _options(args) -> IntegratorOptions:
    return IntegratorOptions(rtol=args.rtol, atol=args.atol, energy_tol=args.energy_tol)


def _add_integrator_flags(p):
    p.add_argument("--rtol", type=float, default=1e-12)
    p.add_argument("--atol", type=float, default=1e-13)
    p.add_argument("--energy-tol", type=float, default=1e-8)


# --------------------------------------------------------------------------
# kerr
# --------------------------------------------------------------------------


def run_kerr(args) -> list:
    params = kerr.KerrParams(args.omega, args.kappa)
    if params.kappa == 0 and args.t_over_kappa != 0:
        raise UsageError("kappa must be positive to express time as kappa*t")
    t = args.t_over_kappa / params.kappa if params.kappa else 0.0
    geometry = GridGeometry(
        (args.grid_min, args.grid_max), (args.grid_min, args.grid_max), args.grid_n, args.grid_n
    )
    spec = kerr.panel_spec(args.mode, t, args.alpha0, corotating=not args.lab_frame)
    panel = kerr.render_panel(
        spec, params, geometry, cutoff=args.cutoff, samples=args.samples, transport=args.transport
    )
    out = Path(args.out)
    w_path = out / f"wigner_{args.mode}.csv"
    panel.wigner.to_csv(w_path)
    t_path = write_csv(
        out / f"traj_{args.mode}.csv",
        ("t", "re_mean", "im_mean"),
        ((ti, m.real, m.imag) for ti, m in zip(panel.times, panel.means)),
    )
    outputs = [w_path, t_path]
    params_out = {
        "mode": args.mode,
        "label": spec.label,
        "alpha0": complex(args.alpha0),
        "omega": params.omega,
        "kappa": params.kappa,
        "kappa_t": args.t_over_kappa,
        "t": t,
        "grid": [args.grid_min, args.grid_max, args.grid_n],
        "cutoff": args.cutoff,
        "samples": args.samples,
        "transport": args.transport,
        "corotating": not args.lab_frame,
        "wigner_min": panel.wigner.min,
        "wigner_integral": panel.wigner.integral(),
    }
    m_path = out / f"kerr_{args.mode}.json"
    write_json(m_path, metadata("kerr", params_out, outputs))
    return outputs + [m_path]


# --------------------------------------------------------------------------
# jc
# --------------------------------------------------------------------------

JC_HEADER = (
    "t", "re_alpha", "im_alpha", "re_g", "im_g", "re_e", "im_e", "excitation", "entropy_exact"
)


def _jc_times(args, params) -> np.ndarray:
    if args.times is not None:
        times = sorted(set(parse_float_list(args.times)))
    elif args.t is not None:
        times = [args.t]
    else:
        t_max = args.kt_max / params.kappa if params.kappa else args.kt_max
        dt = args.dt if args.dt else t_max / 1000
        n = int(round(t_max / dt)) + 1
        times = list(np.linspace(0.0, t_max, n))
    if any(t < 0 for t in times):
        raise UsageError("times must be nonnegative")
    return np.asarray(times, dtype=float)


def _jc_rows(args, params, times):
    entropies = [jc.entanglement_entropy(jc.exact_quantum_solution(t, params)) for t in times]
    if args.solver == "quantum":
        rows = []
        for t, s in zip(times, entropies):
            st = jc.exact_quantum_solution(t, params)
            rho = st.reduced_atom().real
            a = st.mean_annihilation()
            pg, pe = max(rho[0, 0], 0.0), max(rho[1, 1], 0.0)
            rows.append(
                (t, a.real, a.imag, math.sqrt(pg), 0.0, math.sqrt(pe), 0.0,
                 st.mean_number() + pe, s)
            )
        return rows, None
    if args.solver == "analytic":
        alpha, atom = jc.analytic_semiclassical(times, params)
    else:
        alpha, atom = _jc_numeric(args, params, times)
    excitation = np.abs(alpha) ** 2 + np.abs(atom[:, 1]) ** 2
    rows = [
        (t, a.real, a.imag, g.real, g.imag, e.real, e.imag, x, s)
        for t, a, (g, e), x, s in zip(times, alpha, atom, excitation, entropies)
    ]
    return rows, (alpha, atom)


def _jc_numeric(args, params, times):
    grid = times if times[0] == 0.0 else np.concatenate(([0.0], times))
    traj = jc.integrate_semiclassical(
        jc.SemiClassicalState.standard_initial(), params, grid, _options(args)
    )
    sl = slice(0, None) if times[0] == 0.0 else slice(1, None)
    return traj.alpha[sl], traj.atom[sl]


def run_jc(args) -> list:
    params = jc.JCParams(args.omega, args.kappa)
    times = _jc_times(args, params)
    out = Path(args.out)
    rows, semi = _jc_rows(args, params, times)
    csv_path = write_csv(out / f"jc_{args.solver}.csv", JC_HEADER, rows)
    outputs = [csv_path]
    summary = {}
    if args.compare:
        if args.solver == "numeric":
            a_num, atom_num = semi
        else:
            a_num, atom_num = _jc_numeric(args, params, times)
        a_an, atom_an = jc.analytic_semiclassical(times, params)
        deviation = float(
            max(np.max(np.abs(a_num - a_an)), np.max(np.abs(atom_num - atom_an)))
        )
        summary["max_deviation_numeric_vs_analytic"] = deviation
        cmp_path = write_json(out / "jc_compare.json", {"max_deviation": deviation,
                                                         "kappa_t_max": float(times[-1]) * params.kappa})
        outputs.append(cmp_path)
        print(f"max deviation numeric vs analytic: {deviation:.3e}")
    params_out = {
        "solver": args.solver,
        "omega": params.omega,
        "kappa": params.kappa,
        "n_times": int(times.size),
        "t_first": float(times[0]),
        "t_last": float(times[-1]),
        "rtol": args.rtol,
        "atol": args.atol,
        **summary,
    }
    m_path = write_json(out / f"jc_{args.solver}.json", metadata("jc", params_out, outputs))
    return outputs + [m_path]


# --------------------------------------------------------------------------
# ensemble
# --------------------------------------------------------------------------


def run_ensemble(args) -> list:
    N = args.N
    if N < 1:
        raise UsageError("N must be positive")
    K_list = parse_int_list(args.K)
    bad = [K for K in K_list if K < 1 or N % K]
    if bad:
        raise UsageError(
            f"K={','.join(map(str, bad))} does not divide N={N}; valid K: "
            + ",".join(map(str, ens.divisors(N)))
        )
    if args.oracle and N > ens.DENSE_LIMIT:
        raise UsageError(f"--oracle requires N <= {ens.DENSE_LIMIT}")
    if args.beta <= 0 or args.R < 0:
        raise UsageError("need beta > 0 and R >= 0")
    tau = np.linspace(0.0, args.tau_max, args.n_tau)
    sweep = ens.fig2_sweep(N, K_list, args.R, tau, beta=args.beta)
    out = Path(args.out)
    rows = ((t, K, r) for K, curve in zip(sweep.K_list, sweep.ratios) for t, r in zip(tau, curve))
    csv_path = write_csv(out / "sweep.csv", ("tau", "K", "ratio"), rows)
    outputs = [csv_path]
    amp_path = write_csv(
        out / "sweep_amplitude.csv",
        ("K", "max_ratio", "half_period"),
        zip(sweep.K_list, sweep.max_amplitude(), sweep.half_period()),
    )
    outputs.append(amp_path)
    extra = {}
    if args.oracle:
        deviation = oracle_deviation(N, K_list, args.R, args.beta, tau)
        extra["oracle_max_deviation"] = deviation
        rep = write_json(
            out / "ensemble_oracle.json",
            {"max_elementwise_deviation": deviation, "N": N, "K": K_list, "R": args.R,
             "beta": args.beta, "tau_max": args.tau_max, "n_tau": args.n_tau},
        )
        outputs.append(rep)
        print(f"structured vs dense oracle: max deviation {deviation:.3e}")
    params_out = {
        "N": N,
        "K": K_list,
        "R": args.R,
        "beta": args.beta,
        "tau_max": args.tau_max,
        "n_tau": args.n_tau,
        "partition_sizes": {str(K): [N // K] * K if K <= 64 else f"{K} x {N // K}" for K in K_list},
        **extra,
    }
    m_path = write_json(out / "ensemble.json", metadata("ensemble", params_out, outputs))
    return outputs + [m_path]


def oracle_deviation(N, K_list, R, beta, tau) -> float:
    worst = 0.0
    for K in K_list:
        part = ens.Partition.balanced(N, K)
        blocks = ens.thermal_covariance(beta, part)
        C0 = ens.assemble_dense(blocks)
        dense = ens.dense_oracle(C0, ens.coupling_matrix(part, R), tau)
        for i, t in enumerate(tau):
            structured = ens.assemble_dense(
                [ens.propagate_block(b, j, part, R, float(t)) for j, b in enumerate(blocks)]
            )
            worst = max(worst, float(np.max(np.abs(structured - dense[i]))))
    return worst


# --------------------------------------------------------------------------
# engine
# --------------------------------------------------------------------------


def _engine_model(args):
    if args.model == "harmonic":
        w = args.omega

        def energy(z):
            return float(w * np.sum(np.abs(z) ** 2))

        model = HamiltonianModel(energy, lambda z: w * z, name="harmonic")
        return model, ClassicalParameter([args.alpha0], labels=("coherent amplitude",))
    if args.model == "kerr":
        params = kerr.KerrParams(args.omega, args.kappa)
        return kerr.kerr_model(params), kerr.kerr_parameter(args.alpha0)
    if args.model == "jc":
        params = jc.JCParams(args.omega, args.kappa)
        return jc.semiclassical_model(params), jc.SemiClassicalState.standard_initial().to_parameter()
    rng = np.random.default_rng(args.seed)
    d = args.dim
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = (X + X.conj().T) / 2
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi /= np.linalg.norm(psi)
    zeta = ClassicalParameter(psi, labels=tuple(f"psi_{k}" for k in range(d)),
                              normalized=(tuple(range(d)),))
    return quadratic_form_model(H), zeta


def run_engine(args) -> list:
    model, zeta0 = _engine_model(args)
    times = np.linspace(0.0, args.t_max, args.n_t)
    rec = evolve_constrained(model, zeta0, times, _options(args))
    header = ["t"]
    for k in range(zeta0.dim):
        header += [f"re_z{k}", f"im_z{k}"]
    header.append("energy")
    rows = []
    for t, z, e in zip(rec.times, rec.states, rec.energies):
        row = [t]
        for v in z:
            row += [v.real, v.imag]
        row.append(e)
        rows.append(row)
    out = Path(args.out)
    csv_path = write_csv(out / f"engine_{args.model}.csv", header, rows)
    params_out = {
        "model": args.model,
        "labels": list(zeta0.labels),
        "omega": args.omega,
        "kappa": args.kappa,
        "t_max": args.t_max,
        "n_t": args.n_t,
        "seed": args.seed,
        "energy_drift": rec.energy_drift,
        "norm_drift": rec.norm_drift,
        "steps": rec.step_stats,
    }
    m_path = write_json(out / f"engine_{args.model}.json", metadata("engine", params_out, [csv_path]))
    return [csv_path, m_path]


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_out(p):
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classevo", description="Classical versus quantum evolution experiments."
    )
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("kerr", help="Kerr-medium phase-space panels")
    p.add_argument("--mode", choices=("cc", "qc", "cq", "qq"), default="cc")
    p.add_argument("--alpha0", type=_complex, default=3.0)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--t-over-kappa", type=_pifloat, default=math.pi,
                   help="evolution time as kappa*t (accepts 'pi', '0.5pi')")
    p.add_argument("--grid-min", type=float, default=-6.0)
    p.add_argument("--grid-max", type=float, default=6.0)
    p.add_argument("--grid-n", type=int, default=301)
    p.add_argument("--cutoff", type=int, default=60)
    p.add_argument("--samples", type=int, default=kerr.TRAJECTORY_SAMPLES)
    p.add_argument("--transport", choices=("manifold", "liouville"), default="manifold")
    p.add_argument("--lab-frame", action="store_true", help="do not undo the free rotation")
    _add_out(p)
    p.set_defaults(func=run_kerr)

    p = sub.add_parser("jc", help="semi-classical Jaynes-Cummings dynamics")
    p.add_argument("--solver", choices=("numeric", "analytic", "quantum"), default="numeric")
    p.add_argument("--omega", type=float, default=10.0)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--kt-max", type=_pifloat, default=10.0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t", type=_pifloat, default=None, help="single output time")
    p.add_argument("--times", default=None, help="comma-separated output times")
    p.add_argument("--compare", action="store_true")
    _add_integrator_flags(p)
    _add_out(p)
    p.set_defaults(func=run_jc)

    p = sub.add_parser("ensemble", help="K-separable oscillator ensembles")
    p.add_argument("--N", type=int, default=math.factorial(10))
    p.add_argument("--K", default="2,3,...,10")
    p.add_argument("--R", type=float, default=1e-6)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tau-max", type=float, default=10.0)
    p.add_argument("--n-tau", type=int, default=1001)
    p.add_argument("--oracle", action="store_true")
    _add_out(p)
    p.set_defaults(func=run_ensemble)

    p = sub.add_parser("engine", help="generic constrained evolution")
    p.add_argument("--model", choices=("harmonic", "kerr", "jc", "schrodinger"), default="kerr")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--alpha0", type=_complex, default=3.0)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--n-t", type=int, default=101)
    _add_integrator_flags(p)
    _add_out(p)
    p.set_defaults(func=run_engine)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        parser.error(f"cannot create output directory: {exc}")
    try:
        for path in args.func(args):
            print(path)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"{parser.prog} {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ClassevoError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"{parser.prog} {args.subcommand}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
