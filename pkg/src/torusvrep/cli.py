"""Command-line entry point: solve, invert, nrep, example, verify.

Exit codes: 0 success, 2 invalid input or configuration, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .fourier import OVERSAMPLING, norm, oversampled_size, random_function
from .groundstate import (
    BoundError,
    ConvergenceError,
    cutoff_convergence,
    kinetic_bound_estimate,
    shifted_coercivity_check,
    solve,
    validate_kinetic_bound,
)
from .inversion import InversionOptions, lieb_maximize
from .manybody import Interaction, ModelSpec
from .nrep import construct
from .spaces import (
    DensityError,
    PotentialError,
    cosine_potential,
    delta_potential,
    englisch_density,
    make_density,
    membership,
    zero_potential,
)

log = logging.getLogger("torusvrep")

EXIT_OK, EXIT_INVALID, EXIT_NOCONV = 0, 2, 3


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------- parser

def _positive_float(s):
    x = float(s)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
    return x


def _nonneg_int(s):
    x = int(s)
    if x < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return x


def _add_common(p):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--out", default=None, help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="threads for block solves")
    p.add_argument("--svg", action="store_true", help="also write SVG line plots")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_model(p, need_n=True):
    if need_n:
        p.add_argument("--n", type=int, default=1, help="particle number")
    p.add_argument("--cutoff", type=_nonneg_int, default=None, help="orbital momentum cutoff K")
    p.add_argument("--spinful", action="store_true", help="spin-1/2 fermions (default spinless)")
    p.add_argument("--interaction", choices=["none", "delta"], default="none")
    p.add_argument("--coupling", type=float, default=0.0, help="delta interaction strength")


def _add_potential(p):
    p.add_argument("--potential", default="zero",
                   help="zero | delta | cos | path to a potential JSON file")
    p.add_argument("--gamma", type=float, default=1.0, help="delta comb strength")
    p.add_argument("--amplitude", type=float, default=1.0, help="cosine amplitude")
    p.add_argument("--mode", type=int, default=1, help="cosine wave number")
    p.add_argument("--potential-cutoff", type=_nonneg_int, default=None,
                   help="potential modes kept (default 2K)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torus-vrep",
                                 description="Distributional potentials and density inversion on the ring.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="ground state of -1/2 Laplacian + W + V")
    _add_model(p)
    _add_potential(p)
    p.add_argument("--check-convergence", action="store_true",
                   help="compare E0 at K and K+4")
    _add_common(p)

    p = sub.add_parser("invert", help="find a potential for a density")
    p.add_argument("--density", required=True, help="density JSON file, or - for stdin")
    _add_model(p, need_n=False)
    p.add_argument("--potential-cutoff", type=_nonneg_int, default=None,
                   help="potential modes optimized (default 2K)")
    p.add_argument("--tol-rho", type=_positive_float, default=1e-5)
    p.add_argument("--tol-cert", type=_positive_float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--prox", type=float, default=0.0, help="proximal H^-1 weight (0 = off)")
    _add_common(p)

    p = sub.add_parser("nrep", help="determinant with a prescribed density")
    p.add_argument("--density", required=True, help="density JSON file, or - for stdin")
    _add_common(p)

    p = sub.add_parser("example", help="write a sample density to stdout or --out")
    p.add_argument("name", choices=["englisch", "cosine", "constant"])
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--cutoff", type=_nonneg_int, default=32)
    _add_common(p)

    p = sub.add_parser("verify", help="sampled-state checks of the analytic bounds")
    p.add_argument("check", choices=["kinetic-bounds", "vw-estimate", "concavity"])
    _add_model(p)
    _add_potential(p)
    p.add_argument("--eps", type=_positive_float, default=0.1)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--bound-cutoff", type=int, default=20000,
                   help="modes of the delta comb used for the bound")
    _add_common(p)
    return ap


# --------------------------------------------------------------------------- config

def _parse_bool(s):
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {s!r}")


def read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc.strerror}") from None
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {i}: expected key=value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _subparser(ap, name):
    for a in ap._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices[name]
    raise KeyError(name)


def parse(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        sp = _subparser(ap, args.command)
        actions = {a.dest: a for a in sp._actions}
        given = set()
        for tok in argv:
            if tok.startswith("--"):
                given.add(tok[2:].split("=", 1)[0].replace("-", "_"))
        defaults = {}
        for k, v in cfg.items():
            if k not in actions or k in ("config", "help", "command"):
                raise UsageError(f"config: unknown field {k!r}")
            act = actions[k]
            if k in given:
                continue
            try:
                if act.nargs == 0:
                    defaults[k] = _parse_bool(v)
                else:
                    val = act.type(v) if act.type else v
                    if act.choices is not None and val not in act.choices:
                        raise UsageError(f"config: field {k!r} must be one of {list(act.choices)}")
                    defaults[k] = val
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config: invalid value for field {k!r}: {exc}") from None
        for k, v in defaults.items():
            setattr(args, k, v)
    return args


# --------------------------------------------------------------------------- helpers

def _outdir(args) -> Path:
    d = Path(args.out or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _model(args, n=None, cutoff=None):
    n = args.n if n is None else n
    K = args.cutoff if args.cutoff is not None else cutoff
    if K is None:
        K = 8
    if args.interaction == "delta":
        inter = Interaction.delta(args.coupling)
    else:
        inter = Interaction.none()
    try:
        return ModelSpec(n, K, args.spinful, inter)
    except ValueError as exc:
        raise UsageError(f"model: {exc}") from None


def _potential(args, K):
    Kv = args.potential_cutoff if args.potential_cutoff is not None else 2 * K
    name = args.potential
    if name == "zero":
        return zero_potential(max(Kv, 1))
    if name == "delta":
        return delta_potential(args.gamma, max(Kv, 1))
    if name == "cos":
        if args.mode < 1 or args.mode > max(Kv, 1):
            raise UsageError("field 'mode' must lie in 1..potential cutoff")
        return cosine_potential(args.amplitude, max(Kv, 1), args.mode)
    obj = io.load_field(name)
    if obj.__class__.__name__ != "PotentialClass":
        raise UsageError(f"field 'potential': {name} does not hold a potential")
    return obj


def _read_density(src):
    if src == "-":
        return io.load_field(sys.stdin)
    return io.load_field(src)


def _model_dict(spec):
    return {"n_particles": spec.n_particles, "cutoff": spec.cutoff, "spinful": spec.spinful,
            "interaction": spec.interaction.kind, "coupling": spec.interaction.strength}


# --------------------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    spec = _model(args)
    v = _potential(args, spec.cutoff)
    res = solve(spec, v, workers=args.workers)
    out = _outdir(args)
    report = {
        "schema": io.SCHEMA,
        "command": "solve",
        "model": _model_dict(spec),
        "potential_cutoff": v.cutoff,
        "energy": res.energy,
        "degeneracy": res.degeneracy,
        "energies": res.energies,
        "gap": res.gap,
        "diagnostics": {k: res.diagnostics[k] for k in
                        ("blocks_total", "blocks_solved", "blocks_pruned", "largest_block",
                         "solver", "basis_size", "gap_is_lower_bound")},
        "max_residual": max(res.diagnostics["residuals"]),
        "oversampling": OVERSAMPLING,
    }
    code = EXIT_OK
    if args.check_convergence:
        study = cutoff_convergence(spec, lambda K: _potential(args, K))
        report["convergence"] = {"cutoffs": study.cutoffs, "energies": study.energies,
                                 "change": study.change, "converged": study.converged}
        if not study.converged:
            code = EXIT_NOCONV
    io.write_json(out / "solve.json", report)
    io.save_field(out / "density.json", res.density)
    M = oversampled_size(max(res.density.cutoff, v.cutoff, 1))
    cols = io.profile_columns({"rho": res.density, "v": v}, M)
    io.write_csv(out / "profile.csv", cols)
    if args.svg:
        io.write_svg(out / "density.svg", cols["x"], {"rho": cols["rho"]}, "ground density")
    print(f"E0 = {res.energy:.12g} (degeneracy {res.degeneracy})")
    return code


def cmd_invert(args) -> int:
    rho = _read_density(args.density)
    if rho.__class__.__name__ != "DensityField":
        raise UsageError("field 'density': input does not hold a density")
    spec = _model(args, n=rho.n_particles, cutoff=max(rho.cutoff, 1))
    opts = InversionOptions(tol_rho=args.tol_rho, tol_cert=args.tol_cert, max_iter=args.max_iter,
                            potential_cutoff=args.potential_cutoff, prox=args.prox,
                            workers=args.workers)
    res = lieb_maximize(rho, spec, opts)
    cert = res.certificate
    out = _outdir(args)
    report = {
        "schema": io.SCHEMA,
        "command": "invert",
        "model": _model_dict(spec),
        "converged": res.converged,
        "message": res.message,
        "iterations": res.iterations,
        "certificate": {"dual": cert.dual, "primal": cert.primal, "gap": cert.gap,
                        "mismatch": cert.mismatch, "accepted": cert.accepted,
                        "weak_duality": cert.weak_duality, "primal_source": cert.primal_source,
                        "ensemble_energy": cert.ensemble_energy},
        "mismatch": res.mismatch,
        "weights": res.weights,
        "potential_norms": {"Hminus1": norm(res.potential, "Hminus1"),
                            "L2": norm(res.potential, "L2")},
        "metadata": res.metadata,
    }
    io.write_json(out / "invert.json", report)
    io.save_field(out / "potential.json", res.potential)
    io.write_csv(out / "trace.csv", {k: [t[k] for t in res.trace]
                                     for k in ("iter", "G", "mismatch", "step")})
    M = oversampled_size(max(res.potential.cutoff, 1))
    rv = res.ground_state.ensemble_density(res.weights)
    cols = io.profile_columns({"rho": rho, "rho_v": rv, "v": res.potential}, M)
    io.write_csv(out / "profile.csv", cols)
    if args.svg:
        io.write_svg(out / "potential.svg", cols["x"], {"v": cols["v"]}, "potential")
        io.write_svg(out / "density.svg", cols["x"], {"rho": cols["rho"], "rho_v": cols["rho_v"]},
                     "target and achieved density")
    print(f"mismatch {res.mismatch:.3e}, gap {cert.gap:.3e}, "
          f"certificate {'accepted' if cert.accepted else 'rejected'}")
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_nrep(args) -> int:
    rho = _read_density(args.density)
    if rho.__class__.__name__ != "DensityField":
        raise UsageError("field 'density': input does not hold a density")
    c = construct(rho)
    out = _outdir(args)
    gram = c.gram()
    report = {
        "schema": io.SCHEMA,
        "command": "nrep",
        "n_particles": c.n_particles,
        "grid": c.grid.size,
        "kinetic": c.kinetic,
        "kinetic_quadrature": c.kinetic_quadrature,
        "vw": c.vw,
        "constants": {"C1": c.constants[0], "C2": c.constants[1]},
        "bound": c.bound,
        "bound_holds": bool(c.kinetic <= c.bound),
        "density_error": c.density_error(),
        "orthonormality_error": float(np.max(np.abs(gram - np.eye(c.n_particles)))),
        "periodicity_error": c.periodicity_error(),
        "orbitals_re": c.orbitals.real,
        "orbitals_im": c.orbitals.imag,
    }
    io.write_json(out / "nrep.json", report)
    cols = {"x": c.grid, "rho_in": c.density.samples(c.grid.size), "rho_reconstructed": c.reconstructed}
    for k, phi in enumerate(c.orbitals):
        cols[f"abs_phi_{k}"] = np.abs(phi)
    io.write_csv(out / "nrep.csv", cols)
    if args.svg:
        io.write_svg(out / "nrep.svg", c.grid, {"rho_in": cols["rho_in"],
                                               "rho_reconstructed": cols["rho_reconstructed"]},
                     "density reconstruction")
    print(f"T = {c.kinetic:.12g} <= {c.bound:.12g}")
    return EXIT_OK


def cmd_example(args) -> int:
    if args.name == "englisch":
        rho = englisch_density(args.a, args.b, args.alpha, args.n, args.cutoff)
    elif args.name == "cosine":
        c = np.zeros(2 * max(args.cutoff, 1) + 1)
        K = max(args.cutoff, 1)
        c[K] = 1.0
        c[K - 1] = c[K + 1] = args.amplitude / 2
        rho = make_density(args.n, coefficients=c)
    else:
        rho = make_density(args.n, coefficients=np.eye(1, 2 * args.cutoff + 1, args.cutoff)[0])
    text = io.dumps(io.field_to_dict(rho))
    if args.out:
        out = _outdir(args)
        io.write_text(out / f"{args.name}.json", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = _model(args, cutoff=3)
    out = _outdir(args)
    if args.check == "kinetic-bounds":
        if args.potential == "delta":
            vb = delta_potential(args.gamma, args.bound_cutoff)
        else:
            vb = _potential(args, spec.cutoff)
        try:
            bound = kinetic_bound_estimate(vb, args.eps, spec)
        except BoundError as exc:
            raise UsageError(f"field 'eps': {exc}") from None
        v = vb.padded(2 * spec.cutoff)
        rep = validate_kinetic_bound(bound, spec, v, args.samples, args.seed)
        coer = shifted_coercivity_check(spec, v, bound.a, bound.b, args.samples, args.seed)
        report = {"schema": io.SCHEMA, "command": "verify", "check": args.check,
                  "model": _model_dict(spec), "eps": args.eps, "a": bound.a, "b": bound.b,
                  "mode": bound.mode, "samples": args.samples,
                  "bound_passed": rep.passed, "bound_failures": rep.failures,
                  "bound_worst_margin": rep.worst_margin,
                  "coercivity_passed": coer.passed, "coercivity_failures": coer.failures,
                  "coercivity_worst_margin": coer.worst_margin}
        ok = rep.passed and coer.passed
        print(f"a = {bound.a:.6g}, b = {bound.b:.6g} (n = {bound.mode}); "
              f"{'pass' if ok else 'FAIL'} on {args.samples} states")
    elif args.check == "vw-estimate":
        from .manybody import build_basis, density_from_state, kinetic_energy, sample_states
        rng = np.random.default_rng(args.seed)
        worst = np.inf
        for psi in sample_states(build_basis(spec), rng, args.samples):
            worst = min(worst, 2 * kinetic_energy(psi) + 1e-8 - density_from_state(psi).vw)
        ok = worst >= 0
        report = {"schema": io.SCHEMA, "command": "verify", "check": args.check,
                  "model": _model_dict(spec), "samples": args.samples,
                  "worst_margin": worst, "passed": ok}
        print(f"A <= 2T on {args.samples} states: {'pass' if ok else 'FAIL'}")
    else:
        from .groundstate import energy
        from .spaces import make_potential
        rng = np.random.default_rng(args.seed)
        Kv = 2 * spec.cutoff
        worst = np.inf
        for _ in range(args.samples):
            v1 = make_potential(function=random_function(rng, Kv) * 5.0)
            v2 = make_potential(function=random_function(rng, Kv) * 5.0)
            lam = float(rng.choice([0.25, 0.5, 0.75]))
            mix = v1 * lam + v2 * (1 - lam)
            worst = min(worst, energy(spec, mix) - lam * energy(spec, v1) - (1 - lam) * energy(spec, v2))
        ok = worst >= -1e-9
        report = {"schema": io.SCHEMA, "command": "verify", "check": args.check,
                  "model": _model_dict(spec), "samples": args.samples,
                  "worst_margin": worst, "passed": ok}
        print(f"concavity on {args.samples} triples: {'pass' if ok else 'FAIL'}")
    io.write_json(out / f"verify_{args.check}.json", report)
    return EXIT_OK if ok else EXIT_NOCONV


COMMANDS = {"solve": cmd_solve, "invert": cmd_invert, "nrep": cmd_nrep,
            "example": cmd_example, "verify": cmd_verify}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INVALID
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: field 'workers' must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except (UsageError, DensityError, PotentialError, io.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
