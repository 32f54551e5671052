"""Experiment drivers and command-line interface.

Reproduces the spectral experiments end to end: mesh export, first-
eigenvalue convergence studies against an oracle reference, spectrum
spread sweeps over (N, lambda), and eigenfunction recovery.  Outputs are
CSV/JSON data plus self-contained SVG plots, deterministic for a fixed
config and ``--threads 1``.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from . import svgplot
from .assemble import assemble_blocks
from .dof import DofError, ElasticParams, build_dofmap
from .reduce import build_schur_pencil, eliminate_rotation, recover_fields
from .spectrum import (ReferenceEigen, SpectrumError, estimate_rate,
                       first_real_eigenvalue, richardson_reference,
                       smallest_modulus_eigs, solve_pencil)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    domain: str = "square"
    family: str = "right"
    n_list: list = field(default_factory=lambda: [4, 8, 16, 32])
    lambda_list: list = field(default_factory=lambda: [1.0])
    mu: float = 1.0
    bc: str = "dirichlet_all"
    seed: int = 0
    filter_ratio: float = 1e10
    n_eigs_report: int = 8
    constrained: bool = False
    out_dir: str = "out"

    def __post_init__(self):
        if self.domain not in ("square", "lshape"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        fams = meshmod.SQUARE_FAMILIES if self.domain == "square" else meshmod.LSHAPE_FAMILIES
        if self.family not in fams:
            raise ConfigError(f"family {self.family!r} not valid for {self.domain}")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigError("n_list must be strictly increasing")
        if self.domain == "lshape" and any(n % 2 for n in self.n_list):
            raise ConfigError("L-shape n values must be even")
        for lam in self.lambda_list:
            if not (lam > 0 and np.isfinite(lam)):
                raise ConfigError("lambda values must be positive and finite")


def load_config(path):
    with open(path, "rb") as f:
        raw = tomllib.load(f)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**raw)


def solve_case(domain, family, n, lam, mu=1.0, seed=0, bc="dirichlet_all",
               constrained=False):
    """Full pipeline up to the Schur pencil for one (mesh, lambda) case."""
    m = meshmod.generate(domain, family, n, seed)
    dm = build_dofmap(m, bc=bc)
    params = ElasticParams(mu=mu, lam=lam)
    blocks = assemble_blocks(m, dm, params)
    tilde = eliminate_rotation(blocks, constrained=constrained)
    pencil = build_schur_pencil(tilde)
    return m, dm, blocks, pencil


def _json_dump(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _spectrum_csv(spec, path):
    with open(path, "w") as f:
        f.write("re,im\n")
        for z in spec.finite:
            f.write(f"{float(z.real)!r},{float(z.imag)!r}\n")


# ---------------------------------------------------------------------------
# convergence study


def run_convergence(config, reference, out_dir=None):
    """First-eigenvalue convergence against a provenance-stamped reference."""
    if not isinstance(reference, ReferenceEigen) or not reference.provenance:
        raise ConfigError("convergence runs need a provenance-stamped reference")
    lam = config.lambda_list[0]
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    completed = True
    for n in config.n_list:
        try:
            _, _, _, pencil = solve_case(config.domain, config.family, n, lam,
                                         mu=config.mu, seed=config.seed,
                                         bc=config.bc,
                                         constrained=config.constrained)
            spec = smallest_modulus_eigs(pencil.M, pencil.N_rhs, k=8)
            gamma1 = first_real_eigenvalue(spec)
        except (DofError, SpectrumError, RuntimeError) as err:
            completed = False
            rows.append({"N": n, "h": 1.0 / n, "error": str(err)})
            break
        rows.append({"N": n, "h": 1.0 / n, "gamma1": gamma1,
                     "err": abs(gamma1 - reference.value)})

    good = [r for r in rows if "gamma1" in r]
    rate = None
    pairwise = []
    if len(good) >= 2:
        rate, pairwise = estimate_rate([(r["h"], r["err"]) for r in good])
        for r, p in zip(good[1:], pairwise):
            r["rate"] = p
    report = {
        "domain": config.domain, "family": config.family,
        "lambda": lam, "mu": config.mu,
        "reference": reference.to_dict(),
        "rows": rows, "overall_rate": rate, "completed": completed,
    }
    _json_dump(report, out / "report.json")
    with open(out / "report.csv", "w") as f:
        f.write("N,h,gamma1,err,rate\n")
        for r in good:
            rate_s = repr(float(r["rate"])) if "rate" in r else ""
            f.write(f"{r['N']},{float(r['h'])!r},{float(r['gamma1'])!r},{float(r['err'])!r},{rate_s}\n")
    if len(good) >= 2:
        svgplot.loglog_plot(
            [(f"{config.family}", [r["h"] for r in good], [r["err"] for r in good])],
            out / "rate.svg", xlabel="h", ylabel="|gamma1 - ref|",
            title=f"first-eigenvalue convergence, {config.domain}/{config.family}, lambda={lam}",
            guides=[(2.0, "slope 2")])
    if not completed:
        raise SpectrumError(f"convergence study aborted; partial results in {out}")
    return report


# ---------------------------------------------------------------------------
# spectrum spread sweep


def _spread_job(config, n, lam):
    _, dm, _, pencil = solve_case(config.domain, config.family, n, lam,
                                  mu=config.mu, seed=config.seed, bc=config.bc,
                                  constrained=config.constrained)
    spec = solve_pencil(pencil.M, pencil.N_rhs, filter_ratio=config.filter_ratio,
                        meta={"domain": config.domain, "family": config.family,
                              "N": n, "lambda": lam, "bc": config.bc})
    return n, lam, dm.n_disp, spec


def run_spread(config, out_dir=None, threads=1):
    """Per-(N, lambda) spectra plus overlaid scatter plots."""
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(n, lam) for lam in config.lambda_list for n in config.n_list]
    results = {}
    if threads > 1:
        with cf.ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {pool.submit(_spread_job, config, n, lam): (n, lam)
                    for n, lam in jobs}
            for fut in cf.as_completed(futs):
                n, lam, nd, spec = fut.result()
                results[(n, lam)] = (nd, spec)
    else:
        for n, lam in jobs:
            n, lam, nd, spec = _spread_job(config, n, lam)
            results[(n, lam)] = (nd, spec)

    index = []
    for lam in config.lambda_list:
        series = []
        for n in config.n_list:
            nd, spec = results[(n, lam)]
            tag = f"{config.family}_N{n}_lam{lam:g}"
            _spectrum_csv(spec, out / f"spectrum_{tag}.csv")
            meta = {"N": n, "lambda": lam, "n_disp": nd,
                    "n_finite": len(spec.finite), "n_infinite": spec.n_infinite}
            _json_dump(meta, out / f"spectrum_{tag}.json")
            index.append(meta)
            series.append((f"N={n}", spec.finite.real.tolist(),
                           spec.finite.imag.tolist()))
        svgplot.scatter_plot(
            series, out / f"spread_{config.family}_lam{lam:g}.svg",
            title=f"eigenvalue spread, {config.domain}/{config.family}, lambda={lam:g}")

    # fixed axes across lambda for visual comparison
    allre = [z.real for (nd, s) in results.values() for z in s.finite]
    allim = [z.imag for (nd, s) in results.values() for z in s.finite]
    limits = ((min(allre), max(allre)), (min(allim), max(allim)))
    for lam in config.lambda_list:
        series = [(f"N={n}", results[(n, lam)][1].finite.real.tolist(),
                   results[(n, lam)][1].finite.imag.tolist())
                  for n in config.n_list]
        svgplot.scatter_plot(
            series, out / f"spread_fixed_{config.family}_lam{lam:g}.svg",
            title=f"eigenvalue spread (fixed axes), lambda={lam:g}",
            limits=limits)
    _json_dump(index, out / "spread_index.json")
    return index


# ---------------------------------------------------------------------------
# eigenfunction export


def run_eigenfunction(config, which=0, n=None, out_dir=None):
    """Recover and export the eigenfields of one finite eigenvalue.

    Displacement is written as point vectors (zero at clamped vertices),
    rotation as a cell scalar; displacement normalized to max |u| = 1 with
    the largest-magnitude component made positive real.
    """
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = n or config.n_list[-1]
    lam = config.lambda_list[0]
    m, dm, blocks, pencil = solve_case(config.domain, config.family, n, lam,
                                       mu=config.mu, seed=config.seed,
                                       bc=config.bc,
                                       constrained=config.constrained)
    spec = smallest_modulus_eigs(pencil.M, pencil.N_rhs,
                                 k=max(8, which + 3), want_vectors=True)
    gamma = spec.finite[which]
    u_hat = spec.vectors[:, which]

    # normalize: max nodal |u| = 1, largest component positive real
    j = int(np.argmax(np.abs(u_hat)))
    u_hat = u_hat / u_hat[j] * (np.abs(u_hat[j]) / np.abs(u_hat).max())
    sigma, psi = recover_fields(pencil, gamma, u_hat)

    complex_mode = abs(gamma.imag) > 1e-8 * abs(gamma)
    if complex_mode:
        print(f"warning: eigenvalue {gamma} is complex; exporting real and "
              f"imaginary parts separately", file=sys.stderr)

    nfv = dm.n_free_vertices
    def point_field(u):
        U = np.zeros((m.n_vertices, 2), dtype=u.dtype)
        U[dm.free_vertices, 0] = u[:nfv]
        U[dm.free_vertices, 1] = u[nfv:]
        return U

    tag = f"{config.family}_N{n}_lam{lam:g}_mode{which}"
    U = point_field(u_hat)
    point_data = {"displacement": U.real}
    cell_data = {"rotation": psi.real[: m.n_cells]}
    if complex_mode:
        point_data["displacement_imag"] = U.imag
        cell_data["rotation_imag"] = psi.imag[: m.n_cells]
    meshmod.export_vtk(m, out / f"eigenfunction_{tag}.vtk",
                       point_data=point_data, cell_data=cell_data)
    with open(out / f"eigenfunction_{tag}.csv", "w") as f:
        f.write("x,y,ux_re,uy_re,ux_im,uy_im\n")
        for (x, y), (ux, uy) in zip(m.vertices, U):
            f.write(f"{float(x)!r},{float(y)!r},{float(ux.real)!r},{float(uy.real)!r},{float(ux.imag)!r},{float(uy.imag)!r}\n")
    _json_dump({"gamma_re": gamma.real, "gamma_im": gamma.imag, "N": n,
                "lambda": lam, "mode": which, "complex_mode": bool(complex_mode)},
               out / f"eigenfunction_{tag}.json")
    return gamma, U, psi


# ---------------------------------------------------------------------------
# CLI


def _build_parser():
    p = argparse.ArgumentParser(prog="elastospec",
                                description="three-field elasticity spectrum lab")
    p.add_argument("--config", type=str, help="TOML experiment config")
    p.add_argument("--out", type=str, help="output directory override")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, help="mesh perturbation seed override")
    sub = p.add_subparsers(dest="command")

    sp = sub.add_parser("mesh", help="generate and export a mesh")
    sp.add_argument("--domain", default="square")
    sp.add_argument("--family", default="right")
    sp.add_argument("--n", type=int, default=4)
    sp.add_argument("--vtk", action="store_true")

    sp = sub.add_parser("solve", help="solve one pencil, dump the spectrum")
    sp.add_argument("--n", type=int)

    sub.add_parser("converge", help="first-eigenvalue convergence study") \
       .add_argument("--reference", type=str, help="reference JSON from `oracle`")

    sub.add_parser("spread", help="spectrum spread sweep")

    sp = sub.add_parser("eigenfunction", help="recover and export eigenfields")
    sp.add_argument("--which", type=int, default=0)
    sp.add_argument("--n", type=int)

    sp = sub.add_parser("oracle", help="compute a reference eigenvalue")
    sp.add_argument("--levels", type=str, default="32,64,128")
    sp.add_argument("--index", type=int, default=0)
    return p


def cli(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    if not args.command:
        parser.print_usage()
        return 1

    try:
        config = None
        if args.config:
            config = load_config(args.config)
            if args.out:
                config.out_dir = args.out
            if args.seed is not None:
                config.seed = args.seed

        if args.command == "mesh":
            out = Path(args.out or (config.out_dir if config else "out"))
            out.mkdir(parents=True, exist_ok=True)
            seed = args.seed if args.seed is not None else 0
            m = meshmod.generate(args.domain, args.family, args.n, seed)
            meshmod.validate(m)
            tag = f"{args.domain}_{args.family}_N{args.n}"
            meshmod.export_text(m, out / f"mesh_{tag}.txt")
            if args.vtk:
                meshmod.export_vtk(m, out / f"mesh_{tag}.vtk")
            print(f"mesh {tag}: V={m.n_vertices} T={m.n_cells} E={m.n_edges}")
            return 0

        if config is None:
            print("error: this subcommand needs --config", file=sys.stderr)
            return 1

        if args.command == "solve":
            n = args.n or config.n_list[-1]
            lam = config.lambda_list[0]
            _, dm, _, pencil = solve_case(config.domain, config.family, n, lam,
                                          mu=config.mu, seed=config.seed,
                                          bc=config.bc,
                                          constrained=config.constrained)
            spec = solve_pencil(pencil.M, pencil.N_rhs,
                                filter_ratio=config.filter_ratio)
            out = Path(config.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            tag = f"{config.family}_N{n}_lam{lam:g}"
            _spectrum_csv(spec, out / f"spectrum_{tag}.csv")
            _json_dump({"N": n, "lambda": lam, "n_disp": dm.n_disp,
                        "n_finite": len(spec.finite),
                        "n_infinite": spec.n_infinite},
                       out / f"spectrum_{tag}.json")
            print(f"{len(spec.finite)} finite + {spec.n_infinite} infinite modes")
            return 0

        if args.command == "converge":
            if not args.reference:
                print("error: converge needs --reference (run the `oracle` "
                      "subcommand first)", file=sys.stderr)
                return 1
            with open(args.reference) as f:
                ref = ReferenceEigen.from_dict(json.load(f))
            if ref.domain != config.domain:
                print("error: reference domain does not match config",
                      file=sys.stderr)
                return 1
            report = run_convergence(config, ref)
            print(f"overall rate: {report['overall_rate']}")
            return 0

        if args.command == "spread":
            run_spread(config, threads=args.threads)
            return 0

        if args.command == "eigenfunction":
            gamma, _, _ = run_eigenfunction(config, which=args.which, n=args.n)
            print(f"gamma = {gamma}")
            return 0

        if args.command == "oracle":
            levels = tuple(int(s) for s in args.levels.split(","))
            ref = richardson_reference(config.domain,
                                       lam=config.lambda_list[0], mu=config.mu,
                                       levels=levels, index=args.index)
            out = Path(config.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"reference_{config.domain}_lam{config.lambda_list[0]:g}.json"
            _json_dump(ref.to_dict(), path)
            print(f"reference {float(ref.value)!r} +- {ref.uncertainty:g} -> {path}")
            return 0

        print(f"error: unknown command {args.command!r}", file=sys.stderr)
        return 1
    except (ConfigError, meshmod.MeshError, FileNotFoundError, DofError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (SpectrumError, RuntimeError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli())
