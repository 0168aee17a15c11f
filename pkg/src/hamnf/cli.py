"""Command-line entry point: ``hamnf {nf,resonance,simulate,galerkin}``.

Exit codes: 0 success, 2 config error, 3 mathematical precondition violated
(resonance, enumeration guards), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import dynamics, frequencies, galerkin
from .config import (ANY, ConfigError, Section, check_schema, config_hash, load_config,
                     to_complex, to_number)
from .frequencies import EnumerationGuardError, FrequencyModel
from .normal_form import (NearResonanceError, Strategy, birkhoff_normal_form,
                          verify_normal_form)
from .poly import Polynomial, from_real_terms, is_action_monomial

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("hamnf")


class PreconditionFailure(RuntimeError):
    """A resonance or guard condition that should stop the run with exit 3."""


MODEL_SCHEMA = {
    "omega": ANY, "n_modes": ANY,
    "perturbation": {"complex": ANY, "real": ANY, "file": ANY},
}
NF_SCHEMA = {"r": ANY, "strategy": ANY, "divisor_floor": ANY}
OUTPUT_SCHEMA = {"directory": ANY, "format": ANY}

SCHEMAS = {
    "nf": {"model": MODEL_SCHEMA, "nf": NF_SCHEMA,
           "verify": {"radii": ANY, "samples": ANY}, "seed": ANY, "output": OUTPUT_SCHEMA},
    "resonance": {
        "model": {"omega": ANY, "n_modes": ANY},
        "order_r": {"r": ANY, "norm": ANY},
        "diophantine": {"gamma": ANY, "alpha": ANY, "k_max": ANY, "norm": ANY},
        "scan": {"r": ANY, "mu_max": ANY, "tail_max": ANY, "alphas": ANY},
        "measure": {"m": ANY, "r": ANY, "gammas": ANY, "beta": ANY, "N_list": ANY,
                    "samples": ANY, "k_budget": ANY},
        "seed": ANY, "output": OUTPUT_SCHEMA,
    },
    "simulate": {
        "model": MODEL_SCHEMA, "nf": NF_SCHEMA,
        "run": {"mode": ANY, "eps": ANY, "eps_list": ANY, "dt": ANY, "T": ANY,
                "T_cap": ANY, "method": ANY, "s_weight": ANY, "save_every": ANY,
                "seed": ANY, "check_points": ANY},
        "seed": ANY, "output": OUTPUT_SCHEMA,
    },
    "galerkin": {
        "model": {"basis": ANY, "n": ANY, "G": ANY, "potential": ANY, "equation": ANY,
                  "mass": ANY, "nonlinearity": ANY, "k_max": ANY, "s": ANY},
        "checks": {"phi_bound": {"k": ANY, "N": ANY, "nu": ANY, "j_max": ANY},
                   "well_localized": {"orders": ANY, "l_max": ANY},
                   "tame": {"n_list": ANY, "rho_list": ANY, "s": ANY, "s0": ANY,
                            "samples": ANY, "degree": ANY}},
        "seed": ANY, "output": OUTPUT_SCHEMA,
    },
}


# ---------------------------------------------------------------------------
# shared config readers

def read_omega(sec: Section, resolved: dict) -> FrequencyModel:
    given = sec.raw("omega")
    if given is None:
        sec._fail("omega", "required")
    try:
        if isinstance(given, list):
            model = FrequencyModel.explicit(sec.numbers("omega"))
        elif isinstance(given, dict):
            kind = given.get("kind")
            sub = sec.sub("omega")
            if kind == "explicit":
                model = FrequencyModel.explicit(sub.numbers("values"))
            elif kind == "nlw":
                model = FrequencyModel.nlw(sub.number("mass", positive=True))
            elif kind == "convolution":
                m = sub.number("m")
                if "v" in sub:
                    model = FrequencyModel.convolution(m, sub.numbers("v"))
                else:
                    model = FrequencyModel.random_convolution(
                        m, sub.integer("n", minimum=1), sub.integer("seed", 0))
            else:
                sub._fail("kind", f"expected explicit, nlw or convolution, got {kind!r}")
        else:
            sec._fail("omega", "expected a list or a mapping with 'kind'")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        sec._fail("omega", str(exc))
    resolved["omega"] = model.to_dict()
    return model


def read_perturbation(sec: Section, resolved: dict) -> Polynomial:
    if "perturbation" not in sec:
        resolved["perturbation"] = {}
        return Polynomial()
    ps = sec.sub("perturbation")
    P = Polynomial()
    out: dict = {}
    try:
        if "complex" in ps:
            terms = {}
            for item in ps.raw("complex"):
                c, idx = item
                if any(int(i) != i or i == 0 for i in idx):
                    raise ValueError(f"bad index list {idx!r}")
                key = tuple(int(i) for i in idx)
                terms[key] = terms.get(key, 0) + to_complex(c)
            P = P + Polynomial(terms)
            out["complex"] = ps.raw("complex")
        if "real" in ps:
            real_terms = [(to_complex(c).real, [int(j) for j in idx])
                          for c, idx in ps.raw("real")]
            P = P + from_real_terms(real_terms)
            out["real"] = ps.raw("real")
        if "file" in ps:
            P = P + Polynomial.load(ps.string("file"))
            out["file"] = ps.string("file")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        ps._fail(next(iter(ps.node), "complex"), f"malformed terms: {exc}")
    except OSError as exc:
        ps._fail("file", str(exc))
    resolved["perturbation"] = out
    return P


def read_nf(sec: Section, resolved: dict) -> dict:
    opts = {
        "r": sec.integer("r", 4, minimum=3),
        "strategy": sec.choice("strategy", [s.value for s in Strategy],
                               Strategy.NONRESONANT_KILL.value),
        "divisor_floor": sec.number("divisor_floor", 1e-10, positive=True),
    }
    resolved["nf"] = dict(opts)
    return opts


# ---------------------------------------------------------------------------
# output helpers

def write_table(path: Path, header: list, rows, fmt: str) -> Path:
    rows = [list(r) for r in rows]
    if fmt == "json":
        path = path.with_suffix(".json")
        path.write_text(json.dumps([dict(zip(header, r)) for r in rows], indent=2,
                                   default=_jsonable))
    else:
        path = path.with_suffix(".csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (tuple, set)):
        return list(x)
    return str(x)


def write_manifest(out: Path, command: str, resolved: dict, extra: dict) -> None:
    body = {"command": command, "config": resolved, "config_sha256": config_hash(resolved),
            **extra}
    (out / "manifest.json").write_text(json.dumps(body, indent=2, default=_jsonable))
    (out / "resolved_config.yaml").write_text(yaml.safe_dump(resolved, sort_keys=False))
    stamp = {"created": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    (out / "run_info.json").write_text(json.dumps(stamp))


# ---------------------------------------------------------------------------
# commands

def cmd_nf(doc, args, out: Path, fmt: str) -> int:
    resolved: dict = {}
    model_sec = Section(doc, ("model",))
    resolved["model"] = {}
    omega = read_omega(model_sec, resolved["model"])
    P = read_perturbation(model_sec, resolved["model"])
    opts = read_nf(Section(doc, ("nf",)), resolved)
    n_modes = model_sec.integer("n_modes", P.n_modes or 1, minimum=1)
    resolved["model"]["n_modes"] = n_modes
    seed = args.seed if args.seed is not None else Section(doc).integer("seed", 0)
    resolved["seed"] = seed
    nf = birkhoff_normal_form(omega, P, opts["r"], opts["strategy"], opts["divisor_floor"],
                              n_modes=n_modes)
    nf.save(out)
    summary = nf.summary()
    resonant_kept = [m for m in nf.Z.terms if not is_action_monomial(m)]
    if "verify" in doc.data:
        vs = Section(doc, ("verify",))
        radii = vs.numbers("radii", [1e-3, 2e-3, 5e-3, 1e-2])
        samples = vs.integer("samples", 10, minimum=1)
        resolved["verify"] = {"radii": radii, "samples": samples}
        rep = verify_normal_form(nf, omega, P, radii, samples, seed=seed)
        write_table(out / "residuals", ["radius", "max_residual"],
                    zip(rep.radii, rep.max_residual), fmt)
        summary["verify"] = {"slope": rep.slope, "r2": rep.r2}
    write_manifest(out, "nf", resolved, {"summary": summary})
    print(json.dumps({"order": nf.order, "min_killed_divisor":
                      nf.divisor_stats["min_killed_divisor"],
                      "Z_terms": summary["Z_terms_per_degree"],
                      **({"verify_slope": summary["verify"]["slope"]}
                         if "verify" in summary else {})}, default=_jsonable))
    if resonant_kept:
        listing = ", ".join(str(list(m)) for m in resonant_kept[:10])
        raise PreconditionFailure(
            f"resonant non-action monomials kept in Z: {listing}; the normal form "
            "does not depend on the actions alone")
    return EXIT_OK


def cmd_resonance(doc, args, out: Path, fmt: str) -> int:
    resolved: dict = {"model": {}}
    msec = Section(doc, ("model",))
    model = read_omega(msec, resolved["model"])
    seed = args.seed if args.seed is not None else Section(doc).integer("seed", 0)
    resolved["seed"] = seed
    summary: dict = {}
    resonant = []
    if "order_r" in doc.data:
        s = Section(doc, ("order_r",))
        r = s.integer("r", minimum=1)
        norm = s.choice("norm", frequencies.NORMS, "l1")
        resolved["order_r"] = {"r": r, "norm": norm}
        val, k = frequencies.min_divisor_order_r(_finite(model, msec), r, norm)
        summary["order_r"] = {"r": r, "norm": norm, "min_divisor": val, "k": list(k)}
        if val <= 1e-12 * max(1.0, float(np.max(np.abs(_finite(model, msec))))):
            resonant.append(f"k.omega = 0 at k = {list(k)}")
    if "diophantine" in doc.data:
        s = Section(doc, ("diophantine",))
        g, a, km = s.number("gamma", positive=True), s.number("alpha"), s.integer("k_max",
                                                                                   minimum=1)
        norm = s.choice("norm", frequencies.NORMS, "l1")
        resolved["diophantine"] = {"gamma": g, "alpha": a, "k_max": km, "norm": norm}
        margin, k = frequencies.diophantine_check(_finite(model, msec), g, a, km, norm)
        summary["diophantine"] = {"margin": margin, "k": list(k), "certified": margin >= 0}
    if "scan" in doc.data:
        s = Section(doc, ("scan",))
        opts = {"r": s.integer("r", minimum=1), "mu_max": s.integer("mu_max", minimum=1),
                "tail_max": s.integer("tail_max", minimum=1),
                "alphas": s.numbers("alphas", list(frequencies.ALPHA_GRID))}
        resolved["scan"] = opts
        rep = frequencies.scan_strong_nonresonance(model, **opts)
        write_table(out / "scan", ["N", "k", "divisor", "mu", "scaled_divisor"], rep.rows, fmt)
        summary["scan"] = rep.summary()
        if rep.resonant:
            resonant.append(f"strong nonresonance scan: {rep.witness}")
    if "measure" in doc.data:
        s = Section(doc, ("measure",))
        opts = {"m": s.number("m"), "r": s.integer("r", minimum=1),
                "gamma": s.numbers("gammas"), "beta": s.number("beta", 4.0),
                "N_list": [int(x) for x in s.numbers("N_list")],
                "samples": s.integer("samples", 10_000, minimum=100),
                "k_budget": s.integer("k_budget", 10 ** 6, minimum=1)}
        resolved["measure"] = {**opts, "gammas": opts["gamma"]}
        del resolved["measure"]["gamma"]
        rep = frequencies.monte_carlo_resonance_measure(seed=seed, **opts)
        write_table(out / "measure", ["gamma", "N", "failing_fraction", "std_error"],
                    rep.rows(), fmt)
        summary["measure"] = {"slope": rep.slope, "slope_se": rep.slope_se,
                              "overall": {str(k): v for k, v in rep.overall.items()},
                              "z_scores": {str(k): v for k, v in rep.z_scores.items()}}
    if len(summary) == 0:
        raise ConfigError("resonance config needs at least one of order_r, diophantine, "
                          "scan, measure")
    write_manifest(out, "resonance", resolved, {"summary": summary})
    print(json.dumps(summary, default=_jsonable))
    if resonant:
        raise PreconditionFailure("resonance found: " + "; ".join(resonant))
    return EXIT_OK


def _finite(model: FrequencyModel, msec: Section) -> np.ndarray:
    n = model.size if model.size is not None else msec.integer("n_modes", minimum=1)
    return model.vector(n)


def cmd_simulate(doc, args, out: Path, fmt: str) -> int:
    resolved: dict = {"model": {}}
    msec = Section(doc, ("model",))
    omega = read_omega(msec, resolved["model"])
    P = read_perturbation(msec, resolved["model"])
    n = msec.integer("n_modes", max(P.n_modes, omega.size or 0, 1), minimum=1)
    resolved["model"]["n_modes"] = n
    rs = Section(doc, ("run",))
    mode = rs.choice("mode", ["trajectory", "stability"], "stability")
    method = rs.choice("method", list(dynamics.METHODS), "implicit_midpoint")
    seed = args.seed if args.seed is not None else rs.integer("seed", Section(doc).integer(
        "seed", 0))
    wmax = float(np.max(omega.vector(n)))
    dt = rs.number("dt", dynamics.default_dt(wmax), positive=True)
    s_weight = rs.number("s_weight", 0.0)
    H0 = Polynomial({(j, -j): w for j, w in enumerate(omega.vector(n), 1)})
    H = H0 + P
    run = {"mode": mode, "method": method, "seed": seed, "dt": dt, "s_weight": s_weight}
    resolved["run"] = run
    if mode == "trajectory":
        eps = rs.number("eps", positive=True)
        T = rs.number("T", positive=True)
        every = rs.integer("save_every", max(1, int(round(T / dt)) // 1000), minimum=1)
        run.update(eps=eps, T=T, save_every=every)
        z0 = dynamics.random_real_slice_point(n, eps, np.random.default_rng(seed))
        traj = dynamics.integrate(H, z0, dt, T, method=method, n=n, save_every=every,
                                  s_weight=s_weight)
        if fmt == "csv":
            traj.write_csv(out / "trajectory.csv")
        else:
            _traj_json(traj, out / "trajectory.json")
        summary = {"max_norm_ratio": traj.max_norm / eps,
                   "max_action_drift": traj.max_action_drift.tolist(),
                   "max_energy_drift": traj.max_energy_drift,
                   "max_slice_defect": traj.max_slice_defect}
        write_manifest(out, "simulate", resolved, {"summary": summary})
        print(json.dumps(summary, default=_jsonable))
        return EXIT_OK
    eps_list = rs.numbers("eps_list")
    T_cap = rs.number("T_cap", 1e6, positive=True)
    checks = rs.integer("check_points", 5, minimum=1)
    run.update(eps_list=eps_list, T_cap=T_cap, check_points=checks)
    nf = None
    r = 4
    if "nf" in doc.data:
        opts = read_nf(Section(doc, ("nf",)), resolved)
        r = opts["r"]
        nf = birkhoff_normal_form(omega, P, r, opts["strategy"], opts["divisor_floor"],
                                  n_modes=n)
    else:
        resolved["nf"] = None
    rep = dynamics.stability_experiment(H, nf, r, eps_list, s_weight=s_weight, seed=seed,
                                        dt=dt, T_cap=T_cap, method=method, n=n,
                                        check_points=checks)
    header = ["eps", "horizon", "steps", "max_norm_ratio", "max_weighted_drift",
              "max_energy_drift", "normalized_drift", "horizon_usage", "error"]
    write_table(out / "stability", header,
                [(rw.eps, rw.horizon, rw.steps, rw.max_norm_ratio, rw.max_weighted_drift,
                  rw.max_energy_drift, rw.normalized_drift, rw.horizon_usage, rw.error or "")
                 for rw in rep.rows], fmt)
    summary = rep.summary()
    write_manifest(out, "simulate", resolved, {"summary": summary})
    print(json.dumps(summary, default=_jsonable))
    failed = [rw for rw in rep.rows if rw.error]
    if failed:
        raise dynamics.IntegrationError("; ".join(f"eps={rw.eps}: {rw.error}" for rw in failed))
    return EXIT_OK


def _traj_json(traj, path: Path) -> None:
    q, p = traj.qp()
    path.write_text(json.dumps({"t": traj.times.tolist(), "q": q.tolist(), "p": p.tolist(),
                                "I": traj.actions.tolist(), "H": traj.energy.tolist()}))


def cmd_galerkin(doc, args, out: Path, fmt: str) -> int:
    resolved: dict = {}
    ms = Section(doc, ("model",))
    kind = ms.choice("basis", ["sine", "exponential", "sturm_liouville"], "sine")
    n = ms.integer("n", minimum=1)
    model_r = {"basis": kind, "n": n}
    summary: dict = {}
    if kind == "sturm_liouville":
        G = ms.integer("G", max(8 * n, 512), minimum=8 * n)
        pot = ms.raw("potential", 0.0)
        V = _read_potential(ms, pot)
        basis = galerkin.eigenbasis(V, G, n)
        model_r.update(G=G, potential=pot)
        summary["eigenvalues"] = basis.eigenvalues.tolist()
        summary["orthonormality_defect"] = galerkin.orthonormality_defect(basis)
        summary["symmetric_potential"] = basis.symmetric_potential
        write_table(out / "eigenvalues", ["j", "lambda"],
                    [(j, float(v)) for j, v in enumerate(basis.eigenvalues, 1)], fmt)
    elif kind == "sine":
        basis = galerkin.Basis.sine(n)
    else:
        basis = galerkin.Basis.exponential(n)
    if "nonlinearity" in ms:
        if kind == "exponential":
            ms._fail("nonlinearity", "perturbations are built on the sine or "
                     "Sturm-Liouville basis")
        eq = ms.choice("equation", ["nls", "nlw"], "nls")
        k_max = ms.integer("k_max", minimum=3)
        mass = ms.number("mass", 0.0)
        s = ms.number("s", 0.0)
        g = _read_nonlinearity(ms)
        gm = galerkin.build_model(basis, eq, g, k_max, mass=mass, s=s)
        gm.save(out)
        model_r.update(equation=eq, k_max=k_max, mass=mass, s=s,
                       nonlinearity={str(k): v for k, v in ms.raw("nonlinearity").items()})
        summary["P_terms"] = len(gm.P)
        summary["P_real"] = gm.P.is_real()
    resolved["model"] = model_r
    checks = Section(doc, ("checks",))
    resolved["checks"] = {}
    if "phi_bound" in checks:
        cs = checks.sub("phi_bound")
        k, N, nu = cs.integer("k", 3, minimum=3), cs.number("N", 2.0), cs.number("nu", 0.0)
        jm = cs.raw("j_max", [12, 24])
        jm = [jm] if isinstance(jm, int) else [int(x) for x in jm]
        resolved["checks"]["phi_bound"] = {"k": k, "N": N, "nu": nu, "j_max": jm}
        rows = [(j, galerkin.verify_phi_bound(basis, k, N, nu, j)) for j in jm]
        write_table(out / "phi_bound", ["j_max", "C"], rows, fmt)
        summary["phi_bound"] = {str(j): c for j, c in rows}
    if "well_localized" in checks:
        cs = checks.sub("well_localized")
        orders = [int(x) for x in cs.numbers("orders", [0, 1, 2, 4])]
        l_max = cs.raw("l_max")
        resolved["checks"]["well_localized"] = {"orders": orders, "l_max": l_max}
        if kind != "sturm_liouville":
            cs._fail("orders", "well-localization check needs basis: sturm_liouville")
        c = galerkin.well_localized_check(basis, orders, l_max)
        write_table(out / "well_localized", ["order", "c_n"], sorted(c.items()), fmt)
        summary["well_localized"] = {str(k): v for k, v in c.items()}
    if "tame" in checks:
        cs = checks.sub("tame")
        if "nonlinearity" not in ms:
            cs._fail("n_list", "tame probe needs model.nonlinearity")
        opts = {"n_list": [int(x) for x in cs.numbers("n_list", [8, 16, 32])],
                "rho_list": cs.numbers("rho_list", [0.1, 1.0, 10.0]),
                "s": cs.number("s", 3.0), "s0": cs.number("s0", 2.0),
                "samples": cs.integer("samples", 100, minimum=1)}
        degree = cs.integer("degree", ms.integer("k_max"), minimum=3)
        seed = args.seed if args.seed is not None else Section(doc).integer("seed", 0)
        resolved["checks"]["tame"] = {**opts, "degree": degree, "seed": seed}
        g = _read_nonlinearity(ms)
        eq = ms.choice("equation", ["nls", "nlw"], "nls")
        mass = ms.number("mass", 0.0)

        def builder(nn):
            b = galerkin.Basis.sine(nn) if kind == "sine" else galerkin.eigenbasis(
                _read_potential(ms, ms.raw("potential", 0.0)),
                max(ms.integer("G", 512), 8 * nn), nn)
            return galerkin.build_model(b, eq, {degree: g.get(degree, 0.0)}, degree,
                                        mass=mass).P
        rep = galerkin.tame_probe(builder, seed=seed, **opts)
        write_table(out / "tame", ["rho", "n", "ratio"], rep.rows(), fmt)
        summary["tame"] = {"spread": rep.spread, "exponent": rep.exponent}
    write_manifest(out, "galerkin", resolved, {"summary": summary})
    print(json.dumps(summary, default=_jsonable))
    return EXIT_OK


def _read_potential(ms: Section, pot):
    if isinstance(pot, (int, float, str)) and not isinstance(pot, bool):
        return ms.number("potential")
    if isinstance(pot, list):
        try:
            return [(str(k), float(f), float(c)) for k, f, c in pot]
        except (TypeError, ValueError):
            ms._fail("potential", "expected [[kind, freq, coeff], ...]")
    if isinstance(pot, dict) and "samples_file" in pot:
        data = np.loadtxt(pot["samples_file"], delimiter=None, ndmin=2)
        return lambda x: np.interp(np.abs(x), data[:, 0], data[:, 1])
    ms._fail("potential", "expected a number, trig terms or {samples_file: PATH}")


def _read_nonlinearity(ms: Section) -> dict:
    raw = ms.raw("nonlinearity")
    if not isinstance(raw, dict):
        ms._fail("nonlinearity", "expected a mapping degree -> terms")
    out = {}
    for k, v in raw.items():
        try:
            k = int(k)
        except (TypeError, ValueError):
            ms._fail("nonlinearity", f"degree keys must be integers, got {k!r}")
        if isinstance(v, list):
            try:
                out[k] = [(str(kind), int(f), float(c)) for kind, f, c in v]
            except (TypeError, ValueError):
                ms._fail("nonlinearity", f"g_{k}: expected [[sin|cos, freq, coeff], ...]")
        else:
            try:
                out[k] = to_number(v)
            except ValueError as exc:
                ms._fail("nonlinearity", f"g_{k}: {exc}")
    return out


COMMANDS = {"nf": cmd_nf, "resonance": cmd_resonance, "simulate": cmd_simulate,
            "galerkin": cmd_galerkin}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hamnf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker cap (falls back to HAMNF_THREADS)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--format", choices=["csv", "json"], default=None)
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _set_threads(n: int | None) -> int:
    if n is None:
        env = os.environ.get("HAMNF_THREADS")
        n = int(env) if env else None
    import numba
    cap = numba.config.NUMBA_NUM_THREADS
    n = cap if n is None else max(1, min(int(n), cap))
    with warnings.catch_warnings():
        # numba probes optional threading layers and warns about an old TBB
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(n)
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = load_config(args.config)
        check_schema(doc, SCHEMAS[args.command])
        osec = Section(doc, ("output",))
        out = Path(args.out or osec.string("directory", f"hamnf-{args.command}"))
        fmt = args.format or osec.choice("format", ["csv", "json"], "csv")
        threads = _set_threads(args.threads)
        log.info("running %s with %d threads into %s", args.command, threads, out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](doc, args, out, fmt)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NearResonanceError, PreconditionFailure, EnumerationGuardError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (dynamics.IntegrationError, dynamics.FlowEscapedError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
