"""Command-line entry point ``kvcert``.

Subcommands: ``bch``, ``kv solve``, ``kv verify``, ``factor {unipotent,commN2,commP,exp-comm}``,
``verify``, ``dhs-check`` and ``acceptance``.  A JSON report goes to stdout (or to
``--out`` for commands that produce no other artifact) and a short summary to
stderr.  Exit status: 0 when every check passes, 1 on a failed check, 2 on bad
flags, configuration or input.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import acceptance as A
from . import bch as B
from . import constructions as C
from . import free_algebra as FA
from . import kv_flow as KV
from .acceptance import at_least, at_most
from .config import DEFAULT_TOLERANCES, ConfigError, Report, RunConfig
from .matrices import (
    identity,
    make_rng,
    mat_exp,
    mat_log,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    random_contraction,
    random_matrix,
    random_skew,
    random_square_zero,
    split_seeds,
)
from .verifier import verify_certificate

FLAG_KEYS = {"degree": "degree", "split": "split_mode", "radius": "eval_radius", "dim": "dim",
             "trials": "trials", "seed": "seed", "threads": "threads", "out": "output_path"}


class InputError(ValueError):
    """Unreadable or malformed input file: exit status 2."""


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _extract_tolerances(argv):
    """Pull ``--tol-<name> value`` / ``--tol-<name>=value`` out of argv."""
    rest, tols = [], {}
    it = iter(argv)
    for tok in it:
        if tok.startswith("--tol-"):
            name, sep, value = tok[len("--tol-"):].partition("=")
            if not sep:
                value = next(it, None)
                if value is None:
                    raise ConfigError(f"{tok} needs a value")
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance flag --tol-{name}; known: "
                                  + ", ".join(sorted(DEFAULT_TOLERANCES)))
            try:
                tols[name] = float(value)
            except ValueError as exc:
                raise ConfigError(f"--tol-{name} expects a number, got {value!r}") from exc
        else:
            rest.append(tok)
    return rest, tols


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--degree", type=int, help="truncation degree N in [2, 12]")
    common.add_argument("--split", choices=B.SPLIT_MODES, help="halfhalf split convention")
    common.add_argument("--radius", type=float, help="operator-norm radius of random inputs")
    common.add_argument("--dim", type=int, help="matrix dimension in [2, 16]")
    common.add_argument("--trials", type=int, help="number of random trials")
    common.add_argument("--seed", type=int, help="root seed of every random stream")
    common.add_argument("--threads", type=int, help="worker threads for trials")
    common.add_argument("--out", help="output file")
    common.add_argument("--config", help="JSON file with RunConfig fields")

    p = _Parser(prog="kvcert", description="Formal KV series and matrix commutator certificates. "
                "Tolerances are set with --tol-<name> VALUE, names: " + ", ".join(DEFAULT_TOLERANCES))
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("bch", parents=[common], help="BCH series and its matrix check")

    kv = sub.add_parser("kv", help="Kashiwara-Vergne flow series")
    kvsub = kv.add_subparsers(dest="action", required=True, parser_class=_Parser)
    kvsub.add_parser("solve", parents=[common], help="solve for R, S by grade recursion")
    kvv = kvsub.add_parser("verify", parents=[common], help="check the factorization on matrices")
    kvv.add_argument("--in", dest="inp", help="solution JSON written by 'kv solve'")

    fac = sub.add_parser("factor", help="emit a factorization certificate")
    fsub = fac.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in ("unipotent", "commN2", "commP", "exp-comm"):
        fp = fsub.add_parser(kind, parents=[common])
        fp.add_argument("--in", dest="inp", help="input matrices as JSON")
        if kind == "exp-comm":
            fp.add_argument("--steps", type=int, default=400, help="commutator repetitions n")

    ver = sub.add_parser("verify", parents=[common], help="independently check a certificate")
    ver.add_argument("--cert", required=True, help="certificate JSON")

    dhs = sub.add_parser("dhs-check", parents=[common], help="de la Harpe-Skandalis kernel test")
    dhs.add_argument("--in", dest="inp", help='JSON {"b": [matrix, ...]}')

    acc = sub.add_parser("acceptance", parents=[common], help="run the acceptance suite")
    acc.add_argument("--criteria", help="comma-separated subset, e.g. 1,3,7")
    return p


def parse(argv):
    argv, tols = _extract_tolerances(list(argv))
    args = build_parser().parse_args(argv)
    file_data = RunConfig.load(args.config) if getattr(args, "config", None) else None
    overrides = {key: getattr(args, flag) for flag, key in FLAG_KEYS.items()
                 if getattr(args, flag, None) is not None}
    if tols:
        overrides["tolerances"] = tols
    return args, RunConfig.from_layers(file_data, overrides)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


def _input_matrix(data, key):
    if key not in data:
        raise InputError(f"input lacks matrix {key!r}")
    try:
        return matrix_from_json(data[key])
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _pmap(fn, items, threads):
    # ordered results regardless of the thread count
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_bch(args, cfg: RunConfig, rep: Report):
    N = cfg.degree
    V = B.bch_series(N, exact=True)
    low = {FA.index_to_word(i, n): str(vec[i]) for n, vec in V.items() if n <= 3
           for i in np.flatnonzero(vec)}
    rep.results["coefficients_upto_grade_3"] = low
    rep.results["grade_norms"] = {n: float(v) for n, v in B.bch_series(N).grade_norms().items()}
    c_xy = complex(V.coeff("XY"))
    rep.add(at_most("|coeff(XY) - 1/2| (grade 2 is [X,Y]/2)", abs(c_xy - 0.5), 1e-12,
                    "log(e^X e^Y) = V(X, Y)"))
    rep.add(at_most("Lie deviation of V", max(FA.is_lie(B.bch_series(N)).deviations.values(), default=0.0),
                    cfg.tol("lie")))
    Vf = B.bch_series(N)
    rng = make_rng(cfg.seed)
    total = min(cfg.eval_radius, 0.3) if cfg.eval_radius > 0 else 0.3
    rows = []
    for _ in range(cfg.trials):
        Xm = random_matrix(cfg.dim, total / 2, rng)
        Ym = random_matrix(cfg.dim, total / 2, rng)
        err = op_norm(FA.evaluate(Vf, Xm, Ym) - mat_log(mat_exp(Xm) @ mat_exp(Ym)))
        rows.append(err)
    # tail of the series beyond degree N is at most s^{N+1} / (1 - s)
    bound = total ** (N + 1) / (1 - total) + cfg.tol("bch")
    rep.results["matrix_oracle"] = {"total_norm": total, "max": max(rows), "mean": float(np.mean(rows)),
                                    "fitted_C": max(rows) / total ** (N + 1)}
    rep.add(at_most("max ||V(X,Y) - log(e^X e^Y)||", max(rows), bound, "log(e^X e^Y) = V(X, Y)",
                    "threshold: truncation tail bound plus tol-bch"))


def _solution_for(cfg: RunConfig) -> KV.KVSolution:
    return KV.solve_rs(cfg.degree, cfg.split_mode, exact=cfg.split_mode != "symmetric")


def cmd_kv_solve(args, cfg: RunConfig, rep: Report):
    sol = _solution_for(cfg)
    F, G = B.fg_series(cfg.degree, cfg.split_mode)
    rep.add(at_most("KV1 per-grade residual", max(B.kv1_residuals(F, G).values(), default=0.0),
                    cfg.tol("kv1"), "V(Y,X) = X + Y - (1-e^{-ad X}) F - (e^{ad Y}-1) G"))
    for name, p in (("R", sol.R), ("S", sol.S)):
        rep.add(at_most(f"Lie deviation of {name}", max(FA.is_lie(p).deviations.values(), default=0.0),
                        cfg.tol("lie")))
    dec = KV.rs_decompose(sol, cfg.split_mode)
    rep.add(at_most("rs_decompose reconstruction", max(dec.residual_R, dec.residual_S), cfg.tol("lie")))
    rep.results["exact_coefficients"] = sol.R.exact
    rep.results["lead"] = {k: {w: [complex(c).real, complex(c).imag] for w, c in v.items()}
                           for k, v in dec.lead_coefficients().items()}
    rep.results["grade_norms"] = {"R": {n: float(x) for n, x in sol.R.grade_norms().items()},
                                  "S": {n: float(x) for n, x in sol.S.grade_norms().items()}}
    if cfg.output_path:
        _write_json(cfg.output_path, sol.to_json_dict())
        rep.results["solution_path"] = cfg.output_path
        return True
    rep.results["solution"] = sol.to_json_dict()
    return True


def cmd_kv_verify(args, cfg: RunConfig, rep: Report):
    if args.inp:
        try:
            sol = KV.KVSolution.from_json_dict(_read_json(args.inp))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed solution: {exc}") from exc
    else:
        sol = _solution_for(cfg)
    r = cfg.eval_radius
    seeds = split_seeds(cfg.seed, cfg.trials)
    pairs = []
    for ss in seeds:
        rng = make_rng(ss)
        pairs.append((random_skew(cfg.dim, r, rng), random_skew(cfg.dim, r, rng)))
    res = _pmap(lambda xy: KV.verify_factorization(sol, *xy), pairs, cfg.threads)
    ident = "e^{x+y}=(e^Re^xe^{-R})(e^Se^ye^{-S})"
    rep.results["residuals"] = {"max": max(res), "mean": float(np.mean(res)), "radius": r}
    rep.add(at_most("max factorization residual", max(res), cfg.tol("kvhard"), ident))
    if r > 0:
        radii = tuple(r / 2 ** k for k in range(4))
        sweep = KV.convergence_sweep(sol, pairs[:3], radii)
        rep.results["sweep"] = sweep.to_json_dict()
        note = "" if sol.R.exact else "float coefficients: the slope saturates near 1e-17 * r^3"
        rep.add(at_least("log-log slope of residual vs radius", sweep.slope,
                         sol.truncation + 0.5, ident, note))
    return True


def _random_factor_input(kind, cfg: RunConfig):
    rng = make_rng(cfg.seed)
    n = cfg.dim
    if kind == "unipotent":
        return {"x": random_square_zero(n, 1.0, rng)}
    if kind == "commP":
        return {"c": random_contraction(n, rng)}
    return {"c": random_matrix(n, 1.0, rng), "d": random_matrix(n, 1.0, rng)}


def cmd_factor(args, cfg: RunConfig, rep: Report):
    kind = args.kind
    if args.inp:
        data = _read_json(args.inp)
        if not isinstance(data, dict):
            raise InputError("input must be a JSON object")
        if kind == "unipotent" and "dim" in data:
            data = {"x": data}
        need = {"unipotent": ["x"], "commN2": ["c", "d"], "commP": ["c"], "exp-comm": ["c", "d"]}[kind]
        mats = {k: _input_matrix(data, k) for k in need}
        if kind == "commP" and "p" in data:
            mats["p"] = _input_matrix(data, "p")
    else:
        mats = _random_factor_input(kind, cfg)
    rep.results["input"] = {k: matrix_to_json(v) for k, v in mats.items()}
    try:
        if kind == "unipotent":
            cert = C.unipotent_factor(mats["x"], cfg.tol("unipotent"))
            extra = {}
        elif kind == "commN2":
            out = C.commutator_to_squarezeros(mats["c"], mats["d"], cfg.tol("comm-n2"))
            cert, extra = out.certificate, {"K": out.K, "C_realized": out.C_realized,
                                            "C_bound": out.C_bound}
        elif kind == "commP":
            out = C.selfcomm_to_projections(mats["c"], mats.get("p"), cfg.tol("comm-p"))
            cert, extra = out.certificate, {"K": out.K}
        else:
            cert = C.exp_commutator_factor(mats["c"], mats["d"], args.steps)
            extra = {"n": args.steps}
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    verdict = verify_certificate(cert.to_json_dict())
    rep.results.update(extra)
    rep.results["atoms"] = len(cert.atoms)
    rep.results["verifier"] = verdict.to_json_dict()
    rep.add(at_most("certificate residual", cert.residual, cert.tolerance,
                    {"unipotent": "1+x=(u,v)", "commN2": "[c,d]=\\sum_{i=1}^K y_i",
                     "commP": "[c^*,c]=\\sum_{i=1}^K \\epsilon_ip_i",
                     "exp-comm": "(he^{a/n}h^{-1}e^{-a/n})^n=(h,e^{a/n})^n"}[kind]))
    rep.add(at_most("verifier failures", len(verdict.failures), 0))
    if cfg.output_path:
        _write_json(cfg.output_path, cert.to_json_dict())
        rep.results["certificate_path"] = cfg.output_path
    else:
        rep.results["certificate"] = cert.to_json_dict()
    return True


def cmd_verify(args, cfg: RunConfig, rep: Report):
    data = _read_json(args.cert)
    try:
        verdict = verify_certificate(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed certificate: {exc}") from exc
    rep.results["verdict"] = verdict.to_json_dict()
    rep.add(at_most("recomputed residual", verdict.residual, verdict.tolerance))
    rep.add(at_most("verifier failures", len(verdict.failures), 0, note="; ".join(verdict.failures)))


def _random_b_list(ss):
    rng = make_rng(ss)
    dim = int(rng.integers(2, 6))
    bs = [random_matrix(dim, rng.uniform(0.2, 2.0), rng) for _ in range(int(rng.integers(1, 5)))]
    if rng.uniform() < 0.5:
        k = int(rng.integers(-2, 3))
        tr = sum(np.trace(b) for b in bs)
        bs[0] = bs[0] + ((2j * math.pi * k - tr) / dim) * identity(dim)
    return bs


def cmd_dhs(args, cfg: RunConfig, rep: Report):
    tol = cfg.tol("dhs")
    if args.inp:
        data = _read_json(args.inp)
        if not isinstance(data, dict) or not isinstance(data.get("b"), list):
            raise InputError('input must be {"b": [matrix, ...]}')
        try:
            lists = [[matrix_from_json(m) for m in data["b"]]]
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    else:
        lists = [_random_b_list(ss) for ss in split_seeds(cfg.seed, cfg.trials)]
    try:
        out = _pmap(lambda bs: C.dhs_kernel_check(bs, tol), lists, cfg.threads)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    disagree = sum(r.in_kernel != (abs(r.det - 1) <= tol) for r in out)
    rep.results["verdicts"] = [{"in_kernel": r.in_kernel, "trace_sum": [r.trace_sum.real, r.trace_sum.imag],
                                "distance": r.distance, "det_minus_1": abs(r.det - 1)} for r in out]
    rep.add(at_most("verdicts disagreeing with |det - 1| <= tol", disagree, 0,
                    "kernel of the de la Harpe-Skandalis determinant"))


def cmd_acceptance(args, cfg: RunConfig, rep: Report):
    only = None
    if args.criteria:
        try:
            only = sorted({int(x) for x in args.criteria.split(",")})
        except ValueError as exc:
            raise ConfigError(f"--criteria expects integers, got {args.criteria!r}") from exc
        if not set(only) <= set(A.CRITERIA):
            raise ConfigError("criteria are numbered 1..12")
    results = []
    for k in only or sorted(A.CRITERIA):
        res = A.run_criterion(k, cfg.seed, cfg.degree)
        print(res.summary_line(), file=sys.stderr, flush=True)
        results.append(res)
        for c in res.checks:
            c.name = f"[{k}] {c.name}"
            rep.add(c)
    rep.results["criteria"] = [r.to_json_dict() for r in results]


# ---------------------------------------------------------------------------

def _dispatch(args):
    if args.command == "kv":
        return cmd_kv_solve if args.action == "solve" else cmd_kv_verify
    return {"bch": cmd_bch, "factor": cmd_factor, "verify": cmd_verify,
            "dhs-check": cmd_dhs, "acceptance": cmd_acceptance}[args.command]


def _command_name(args) -> str:
    if args.command == "kv":
        return f"kv {args.action}"
    if args.command == "factor":
        return f"factor {args.kind}"
    return args.command


def run(argv=None) -> int:
    """Run one command; returns the exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, cfg = parse(argv)
    except ConfigError as exc:
        print(f"kvcert: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:      # --help
        return int(exc.code or 0)
    rep = Report(_command_name(args), cfg.to_json_dict())
    fn = _dispatch(args)
    try:
        wrote_artifact = fn(args, cfg, rep)
    except (ConfigError, InputError) as exc:
        print(f"kvcert: error: {exc}", file=sys.stderr)
        return 2
    rep.finish()
    text = json.dumps(rep.to_json_dict(), indent=1, default=str)
    if cfg.output_path and not wrote_artifact:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        print(text)
    print(rep.summary(), file=sys.stderr)
    return 0 if rep.ok else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
