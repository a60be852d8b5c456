"""Command-line runner.

Exit codes: 0 success, 1 check failure or tolerance exceeded, 2 bad
parameters, 3 genericity violation, 4 inconsistent input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag

from . import band_calculus as bc
from .bispectrum import (
    S1Signal,
    bispectrum,
    counterexample_pair,
    evaluate_monomials,
    s1_bispectrum,
    s1_march,
    s1_orbit_distance,
    signal_to_fourier,
    translate,
    weight_zero_monomials,
)
from .errors import BispecError, ParameterError
from .moments import moments, recover_m1_m2_from_m3
from .oracle import build_quadrature, empirical_moments, oracle_moment, sample_mra_batches
from .recovery import recover_orbit
from .signal import RealStructure, RepSpec, random_signal
from .su2 import Rotation, get_table, wigner_D


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=2)


def _emit(obj, out=None):
    text = _dump(obj)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _ints(s):
    return [int(x) for x in str(s).replace(" ", "").split(",") if x != ""]


# ---------------------------------------------------------------------------
# band


def cmd_band(args):
    g = bc.GroupType(args.family, args.rank)
    coords = _ints(args.weight)
    rank_one = g.n == 1 or (g.family == "A" and g.n == 2)
    if rank_one and len(coords) == 1:
        lam = bc.from_rank_one_label(g, coords[0])
    elif g.n == 1:
        raise ParameterError("rank-one weights are a single Dynkin label")
    else:
        lam = bc.weight(g, coords)
    out = bc.describe(g, lam)
    if rank_one:
        out["rank_one_label"] = bc.rank_one_label(g, lam)
    _emit(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# recover


def _spec(args):
    if args.mult:
        return RepSpec.from_multiplicities(_ints(args.mult))
    if args.L < 1 or args.R < 1:
        raise ParameterError("need L >= 1 and R >= 1")
    return RepSpec.uniform(args.L, args.R)


def cmd_recover(args):
    spec = _spec(args)
    structure = RealStructure.parse(args.structure)
    table = get_table(max(spec.L, 1))
    f = random_signal(spec, structure, seed=args.seed, table=table)
    empirical = args.N is not None
    if empirical:
        if args.N < 1 or args.sigma < 0:
            raise ParameterError("need N >= 1 and sigma >= 0")
        batches = sample_mra_batches(f, args.sigma, args.N, structure, seed=args.seed + 1)
        mb = empirical_moments(batches, args.sigma, spec, table, structure)
        tol = args.tol if args.tol is not None else np.inf
        report = recover_orbit(mb, spec, structure, table, truth=f, tol=np.inf)
    else:
        tol = args.tol if args.tol is not None else 1e-6
        report = recover_orbit(moments(f, table), spec, structure, table, truth=f)
    out = report.to_json()
    out["config"] = {
        "spec": spec.to_json(),
        "structure": structure.value,
        "seed": args.seed,
        "sigma": args.sigma if empirical else 0.0,
        "N": args.N,
        "tol": None if not np.isfinite(tol) else tol,
    }
    _emit(out, args.out)
    if report.rel_error > tol:
        print(f"rel_error {report.rel_error:.3g} exceeds tolerance {tol:g}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# check


def _check_rows(L, R, seed, qdeg):
    table = get_table(2 * L)
    rule = build_quadrature(L, 3) if qdeg is None else _rule_of_degree(L, qdeg)
    spec = RepSpec.uniform(L, R)
    rows = []
    f = random_signal(spec, "generic_complex", seed=seed, table=table)
    mb = moments(f, table)
    for d in (1, 2, 3):
        err = oracle_moment(f, d, rule).max_abs_diff(mb, which=(f"m{d}",))
        rows.append((f"oracle_m{d}", seed, err, 1e-9))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for l1 in range(L + 1):
        for l2 in range(L + 1):
            C = table.coupling_matrix(l1, l2)
            g = Rotation.random(rng)
            lhs = np.kron(wigner_D(l1, g), wigner_D(l2, g)) @ C
            rhs = C @ block_diag(*[wigner_D(l3, g) for l3 in range(abs(l1 - l2), l1 + l2 + 1)])
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    rows.append(("cg_intertwining", seed, worst, 1e-10))
    sq = RepSpec(tuple((l, 2 * l + 1) for l in range(L + 1)))
    F = signal_to_fourier(random_signal(sq, "generic_complex", seed=seed))
    b1 = bispectrum(F, table)
    b2 = bispectrum(translate(F, Rotation.random(rng)), table)
    rows.append(("bispectrum_invariance", seed, max(float(np.abs(b1[k] - b2[k]).max()) for k in b1), 1e-10))
    a, m2 = recover_m1_m2_from_m3(mb.m3, spec)
    err = max([float(np.abs(a - mb.m1).max())] + [float(np.abs(m2[l] - mb.m2[l]).max()) for l in m2])
    rows.append(("m3_to_m1_m2", seed, err, 1e-9))
    return rows


def _rule_of_degree(L, qdeg):
    if qdeg < 3 * L:
        raise ParameterError(f"quadrature degree {qdeg} is below 3L = {3 * L}")
    return build_quadrature(qdeg, 1)


def cmd_check(args):
    if args.L < 1 or args.R < 1 or args.seeds < 1:
        raise ParameterError("need L, R, seeds >= 1")
    lines = ["check,seed,value,tolerance,status"]
    first_fail = None
    for seed in range(args.seeds):
        for name, s, val, tol in _check_rows(args.L, args.R, seed, args.quadrature_degree):
            ok = val <= tol
            lines.append(f"{name},{s},{val:.3e},{tol:.0e},{'pass' if ok else 'FAIL'}")
            if not ok and first_fail is None:
                first_fail = f"{name} (seed {s})"
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if first_fail:
        print(f"first failing check: {first_fail}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# s1


def _s1_json(f: S1Signal):
    return {str(n): [float(f[n].real), float(f[n].imag)] for n in range(-f.band, f.band + 1)}


def cmd_s1(args):
    if args.counterexample:
        a, b = counterexample_pair()
        mons = weight_zero_monomials([0, 1, 3], 3)
        va, vb = evaluate_monomials(a, mons), evaluate_monomials(b, mons)
        gap = max(abs(va[m] - vb[m]) for m in mons)
        dist, _ = s1_orbit_distance(a, b)
        _emit({
            "signals": [_s1_json(a), _s1_json(b)],
            "num_invariants": len(mons),
            "invariant_gap": float(gap),
            "orbit_distance": dist,
        }, args.out)
        return 0 if gap <= 1e-12 and dist > 0.1 else 1
    if args.band < 0:
        raise ParameterError("band must be >= 0")
    rng = np.random.default_rng(args.seed)
    b = args.band
    f = S1Signal(rng.standard_normal(2 * b + 1) + 1j * rng.standard_normal(2 * b + 1))
    if b == 0:
        z = s1_bispectrum(f)[(0, 0)]
        h = S1Signal([z / abs(z) ** (2 / 3)])
    else:
        h = s1_march(s1_bispectrum(f))
    err, theta = s1_orbit_distance(f, h)
    _emit({"band": b, "seed": args.seed, "error": err, "theta": theta, "recovered": _s1_json(h)}, args.out)
    return 0 if err <= 1e-12 else 1


# ---------------------------------------------------------------------------
# argument handling

BOOL_KEYS = {"counterexample"}


def _parser():
    p = argparse.ArgumentParser(prog="bispec", description="Band calculus and third-moment orbit recovery.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key=value file; flags override it")
        sp.add_argument("--out", help="write output here instead of stdout")

    b = sub.add_parser("band", help="band calculus for a dominant weight")
    b.add_argument("--family", default="A")
    b.add_argument("--rank", type=int, default=1)
    b.add_argument("--weight", default="0")
    common(b)
    b.set_defaults(func=cmd_band)

    r = sub.add_parser("recover", help="recover a random signal from its third moment")
    r.add_argument("--L", type=int, default=3)
    r.add_argument("--R", type=int, default=5)
    r.add_argument("--mult", default=None, help="comma-separated multiplicities R_0,...,R_L")
    r.add_argument("--structure", default="cryo_real")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--sigma", type=float, default=0.0)
    r.add_argument("--N", type=int, default=None)
    r.add_argument("--tol", type=float, default=None)
    common(r)
    r.set_defaults(func=cmd_recover)

    c = sub.add_parser("check", help="oracle and identity cross-checks, CSV output")
    c.add_argument("--L", type=int, default=2)
    c.add_argument("--R", type=int, default=2)
    c.add_argument("--seeds", type=int, default=3)
    c.add_argument("--quadrature-degree", type=int, default=None)
    common(c)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("s1", help="bispectrum inversion on the circle")
    s.add_argument("--band", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--counterexample", action="store_true")
    common(s)
    s.set_defaults(func=cmd_s1)
    return p, sub


def _read_config(path):
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{i}: expected key=value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_args(argv):
    p, sub = _parser()
    args = p.parse_args(argv)
    if args.config:
        sp = sub.choices[args.command]
        known = {a.dest for a in sp._actions} - {"help", "config"}
        cfg = _read_config(args.config)
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
        for k in BOOL_KEYS & set(cfg):
            cfg[k] = cfg[k].lower() in ("1", "true", "yes")
        sp.set_defaults(**cfg)
        args = p.parse_args(argv)
    return args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        return args.func(args)
    except BispecError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
