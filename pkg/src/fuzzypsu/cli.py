"""Command-line front end: gen, run, bench, verify."""

from __future__ import annotations

import argparse
import csv
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

from fuzzypsu.crypto import MIN_RESIDUOSITY_BITS, SchemeDescriptor
from fuzzypsu.fpsu import FpsuError, Variant
from fuzzypsu.geometry import FuzzyDataset, read_dataset, write_dataset
from fuzzypsu.harness import (CSV_COLUMNS, STRUCTURE_FOR, DatasetSpec, InfeasibleSpec, Seeds,
                              Structure, configure_logging, gen_dataset, make_config, meter_report,
                              report_csv, run_protocol, run_trial)
from fuzzypsu.pir import PirBackend

VARIANTS = [v.value for v in Variant]


class UsageError(Exception):
    pass


def _scheme(args) -> SchemeDescriptor:
    if args.scheme == "lhe":
        return SchemeDescriptor.residuosity(args.kappa or MIN_RESIDUOSITY_BITS)
    return SchemeDescriptor.mock()


def _add_common(p: argparse.ArgumentParser, variant_required: bool = True) -> None:
    p.add_argument("--variant", choices=VARIANTS, required=variant_required)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--delta", type=int, default=1)
    p.add_argument("--w", type=int, default=16)
    p.add_argument("--inside", type=int, default=None,
                   help="number of Y points inside the balls (default m//2)")
    p.add_argument("--seed", type=int, default=0)


def _add_crypto(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=int, default=40)
    p.add_argument("--kappa", type=int, default=None, help="residuosity modulus bits")
    p.add_argument("--scheme", choices=("lhe", "mock-fhe"), default="mock-fhe")
    p.add_argument("--pir-backend", choices=[b.value for b in PirBackend],
                   default=PirBackend.REFERENCE_LHE.value)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpsu", description="Fuzzy PSU simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="write a seeded dataset file")
    _add_common(g, variant_required=False)
    g.add_argument("--structure", choices=[s.value for s in Structure], default=None)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="run one protocol instance")
    _add_common(r)
    _add_crypto(r)
    r.add_argument("--input", default=None, help="dataset file (otherwise generated)")
    r.add_argument("--out", default="transcript.csv", help="transcript CSV path")

    b = sub.add_parser("bench", help="meter rows over a parameter sweep")
    _add_common(b)
    _add_crypto(b)
    b.add_argument("--sweep", default=None, help="e.g. n=8..64 (doubling) or delta=1,2,4")
    b.add_argument("--trials", type=int, default=1)
    b.add_argument("--jobs", type=int, default=None)
    b.add_argument("--out", default=None, help="CSV path (default stdout)")

    v = sub.add_parser("verify", help="oracle-check seeded grid trials")
    v.add_argument("--variant", choices=VARIANTS, default=None)
    v.add_argument("--all", action="store_true")
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0, help="first trial seed")
    v.add_argument("--jobs", type=int, default=None)
    _add_crypto(v)
    return ap


def parse_sweep(text: str) -> tuple[str, list[int]]:
    """``n=8..64`` doubles from 8 to 64; ``delta=1,2,4`` lists values."""
    m = re.fullmatch(r"(n|m|d|delta)=(\d+)\.\.(\d+)", text)
    if m:
        lo, hi = int(m.group(2)), int(m.group(3))
        if lo < 1 or hi < lo:
            raise UsageError(f"bad sweep range {text!r}")
        vals = []
        while lo <= hi:
            vals.append(lo)
            lo *= 2
        return m.group(1), vals
    m = re.fullmatch(r"(n|m|d|delta)=(\d+(?:,\d+)*)", text)
    if m:
        return m.group(1), [int(x) for x in m.group(2).split(",")]
    raise UsageError(f"cannot parse sweep {text!r}; use e.g. n=8..64")


def _spec(args, variant: Optional[Variant], **over) -> DatasetSpec:
    if variant is None and getattr(args, "structure", None) is None:
        raise UsageError("gen needs --variant or --structure")
    structure = Structure(args.structure) if getattr(args, "structure", None) else STRUCTURE_FOR[variant]
    vals = dict(n=args.n, m=args.m, d=args.d, delta=args.delta)
    vals.update(over)
    inside = args.inside
    if inside is not None and inside > vals["m"]:
        raise UsageError("--inside exceeds --m")
    return DatasetSpec(structure, vals["n"], vals["m"], vals["d"], vals["delta"], args.w,
                       inside_count=inside, seed=Seeds.from_master(args.seed).dataset)


def _fmt_point(p) -> str:
    return " ".join(map(str, p))


def cmd_gen(args) -> int:
    variant = Variant(args.variant) if args.variant else None
    X, Y = gen_dataset(_spec(args, variant))
    write_dataset(args.out, X, Y)
    print(f"wrote {X.n} receiver points and {len(Y)} sender points to {args.out}")
    return 0


def _run_one(args, variant: Variant, X: FuzzyDataset, Y, seed: int):
    cfg = make_config(variant, X, Y, args.lam, _scheme(args), PirBackend(args.pir_backend))
    axis = None
    if variant is Variant.EXC:
        from fuzzypsu.fpsu import choose_exclusive_axis
        from fuzzypsu.graph import build_induced_graph
        axis = choose_exclusive_axis(build_induced_graph(X))
    return run_protocol(variant, X, Y, cfg, seed=seed, axis=axis)


def cmd_run(args) -> int:
    variant = Variant(args.variant)
    if args.input:
        X, Y = read_dataset(args.input)
    else:
        X, Y = gen_dataset(_spec(args, variant))
    rr = _run_one(args, variant, X, Y, args.seed)
    for p in sorted(rr.result):
        print(_fmt_point(p))
    tr = rr.transcript
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "phase", "direction", "tag", "bytes", "ciphertexts"])
        for msg in tr.messages:
            w.writerow([msg.index, msg.phase, msg.direction, msg.tag, msg.nbytes, msg.ciphertexts])
    row = meter_report([tr])[0]
    print(f"# |union|={len(rr.result)} rounds={tr.rounds} bytes={tr.total_bytes} "
          f"pir_indices={row['pir_indices']} transcript={args.out}", file=sys.stderr)
    if "insecure-clear-pir" in tr.flags:
        print("# warning: insecure-clear PIR backend, indices were sent in the clear", file=sys.stderr)
    return 0


def _bench_point(job) -> dict:
    args, variant, over, seed = job
    X, Y = gen_dataset(_spec(args, variant, **over))
    rr = _run_one(args, variant, X, Y, seed)
    return meter_report([rr.transcript])[0]


def _pool_map(fn, jobs, n_jobs: Optional[int]):
    if n_jobs == 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, jobs))


def cmd_bench(args) -> int:
    variant = Variant(args.variant)
    if args.sweep:
        key, values = parse_sweep(args.sweep)
    else:
        key, values = "n", [args.n]
    jobs = [(args, variant, {key: v}, args.seed + t) for v in values for t in range(args.trials)]
    rows = _pool_map(_bench_point, jobs, args.jobs)
    text = report_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _verify_trial(job):
    variant, seed, scheme, lam, backend = job
    o = run_trial(variant, seed, scheme, lam=lam, pir_backend=backend)
    return variant, seed, o.matches, o.leakage_ok


def cmd_verify(args) -> int:
    if args.all:
        variants = list(Variant)
    elif args.variant:
        variants = [Variant(args.variant)]
    else:
        raise UsageError("verify needs --variant or --all")
    scheme = _scheme(args)
    backend = PirBackend(args.pir_backend)
    bad = 0
    for v in variants:
        if v.needs_fhe and args.scheme == "lhe":
            print(f"{v.value}: skipped, needs ciphertext multiplication")
            continue
        jobs = [(v, s, scheme, args.lam, backend) for s in range(args.seed, args.seed + args.trials)]
        results = _pool_map(_verify_trial, jobs, args.jobs)
        fails = [(s, m, lk) for _, s, m, lk in results if not (m and lk)]
        bad += len(fails)
        print(f"{v.value}: {len(results) - len(fails)}/{len(results)} trials match")
        for s, m, lk in fails:
            print(f"  seed {s}: union {'ok' if m else 'MISMATCH'}, leakage {'ok' if lk else 'MISMATCH'}")
    return 0 if bad == 0 else 1


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "bench": cmd_bench, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (UsageError, InfeasibleSpec) as e:
        print(f"fpsu {args.cmd}: {e}", file=sys.stderr)
        return 2
    except (FpsuError, ValueError) as e:
        print(f"fpsu {args.cmd}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
