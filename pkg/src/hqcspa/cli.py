"""Command-line front end.

Subcommands: mul, simulate, attack, evaluate, bench, export. Every
parameter can also come from a JSON config file (--config); explicit
flags win over config values. evaluate exits with status 2 when --assert
is given and the run misses the acceptance thresholds.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attack import AttackConfig, recover_key, recover_limb
from .evaluate import (
    CALIBRATED_NOISE_SIGMA,
    ConfusionMatrix,
    calibrated_attack,
    export_plot_data,
    run_bench,
    run_evaluation,
)
from .gf2x import resolve_kernel
from .hqc import RingParams, random_ciphertext, sample_secret
from .leakage import LeakageParams, key_recovery_traces, read_trace, simulate_trace, write_trace

KERNEL_CHOICES = ("win", "serial", "direct", "masked")


def _hex_limb(text: str) -> int:
    v = int(text, 16)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("limb must fit in 64 bits")
    return v


def _load_config(path):
    if path is None:
        return {}
    with open(path) as f:
        return json.load(f)


def _merged(args, config, key, default=None):
    """Explicit flag > config file entry > default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return default


def _leakage_from(config, sigma=None) -> LeakageParams:
    params = LeakageParams(**config.get("leakage", {}))
    if sigma is not None:
        params = replace(params, noise_sigma=float(sigma))
    return params


def _attack_from(config) -> AttackConfig:
    return calibrated_attack(**config.get("attack", {}))


# --- subcommands ---------------------------------------------------------------

def cmd_mul(args, config):
    kernel = _merged(args, config, "kernel", "win")
    rng = np.random.default_rng(_merged(args, config, "seed", 0))
    if kernel == "masked" and args.mask is not None:
        from .gf2x import masked_mul

        p = masked_mul(args.a, args.b, args.mask)
    else:
        p = resolve_kernel(kernel, rng)(args.a, args.b)
    print(f"lo=0x{p.lo:016x}")
    print(f"hi=0x{p.hi:016x}")
    return 0


def cmd_simulate(args, config):
    seed = int(_merged(args, config, "seed", 0))
    sigma = _merged(args, config, "sigma", None)
    params = _leakage_from(config, sigma)
    b = args.b
    if b is None:
        b = int(np.random.default_rng(seed).integers(0, 1 << 64, dtype=np.uint64))
    trace = simulate_trace(args.a, b, params, seed=seed,
                           record_truth=not args.no_truth)
    write_trace(trace, args.out)
    print(f"wrote {len(trace.samples)} samples to {args.out} "
          f"(sigma={params.noise_sigma}, seed={seed})")
    return 0


def _print_limb_report(rep):
    print("window  recovered  truth  ok")
    for w, nib in enumerate(rep.recovered):
        if rep.truth is None:
            print(f"{w:6d}  {nib:9x}")
        else:
            mark = "yes" if rep.per_window_success[w] else "NO"
            print(f"{w:6d}  {nib:9x}  {rep.truth[w]:5x}  {mark}")
    print(f"recovered limb: 0x{rep.recovered_limb:016x}")
    if rep.limb_success is not None:
        print(f"limb success: {rep.limb_success}")


def cmd_attack(args, config):
    cfg = _attack_from(config)
    if args.full_key:
        n = int(_merged(args, config, "n", RingParams().n))
        w = int(_merged(args, config, "w", RingParams().w))
        seed = int(_merged(args, config, "seed", 0))
        sigma = float(_merged(args, config, "sigma", 0.0))
        params = RingParams(n=n, w=w)
        sk = sample_secret(params, seed=seed)
        ct = random_ciphertext(n, seed=seed + 1)
        leak = _leakage_from(config, sigma)
        traces, mapping = key_recovery_traces(sk, ct, leak, master_seed=seed)
        out = recover_key(traces, mapping, params, cfg)
        ok = sum(1 for v in (out.per_limb_success or {}).values() if v)
        print(f"n={n} w={w} sigma={sigma}: {len(mapping)} raw-limb traces, "
              f"{ok}/{params.nlimbs} limbs correct, exact={out.exact_match}")
        if args.out:
            Path(args.out).write_text(json.dumps({
                "n": n, "w": w, "sigma": sigma, "seed": seed,
                "exact_match": out.exact_match,
                "unrecovered_limbs": out.unrecovered,
                "recovered_support": out.recovered_key.support(),
                "true_support": sk.support,
            }, indent=2))
            print(f"wrote {args.out}")
        return 0 if out.exact_match else 1

    if args.trace is None:
        print("attack needs --trace FILE or --full-key", file=sys.stderr)
        return 2
    trace = read_trace(args.trace)
    rep = recover_limb(trace, cfg)
    _print_limb_report(rep)
    if args.out:
        Path(args.out).write_text(rep.to_json())
        print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args, config):
    seed = _merged(args, config, "seed")
    if seed is None:
        print("evaluate requires --seed for reproducibility", file=sys.stderr)
        return 2
    trials = int(_merged(args, config, "trials", 10_000))
    sigma = float(_merged(args, config, "sigma", CALIBRATED_NOISE_SIGMA))
    res = run_evaluation(trials, sigma, int(seed),
                         leakage=_leakage_from(config),
                         attack_cfg=_attack_from(config))

    w0 = sum(1 for f in res.failures if f["window"] == 0)
    print(f"trials={trials} sigma={sigma} seed={seed}")
    print(f"success rate: {res.success_rate:.4%} ({len(res.failures)} window "
          f"failures, {w0} in window 0)")
    print(f"first-window off-diagonal rows: {res.cm_first_window.off_diagonal_rows()}")
    print(f"rest diagonal: {res.cm_rest.is_diagonal()}")

    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.json").write_text(res.to_json())
        export_plot_data(res.cm_first_window, outdir / "cm_first_window.csv")
        export_plot_data(res.cm_rest, outdir / "cm_rest.csv")
        print(f"wrote report.json, cm_first_window.csv/.png, cm_rest.csv/.png to {outdir}/")

    if getattr(args, "assert_thresholds", False):
        ok = (
            res.success_rate >= 0.99
            and res.failures_only_in_window(0)
            and set(res.cm_first_window.off_diagonal_rows()) <= {0, 15}
            and res.cm_rest.is_diagonal()
        )
        if not ok:
            print("acceptance thresholds missed", file=sys.stderr)
            return 2
        print("acceptance thresholds met")
    return 0


def cmd_bench(args, config):
    calls = int(_merged(args, config, "calls", 1_000_000))
    seed = int(_merged(args, config, "seed", 0))
    kernels = [args.kernel] if args.kernel else ["win", "serial", "direct"]
    results = [run_bench(k, calls, seed) for k in kernels]
    print(f"{'kernel':8s} {'calls':>10s} {'elapsed':>10s} {'per call':>12s}")
    for r in results:
        print(f"{r.kernel:8s} {r.calls:>10d} {r.elapsed:>9.3f}s {r.per_call_ns:>10.1f}ns")
    if len(results) > 1:
        base = {r.kernel: r.per_call_ns for r in results}
        if "win" in base:
            for other in ("serial", "direct"):
                if other in base:
                    print(f"win/{other} per-call ratio: {base['win'] / base[other]:.2f}x")
    checks = {r.checksum for r in results}
    if len(checks) > 1:
        print("checksum mismatch across kernels!", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_text(json.dumps([r.to_dict() for r in results], indent=2))
        print(f"wrote {args.out}")
    return 0


def cmd_export(args, config):
    cfg = _attack_from(config)
    if args.trace:
        trace = read_trace(args.trace)
        export_plot_data(trace, args.out, cfg)
    elif args.report:
        obj = json.loads(Path(args.report).read_text())
        key = "cm_first_window" if args.matrix == "first" else "cm_rest"
        cm = ConfusionMatrix(np.array(obj[key], dtype=np.int64))
        export_plot_data(cm, args.out)
    else:
        print("export needs --trace FILE or --report FILE", file=sys.stderr)
        return 2
    print(f"wrote {args.out} and companion figure")
    return 0


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="hqcspa",
        description="GF(2)[x] multiplication kernels, leakage simulation, "
                    "and single-trace recovery experiments",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file with defaults for any flag")
        p.add_argument("--seed", type=int, default=None, help="RNG seed")

    p = sub.add_parser("mul", help="multiply two 64-bit limbs")
    common(p)
    p.add_argument("-a", type=_hex_limb, required=True, help="first limb (hex)")
    p.add_argument("-b", type=_hex_limb, required=True, help="second limb (hex)")
    p.add_argument("--kernel", choices=KERNEL_CHOICES, default=None)
    p.add_argument("--mask", type=_hex_limb, default=None,
                   help="fixed mask for the masked kernel (hex)")
    p.set_defaults(fn=cmd_mul)

    p = sub.add_parser("simulate", help="write a synthetic power trace")
    common(p)
    p.add_argument("-a", type=_hex_limb, required=True, help="scanned operand (hex)")
    p.add_argument("-b", type=_hex_limb, default=None,
                   help="other operand (hex, default seeded random)")
    p.add_argument("--sigma", type=float, default=None, help="noise level")
    p.add_argument("--no-truth", action="store_true",
                   help="omit the ground-truth limb from the metadata")
    p.add_argument("--out", required=True, help="output trace file")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("attack", help="recover a limb from a trace, or a whole key")
    common(p)
    p.add_argument("--trace", type=str, default=None, help="trace file to attack")
    p.add_argument("--full-key", action="store_true",
                   help="simulate and attack every raw-limb multiplication of a fresh key")
    p.add_argument("--n", type=int, default=None, help="ring dimension (full-key mode)")
    p.add_argument("--w", type=int, default=None, help="secret weight (full-key mode)")
    p.add_argument("--sigma", type=float, default=None, help="noise level (full-key mode)")
    p.add_argument("--out", type=str, default=None, help="write a JSON report here")
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("evaluate", help="bulk single-trace attack experiment")
    common(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None,
                   help="noise level (default: calibrated operating point)")
    p.add_argument("--out", type=str, default=None,
                   help="directory for report.json, CSVs, and figures")
    p.add_argument("--assert", dest="assert_thresholds", action="store_true",
                   help="exit 2 unless the run meets the acceptance thresholds")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("bench", help="time the batch kernels")
    common(p)
    p.add_argument("--kernel", choices=KERNEL_CHOICES, default=None,
                   help="single kernel (default: win, serial, direct)")
    p.add_argument("--calls", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="write JSON results here")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("export", help="CSV + figure for a trace or confusion matrix")
    common(p)
    p.add_argument("--trace", type=str, default=None, help="trace file")
    p.add_argument("--report", type=str, default=None, help="evaluate report.json")
    p.add_argument("--matrix", choices=("first", "rest"), default="first",
                   help="which matrix to export from the report")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(fn=cmd_export)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = _load_config(args.config)
    return args.fn(args, config)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
