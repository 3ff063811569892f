"""Command-line entry point: validate, synth, factorize, estimate, verify,
and bench subcommands emitting machine-readable reports.

Exit codes: 0 ok, 1 I/O error, 2 validation/verification failure,
3 capability refusal (e.g. oracle size cap).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_REFUSAL = 3


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold-density", type=float, default=None, help="density coefficient cutoff (default 1e-16)")
    p.add_argument("--threshold-d", type=float, default=None, help="D-tensor entry cutoff (default 1e-19)")
    p.add_argument("--threshold-c", type=float, default=None, help="C-tensor entry cutoff (default 1e-7)")
    p.add_argument("--threshold-eig", type=float, default=None, help="factor eigenvalue cutoff (default 1e-5)")


def _add_bits_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--b-rot", type=int, default=7, help="ancilla rotation bits b_r")
    p.add_argument("--n1", type=int, default=None, help="outer keep-register bits (default from lambda)")
    p.add_argument("--n2", type=int, default=None, help="inner keep-register bits (default from lambda)")
    p.add_argument("--angle-bits", type=int, default=16, help="Givens angle bit precision B")
    p.add_argument("--no-sign-qubit", action="store_true", help="drop the +1 sign qubit from b_o")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blochpaw", description=__doc__)
    parser.add_argument("--threads", type=int, default=None, help="cap worker/BLAS thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a dataset file against every invariant")
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("synth", help="write a deterministic synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mesh", default="1,1,1", help="comma-separated mesh dims")
    p.add_argument("--n-b", type=int, default=2)
    p.add_argument("--n-atoms", type=int, default=1)
    p.add_argument("--n-waves", type=int, default=1)
    p.add_argument("--n-pw", type=int, default=3)
    p.add_argument("--profile", choices=["flat", "physical"], default="flat")
    p.add_argument("--out", required=True)

    p = sub.add_parser("factorize", help="write the LCU factorization of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kernel", choices=["bare_zero_mode_removed", "tabulated"], default="bare_zero_mode_removed")
    _add_threshold_flags(p)

    p = sub.add_parser("estimate", help="truncate, factorize, and report lambda and resource costs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--epsilon-qpe", type=float, default=1.0, help="QPE target precision in meV")
    p.add_argument("--kernel", choices=["bare_zero_mode_removed", "tabulated"], default="bare_zero_mode_removed")
    p.add_argument("--objective", choices=["gates", "qubits", "weighted"], default="gates")
    p.add_argument("--system", default="dataset", help="system label for the CSV row")
    _add_threshold_flags(p)
    _add_bits_flags(p)

    p = sub.add_parser("verify", help="brute-force Fock-space verification within the size cap")
    p.add_argument("--dataset", required=True)
    p.add_argument("--factorization", default=None, help="optional factorization file to check")
    p.add_argument("--kernel", choices=["bare_zero_mode_removed", "tabulated"], default="bare_zero_mode_removed")
    p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("bench", help="run a scaling series and write CSV + fit JSON")
    p.add_argument("--axis", required=True, help="Nb | Nk | Na")
    p.add_argument("--sizes", required=True, help="comma-separated sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output basename; writes <out>.csv and <out>.fits.json")
    _add_bits_flags(p)

    return parser


def _policy_from_args(args):
    from .dataset import TruncationPolicy

    base = TruncationPolicy()
    return TruncationPolicy(
        density_threshold=base.density_threshold if args.threshold_density is None else args.threshold_density,
        d_tensor_threshold=base.d_tensor_threshold if args.threshold_d is None else args.threshold_d,
        c_tensor_threshold=base.c_tensor_threshold if args.threshold_c is None else args.threshold_c,
        eigenvalue_threshold=base.eigenvalue_threshold if args.threshold_eig is None else args.threshold_eig,
    )


def _bits_from_args(args):
    from .resources import BitParams

    return BitParams(
        b_r=args.b_rot,
        n1=args.n1,
        n2=args.n2,
        angle_bits=args.angle_bits,
        include_sign_qubit=not args.no_sign_qubit,
    )


def _kernel_from_args(ds, args):
    from .lattice import KernelKind

    return ds.kernel(KernelKind(args.kernel))


def cmd_validate(args) -> int:
    from .dataset import DatasetError, load_dataset

    try:
        load_dataset(args.dataset)
    except OSError as exc:
        print(json.dumps({"ok": False, "diagnostics": [f"I/O: {exc}"]}))
        return EXIT_IO
    except DatasetError as exc:
        print(json.dumps({"ok": False, "diagnostics": exc.diagnostics}))
        return EXIT_VALIDATION
    print(json.dumps({"ok": True, "diagnostics": []}))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .dataset import SynthSizes, save_dataset, synth_dataset

    try:
        mesh = tuple(int(x) for x in args.mesh.split(","))
        sizes = SynthSizes(mesh=mesh, n_b=args.n_b, n_atoms=args.n_atoms, n_waves=args.n_waves, n_pw=args.n_pw)
        ds = synth_dataset(args.seed, sizes, profile=args.profile)
    except ValueError as exc:
        print(f"invalid synth request: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        save_dataset(ds, args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _load_or_exit(args):
    from .dataset import DatasetError, load_dataset

    try:
        return load_dataset(args.dataset), EXIT_OK
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return None, EXIT_IO
    except DatasetError as exc:
        print(json.dumps({"ok": False, "diagnostics": exc.diagnostics}), file=sys.stderr)
        return None, EXIT_VALIDATION


def cmd_factorize(args) -> int:
    from .dataset import apply_truncation
    from .factorize import factorize_dataset, save_factorization

    ds, status = _load_or_exit(args)
    if ds is None:
        return status
    try:
        ds = apply_truncation(ds, _policy_from_args(args))
        fact = factorize_dataset(ds, _kernel_from_args(ds, args))
    except (ValueError, KeyError) as exc:
        print(f"factorization failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        save_factorization(fact, args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_estimate(args) -> int:
    from .dataset import MEV_IN_HARTREE, apply_truncation
    from .factorize import factorize_dataset
    from .onenorm import lambda_total
    from .resources import total_resources

    ds, status = _load_or_exit(args)
    if ds is None:
        return status
    policy = _policy_from_args(args)
    try:
        ds = apply_truncation(ds, policy)
        kernel = _kernel_from_args(ds, args)
        fact = factorize_dataset(ds, kernel, keep_rotations=False)
        breakdown = lambda_total(fact, ds)
        eps_ha = args.epsilon_qpe * MEV_IN_HARTREE
        report = total_resources(ds, fact, _bits_from_args(args), eps_ha, breakdown, objective=args.objective)
    except (ValueError, KeyError) as exc:
        print(f"estimate failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.format == "json":
        doc = report.to_json_dict()
        doc["config"] = {
            "dataset": args.dataset,
            "kernel": args.kernel,
            "epsilon_qpe_mev": args.epsilon_qpe,
            "thresholds": {
                "density": policy.density_threshold,
                "d_tensor": policy.d_tensor_threshold,
                "c_tensor": policy.c_tensor_threshold,
                "eigenvalue": policy.eigenvalue_threshold,
            },
            "objective": args.objective,
            "units": {"energy": "hartree", "length": "bohr", "mev_in_hartree": MEV_IN_HARTREE},
        }
        payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        import io

        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(report.csv_header())
        writer.writerow(report.csv_row(args.system, ds.n_atoms))
        payload = buf.getvalue()

    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(payload)
        except OSError as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def cmd_verify(args) -> int:
    import numpy as np

    from .factorize import factorize_dataset, load_factorization
    from .fock import (
        SizeCapError,
        SpinOrbitalOrder,
        fock_from_integrals,
        fock_from_lcu,
        lambda_bruteforce,
    )
    from .assembly import kappa_full
    from .onenorm import lambda_total

    ds, status = _load_or_exit(args)
    if ds is None:
        return status
    kernel = _kernel_from_args(ds, args)
    order = SpinOrbitalOrder(n_k=ds.n_k, n_b=ds.n_b)

    try:
        if args.factorization:
            try:
                fact = load_factorization(args.factorization)
            except OSError as exc:
                print(f"I/O error: {exc}", file=sys.stderr)
                return EXIT_IO
        else:
            fact = factorize_dataset(ds, kernel)
        sectors = [kappa_full(ds, qf, kernel) for qf in range(ds.n_k)]
        direct = fock_from_integrals(ds.h_one_body, sectors, order, ds.mesh)
        lcu = fock_from_lcu(fact, order, ds.mesh)
    except SizeCapError as exc:
        print(json.dumps({"ok": False, "reason": str(exc)}))
        return EXIT_REFUSAL
    except (ValueError, KeyError) as exc:
        print(json.dumps({"ok": False, "reason": f"verification could not run: {exc}"}))
        return EXIT_VALIDATION

    checks = {}
    max_abs = float(np.max(np.abs(lcu.matrix - direct.matrix)))
    checks["lcu_vs_direct_max_abs"] = max_abs
    checks["lcu_vs_direct_ok"] = bool(max_abs <= args.tol)

    breakdown = lambda_total(fact, ds)
    lam_bf = lambda_bruteforce(fact)
    rel = abs(breakdown.lambda_total - lam_bf) / max(1e-300, abs(lam_bf))
    checks["lambda_formula"] = breakdown.lambda_total
    checks["lambda_bruteforce"] = lam_bf
    checks["lambda_rel_err"] = rel
    checks["lambda_ok"] = bool(rel <= 1e-10)

    eigs = np.linalg.eigvalsh(direct.matrix)
    radius = float(np.max(np.abs(eigs - fact.energy_shift)))
    checks["spectral_radius_shifted"] = radius
    checks["lambda_bound_ok"] = bool(radius <= breakdown.lambda_total + 1e-9)

    ok = checks["lcu_vs_direct_ok"] and checks["lambda_ok"] and checks["lambda_bound_ok"]
    print(json.dumps({"ok": ok, "checks": checks}))
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_bench(args) -> int:
    from .bench import AXES, BenchConfig, run_series, write_series

    if args.axis not in AXES:
        print(f"unknown axis {args.axis!r}; expected one of {AXES}", file=sys.stderr)
        return EXIT_VALIDATION
    sizes = [int(s) for s in args.sizes.split(",")]
    bits = _bits_from_args(args)
    if bits.n1 is None or bits.n2 is None:
        # hold the keep-register widths fixed across a series so the fitted
        # exponents measure the circuit, not a lambda-dependent bit budget
        from dataclasses import replace

        bits = replace(bits, n1=bits.n1 if bits.n1 is not None else 16, n2=bits.n2 if bits.n2 is not None else 16)
    base = BenchConfig(bits=bits)
    try:
        series = run_series(args.axis, sizes, base, args.seed)
        write_series(series, f"{args.out}.csv", f"{args.out}.fits.json")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "synth": cmd_synth,
    "factorize": cmd_factorize,
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))
        try:  # cap pools that were already initialized at import time
            import threadpoolctl

            threadpoolctl.threadpool_limits(limits=args.threads)
        except ImportError:
            pass
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
