"""Command-line driver: tables, rank sweeps, convergence study, exports.

Exit codes: 0 on success, 1 for configuration errors (including bad
arguments and unwritable paths), 2 when a numerical contract is violated.
"""

from __future__ import annotations

import argparse
import io
import sys

from .errors import ConfigurationError, NumericalContractError
from .experiments import (CASES, TABLES, RunConfig, build_case, convergence_study,
                          run_experiment, table_config)
from .fem import TransmissionSolver
from .flux import recover_flux, write_flux_text
from .mesh import write_mesh_text
from .reduction import BASIS_KINDS, ReducedRunRecord

CSV_HEADER = ",".join(ReducedRunRecord.columns())


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse exits with 2 by default; 2 is reserved for numerical failures
        raise ConfigurationError(message)


def format_records(cfg: RunConfig, records) -> str:
    lines = [cfg.describe(), CSV_HEADER]
    for r in records:
        lines.append(",".join([str(r.m)] + [f"{v:.3e}" for v in r.as_tuple()[1:]]))
    return "\n".join(lines) + "\n"


def format_convergence(rows) -> str:
    lines = ["n,h,eu_l2,eq_hdiv,order_u,order_q"]
    for n, h, eu, eq, ou, oq in rows:
        lines.append(",".join([str(n)] + [f"{v:.3e}" for v in (h, eu, eq, ou, oq)]))
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None, stdout) -> None:
    if out is None:
        stdout.write(text)
        return
    try:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot write {out}: {exc}") from exc


def _config(args, ranks) -> RunConfig:
    kw = dict(ranks=tuple(ranks), quad_order=args.quad_order, allow_extra=args.allow_extra,
              seed=args.seed)
    if args.n is not None:
        kw["n"] = args.n
    if args.n_theta is not None:
        kw["n_theta"] = args.n_theta
    if args.n_radial is not None:
        kw["n_radial_in"] = kw["n_radial_out"] = args.n_radial
    return RunConfig(args.case, args.basis, **kw)


def cmd_table(args, stdout):
    cfg = table_config(args.id)
    cfg = _config(argparse.Namespace(**{**vars(args), "case": cfg.case, "basis": cfg.basis}),
                  cfg.ranks)
    _emit(format_records(cfg, run_experiment(cfg)), args.out, stdout)


def cmd_sweep(args, stdout):
    if args.m_max < 1:
        raise ConfigurationError("--m-max must be at least 1")
    cfg = _config(args, range(1, args.m_max + 1))
    _emit(format_records(cfg, run_experiment(cfg)), args.out, stdout)


def cmd_solve(args, stdout):
    cfg = _config(args, [args.m])
    _emit(format_records(cfg, run_experiment(cfg)), args.out, stdout)


def cmd_convergence(args, stdout):
    _emit(format_convergence(convergence_study(homogeneous=args.homogeneous)), args.out, stdout)


def cmd_export(args, stdout):
    cfg = _config(args, [1])
    mesh, trace, spec = build_case(cfg)
    buf = io.StringIO()
    if args.kind == "mesh":
        write_mesh_text(mesh, buf, trace)
    else:
        u = TransmissionSolver(mesh, trace).solve(spec)
        write_flux_text(recover_flux(mesh, trace, u, spec), buf)
    _emit(buf.getvalue(), args.out, stdout)


def cmd_selftest(args, stdout):
    from .selftest import run_selftest

    results = run_selftest(args.seed)
    for name, ok, detail in results:
        stdout.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
    if not all(ok for _, ok, _ in results):
        raise NumericalContractError("selftest failed")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", choices=CASES, default="line-flux")
    common.add_argument("--basis", choices=BASIS_KINDS, default=None,
                        help="interface basis (default: the natural one for the case)")
    common.add_argument("--n", type=int, default=None, help="line mesh cells per side")
    common.add_argument("--n-theta", type=int, default=None, help="angular cells (curved cases)")
    common.add_argument("--n-radial", type=int, default=None,
                        help="radial layers inside and outside the interface")
    common.add_argument("--quad-order", type=int, default=10,
                        help="Gauss points per interface edge for the projection")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--allow-extra", action="store_true",
                        help="permit case/basis pairs outside the defined experiments")

    parser = _Parser(prog="ifred", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="one reduced solve at rank m")
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table", parents=[common], help="reproduce a results table")
    p.add_argument("--id", type=int, required=True, choices=sorted(TABLES))
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sweep", parents=[common], help="ranks 1..m_max")
    p.add_argument("--m-max", type=int, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("convergence", parents=[common], help="manufactured-solution study")
    p.add_argument("--homogeneous", action="store_true", help="beta = 1 on both sides")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("export", parents=[common], help="write mesh or recovered flux")
    p.add_argument("--kind", choices=("mesh", "flux"), required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("selftest", parents=[common], help="run the invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        args.func(args, stdout)
    except ConfigurationError as exc:
        stderr.write(f"ifred: error: {exc}\n")
        return 1
    except NumericalContractError as exc:
        stderr.write(f"ifred: numerical failure: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
