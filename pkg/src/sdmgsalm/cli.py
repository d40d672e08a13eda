"""Command line: instance I/O, random instance generator, run orchestration,
and the serious-step sweep / parallel speedup harnesses."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import model, oracle
from .alm import (
    AlmConfig,
    IterationRecord,
    SubgradientRecord,
    run_sdm_gs_alm,
    run_subgradient_baseline,
)
from .errors import (
    InstanceValidationError,
    NondeterministicTrajectory,
    ParseError,
    SolverError,
)
from .model import BlockSpec, LinearConstraint, LinkageStructure, ProblemInstance
from .parallel import run_parallel

MODES = ("sdmgsalm", "subgradient", "oracle", "speedup-harness", "ssc-sweep")


@dataclass
class RunConfig:
    mode: str
    instance_path: str | None
    generate: tuple | None        # (m, n_per_block, density)
    seed: int
    alm: AlmConfig
    threads: int
    out: str | None
    use_oracle: bool
    step0: float
    gamma_list: tuple
    rho_list: tuple
    n_list: tuple
    repeats: int
    save_instance: str | None

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.instance_path is None and self.generate is None:
            raise ValueError("need --instance or --generate")
        if self.threads < 1:
            raise ValueError("--threads must be >= 1")
        if self.mode == "ssc-sweep":
            if not self.gamma_list or not self.rho_list:
                raise ValueError("ssc-sweep needs --gamma-list and --rho-list")
            if self.out is None:
                raise ValueError("ssc-sweep needs --out DIRECTORY")
        if self.mode == "speedup-harness":
            if 1 not in self.n_list:
                raise ValueError("--n-list must include 1")
            if self.repeats < 1:
                raise ValueError("--repeats must be >= 1")


# ---------------------------------------------------------------------------
# instance file I/O
# ---------------------------------------------------------------------------


def _require(doc, key, where):
    if key not in doc:
        raise ParseError(f"{where}: missing field '{key}'")
    return doc[key]


def parse_instance(path) -> ProblemInstance:
    """Read and validate a JSON instance file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None

    name = _require(doc, "name", str(path))
    raw_blocks = _require(doc, "blocks", str(path))
    groups = _require(doc, "groups", str(path))
    blocks = []
    for bi, b in enumerate(raw_blocks):
        where = f"{path}: block {bi}"
        cost = _require(b, "cost_linear", where)
        n = len(cost)
        cons = []
        for ci, c in enumerate(b.get("constraints", [])):
            cwhere = f"{where} constraint {ci}"
            rel = _require(c, "rel", cwhere)
            if rel not in model.RELATIONS:
                raise ParseError(f"{cwhere}: unknown relation {rel!r}")
            cons.append(
                LinearConstraint(_require(c, "coeffs", cwhere), rel, _require(c, "rhs", cwhere))
            )
        try:
            blocks.append(
                BlockSpec(
                    cost_linear=cost,
                    cost_quad_diag=b.get("cost_quad_diag", np.zeros(n)),
                    lb=_require(b, "lb", where),
                    ub=_require(b, "ub", where),
                    integer=_require(b, "integer", where),
                    coupling=_require(b, "Q", where),
                    constraints=tuple(cons),
                    cost_constant=b.get("cost_constant", 0.0),
                )
            )
        except (ValueError, TypeError) as exc:
            raise ParseError(f"{where}: {exc}") from None

    inst = ProblemInstance(str(name), tuple(blocks), LinkageStructure(tuple(map(tuple, groups))))
    violations = model.validate_instance(inst)
    if violations:
        raise InstanceValidationError(violations)
    return inst


def instance_to_dict(inst) -> dict:
    return {
        "name": inst.name,
        "blocks": [
            {
                "cost_linear": list(b.cost_linear),
                "cost_quad_diag": list(b.cost_quad_diag),
                "cost_constant": b.cost_constant,
                "constraints": [
                    {"coeffs": list(c.coeffs), "rel": c.rel, "rhs": c.rhs}
                    for c in b.constraints
                ],
                "lb": list(b.lb),
                "ub": list(b.ub),
                "integer": [bool(v) for v in b.integer],
                "Q": [list(row) for row in b.coupling],
            }
            for b in inst.blocks
        ],
        "groups": [list(g) for g in inst.linkage.groups],
    }


def write_instance(inst, path):
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


# ---------------------------------------------------------------------------
# random instance generator
# ---------------------------------------------------------------------------


def generate_instance(seed, m, n_per_block, density=0.5) -> ProblemInstance:
    """Two-stage-style random instance: every block carries n_per_block
    binaries, the first half of which are copies linked across all blocks;
    costs are uniform in [-10, 10] and rows are knapsack-style."""
    if m < 1 or n_per_block < 1 or density <= 0:
        raise ValueError("generator parameters must be positive")
    rng = np.random.default_rng(seed)
    n_link = max(1, n_per_block // 2)
    n_rows = max(1, int(round(density * n_per_block)))
    blocks = []
    for _ in range(m):
        cost = np.round(rng.uniform(-10.0, 10.0, n_per_block), 2)
        cons = []
        for _r in range(n_rows):
            coeffs = rng.integers(1, 10, n_per_block).astype(float)
            rhs = float(np.floor(0.5 * coeffs.sum()))
            cons.append(LinearConstraint(coeffs, "<=", rhs))
        blocks.append(
            BlockSpec(
                cost_linear=cost,
                cost_quad_diag=np.zeros(n_per_block),
                lb=np.zeros(n_per_block),
                ub=np.ones(n_per_block),
                integer=np.ones(n_per_block, dtype=bool),
                coupling=np.eye(n_per_block)[:n_link],
                constraints=tuple(cons),
            )
        )
    groups = tuple(
        tuple(i * n_link + j for i in range(m)) for j in range(n_link)
    )
    return ProblemInstance(
        f"gen-s{seed}-m{m}-n{n_per_block}", tuple(blocks), LinkageStructure(groups)
    )


# ---------------------------------------------------------------------------
# record serialization
# ---------------------------------------------------------------------------


def records_to_csv(records, columns=None) -> str:
    if not records:
        return ""
    cols = columns or type(records[0]).CSV_COLUMNS
    lines = [",".join(cols)]
    lines.extend(r.csv_row() for r in records)
    return "\n".join(lines) + "\n"


def bound_columns(records) -> tuple:
    """Record fields that must be identical across worker counts (everything
    except the wall-clock column), rendered exactly as in the CSV."""
    rows = []
    for r in records:
        rows.append(",".join(r.csv_row().split(",")[:-1]))
    return tuple(rows)


def read_csv_column(path, column) -> np.ndarray:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    idx = header.index(column)
    return np.array([float(line.split(",")[idx]) for line in lines[1:]])


# ---------------------------------------------------------------------------
# harnesses
# ---------------------------------------------------------------------------


def ssc_sweep(inst, gamma_list, rho_list, k_max, out_dir, eps=0.0, t_max=1):
    """One fixed-penalty run per (gamma, rho) cell plus a no-SSC cell per rho,
    all on the identical instance and iteration budget.  Returns
    {label: records} and writes one CSV per cell under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    for rho in rho_list:
        cells = [(f"gamma{g}_rho{rho}", AlmConfig(rho0=rho, gamma=g, eps=eps,
                                                  t_max=t_max, k_max=k_max))
                 for g in gamma_list]
        cells.append(
            (f"nossc_rho{rho}",
             AlmConfig(rho0=rho, gamma=0.5, eps=eps, t_max=t_max, k_max=k_max,
                       enforce_ssc=False))
        )
        for label, cfg in cells:
            _, records = run_sdm_gs_alm(inst, cfg)
            results[label] = records
            (out_dir / f"{label}.csv").write_text(records_to_csv(records))
    return results


def speedup_harness(inst, n_list, repeats, cfg, start_method="fork"):
    """Wall-clock-per-iteration speedup table.

    Aggregation: the minimum single-worker time over the repeats against the
    mean multi-worker time.  Bound columns must agree across every run
    before any timing is reported.
    """
    if 1 not in n_list:
        raise ValueError("n_list must include 1")
    per_iters = {}
    reference = None
    for n in n_list:
        times = []
        for _ in range(repeats):
            _, records = run_parallel(inst, cfg, n, start_method=start_method)
            bounds = bound_columns(records)
            if reference is None:
                reference = bounds
            elif bounds != reference:
                raise NondeterministicTrajectory(
                    f"bound columns differ between N=1 and N={n}"
                )
            times.append(sum(r.wall_ms for r in records) / len(records))
        per_iters[n] = times
    t1 = min(per_iters[1])
    rows = []
    for n in sorted(n_list):
        agg = t1 if n == 1 else float(np.mean(per_iters[n]))
        rows.append((n, agg, 1.0 if n == 1 else t1 / agg))
    return rows


def speedup_table_tsv(rows) -> str:
    lines = ["N\twall_ms_per_iter\tspeedup"]
    lines.extend(f"{n}\t{t:.3f}\t{s:.2f}" for n, t, s in rows)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CLI entry point
# ---------------------------------------------------------------------------


def _parse_list(text, cast):
    return tuple(cast(tok) for tok in text.split(",") if tok.strip())


def build_parser():
    ap = argparse.ArgumentParser(
        prog="sdmgsalm",
        description="Dual-decomposition solver with serious-step-controlled "
                    "augmented Lagrangian iterations.",
    )
    ap.add_argument("--instance", help="JSON instance file")
    ap.add_argument("--generate", metavar="M,N[,DENSITY]",
                    help="generate a random instance instead of reading one")
    ap.add_argument("--seed", type=int, default=0, help="generator seed")
    ap.add_argument("--save-instance", help="write the instance JSON here and continue")
    ap.add_argument("--mode", choices=MODES, default="sdmgsalm")
    ap.add_argument("--rho0", type=float, default=1.0)
    ap.add_argument("--gamma", type=float, default=0.1)
    ap.add_argument("--eps", type=float, default=1e-6)
    ap.add_argument("--tmax", type=int, default=1)
    ap.add_argument("--kmax", type=int, default=100)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--rho-update", choices=("fixed", "kiwiel"), default="fixed")
    ap.add_argument("--rho-freeze", type=int, default=None,
                    help="freeze rho after this many serious steps")
    ap.add_argument("--no-ssc", action="store_true",
                    help="accept the dual update every iteration")
    ap.add_argument("--oracle", action="store_true",
                    help="also print exact bounds from the enumeration oracle")
    ap.add_argument("--out", help="output CSV path (directory for ssc-sweep)")
    ap.add_argument("--step0", type=float, default=1.0,
                    help="subgradient baseline initial step size")
    ap.add_argument("--gamma-list", default="0.125,0.5")
    ap.add_argument("--rho-list", default="50,100")
    ap.add_argument("--n-list", default="1,2,4,8")
    ap.add_argument("--repeats", type=int, default=5)
    return ap


def config_from_args(args) -> RunConfig:
    gen = None
    if args.generate:
        parts = args.generate.split(",")
        if len(parts) not in (2, 3):
            raise ValueError("--generate expects M,N or M,N,DENSITY")
        gen = (int(parts[0]), int(parts[1]),
               float(parts[2]) if len(parts) == 3 else 0.5)
    cfg = RunConfig(
        mode=args.mode,
        instance_path=args.instance,
        generate=gen,
        seed=args.seed,
        alm=AlmConfig(
            rho0=args.rho0,
            gamma=args.gamma,
            eps=args.eps,
            t_max=args.tmax,
            k_max=args.kmax,
            rho_update=args.rho_update,
            rho_freeze_after=args.rho_freeze,
            enforce_ssc=not args.no_ssc,
        ),
        threads=args.threads,
        out=args.out,
        use_oracle=args.oracle,
        step0=args.step0,
        gamma_list=_parse_list(args.gamma_list, float),
        rho_list=_parse_list(args.rho_list, float),
        n_list=_parse_list(args.n_list, int),
        repeats=args.repeats,
        save_instance=args.save_instance,
    )
    cfg.validate()
    return cfg


def _load_instance(cfg: RunConfig) -> ProblemInstance:
    if cfg.instance_path:
        inst = parse_instance(cfg.instance_path)
    else:
        m, n, density = cfg.generate
        inst = generate_instance(cfg.seed, m, n, density)
    if cfg.save_instance:
        write_instance(inst, cfg.save_instance)
    return inst


def _emit(cfg: RunConfig, csv_text, summary_lines):
    if cfg.out:
        Path(cfg.out).write_text(csv_text)
        for line in summary_lines:
            print(line)
    else:
        sys.stdout.write(csv_text)
        for line in summary_lines:
            print(line, file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        inst = _load_instance(cfg)
    except (ValueError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if cfg.mode == "oracle":
            print(json.dumps(oracle.oracle_result(inst).to_dict(), indent=1))
            return 0

        if cfg.mode == "sdmgsalm":
            if cfg.threads > 1:
                state, records = run_parallel(inst, cfg.alm, cfg.threads)
            else:
                state, records = run_sdm_gs_alm(inst, cfg.alm)
            summary = [
                f"status={state.status} k={state.k} "
                f"phi_check_best={state.phi_check_best!r} "
                f"phi_hat={records[-1].phi_hat!r} "
                f"residual={records[-1].residual_norm!r} rho={state.rho!r}"
            ]
            if cfg.use_oracle:
                summary.append(json.dumps(oracle.oracle_result(inst).to_dict()))
            _emit(cfg, records_to_csv(records), summary)
            return 0

        if cfg.mode == "subgradient":
            records = run_subgradient_baseline(
                inst, k_max=cfg.alm.k_max, step0=cfg.step0
            )
            summary = [f"best_phi={records[-1].phi_best!r}"]
            if cfg.use_oracle:
                summary.append(json.dumps(oracle.oracle_result(inst).to_dict()))
            _emit(cfg, records_to_csv(records), summary)
            return 0

        if cfg.mode == "ssc-sweep":
            results = ssc_sweep(
                inst, cfg.gamma_list, cfg.rho_list, cfg.alm.k_max, cfg.out,
                eps=cfg.alm.eps, t_max=cfg.alm.t_max,
            )
            for label, records in sorted(results.items()):
                print(f"{label}\tfinal_phi_check={records[-1].phi_check_best!r}")
            return 0

        if cfg.mode == "speedup-harness":
            rows = speedup_harness(inst, cfg.n_list, cfg.repeats, cfg.alm)
            text = speedup_table_tsv(rows)
            if cfg.out:
                Path(cfg.out).write_text(text)
            sys.stdout.write(text)
            return 0
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
