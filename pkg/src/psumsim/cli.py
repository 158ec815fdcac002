"""Command-line reporting surface.

Four subcommands share one flat row schema (CSV header and JSON keys are
identical and fixed):

* energy    -- access counts and energy per layer for one dataflow and one
               PSUM storage mode, plus a workload TOTAL row.
* sweep     -- cross product over dataflows, group sizes and PSUM widths,
               normalized against the stored-width baseline.
* simulate  -- bit-exact grouped accumulation on seeded synthetic tensors
               with calibrated scales; reports error metrics per layer.
* trace     -- engine bank-access trace for a random tile stream.

Exit codes: 0 success, 2 usage or validation error, 1 internal invariant
failure.  Output is byte-identical across reruns for identical flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from .apsq import ApsqConfig, calibrate_group_scales, error_metrics, grouped_accumulate
from .energy import DATAFLOWS, EnergyTable, SweepRow, sweep
from .rae import RaeConfig, rae_result_matches, rae_run
from .tiling import Tile, compute_psum_tiles, exact_output, plan_tiles
from .workloads import (
    DISTRIBUTIONS,
    WorkloadSpec,
    resolve_workload,
    synth_tensors,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2

ROW_KEYS = (
    "workload", "layer", "dataflow", "mode", "gs", "psum_bits",
    "n_s", "n_d", "n_m",
    "ifmap_pj", "weight_pj", "psum_pj", "ofmap_pj", "mac_pj", "total_pj",
    "ratio", "mse", "max_abs", "sqnr_db",
)


def _fmt_value(value):
    if value is None:
        return None
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def row_from_sweep(sr: SweepRow) -> dict:
    row = dict.fromkeys(ROW_KEYS)
    row.update(
        workload=sr.workload, layer=sr.layer, dataflow=sr.dataflow, mode=sr.mode,
        gs=sr.gs, psum_bits=sr.psum_bits, n_s=sr.n_s, n_d=sr.n_d, n_m=sr.n_m,
        ifmap_pj=sr.energy.ifmap_pj, weight_pj=sr.energy.weight_pj,
        psum_pj=sr.energy.psum_pj, ofmap_pj=sr.energy.ofmap_pj,
        mac_pj=sr.energy.mac_pj, total_pj=sr.energy.total_pj, ratio=sr.ratio,
    )
    return row


def format_rows(rows: Sequence[dict], fmt: str) -> str:
    if fmt == "json":
        payload = [{k: _fmt_value(r[k]) for k in ROW_KEYS} for r in rows]
        return json.dumps(payload, indent=2) + "\n"
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ROW_KEYS)
    for r in rows:
        formatted = [_fmt_value(r[k]) for k in ROW_KEYS]
        writer.writerow(["" if v is None else v for v in formatted])
    return out.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_table(path: str | None) -> EnergyTable:
    return EnergyTable.from_file(path) if path else EnergyTable()


def _int_list(text: str) -> list[int]:
    items = [s for s in (part.strip() for part in text.split(",")) if s]
    if not items:
        raise argparse.ArgumentTypeError("expected a non-empty comma-separated list")
    try:
        return [int(s) for s in items]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _dataflow_list(text: str) -> list[str]:
    items = [s for s in (part.strip() for part in text.split(",")) if s]
    if not items:
        raise argparse.ArgumentTypeError("expected a non-empty comma-separated list")
    for item in items:
        if item not in DATAFLOWS:
            raise argparse.ArgumentTypeError(f"unknown dataflow {item!r}")
    return items


def cmd_energy(args) -> int:
    workload = resolve_workload(args.workload)
    table = _load_table(args.energy_table)
    rows = sweep(
        workload, [args.dataflow], table,
        gs_values=[args.gs] if args.gs is not None else (),
        psum_bits_values=[args.psum_bits] if args.psum_bits is not None else (),
        include_baseline=args.gs is None and args.psum_bits is None,
    )
    _emit(format_rows([row_from_sweep(r) for r in rows], args.format), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    workload = resolve_workload(args.workload)
    table = _load_table(args.energy_table)
    if not args.gs and not args.psum_bits:
        raise ValueError("nothing to sweep: pass --gs and/or --psum-bits")
    rows = sweep(workload, args.dataflow, table,
                 gs_values=args.gs or (), psum_bits_values=args.psum_bits or ())
    _emit(format_rows([row_from_sweep(r) for r in rows], args.format), args.output)
    return EXIT_OK


def _child_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _layer_tiles(seed: int, entry, par, distribution: str) -> list[Tile]:
    ifmap, weights = synth_tensors(seed, entry.shape, par, distribution)
    plan = plan_tiles(entry.shape, par)
    return compute_psum_tiles(ifmap, weights, plan)


def cmd_simulate(args) -> int:
    workload = resolve_workload(args.workload)
    if args.calib_samples < 1:
        raise ValueError("--calib-samples must be >= 1")
    par = workload.parallelism
    rows = []
    mismatches = 0
    for li, entry in enumerate(workload.layers):
        streams = [
            _layer_tiles(_child_seed(args.seed, li, 1 + s), entry, par, args.distribution)
            for s in range(args.calib_samples)
        ]
        scales = calibrate_group_scales(streams, args.k, args.gs)
        tiles = _layer_tiles(_child_seed(args.seed, li, 0), entry, par, args.distribution)
        cfg = ApsqConfig(k=args.k, gs=args.gs, scales=scales)
        result = grouped_accumulate(tiles, cfg)
        metrics = error_metrics(result.values, exact_output(tiles))
        if args.rae_check:
            rae_res = rae_run(tiles, RaeConfig(gs=args.gs, scales=scales, k=args.k))
            if not rae_result_matches(rae_res, result):
                mismatches += 1
                print(f"rae mismatch on layer {entry.label}", file=sys.stderr)
        row = dict.fromkeys(ROW_KEYS)
        row.update(
            workload=workload.name, layer=entry.label, mode="apsq",
            gs=args.gs, psum_bits=args.k,
            mse=metrics.mse, max_abs=metrics.max_abs, sqnr_db=metrics.sqnr_db,
        )
        rows.append(row)
    _emit(format_rows(rows, args.format), args.output)
    return EXIT_INTERNAL if mismatches else EXIT_OK


def cmd_trace(args) -> int:
    rng = np.random.default_rng(args.seed)
    lo, hi = -(1 << (args.k + 1)), (1 << (args.k + 1))
    tiles = [
        Tile(values=rng.integers(lo, hi, size=(2, 2), dtype=np.int64), index=i)
        for i in range(args.n_tiles)
    ]
    streams = [tiles]
    scales = calibrate_group_scales(streams, args.k, args.gs)
    result = rae_run(tiles, RaeConfig(gs=args.gs, scales=scales, k=args.k))
    _emit(result.trace.to_csv(), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psumsim",
        description="Partial-sum quantization simulator and dataflow energy model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", help="write the report here instead of stdout")

    p_energy = sub.add_parser("energy", help="access counts and energy per layer")
    p_energy.add_argument("--workload", required=True,
                          help="builtin name or workload .json path")
    p_energy.add_argument("--dataflow", required=True, choices=DATAFLOWS)
    mode = p_energy.add_mutually_exclusive_group()
    mode.add_argument("--psum-bits", type=int, help="uniform stored PSUM width")
    mode.add_argument("--gs", type=int, help="grouped INT8 accumulation, group size")
    p_energy.add_argument("--energy-table", help="key = value override file")
    add_common(p_energy)
    p_energy.set_defaults(func=cmd_energy)

    p_sweep = sub.add_parser("sweep", help="dataflow x mode cross product")
    p_sweep.add_argument("--workload", required=True)
    p_sweep.add_argument("--dataflow", type=_dataflow_list, default=list(DATAFLOWS),
                         help="comma-separated subset of is,ws")
    p_sweep.add_argument("--gs", type=_int_list, default=None,
                         help="comma-separated group sizes")
    p_sweep.add_argument("--psum-bits", type=_int_list, default=None,
                         help="comma-separated stored PSUM widths")
    p_sweep.add_argument("--energy-table", help="key = value override file")
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_sim = sub.add_parser("simulate", help="bit-exact accumulation with error metrics")
    p_sim.add_argument("--workload", required=True)
    p_sim.add_argument("--gs", type=int, default=1)
    p_sim.add_argument("--k", type=int, default=8, help="PSUM quantizer bit width")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--calib-samples", type=int, default=2)
    p_sim.add_argument("--distribution", choices=DISTRIBUTIONS, default="gaussian")
    p_sim.add_argument("--rae-check", action="store_true",
                       help="also run the engine model and require bit-equality")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_trace = sub.add_parser("trace", help="engine bank-access trace (CSV)")
    p_trace.add_argument("--gs", type=int, required=True)
    p_trace.add_argument("--n-tiles", type=int, default=8)
    p_trace.add_argument("--k", type=int, default=8)
    p_trace.add_argument("--seed", type=int, default=0)
    p_trace.add_argument("--output")
    p_trace.set_defaults(func=cmd_trace, format="csv")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
