#!/usr/bin/env python3
"""Smoke test for the pyeccsim extension module.

Builds nothing itself: compile the extension first with

    cargo build -p eccsim-python --release

then run

    python3 python/smoke_test.py

The script copies the cdylib next to a temp dir under the importable name
and exercises the main types and operations.
"""

import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_pyeccsim():
    candidates = [
        ROOT / "target" / "release" / "libpyeccsim.so",
        ROOT / "target" / "debug" / "libpyeccsim.so",
    ]
    for built in candidates:
        if built.exists():
            tmp = tempfile.mkdtemp(prefix="pyeccsim-")
            shutil.copy(built, pathlib.Path(tmp) / "pyeccsim.so")
            sys.path.insert(0, tmp)
            import pyeccsim  # noqa: PLC0415

            return pyeccsim
    sys.exit("build the extension first: cargo build -p eccsim-python --release")


def main():
    ec = import_pyeccsim()
    checks = 0

    def ok(cond, what):
        nonlocal checks
        assert cond, what
        checks += 1
        print(f"ok {checks:2d} - {what}")

    g = ec.Geometry()
    ok(g.baseline_pages == 128, "desk geometry has 128 baseline pages")
    ok(g.slice_count == 72, "9 chips x 8 banks = 72 bank slices")

    wrap = ec.Region("inter-wrap")
    ok(wrap.capacity_pages == 144, "inter-wrap full boundary gains 12.5%")
    ok(wrap.ignored_chip(3) == 5, "wrap slot 3 skips chip 5")
    ok(wrap.ignored_chip(8) == 0, "the extra-page slot skips chip 0")

    packed = ec.Region("packed")
    extra_start = 128 * 64
    footprint = json.loads(packed.locate_json(extra_start + 9))
    lanes = footprint["lanes"]
    ok(
        all(c["slice"]["chip"] == 8 and c["slice"]["bank"] == 1 for c in lanes),
        "packed extra line 9 lives on chip 8, bank 1",
    )
    ok([c["col"] for c in lanes] == list(range(8, 16)), "columns 8..15")
    ok(
        list(packed.translate_extra(extra_start)) == list(range(8)),
        "first extra line maps to baseline lines 0..7",
    )

    ok(packed.op_count(0, "read") == 1, "packed regular read is one op")
    ok(packed.op_count(0, "write") == 2, "packed regular write stages a read")
    ok(packed.op_count(extra_start, "write") == 16, "packed extra write is 8 RMW pairs")
    parity = ec.Region("parity")
    ok(parity.op_count(parity.capacity_lines - 1, "read") == 9, "parity extra read is 9 ops")
    ok(parity.extra_pages == 13, "desk parity exposes 13 extra pages")

    text = wrap.translate_text(64)
    ok(text.splitlines()[0].startswith("line 0x40 mode inter-wrap"), "translate text header")

    trace_a = ec.gen_trace(kind="zipf", ops=500, pages=64, seed=9)
    trace_b = ec.gen_trace(kind="zipf", ops=500, pages=64, seed=9)
    ok(trace_a == trace_b and len(trace_a) > 0, "trace generation is seed-deterministic")
    mpki, intensive = ec.classify_trace(trace_a)
    ok(intensive and mpki > 10.0, f"generated trace is memory-intensive (MPKI {mpki:.1f})")
    ok(not ec.classify_trace("99 R 0x0\n" * 10)[1], "MPKI 10 is not intensive (strict)")

    timing = json.loads(ec.ddr3_timing_json())
    ok(timing["tck_ns"] == 1.5 and timing["bridge_delay"] == 1, "DDR3-1333 timing defaults")

    config = """
[mode]
layout = "inter-wrap"

[cpu]
cores = 2
instruction_budget = 2000

[workload]
kind = "uniform"
ops = 1000
"""
    report_a = ec.run_toml(config)
    report_b = ec.run_toml(config)
    ok(report_a == report_b, "reports are byte-identical across runs")
    report = json.loads(report_a)
    ok(report["config"]["capacity_pages"] == 144, "report echoes the capacity")
    ok(report["metrics"]["device_ops_per_request"] == 1.0, "inter-wrap expands nothing")
    ok(report["metrics"]["logical_requests"] > 0, "simulation processed requests")

    print(f"\nsmoke test passed: {checks} checks")


if __name__ == "__main__":
    main()
