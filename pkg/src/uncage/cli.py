"""Command line entry point: ``uncage run | render | demo``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import ConfigError, ContractViolation, PlacementError
from .kernels import BACKEND
from .metrics import evaluate, mixed_cells
from .sampler import Strategy, grid_from_trace, read_trace_csv
from .synthmgt import load_scene

log = logging.getLogger("uncage")


def _cmd_run(args) -> int:
    cfg = bench.BenchConfig.load(args.config).with_env()
    if args.scene_file:
        cfg = dataclasses.replace(cfg, scene_file=args.scene_file)
    out = args.out if args.out is not None else cfg.out
    n_cells = len(bench.expand_matrix(cfg))
    log.info("%d cells x %d seeds, backend=%s, jobs=%d", n_cells, cfg.seeds, BACKEND, args.jobs)
    result = bench.run_benchmark(cfg, jobs=args.jobs)
    runs_path, summary_path = bench.write_outputs(result, out)
    print(f"wrote {runs_path} and {summary_path}")
    if not result.ok:
        for r in result.errors:
            print(f"run {r.spec.run_id} (seed {r.spec.seed}, {r.spec.cell.strategy}) failed: {r.error}", file=sys.stderr)
        return 1
    return 0


def _cmd_render(args) -> int:
    scene, _ = load_scene(args.scene)
    with open(args.trace, newline="") as fh:
        rows = read_trace_csv(fh)
    grid = grid_from_trace(rows, scene.height, scene.width)
    bench.render_grid_svg(grid, scene, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_demo(args) -> int:
    cfg = bench.BenchConfig(strategies=(args.strategy,)).with_env()
    seed = args.seed if args.seed is not None else cfg.base_seed
    if args.scene_file:
        cfg = dataclasses.replace(cfg, scene_file=args.scene_file)
    cell = bench.expand_matrix(cfg)[0]
    scene, prompt, state, trace = bench.simulate(cfg, cell, seed)
    print(f"strategy={args.strategy} seed={seed} grid={scene.height}x{scene.width} steps={cfg.steps} backend={BACKEND}")
    print("prompt: " + ", ".join(f"{' '.join(reversed(labels))}" for labels in _entity_labels(prompt)))
    print(f"{'step':>4} {'k':>4} {'guided':>6} {'f_a max':>8} {'f mean':>9}")
    for rec in trace.records:
        fa = rec.summary["f_a"][1]
        fm = rec.summary["f"][2]
        print(f"{rec.step:>4} {len(rec.tokens):>4} {('yes' if rec.guided else 'no'):>6} "
              f"{fa:>8.3f} {fm:>9.3f}")
    report = evaluate(state.tokens, scene)
    print(f"missing={report.missing_rate:.3f} leakage={report.attribute_leakage:.3f} mixture={report.object_mixture:.3f}")
    print(_ascii_grid(state.tokens, mixed_cells(state.tokens, scene)))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.csv").write_text(trace.to_csv())
        scene.save(out / "scene.json", prompt)
        bench.render_grid_svg(state.tokens, scene, out / "grid.svg")
        print(f"wrote trace.csv, scene.json and grid.svg to {out}")
    return 0


def _entity_labels(prompt):
    for oid in prompt.objects:
        labels = [prompt.subject(oid).label] + [prompt.subject(a).label for a in prompt.attributes_of(oid)]
        yield labels


def _ascii_grid(grid: np.ndarray, mixed: np.ndarray) -> str:
    # '.' background, entity letter (upper = own attribute), '*' marks mixed cells
    lines = []
    for r in range(grid.shape[0]):
        row = []
        for c in range(grid.shape[1]):
            tok = int(grid[r, c])
            if mixed[r, c]:
                row.append("*")
            elif tok == 0:
                row.append(".")
            else:
                e = (tok - 1) // 2
                ch = chr(ord("a") + e % 26)
                row.append(ch.upper() if tok % 2 == 1 else ch)
        lines.append("".join(row))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uncage", description="Guided unmasking order on synthetic scenes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a benchmark config")
    r.add_argument("--config", required=True)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default=None)
    r.add_argument("--scene-file", default=None, help="replay one fixed scene for every run")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("render", help="draw a trace as SVG")
    v.add_argument("--trace", required=True)
    v.add_argument("--scene", required=True)
    v.add_argument("--out", required=True)
    v.set_defaults(func=_cmd_render)

    d = sub.add_parser("demo", help="one annotated run")
    d.add_argument("--strategy", default="uncage", choices=[s.value for s in Strategy])
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--scene-file", default=None)
    d.add_argument("--out", default=None)
    d.set_defaults(func=_cmd_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, ContractViolation, PlacementError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
