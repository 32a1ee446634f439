"""Run matrices over synthetic scenes, CSV tables and SVG renderings."""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractViolation
from .guidance import GuidanceConfig, Mode
from .metrics import THETA_MIN, THETA_MIX, FidelityReport, evaluate
from .prompt import PromptSpec
from .sampler import Strategy, StrategyConfig, run
from .schedule import ScheduleConfig
from .synthmgt import SceneSpec, SyntheticMGT, gen_scene, load_scene, token_entity, wrong_token

RUNS_HEADER = [
    "run_id", "seed", "strategy", "wa", "guidance_steps", "mode", "blur",
    "lambda", "missing_rate", "leakage", "mixture", "steps", "grid",
]
SUMMARY_HEADER = [
    "cell", "strategy", "wa", "guidance_steps", "mode", "blur", "n_runs",
    "missing_rate", "missing_rate_lo", "missing_rate_hi",
    "leakage", "leakage_lo", "leakage_hi",
    "mixture", "mixture_lo", "mixture_hi",
    "theta_min", "theta_mix",
]
SEED_ENV = "UNCAGE_SEED"
NOT_APPLICABLE = "-"

_LIST_FIELDS = ("strategies", "wa", "guidance_steps", "mode", "blur")
_ALIASES = {"strategy": "strategies", "modes": "mode", "w_a": "wa", "lambda": "overlap", "grid": "grid_size"}


def _as_tuple(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


@dataclass(frozen=True)
class BenchConfig:
    # scene
    height: int = 16
    width: int = 16
    n_objects: int = 2
    overlap: float = 0.7
    spacing: float = 0.25
    radius: float = 3.0
    attributes: bool = True
    attn_sigma: float = 3.0
    margin: float = 2.0
    ambiguity: float = 1.5
    noise_sigma: float | None = None  # None -> margin / 2
    anchor_radius: int = 1
    anchor_weight: float = 2.0
    scene_file: str | None = None
    # schedule
    steps: int = 16
    temp_start: float = 1.0
    temp_end: float = 0.01
    token_temperature: float = 1.0
    # matrix axes
    strategies: tuple[str, ...] = ("baseline", "uncage")
    wa: tuple[float, ...] = (3.0,)
    guidance_steps: tuple[int, ...] = (4,)
    mode: tuple[str, ...] = ("contrastive",)
    blur: tuple[bool, ...] = (True,)
    sigma: float = 2.0
    # metric thresholds
    theta_min: float = THETA_MIN
    theta_mix: float = THETA_MIX
    # seeds and output
    seeds: int = 200
    base_seed: int = 0
    bootstrap: int = 1000
    out: str = "results"
    runs_file: str = "runs.csv"
    summary_file: str = "summary.csv"

    def __post_init__(self):
        for name in _LIST_FIELDS:
            object.__setattr__(self, name, _as_tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"invalid config field '{name}': {why}")

        if not self.strategies:
            bad("strategies", "must be non-empty")
        for s in self.strategies:
            try:
                Strategy(s)
            except ValueError:
                bad("strategies", f"unknown strategy {s!r}")
        if self.seeds < 1:
            bad("seeds", "need at least one seed")
        if self.height < 1 or self.width < 1:
            bad("height/width", "grid must be at least 1x1")
        if self.n_objects < 1:
            bad("n_objects", "need at least one object")
        if not 0.0 <= self.overlap <= 1.0:
            bad("overlap", "must lie in [0, 1]")
        if self.steps < 1:
            bad("steps", "must be >= 1")
        for name in ("theta_min", "theta_mix"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                bad(name, "must lie in [0, 1]")
        if self.bootstrap < 1:
            bad("bootstrap", "must be >= 1")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            bad("noise_sigma", "must be >= 0")
        for name in ("wa", "guidance_steps", "mode", "blur"):
            if not getattr(self, name):
                bad(name, "must be non-empty")
        for m in self.mode:
            try:
                Mode.parse(m)
            except ValueError:
                bad("mode", f"unknown mode {m!r}")
        for g in self.guidance_steps:
            if int(g) != g or g < 0:
                bad("guidance_steps", f"expected non-negative integers, got {g!r}")
        for b in self.blur:
            if not isinstance(b, bool):
                bad("blur", f"expected true/false, got {b!r}")
        try:
            ScheduleConfig(self.steps, self.height * self.width, self.temp_start, self.temp_end)
        except ValueError as exc:
            bad("steps/temp_start/temp_end", str(exc))
        try:
            GuidanceConfig(self.wa[0], int(self.guidance_steps[0]), self.sigma, True, Mode.CONTRASTIVE)
        except ValueError as exc:
            bad("sigma", str(exc))

    @property
    def effective_noise(self) -> float:
        return self.margin / 2 if self.noise_sigma is None else self.noise_sigma

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BenchConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        kw: dict[str, Any] = {}
        for key, value in d.items():
            name = _ALIASES.get(key, key)
            if name == "grid_size":
                size = _as_tuple(value)
                kw["height"], kw["width"] = (size[0], size[-1])
                continue
            if name == "seeds" and isinstance(value, dict):
                kw["seeds"] = value.get("count", cls.seeds)
                kw["base_seed"] = value.get("base", value.get("base_seed", cls.base_seed))
                continue
            if name not in known:
                raise ConfigError(f"invalid config field '{key}': unknown field")
            kw[name] = value
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "BenchConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data)

    def with_env(self, environ: dict[str, str] | None = None) -> "BenchConfig":
        """Apply the ``UNCAGE_SEED`` override, if present."""
        env = os.environ if environ is None else environ
        raw = env.get(SEED_ENV)
        if raw is None or raw == "":
            return self
        try:
            seed = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc
        return dataclasses.replace(self, base_seed=seed)


@dataclass(frozen=True)
class Cell:
    """One point of the run matrix (everything except the seed)."""

    strategy: str
    wa: float
    guidance_steps: int
    mode: str
    blur: bool | None

    @property
    def guided(self) -> bool:
        return self.strategy == Strategy.UNCAGE.value

    def row_fields(self) -> list:
        if not self.guided:
            return [self.strategy, 0.0, 0, NOT_APPLICABLE, NOT_APPLICABLE]
        return [self.strategy, float(self.wa), int(self.guidance_steps), self.mode, "on" if self.blur else "off"]


def expand_matrix(cfg: BenchConfig) -> list[Cell]:
    """Cartesian product of the list-valued axes. Guidance axes only apply to
    the guided strategy, so other strategies contribute one cell each."""
    cells: list[Cell] = []
    for s in dict.fromkeys(cfg.strategies):
        if s == Strategy.UNCAGE.value:
            for wa, tg, mode, blur in itertools.product(cfg.wa, cfg.guidance_steps, cfg.mode, cfg.blur):
                cells.append(Cell(s, float(wa), int(tg), Mode.parse(mode).value, bool(blur)))
        else:
            cells.append(Cell(s, 0.0, 0, NOT_APPLICABLE, None))
    return cells


@dataclass(frozen=True)
class RunSpec:
    run_id: int
    cell_index: int
    cell: Cell
    seed: int


@dataclass(frozen=True)
class RunResult:
    spec: RunSpec
    report: FidelityReport | None
    error: str | None = None

    def row(self, cfg: BenchConfig) -> list:
        r = self.report
        return [
            self.spec.run_id, self.spec.seed, *self.spec.cell.row_fields(), cfg.overlap,
            r.missing_rate, r.attribute_leakage, r.object_mixture, cfg.steps, f"{cfg.height}x{cfg.width}",
        ]


def plan_runs(cfg: BenchConfig) -> list[RunSpec]:
    runs = []
    for ci, cell in enumerate(expand_matrix(cfg)):
        for i in range(cfg.seeds):
            runs.append(RunSpec(len(runs), ci, cell, cfg.base_seed + i))
    return runs


def make_scene(cfg: BenchConfig, seed: int) -> tuple[SceneSpec, PromptSpec]:
    if cfg.scene_file:
        return load_scene(cfg.scene_file)
    rng = np.random.default_rng(seed)
    return gen_scene(
        rng, cfg.height, cfg.width, cfg.n_objects, cfg.overlap, cfg.spacing,
        radius=cfg.radius, attributes=cfg.attributes, attn_sigma=cfg.attn_sigma,
        margin=cfg.margin, ambiguity=cfg.ambiguity, noise_sigma=cfg.effective_noise,
        anchor_radius=cfg.anchor_radius, anchor_weight=cfg.anchor_weight,
    )


def strategy_config(cfg: BenchConfig, cell: Cell, seed: int) -> StrategyConfig:
    guidance = GuidanceConfig(
        w_a=cell.wa if cell.guided else 0.0,
        guidance_steps=cell.guidance_steps if cell.guided else 0,
        sigma=cfg.sigma,
        blur_enabled=bool(cell.blur) if cell.guided else True,
        mode=Mode.parse(cell.mode) if cell.guided else Mode.CONTRASTIVE,
    )
    return StrategyConfig(Strategy(cell.strategy), guidance, seed=seed, token_temperature=cfg.token_temperature)


def simulate(cfg: BenchConfig, cell: Cell, seed: int, keep_fields: bool = False):
    """Scene, prompt, final state and trace for one run."""
    scene, prompt = make_scene(cfg, seed)
    model = SyntheticMGT(scene, prompt)
    sched = ScheduleConfig(cfg.steps, scene.height * scene.width, cfg.temp_start, cfg.temp_end)
    state, trace = run(model, prompt, sched, strategy_config(cfg, cell, seed), keep_fields=keep_fields)
    return scene, prompt, state, trace


def execute(cfg: BenchConfig, spec: RunSpec) -> RunResult:
    try:
        scene, _, state, _ = simulate(cfg, spec.cell, spec.seed)
        return RunResult(spec, evaluate(state.tokens, scene, cfg.theta_min, cfg.theta_mix))
    except Exception as exc:  # reported per run, the batch carries on
        return RunResult(spec, None, f"{type(exc).__name__}: {exc}")


def _execute_packed(args):
    return execute(*args)


def bootstrap_ci(values: Sequence[float], n_resamples: int, rng: np.random.Generator, level: float = 0.95) -> tuple[float, float]:
    """Percentile interval of the mean."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return (float("nan"), float("nan"))
    idx = rng.integers(0, x.size, size=(n_resamples, x.size))
    means = x[idx].mean(axis=1)
    alpha = (1.0 - level) / 2
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


@dataclass
class BenchResult:
    config: BenchConfig
    results: list[RunResult]
    summary: list[list] = field(default_factory=list)

    @property
    def errors(self) -> list[RunResult]:
        return [r for r in self.results if r.error is not None]

    @property
    def ok(self) -> bool:
        return not self.errors

    def rows(self) -> list[list]:
        return [r.row(self.config) for r in self.results if r.report is not None]

    def cell_values(self, metric: str) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for r in self.results:
            if r.report is not None:
                out.setdefault(r.spec.cell_index, []).append(_metric(r.report, metric))
        return out


def _metric(report: FidelityReport, name: str) -> float:
    return {
        "missing_rate": report.missing_rate,
        "leakage": report.attribute_leakage,
        "mixture": report.object_mixture,
    }[name]


def summarize(cfg: BenchConfig, results: Sequence[RunResult]) -> list[list]:
    cells = expand_matrix(cfg)
    by_cell: dict[int, list[FidelityReport]] = {i: [] for i in range(len(cells))}
    for r in results:
        if r.report is not None:
            by_cell[r.spec.cell_index].append(r.report)
    rows = []
    for ci, cell in enumerate(cells):
        reports = by_cell[ci]
        # fixed per-cell stream so intervals are reproducible
        rng = np.random.default_rng(np.random.SeedSequence(cfg.base_seed % 2**64, spawn_key=(ci,)))
        row: list = [ci, *cell.row_fields(), len(reports)]
        for metric in ("missing_rate", "leakage", "mixture"):
            vals = [_metric(rep, metric) for rep in reports]
            mean = float(np.mean(vals)) if vals else float("nan")
            lo, hi = bootstrap_ci(vals, cfg.bootstrap, rng)
            row += [mean, lo, hi]
        row += [cfg.theta_min, cfg.theta_mix]
        rows.append(row)
    return rows


def run_benchmark(cfg: BenchConfig, jobs: int = 1) -> BenchResult:
    runs = plan_runs(cfg)
    if jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_execute_packed, [(cfg, r) for r in runs], chunksize=max(1, len(runs) // (4 * jobs))))
    else:
        results = [execute(cfg, r) for r in runs]
    results.sort(key=lambda r: r.spec.run_id)
    return BenchResult(cfg, results, summarize(cfg, results))


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_outputs(result: BenchResult, out_dir: str | Path | None = None) -> tuple[Path, Path]:
    cfg = result.config
    out = Path(out_dir if out_dir is not None else cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    runs_path, summary_path = out / cfg.runs_file, out / cfg.summary_file
    write_csv(runs_path, RUNS_HEADER, result.rows())
    write_csv(summary_path, SUMMARY_HEADER, result.summary)
    return runs_path, summary_path


def read_runs_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- rendering -------------------------------------------------------------

def _hue(entity: int, n: int) -> float:
    return (360.0 * entity / max(n, 1) + 10.0) % 360.0


def token_color(token: int, n_entities: int) -> str:
    if token <= 0:
        return "#f4f4f4"
    e = token_entity(int(token))
    light = 38 if token == wrong_token(e) else 62
    return f"hsl({_hue(e, n_entities):.1f},70%,{light}%)"


def render_grid_svg(grid: np.ndarray, scene: SceneSpec, path: str | Path | None = None, cell: int = 20) -> str:
    """Coloured cells per token with ground-truth region outlines.

    Hue encodes the entity, lightness the attribute variant (darker means the
    wrong attribute). Returns the SVG text and writes it when ``path`` is given.
    """
    from .synthmgt import owner_map

    grid = np.asarray(grid)
    H, W = scene.height, scene.width
    if grid.shape != (H, W):
        raise ContractViolation(f"grid {grid.shape} does not match scene {H}x{W}")
    n = len(scene.entities)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * cell}" height="{H * cell}" '
        f'viewBox="0 0 {W * cell} {H * cell}">'
    ]
    for r in range(H):
        for c in range(W):
            tok = int(grid[r, c])
            parts.append(
                f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" '
                f'fill="{token_color(tok, n)}" data-token="{tok}"/>'
            )
    owner = owner_map(scene)
    for r in range(H):
        for c in range(W):
            e = owner[r, c]
            if e < 0:
                continue
            stroke = f"hsl({_hue(e, n):.1f},80%,25%)"
            x0, y0, x1, y1 = c * cell, r * cell, (c + 1) * cell, (r + 1) * cell
            edges = (
                (r == 0 or owner[r - 1, c] != e, (x0, y0, x1, y0)),
                (r == H - 1 or owner[r + 1, c] != e, (x0, y1, x1, y1)),
                (c == 0 or owner[r, c - 1] != e, (x0, y0, x0, y1)),
                (c == W - 1 or owner[r, c + 1] != e, (x1, y0, x1, y1)),
            )
            for needed, (a, b, cc, d) in edges:
                if needed:
                    parts.append(
                        f'<line x1="{a}" y1="{b}" x2="{cc}" y2="{d}" stroke="{stroke}" '
                        f'stroke-width="2" data-entity="{e}"/>'
                    )
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return text
