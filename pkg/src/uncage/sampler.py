"""The parallel-decoding loop.

Each step queries the model, samples a token for every masked position, ranks
the masked positions according to the configured strategy and commits the
top ``k_t`` of them. Random draws come from per-step substreams keyed on
``(seed, stream, step)``; switching guidance on or off therefore never shifts
the token-sampling or Gumbel draws of any step.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import ContractViolation
from .guidance import GuidanceConfig, PairIndex, guidance_field
from .halton import halton_order
from .prompt import PromptSpec
from .schedule import ScheduleConfig, gumbel_temperature, unmask_counts
from .scoring import GridState, combine_scores, confidence_scores, gumbel_noise, select_topk

TOKEN_STREAM = 0
GUMBEL_STREAM = 1

TRACE_HEADER = ["step", "row", "col", "token_id", "f_c", "f_g", "f_a", "f"]


class ModelInterface(Protocol):
    height: int
    width: int

    def query(self, spec: PromptSpec, state: GridState, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(logits (H, W, V), raw attention (slices, S, H, W))``."""
        ...


class Strategy(enum.Enum):
    RANDOM = "random"
    CONFIDENCE = "confidence"
    BASELINE = "baseline"
    HALTON = "halton"
    UNCAGE = "uncage"


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy = Strategy.BASELINE
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    seed: int = 0
    token_temperature: float = 1.0
    # term ablations, honoured by the uncage strategy only
    use_confidence: bool = True
    use_gumbel: bool = True

    def __post_init__(self):
        if not isinstance(self.strategy, Strategy):
            object.__setattr__(self, "strategy", Strategy(self.strategy))


def substream(seed: int, stream: int, step: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed % 2**64, spawn_key=(stream, step)))


def sample_tokens(logits: np.ndarray, tau: float, rng: np.random.Generator, state: GridState | None = None) -> np.ndarray:
    """Categorical draw from ``softmax(logits / tau)`` per position; ``tau <= 0``
    switches to argmax. Committed positions keep their token."""
    H, W, V = logits.shape
    u = rng.random((H, W))
    if tau <= 0:
        ids = logits.argmax(axis=2)
    else:
        z = logits / tau
        z = z - z.max(axis=2, keepdims=True)
        cdf = np.cumsum(np.exp(z), axis=2)
        cdf /= cdf[..., -1:]
        ids = np.minimum((cdf < u[..., None]).sum(axis=2), V - 1)
    ids = ids.astype(np.int64)
    if state is not None:
        ids = np.where(state.masked, ids, state.tokens)
    return ids


def _summary(f: np.ndarray | None, masked: np.ndarray) -> tuple[float, float, float]:
    if f is None or not masked.any():
        return (float("nan"),) * 3
    v = f[masked]
    return float(v.min()), float(v.max()), float(v.mean())


@dataclass
class StepRecord:
    step: int
    positions: np.ndarray  # (k, 2)
    tokens: np.ndarray  # (k,)
    f_c: np.ndarray  # (k,) values at the unmasked positions, nan when not computed
    f_g: np.ndarray
    f_a: np.ndarray
    f: np.ndarray
    summary: dict[str, tuple[float, float, float]]
    reads_logits_for_order: bool
    gumbel_draws: int
    guided: bool
    fields: dict[str, np.ndarray] | None = None


@dataclass
class RunTrace:
    records: list[StepRecord] = field(default_factory=list)

    def rows(self):
        for rec in self.records:
            for i in range(rec.positions.shape[0]):
                yield [
                    rec.step,
                    int(rec.positions[i, 0]),
                    int(rec.positions[i, 1]),
                    int(rec.tokens[i]),
                    float(rec.f_c[i]),
                    float(rec.f_g[i]),
                    float(rec.f_a[i]),
                    float(rec.f[i]),
                ]

    def to_csv(self, fh=None) -> str | None:
        """Write one row per unmasking event; returns the text when ``fh`` is None."""
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in self.rows():
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
        return out.getvalue() if fh is None else None

    def equals(self, other: "RunTrace") -> bool:
        if len(self.records) != len(other.records):
            return False
        for a, b in zip(self.records, other.records):
            if a.step != b.step or not np.array_equal(a.positions, b.positions):
                return False
            if not np.array_equal(a.tokens, b.tokens):
                return False
            for name in ("f_c", "f_g", "f_a", "f"):
                if not np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True):
                    return False
        return True


def read_trace_csv(fh) -> list[dict]:
    rows = []
    for r in csv.DictReader(fh):
        rows.append({
            "step": int(r["step"]), "row": int(r["row"]), "col": int(r["col"]),
            "token_id": int(r["token_id"]),
            **{k: float(r[k]) for k in ("f_c", "f_g", "f_a", "f")},
        })
    return rows


def grid_from_trace(rows: list[dict], height: int, width: int) -> np.ndarray:
    grid = np.zeros((height, width), dtype=np.int64)
    seen = np.zeros((height, width), dtype=bool)
    for r in rows:
        if seen[r["row"], r["col"]]:
            raise ContractViolation(f"position ({r['row']}, {r['col']}) unmasked twice in trace")
        seen[r["row"], r["col"]] = True
        grid[r["row"], r["col"]] = r["token_id"]
    return grid


class Sampler:
    """Step-by-step executor; :func:`run` drives it to completion."""

    def __init__(
        self,
        model: ModelInterface,
        spec: PromptSpec,
        sched: ScheduleConfig,
        strat: StrategyConfig,
        state: GridState | None = None,
        keep_fields: bool = False,
    ):
        H, W = model.height, model.width
        if sched.total_tokens != H * W:
            raise ContractViolation(f"schedule covers {sched.total_tokens} tokens, grid has {H * W}")
        self.model, self.spec, self.sched, self.strat = model, spec, sched, strat
        self.state = state.copy() if state is not None else GridState.empty(H, W)
        self.counts = unmask_counts(sched)
        self.trace = RunTrace()
        self.keep_fields = keep_fields
        self._pairs = PairIndex.from_spec(spec)
        self._halton = halton_order(H, W).order if strat.strategy is Strategy.HALTON else None

    @property
    def done(self) -> bool:
        return self.state.step >= self.sched.total_steps

    def _guidance_active(self, t: int) -> bool:
        g = self.strat.guidance
        if self.strat.strategy is not Strategy.UNCAGE or g.w_a == 0:
            return False
        # with both baseline terms ablated the guidance term is all that is left
        if not (self.strat.use_confidence or self.strat.use_gumbel):
            return True
        return t <= g.guidance_steps

    def step(self) -> StepRecord:
        if self.done:
            raise ContractViolation("run already finished")
        st, strat, state = self.strat.strategy, self.strat, self.state
        t = state.step + 1
        H, W = state.shape
        k = min(self.counts[t - 1], state.n_masked)
        logits, raw = self.model.query(self.spec, state, t)
        if logits.ndim != 3 or logits.shape[:2] != (H, W):
            raise ContractViolation(f"model returned logits {logits.shape} for a {H}x{W} grid")
        sampled = sample_tokens(logits, strat.token_temperature, substream(strat.seed, TOKEN_STREAM, t), state)

        f_c = f_g = f_a = None
        if st in (Strategy.CONFIDENCE, Strategy.BASELINE) or (st is Strategy.UNCAGE and strat.use_confidence):
            f_c = confidence_scores(logits, sampled, state)
        if st in (Strategy.RANDOM, Strategy.BASELINE) or (st is Strategy.UNCAGE and strat.use_gumbel):
            tau = gumbel_temperature(t, self.sched)
            f_g = gumbel_noise(H, W, tau, substream(strat.seed, GUMBEL_STREAM, t))
        guided = self._guidance_active(t)
        if guided:
            f_a = guidance_field(raw, self.spec, strat.guidance, t, self._pairs)

        if st is Strategy.HALTON:
            order = self._halton
            still = state.masked[order[:, 0], order[:, 1]]
            positions = order[still][:k]
            f = None
        else:
            # _guidance_active already applied the window; keep combine_scores from re-filtering
            window = self.sched.total_steps if guided else strat.guidance.guidance_steps
            f = combine_scores(f_c, f_g, f_a, strat.guidance.w_a, t, window)
            f = np.where(state.masked, f, -np.inf)
            positions = select_topk(f, state, k)

        masked_before = state.masked.copy()
        state.commit(positions, sampled)
        state.step = t

        def at(field_):
            if field_ is None:
                return np.full(positions.shape[0], np.nan)
            return field_[positions[:, 0], positions[:, 1]]

        rec = StepRecord(
            step=t,
            positions=positions,
            tokens=sampled[positions[:, 0], positions[:, 1]],
            f_c=at(f_c), f_g=at(f_g), f_a=at(f_a), f=at(f),
            summary={name: _summary(v, masked_before) for name, v in (("f_c", f_c), ("f_g", f_g), ("f_a", f_a), ("f", f))},
            reads_logits_for_order=f_c is not None,
            gumbel_draws=0 if f_g is None else H * W,
            guided=guided,
            fields={"f_c": f_c, "f_g": f_g, "f_a": f_a, "f": f} if self.keep_fields else None,
        )
        self.trace.records.append(rec)
        return rec

    def run(self) -> tuple[GridState, RunTrace]:
        while not self.done:
            self.step()
        return self.state, self.trace


def run(model: ModelInterface, spec: PromptSpec, sched: ScheduleConfig, strat: StrategyConfig, keep_fields: bool = False) -> tuple[GridState, RunTrace]:
    return Sampler(model, spec, sched, strat, keep_fields=keep_fields).run()
