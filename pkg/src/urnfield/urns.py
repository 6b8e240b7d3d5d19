"""Discrete-time urn simulators.

Three mechanisms share the same reinforcement machinery:

* the interacting urn mechanism: ``d`` urns of black/red balls, each urn
  drawing once per step either from the pooled counts (probability ``p``)
  or from itself (probability ``1-p``), with color probability proportional
  to ``W(count)``;
* the single-urn multi-color model: ``d`` balls added per step, colors
  multinomial with probabilities ``W(N_i)/sum_j W(N_j)`` held fixed within
  the step;
* the sequential two-urn process, which adds one ball per sub-step,
  alternating urns, always weighing a urn's own black count against the
  pooled red count.

RNG contract: a state owns one PCG64 stream.  An interacting-urn step
consumes exactly ``2 d`` uniforms in urn order (interaction draw first,
then the color uniform); a multi-color step consumes ``d`` uniforms; a
sequential sub-step consumes one.  The vectorized ensemble runners consume
per-run streams in the identical order, so run ``i`` of an ensemble
reproduces a standalone simulation seeded with ``derive_seed(master, i)``.

Counts and probabilities are handled through log weights, so exponential
reinforcement never overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConditionViolation
from .reinforcement import ReinforcementSeq, log_weight_table
from .seeds import derive_seed

_LOG_EXP_CLIP = 745.0
MONOPOLY_LABELS_2 = ("black", "red")


class _LogW:
    """Growable lookup of log W(n); ``-inf`` marks zero weight."""

    def __init__(self, seq: ReinforcementSeq, initial: int = 256):
        self.seq = seq
        self.table = log_weight_table(seq, initial)

    def __call__(self, n: int) -> float:
        if n >= self.table.size:
            self.table = log_weight_table(self.seq, max(n, 2 * self.table.size))
        return float(self.table[n])

    def ensure(self, nmax: int) -> np.ndarray:
        if nmax >= self.table.size:
            self.table = log_weight_table(self.seq, nmax)
        return self.table


def _prob_first(log_a: float, log_b: float) -> float:
    """weight_a / (weight_a + weight_b) from log weights."""
    if log_a == -math.inf:
        if log_b == -math.inf:
            raise ConditionViolation("both pool weights are zero")
        return 0.0
    if log_b == -math.inf:
        return 1.0
    d = log_b - log_a
    if d > _LOG_EXP_CLIP:
        return 0.0
    if d < -_LOG_EXP_CLIP:
        return 1.0
    return 1.0 / (1.0 + math.exp(d))


def _vec_prob(log_a: np.ndarray, log_b: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        q = 1.0 / (1.0 + np.exp(log_b - log_a))
    if np.isnan(q).any():
        raise ConditionViolation("both pool weights are zero")
    return q


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Recorded time series of a single run.

    ``proportions`` holds one column per urn (or per color for the
    multi-color model); ``color_totals`` the per-color system totals at the
    same sample steps.  Sample steps are strictly increasing.
    """

    steps: np.ndarray
    proportions: np.ndarray
    color_totals: np.ndarray
    counts: np.ndarray | None = None
    events: dict = dc_field(default_factory=dict)
    seed: int | None = None
    meta: dict = dc_field(default_factory=dict)

    def to_csv(self, path, what: str = "proportions") -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if what == "proportions":
                d = self.proportions.shape[1]
                w.writerow(["step"] + [f"x_{i + 1}" for i in range(d)])
                for s, row in zip(self.steps, self.proportions):
                    w.writerow([int(s)] + [format(v, ".17g") for v in row])
            elif what == "counts":
                if self.counts is None:
                    raise ValueError("trajectory was recorded without counts")
                c = self.counts.shape[1]
                w.writerow(["step"] + [f"c_{i + 1}" for i in range(c)])
                for s, row in zip(self.steps, self.counts):
                    w.writerow([int(s)] + [int(v) for v in row])
            else:
                raise ValueError(f"unknown export: {what}")


def detect_monopoly(traj: Trajectory, window: int) -> str:
    """Finite-horizon monopoly proxy: the label of the single color whose
    total changed over the final ``window`` steps, or ``"none"``.

    Totals are nondecreasing, so a color is unchanged over the window iff it
    is equal at the window's first recorded sample and at the end."""
    if window <= 0:
        raise ValueError("window must be positive")
    steps = traj.steps
    final = int(steps[-1])
    base_candidates = np.nonzero(steps <= final - window)[0]
    if base_candidates.size == 0:
        raise ValueError(f"window {window} exceeds the recorded span")
    base = base_candidates[-1]
    changed = np.nonzero(traj.color_totals[-1] != traj.color_totals[base])[0]
    if changed.size != 1:
        return "none"
    c = int(changed[0])
    n_colors = traj.color_totals.shape[1]
    return MONOPOLY_LABELS_2[c] if n_colors == 2 else f"color{c}"


def classify_limit(traj: Trajectory, equilibria, radius: float):
    """Index of the equilibrium nearest the endpoint, provided the final
    quarter of samples stays within ``radius`` of it; ``None`` otherwise."""
    if not equilibria:
        raise ValueError("empty equilibria list")
    pts = np.array([getattr(e, "location", e) for e in equilibria], dtype=float)
    props = traj.proportions
    tail = props[-max(1, -(-props.shape[0] // 4)):]
    j = int(np.argmin(np.linalg.norm(pts - props[-1], axis=1)))
    if np.max(np.linalg.norm(tail - pts[j], axis=1)) <= radius:
        return j
    return None


# ---------------------------------------------------------------------------
# interacting urn mechanism


@dataclass
class UrnState:
    d: int
    black: np.ndarray
    red: np.ndarray
    n: int
    p: float
    seq: ReinforcementSeq
    rng: np.random.Generator
    seed: int | None
    initial_totals: np.ndarray  # per-urn black0 + red0
    logw: _LogW

    @property
    def total_black(self) -> int:
        return int(self.black.sum())

    @property
    def total_red(self) -> int:
        return int(self.red.sum())


def _check_composition(seq: ReinforcementSeq, black, red, logw: _LogW) -> None:
    black = np.asarray(black)
    red = np.asarray(red)
    if (black < 0).any() or (red < 0).any():
        raise ValueError("counts must be nonnegative")
    if seq.domain_start > 0:
        if black.sum() < 1 or red.sum() < 1:
            raise ValueError(
                "W(0) = 0 requires at least one ball of each color in the system"
            )
    for i in range(black.size):
        if logw(int(black[i])) == -math.inf and logw(int(red[i])) == -math.inf:
            raise ValueError(f"urn {i + 1} has zero weight in both pools")


def init_ium(d: int, black0, red0, p: float, seq: ReinforcementSeq, seed: int) -> UrnState:
    """Fresh interacting-urn state at step 0."""
    if d < 1:
        raise ValueError("need at least one urn")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    black = np.asarray(black0, dtype=np.int64).copy()
    red = np.asarray(red0, dtype=np.int64).copy()
    if black.shape != (d,) or red.shape != (d,):
        raise ValueError(f"initial compositions must have length d={d}")
    logw = _LogW(seq)
    _check_composition(seq, black, red, logw)
    if logw(int(black.sum())) == -math.inf and logw(int(red.sum())) == -math.inf:
        raise ValueError("system-wide pools both have zero weight")
    rng = np.random.Generator(np.random.PCG64(seed))
    return UrnState(
        d=d, black=black, red=red, n=0, p=p, seq=seq, rng=rng, seed=seed,
        initial_totals=black + red, logw=logw,
    )


def _step_ium_core(state: UrnState, uniforms: np.ndarray) -> np.ndarray:
    """Advance one step given the 2d uniforms of this step; returns the
    black-increment vector.  All urns see the step-n counts."""
    logw = state.logw
    p = state.p
    log_gb = logw(state.total_black)
    log_gr = logw(state.total_red)
    q_global = None
    add = np.empty(state.d, dtype=np.int64)
    for i in range(state.d):
        if uniforms[2 * i] < p:
            if q_global is None:
                q_global = _prob_first(log_gb, log_gr)
            q = q_global
        else:
            q = _prob_first(logw(int(state.black[i])), logw(int(state.red[i])))
        add[i] = uniforms[2 * i + 1] < q
    state.black += add
    state.red += 1 - add
    state.n += 1
    return add


def step_ium(state: UrnState) -> UrnState:
    """One synchronous step: each urn draws from the pooled counts with
    probability p, from itself otherwise."""
    _step_ium_core(state, state.rng.random(2 * state.d))
    return state


def proportions(state: UrnState) -> np.ndarray:
    """Black-ball proportion per urn: B_n(i) / (n + B_0(i) + R_0(i))."""
    return state.black / (state.n + state.initial_totals)


def run(state, n_steps: int, record_every: int = 1, record_counts: bool = False) -> Trajectory:
    """Advance any simulator state ``n_steps`` steps, recording proportions
    at the given cadence (step 0 and the final step are always recorded)."""
    if n_steps < 0 or record_every < 1:
        raise ValueError("n_steps must be >= 0 and record_every >= 1")
    stepper, props_of, totals_of, counts_of, meta = _dispatch(state)
    steps, props, totals, counts = [], [], [], []

    def record(k):
        steps.append(k)
        props.append(props_of(state))
        totals.append(totals_of(state))
        if record_counts:
            counts.append(counts_of(state))

    record(0)
    for k in range(1, n_steps + 1):
        stepper(state)
        if k % record_every == 0 or k == n_steps:
            record(k)
    return Trajectory(
        steps=np.array(steps, dtype=np.int64),
        proportions=np.array(props, dtype=float),
        color_totals=np.array(totals, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64) if record_counts else None,
        seed=state.seed,
        meta=meta(state),
    )


def _dispatch(state):
    if isinstance(state, UrnState):
        return (
            step_ium,
            proportions,
            lambda s: (s.total_black, s.total_red),
            lambda s: np.concatenate([s.black, s.red]),
            lambda s: {"model": "ium", "d": s.d, "p": s.p, "seq": s.seq.to_json()},
        )
    if isinstance(state, MultiColorState):
        return (
            step_multicolor,
            lambda s: s.counts / s.counts.sum(),
            lambda s: tuple(s.counts),
            lambda s: s.counts.copy(),
            lambda s: {"model": "multicolor", "nc": s.nc, "d": s.d, "seq": s.seq.to_json()},
        )
    if isinstance(state, SequentialState):
        return (
            _step_sequential_macro,
            sequential_proportions,
            lambda s: (int(s.black.sum()), int(s.red.sum())),
            lambda s: np.concatenate([s.black, s.red]),
            lambda s: {"model": "sequential", "seq": s.seq.to_json()},
        )
    raise TypeError(f"unknown state type: {type(state)!r}")


# ---------------------------------------------------------------------------
# single-urn multi-color model (the p = 1 mechanism, d balls per step)


@dataclass
class MultiColorState:
    nc: int
    counts: np.ndarray
    a: tuple[int, ...]
    d: int
    n: int
    seq: ReinforcementSeq
    rng: np.random.Generator
    seed: int | None
    logw: _LogW


def init_multicolor(nc: int, a, d: int, seq: ReinforcementSeq, seed: int) -> MultiColorState:
    if nc < 2:
        raise ValueError("need at least two colors")
    if d < 1:
        raise ValueError("d (balls per step) must be >= 1")
    a = tuple(int(v) for v in a)
    if len(a) != nc:
        raise ValueError(f"initial counts must have length nc={nc}")
    if any(v < 0 for v in a):
        raise ValueError("initial counts must be nonnegative")
    logw = _LogW(seq)
    if any(v == 0 and seq.domain_start > 0 for v in a):
        raise ValueError("a_i = 0 is not allowed when W(0) = 0")
    if all(logw(v) == -math.inf for v in a):
        raise ValueError("every color has zero weight")
    rng = np.random.Generator(np.random.PCG64(seed))
    return MultiColorState(
        nc=nc, counts=np.array(a, dtype=np.int64), a=a, d=d, n=0,
        seq=seq, rng=rng, seed=seed, logw=logw,
    )


def _color_probs(logw_vals: np.ndarray) -> np.ndarray:
    hi = logw_vals.max()
    if hi == -math.inf:
        raise ConditionViolation("every color has zero weight")
    w = np.exp(logw_vals - hi)
    return w / w.sum()


def _step_multicolor_core(state: MultiColorState, uniforms: np.ndarray) -> None:
    lw = np.array([state.logw(int(c)) for c in state.counts])
    cum = np.cumsum(_color_probs(lw))
    for u in uniforms:
        idx = min(int((u > cum).sum()), state.nc - 1)
        state.counts[idx] += 1
    state.n += 1


def step_multicolor(state: MultiColorState) -> MultiColorState:
    """Add d balls, colors drawn from the weight distribution frozen at the
    step's start (a multinomial increment)."""
    _step_multicolor_core(state, state.rng.random(state.d))
    return state


# ---------------------------------------------------------------------------
# sequential two-urn process


@dataclass
class SequentialState:
    black: np.ndarray
    red: np.ndarray
    substep: int  # sub-steps completed; macro step = substep // 2
    seq: ReinforcementSeq
    rng: np.random.Generator
    seed: int | None
    initial_totals: np.ndarray
    logw: _LogW


def init_sequential(black0, red0, seq: ReinforcementSeq, seed: int) -> SequentialState:
    black = np.asarray(black0, dtype=np.int64).copy()
    red = np.asarray(red0, dtype=np.int64).copy()
    if black.shape != (2,) or red.shape != (2,):
        raise ValueError("the sequential process runs on exactly two urns")
    logw = _LogW(seq)
    _check_composition(seq, black, red, logw)
    rng = np.random.Generator(np.random.PCG64(seed))
    return SequentialState(
        black=black, red=red, substep=0, seq=seq, rng=rng, seed=seed,
        initial_totals=black + red, logw=logw,
    )


def _step_sequential_core(state: SequentialState, u: float) -> None:
    urn = state.substep % 2
    q = _prob_first(
        state.logw(int(state.black[urn])), state.logw(int(state.red.sum()))
    )
    if u < q:
        state.black[urn] += 1
    else:
        state.red[urn] += 1
    state.substep += 1


def step_sequential(state: SequentialState) -> SequentialState:
    """One sub-step: the active urn (alternating) weighs its own black count
    against the pooled red count."""
    _step_sequential_core(state, float(state.rng.random()))
    return state


def _step_sequential_macro(state: SequentialState) -> SequentialState:
    step_sequential(state)
    step_sequential(state)
    return state


def sequential_proportions(state: SequentialState) -> np.ndarray:
    n = state.substep // 2
    return state.black / (n + state.initial_totals)


# ---------------------------------------------------------------------------
# pathwise coupling of the interacting and sequential processes


def run_coupled(
    black0,
    red0,
    p: float,
    seq: ReinforcementSeq,
    seed: int,
    n_steps: int,
    record_every: int = 1,
) -> tuple[Trajectory, Trajectory, int]:
    """Run the two-urn interacting mechanism and the sequential process on
    shared uniforms (one interaction draw and one color uniform per urn per
    macro step; the sequential side reuses the color uniforms).

    Requires a non-decreasing weight sequence.  Returns both trajectories
    and the number of violations of the dominance inequalities
    ``seq_red >= ium_red`` and ``seq_black <= ium_black`` (surely 0).
    """
    total0 = int(np.sum(black0) + np.sum(red0))
    bound = 2 * n_steps + total0 + 2
    if not seq.non_decreasing_up_to(bound):
        raise ValueError("the coupling requires a non-decreasing weight sequence")
    ium = init_ium(2, black0, red0, p, seq, seed)
    seqp = init_sequential(black0, red0, seq, seed)
    rng = np.random.Generator(np.random.PCG64(seed))

    steps, props_i, props_s, totals_i, totals_s = [], [], [], [], []

    def record(k):
        steps.append(k)
        props_i.append(proportions(ium))
        props_s.append(sequential_proportions(seqp))
        totals_i.append((ium.total_black, ium.total_red))
        totals_s.append((int(seqp.black.sum()), int(seqp.red.sum())))

    violations = 0
    record(0)
    k = 0
    while k < n_steps:
        block = rng.random((min(4096, n_steps - k), 4))
        for us in block:
            k += 1
            _step_ium_core(ium, us)
            _step_sequential_core(seqp, float(us[1]))
            _step_sequential_core(seqp, float(us[3]))
            violations += int(seqp.red[0] < ium.red[0]) + int(seqp.red[1] < ium.red[1])
            violations += int(seqp.black[0] > ium.black[0]) + int(seqp.black[1] > ium.black[1])
            if k % record_every == 0 or k == n_steps:
                record(k)

    def mk(props, totals, model):
        return Trajectory(
            steps=np.array(steps, dtype=np.int64),
            proportions=np.array(props, dtype=float),
            color_totals=np.array(totals, dtype=np.int64),
            seed=seed,
            meta={"model": model, "p": p, "seq": seq.to_json()},
        )

    return mk(props_i, totals_i, "ium"), mk(props_s, totals_s, "sequential"), violations


# ---------------------------------------------------------------------------
# vectorized ensemble engines (lockstep across runs, per-run streams)


@dataclass
class EnsembleRaw:
    """Raw per-run output of a vectorized ensemble: recorded proportion
    samples, per-color last-change steps, and final counts."""

    steps: np.ndarray  # (k,)
    proportions: np.ndarray  # (n_runs, k, d_or_nc)
    last_add: np.ndarray  # (n_runs, n_colors) step of last count change
    final_counts: np.ndarray  # (n_runs, ...) model specific
    seeds: np.ndarray  # (n_runs,)


def _run_blocks(master_seed: int, run_offset: int, n_runs: int, per_step: int, n_steps: int):
    """Yield (start_step, uniforms) blocks of shape (n_runs, L, per_step),
    drawn from per-run streams in step order."""
    gens = [
        np.random.Generator(np.random.PCG64(derive_seed(master_seed, run_offset + i)))
        for i in range(n_runs)
    ]
    chunk = max(1, min(4096, (1 << 23) // max(1, n_runs * per_step)))
    start = 0
    while start < n_steps:
        length = min(chunk, n_steps - start)
        block = np.stack([g.random(length * per_step) for g in gens])
        yield start, block.reshape(n_runs, length, per_step)
        start += length


def run_ium_ensemble(
    seq: ReinforcementSeq,
    p: float,
    d: int,
    black0,
    red0,
    n_steps: int,
    n_runs: int,
    master_seed: int,
    run_offset: int = 0,
    record_every: int = 100,
) -> EnsembleRaw:
    """All runs advanced in lockstep; run ``i`` consumes the same stream a
    standalone ``init_ium(..., seed=derive_seed(master, offset+i))`` would."""
    probe = init_ium(d, black0, red0, p, seq, seed=0)  # validates arguments
    del probe
    black = np.tile(np.asarray(black0, dtype=np.int64), (n_runs, 1))
    red = np.tile(np.asarray(red0, dtype=np.int64), (n_runs, 1))
    init_totals = black[0] + red[0]
    logw = log_weight_table(seq, d * n_steps + int(init_totals.sum()) + 1)

    steps, samples = [], []
    last_add = np.zeros((n_runs, 2), dtype=np.int64)

    def record(k):
        steps.append(k)
        samples.append(black / (k + init_totals))

    record(0)
    for start, block in _run_blocks(master_seed, run_offset, n_runs, 2 * d, n_steps):
        for t in range(block.shape[1]):
            u = block[:, t, :]
            step = start + t + 1
            log_gb = logw[black.sum(axis=1)]
            log_gr = logw[red.sum(axis=1)]
            q_global = _vec_prob(log_gb, log_gr)
            add = np.empty((n_runs, d), dtype=np.int64)
            for i in range(d):
                eta = u[:, 2 * i] < p
                q_local = _vec_prob(logw[black[:, i]], logw[red[:, i]])
                q = np.where(eta, q_global, q_local)
                add[:, i] = u[:, 2 * i + 1] < q
            black += add
            red += 1 - add
            last_add[add.any(axis=1), 0] = step
            last_add[(add == 0).any(axis=1), 1] = step
            if step % record_every == 0 or step == n_steps:
                record(step)

    return EnsembleRaw(
        steps=np.array(steps, dtype=np.int64),
        proportions=np.stack(samples, axis=1),
        last_add=last_add,
        final_counts=np.concatenate([black, red], axis=1),
        seeds=np.array([derive_seed(master_seed, run_offset + i) for i in range(n_runs)], dtype=np.uint64),
    )


def run_multicolor_ensemble(
    seq: ReinforcementSeq,
    nc: int,
    a,
    d: int,
    n_steps: int,
    n_runs: int,
    master_seed: int,
    run_offset: int = 0,
    record_every: int = 100,
) -> EnsembleRaw:
    probe = init_multicolor(nc, a, d, seq, seed=0)
    del probe
    counts = np.tile(np.asarray(a, dtype=np.int64), (n_runs, 1))
    logw = log_weight_table(seq, int(np.sum(a)) + d * n_steps + 1)
    rows = np.arange(n_runs)

    steps, samples = [], []
    last_add = np.zeros((n_runs, nc), dtype=np.int64)

    def record(k):
        steps.append(k)
        samples.append(counts / counts.sum(axis=1, keepdims=True))

    record(0)
    for start, block in _run_blocks(master_seed, run_offset, n_runs, d, n_steps):
        for t in range(block.shape[1]):
            step = start + t + 1
            lw = logw[counts]
            hi = lw.max(axis=1, keepdims=True)
            if np.isneginf(hi).any():
                raise ConditionViolation("every color has zero weight")
            w = np.exp(lw - hi)
            cum = np.cumsum(w / w.sum(axis=1, keepdims=True), axis=1)
            for j in range(d):
                u = block[:, t, j]
                idx = np.minimum((u[:, None] > cum).sum(axis=1), nc - 1)
                counts[rows, idx] += 1
                last_add[rows, idx] = step
            if step % record_every == 0 or step == n_steps:
                record(step)

    return EnsembleRaw(
        steps=np.array(steps, dtype=np.int64),
        proportions=np.stack(samples, axis=1),
        last_add=last_add,
        final_counts=counts,
        seeds=np.array([derive_seed(master_seed, run_offset + i) for i in range(n_runs)], dtype=np.uint64),
    )
