"""Benchmark systems, RK4 integration, and dataset generation.

Four built-in autonomous systems: two scalar forcing functions used for
function-reconstruction studies (``sin_exp``, ``two_freq``) and two
2-state oscillators (``duffing``, ``pendulum``). Datasets are (state,
derivative) pairs sampled along trajectories from random initial
conditions, shuffled and split 80/20.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericError

SYSTEM_KINDS = ("sin_exp", "two_freq", "duffing", "pendulum")

# two_freq mixes two sinusoids, a localized bump, and a linear drift:
#   f(x) = A * (sin(x/3) + cos(2x/3) + exp(-x^2) + const) / c - k*x
# Defaults below put the slow and fast sinusoids at comparable amplitude
# over a domain long enough that both oscillate many times.
TWO_FREQ_DEFAULTS = {"A": 5.0, "c": 3.0, "k": 0.05, "const": 1.0}

_DEFAULT_DOMAINS = {
    "sin_exp": ((0.0, 10.0),),
    "two_freq": ((0.0, 10.0),),
    "duffing": ((-2.0, 2.0), (-2.0, 2.0)),
    "pendulum": ((-np.pi, np.pi), (-2.0, 2.0)),
}


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    parameters: dict = field(default_factory=dict)
    state_dim: int = 1
    domain: tuple = ()


def make_system(kind: str, parameters: dict | None = None, domain=None) -> SystemSpec:
    """Build a benchmark system spec with documented defaults."""
    if kind not in SYSTEM_KINDS:
        raise ValueError(f"unknown system {kind!r}; expected one of {SYSTEM_KINDS}")
    params = {}
    if kind == "two_freq":
        params = dict(TWO_FREQ_DEFAULTS)
        if parameters:
            unknown = set(parameters) - set(params)
            if unknown:
                raise ValueError(f"unknown two_freq parameters {sorted(unknown)}")
            params.update({k: float(v) for k, v in parameters.items()})
    elif parameters:
        raise ValueError(f"system {kind!r} takes no parameters")
    dim = 1 if kind in ("sin_exp", "two_freq") else 2
    dom = tuple(tuple(map(float, iv)) for iv in (domain or _DEFAULT_DOMAINS[kind]))
    if len(dom) != dim:
        raise ValueError(f"domain must have {dim} interval(s) for {kind!r}")
    for lo, hi in dom:
        if not hi > lo:
            raise ValueError(f"empty domain interval ({lo}, {hi})")
    return SystemSpec(kind=kind, parameters=params, state_dim=dim, domain=dom)


def rhs(spec: SystemSpec, state: np.ndarray) -> np.ndarray:
    """Analytic right-hand side of the system at a state vector."""
    state = np.asarray(state, dtype=float)
    if state.shape != (spec.state_dim,):
        raise ValueError(
            f"state shape {state.shape} does not match dimension {spec.state_dim}"
        )
    if spec.kind == "sin_exp":
        x = state[0]
        return np.array([np.sin(8.0 * x) + 5.0 * np.exp(-0.2 * x) + 1.0])
    if spec.kind == "two_freq":
        x = state[0]
        p = spec.parameters
        core = np.sin(x / 3.0) + np.cos(2.0 * x / 3.0) + np.exp(-(x**2)) + p["const"]
        return np.array([p["A"] * core / p["c"] - p["k"] * x])
    if spec.kind == "duffing":
        x0, x1 = state
        return np.array([x1, x0 - x0**3])
    if spec.kind == "pendulum":
        x0, x1 = state
        return np.array([x1, -np.sin(x0)])
    raise ValueError(f"unknown system {spec.kind!r}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (steps + 1, state_dim)


def rk4_step(f, state: np.ndarray, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta update."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    state = np.asarray(state, dtype=float)
    k1 = np.asarray(f(state), dtype=float)
    k2 = np.asarray(f(state + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(f(state + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(f(state + dt * k3), dtype=float)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite state after RK4 step from {state}")
    return out


def integrate(f, x0: np.ndarray, dt: float, steps: int) -> Trajectory:
    """Integrate forward with fixed-step RK4, recording every state.

    The trajectory includes the initial condition, so it has steps + 1
    entries at times 0, dt, ..., steps*dt.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    x = np.asarray(x0, dtype=float)
    states = np.empty((steps + 1, x.shape[0]))
    states[0] = x
    for k in range(steps):
        x = rk4_step(f, x, dt)
        states[k + 1] = x
    times = np.arange(steps + 1) * dt
    return Trajectory(times, states)


@dataclass(frozen=True)
class TrajectoryDataset:
    states: np.ndarray  # (N, d)
    derivs: np.ndarray  # (N, d)
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.states.shape[0]


def _entropy(seed: int) -> int:
    # SeedSequence entropy must be nonnegative
    return seed & 0xFFFFFFFFFFFFFFFF


def split_indices(n: int, seed: int):
    """Deterministic shuffled 80/20 split; |train| = round(0.8 n)."""
    rng = np.random.default_rng([_entropy(seed), 1])
    perm = rng.permutation(n)
    n_train = int(round(0.8 * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def generate_dataset(
    spec: SystemSpec,
    n_trajectories: int,
    ic_ranges,
    dt: float,
    steps: int,
    seed: int,
) -> TrajectoryDataset:
    """Sample (state, derivative) pairs along seeded random trajectories.

    Each trajectory draws its initial condition uniformly from
    ``ic_ranges`` using an independent stream derived from the seed and
    the trajectory index, then contributes steps + 1 samples with the
    derivative recomputed exactly from the analytic right-hand side.
    """
    if n_trajectories < 1 or steps < 1:
        raise ValueError("need at least one trajectory and one step")
    ic_ranges = tuple(tuple(map(float, iv)) for iv in ic_ranges)
    if len(ic_ranges) != spec.state_dim:
        raise ValueError("one initial-condition range per state component required")
    for (lo, hi), (dlo, dhi) in zip(ic_ranges, spec.domain):
        if lo < dlo or hi > dhi:
            raise ValueError(
                f"initial-condition range ({lo}, {hi}) outside domain ({dlo}, {dhi})"
            )
    f = lambda x: rhs(spec, x)
    all_states = []
    for t in range(n_trajectories):
        rng = np.random.default_rng([_entropy(seed), 0, t])
        x0 = np.array([rng.uniform(lo, hi) for lo, hi in ic_ranges])
        all_states.append(integrate(f, x0, dt, steps).states)
    states = np.concatenate(all_states, axis=0)
    derivs = np.array([rhs(spec, s) for s in states])
    train_idx, test_idx = split_indices(states.shape[0], seed)
    meta = {
        "system": spec.kind,
        "parameters": dict(spec.parameters),
        "state_dim": spec.state_dim,
        "domain": [list(iv) for iv in spec.domain],
        "ic_ranges": [list(iv) for iv in ic_ranges],
        "dt": dt,
        "steps": steps,
        "n_trajectories": n_trajectories,
        "seed": seed,
    }
    return TrajectoryDataset(states, derivs, train_idx, test_idx, seed, meta)


@dataclass(frozen=True)
class RolloutResult:
    learned: Trajectory
    truth: Trajectory
    errors: np.ndarray  # per-step L2 norm of the state difference
    relative_l2: float  # percent over the whole horizon
    clamped: bool  # learned model was queried outside its bounds


def rollout_compare(
    learned_f,
    spec: SystemSpec,
    x0: np.ndarray,
    dt: float,
    steps: int,
    clamp_bounds=None,
) -> RolloutResult:
    """Integrate a learned right-hand side against the ground truth.

    ``clamp_bounds`` optionally gives per-component (lo, hi) intervals of
    the learned model's validity; queries outside are clamped to the
    boundary and flagged in the result.
    """
    x0 = np.asarray(x0, dtype=float)
    clamped = {"hit": False}
    if clamp_bounds is not None:
        lo = np.array([b[0] for b in clamp_bounds])
        hi = np.array([b[1] for b in clamp_bounds])

        def guarded(x):
            cx = np.clip(x, lo, hi)
            if not np.array_equal(cx, x):
                clamped["hit"] = True
            return learned_f(cx)

    else:
        guarded = learned_f
    learned = integrate(guarded, x0, dt, steps)
    truth = integrate(lambda x: rhs(spec, x), x0, dt, steps)
    diff = learned.states - truth.states
    errors = np.linalg.norm(diff, axis=1)
    rel = float(np.linalg.norm(diff) / np.linalg.norm(truth.states) * 100.0)
    return RolloutResult(learned, truth, errors, rel, clamped["hit"])


# --- file formats -------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def save_dataset(ds: TrajectoryDataset, csv_path: str | Path) -> Path:
    """Write samples as CSV plus a sidecar .meta.json; returns the meta path.

    Columns are x,dxdt for scalar systems and x0,x1,dx0,dx1 for 2-state
    systems. The split is not stored; it is recomputed from the seed.
    """
    csv_path = Path(csv_path)
    d = ds.states.shape[1]
    header = ["x", "dxdt"] if d == 1 else ["x0", "x1", "dx0", "dx1"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s, dv in zip(ds.states, ds.derivs):
            writer.writerow([_fmt(v) for v in (*s, *dv)])
    meta_path = csv_path.with_suffix(".meta.json")
    with open(meta_path, "w") as fh:
        json.dump(ds.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta_path


def load_dataset(csv_path: str | Path) -> TrajectoryDataset:
    """Read a dataset CSV and its sidecar metadata, restoring the split."""
    csv_path = Path(csv_path)
    meta_path = csv_path.with_suffix(".meta.json")
    with open(meta_path) as fh:
        meta = json.load(fh)
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if header == ["x", "dxdt"]:
        d = 1
    elif header == ["x0", "x1", "dx0", "dx1"]:
        d = 2
    else:
        raise ValueError(f"unrecognized dataset header {header}")
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 * d:
        raise ValueError("dataset rows do not match the header")
    seed = int(meta["seed"])
    train_idx, test_idx = split_indices(data.shape[0], seed)
    return TrajectoryDataset(
        states=data[:, :d].copy(),
        derivs=data[:, d:].copy(),
        train_idx=train_idx,
        test_idx=test_idx,
        seed=seed,
        meta=meta,
    )


def save_trajectory(traj: Trajectory, path: str | Path):
    d = traj.states.shape[1]
    header = ["t"] + [f"x{i}" for i in range(d)] if d > 1 else ["t", "x0"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, s in zip(traj.times, traj.states):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in s])
