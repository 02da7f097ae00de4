"""Quantum-trajectory Monte Carlo on the diagonal Fock subspace.

Each step of length dt applies one of the Kraus branches: detected
emission, undetected emission, pump from the reservoir, and with a dynamic
reservoir also reservoir pump and reservoir decay; otherwise nothing
happens. Branch probabilities depend only on the current state, so the
number of idle steps before the next event is geometric. ``run_trajectory``
draws that number directly (method="skip"), which is the same Markov chain
as stepping one dt at a time (method="step") at a cost proportional to the
number of events instead of the number of steps.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .constants import HBAR
from .errors import InvalidArgumentError, StepSizeError
from .filter import FilterSpec, transmission_table
from .ladder import LadderModel
from .numerics import RandomStream, fit_least_squares
from .statistics import ReservoirModel, joint_steady_state, thermal_occupation

MAX_STEP_PROB = 0.01
EVENTS = ("det", "nd", "pump", "res_pump", "res_decay")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Monte Carlo setup. Energies in ueV, times in ps.

    ``reservoir_mode`` "fixed" holds the reservoir at ``n_r`` excitons;
    "dynamic" evolves an integer reservoir with the rates of ``reservoir``.
    ``dt=None`` picks the largest step with every event probability below
    0.01 (with 1% margin). ``initial`` is "stationary" (state drawn from the
    steady state) or "empty".
    """

    ladder: LadderModel = field(default_factory=LadderModel)
    filter: FilterSpec = field(default_factory=FilterSpec)
    duration: float = 1e4
    eta: float = 1.0
    reservoir_mode: str = "fixed"
    n_r: float = 1.0
    reservoir: ReservoirModel = field(default_factory=ReservoirModel)
    dt: float = None
    seed: int = 0
    n_max: int = None
    nr_max: int = 24
    initial: str = "stationary"
    sample_interval: float = None

    def __post_init__(self):
        if self.reservoir_mode not in ("fixed", "dynamic"):
            raise InvalidArgumentError("TrajectoryConfig: reservoir_mode must be fixed or dynamic")
        if not 0 < self.eta <= 1:
            raise InvalidArgumentError("TrajectoryConfig: eta must lie in (0, 1]")
        if not self.duration > 0:
            raise InvalidArgumentError("TrajectoryConfig: duration must be positive")
        if self.n_r < 0:
            raise InvalidArgumentError("TrajectoryConfig: n_r must be non-negative")
        if self.initial not in ("stationary", "empty"):
            raise InvalidArgumentError("TrajectoryConfig: initial must be stationary or empty")
        if self.n_max is None:
            object.__setattr__(self, "n_max", self.ladder.n_max)
        if self.dt is None:
            object.__setattr__(self, "dt", auto_dt(self))
        if not self.dt > 0:
            raise InvalidArgumentError("TrajectoryConfig: dt must be positive")
        _check_step(self)

    @property
    def rates(self):
        """(gamma, gamma_r, gamma_D) in 1/ps and F in 1/ps."""
        r = self.reservoir
        return self.ladder.gamma / HBAR, r.gamma_r / HBAR, r.gamma_D / HBAR, r.F

    @property
    def effective_lifetime(self):
        """Relaxation time (ps) of the polariton occupation, hbar / (gamma - gamma_r n_r)."""
        n_r = self.n_r if self.reservoir_mode == "fixed" else _mean_nr(self)
        return HBAR / (self.ladder.gamma - self.reservoir.gamma_r * n_r)


def _mean_nr(cfg):
    r = cfg.reservoir
    return r.F * HBAR / (r.gamma_D + r.gamma_r) if r.gamma_D + r.gamma_r > 0 else 0.0


def _max_nr(cfg):
    return cfg.n_r if cfg.reservoir_mode == "fixed" else cfg.nr_max


def auto_dt(cfg):
    k, a, d, F = cfg.rates
    bounds = [k * cfg.n_max, a * _max_nr(cfg) * (cfg.n_max + 1)]
    if cfg.reservoir_mode == "dynamic":
        bounds += [F, d * cfg.nr_max]
    top = max(bounds)
    return 0.99 * MAX_STEP_PROB / top if top > 0 else 1.0


def _check_step(cfg):
    k, a, d, F = cfg.rates
    worst = {"det/nd": k * cfg.n_max * cfg.dt,
             "pump": a * _max_nr(cfg) * (cfg.n_max + 1) * cfg.dt}
    if cfg.reservoir_mode == "dynamic":
        worst["res_pump"] = F * cfg.dt
        worst["res_decay"] = d * cfg.nr_max * cfg.dt
    for name, p in worst.items():
        if p >= MAX_STEP_PROB:
            raise StepSizeError(f"step probability for {name} reaches {p:.3g} >= 0.01; "
                                f"use dt <= {auto_dt(cfg):.4g} ps")


def _transmissions(cfg):
    if cfg.reservoir_mode == "fixed":
        P = transmission_table(cfg.ladder, cfg.filter, n_max=cfg.n_max)
        return P[:, :1]
    return transmission_table(cfg.ladder, cfg.filter, n_max=cfg.n_max, nr_max=cfg.nr_max,
                              g_r=cfg.reservoir.g_r)


def step_probabilities(n, n_r, cfg, P=None):
    """Per-step event probabilities (det, nd, pump, res_pump, res_decay, none).

    ``P`` is a transmission table P[n, n_r] (column 0 in fixed mode).
    Events that would leave the truncated space keep their probability;
    the trajectory turns them into counted no-ops.
    """
    if not 0 <= n <= cfg.n_max:
        raise InvalidArgumentError(f"step_probabilities: n={n} outside [0, {cfg.n_max}]")
    P = _transmissions(cfg) if P is None else P
    k, a, d, F = cfg.rates
    dt = cfg.dt
    col = 0 if cfg.reservoir_mode == "fixed" else int(n_r)
    emit = k * dt * n
    p_det = emit * cfg.eta * P[n, col]
    p_nd = emit - p_det
    p_pump = a * n_r * dt * (n + 1)
    if cfg.reservoir_mode == "dynamic":
        p_rp, p_rd = F * dt, d * n_r * dt
    else:
        p_rp = p_rd = 0.0
    probs = (p_det, p_nd, p_pump, p_rp, p_rd)
    for name, p in zip(EVENTS, probs):
        if p >= MAX_STEP_PROB:
            raise StepSizeError(f"step probability for {name} is {p:.3g} >= 0.01; use a smaller dt")
    return probs + (1.0 - sum(probs),)


@dataclass
class ClickRecord:
    times: np.ndarray
    trajectory_id: int = 0
    occupation_trace: np.ndarray = None
    steps: int = 0
    truncations: int = 0
    events: int = 0

    @property
    def truncation_rate(self):
        return self.truncations / self.steps if self.steps else 0.0


def _initial_state(cfg, rng):
    if cfg.initial == "empty":
        return 0, (int(round(cfg.n_r)) if cfg.reservoir_mode == "fixed" else 0)
    if cfg.reservoir_mode == "fixed":
        x = cfg.reservoir.gamma_r * cfg.n_r / cfg.ladder.gamma
        p = thermal_occupation(x, cfg.n_max).p[: cfg.n_max + 1]
        n = int(min(np.searchsorted(np.cumsum(p), rng.random() * p.sum()), cfg.n_max))
        return n, cfg.n_r
    joint = _joint_cached(cfg.reservoir, cfg.ladder.gamma, cfg.n_max, cfg.nr_max)
    flat = np.cumsum(joint.ravel())
    i = int(min(np.searchsorted(flat, rng.random() * flat[-1]), flat.size - 1))
    return divmod(i, joint.shape[1])


_JOINT_CACHE = {}


def _joint_cached(res, gamma, n_max, nr_max):
    key = (res, gamma, n_max, nr_max)
    if key not in _JOINT_CACHE:
        p = joint_steady_state(res, gamma, n_max=n_max, nr_max=nr_max).p
        _JOINT_CACHE[key] = p[: n_max + 1, : nr_max + 1]
    return _JOINT_CACHE[key]


def run_trajectory(cfg, stream=None, method="skip"):
    """Simulate one trajectory; returns its ClickRecord.

    Deterministic in (cfg, stream.seed, stream.stream_id). Pump events at
    n = n_max (and reservoir pump at nr_max) are suppressed and counted in
    ``truncations``. With ``cfg.sample_interval`` the occupation n is
    recorded on that time grid in ``occupation_trace``.
    """
    if stream is None:
        stream = RandomStream(cfg.seed, 0)
    if method not in ("skip", "step"):
        raise InvalidArgumentError("run_trajectory: method must be skip or step")
    rng = stream.generator
    P = _transmissions(cfg)
    n, n_r = _initial_state(cfg, rng)
    total_steps = int(math.floor(cfg.duration / cfg.dt))
    runner = _run_skip if method == "skip" else _run_step
    times, trace, trunc, events = runner(cfg, rng, P, n, n_r, total_steps)
    return ClickRecord(times=np.asarray(times, float), trajectory_id=stream.stream_id,
                       occupation_trace=trace, steps=total_steps, truncations=trunc, events=events)


def _event_table(cfg, P):
    k, a, d, F = cfg.rates
    dt = cfg.dt
    dynamic = cfg.reservoir_mode == "dynamic"
    # per-state probabilities, cached lazily as tuples of cumulative sums
    cache = {}

    def probs(n, r):
        key = (n, r)
        v = cache.get(key)
        if v is None:
            col = r if dynamic else 0
            emit = k * dt * n
            pd = emit * cfg.eta * P[n, col]
            pn = emit - pd
            pp = a * r * dt * (n + 1)
            prp = F * dt if dynamic else 0.0
            prd = d * r * dt if dynamic else 0.0
            c1 = pd
            c2 = c1 + pn
            c3 = c2 + pp
            c4 = c3 + prp
            c5 = c4 + prd
            v = (c1, c2, c3, c4, c5, math.log1p(-c5) if c5 > 0 else 0.0)
            cache[key] = v
        return v

    return probs


def _apply(ev, n, r, cfg, dynamic):
    # returns new (n, r, truncated)
    if ev <= 1:
        return n - 1, r, False
    if ev == 2:
        if n >= cfg.n_max:
            return n, r, True
        return n + 1, (r - 1 if dynamic else r), False
    if ev == 3:
        if r >= cfg.nr_max:
            return n, r, True
        return n, r + 1, False
    return n, r - 1, False


def _pick(u, c):
    if u < c[0]:
        return 0
    if u < c[1]:
        return 1
    if u < c[2]:
        return 2
    if u < c[3]:
        return 3
    return 4


class _Uniforms:
    """Buffered scalar uniforms in [0, 1); numpy scalar draws are slow one at a time."""

    def __init__(self, rng, size=1024):
        self.rng = rng
        self.size = size
        self.buf = []

    def __call__(self):
        if not self.buf:
            self.buf = self.rng.random(self.size).tolist()
            self.buf.reverse()
        return self.buf.pop()


def _trace_grid(cfg):
    if not cfg.sample_interval:
        return None
    return np.arange(0.0, cfg.duration, cfg.sample_interval)


def _run_skip(cfg, rng, P, n, r, total_steps):
    dt = cfg.dt
    dynamic = cfg.reservoir_mode == "dynamic"
    probs = _event_table(cfg, P)
    grid = _trace_grid(cfg)
    trace = np.empty(0 if grid is None else len(grid), dtype=np.int64)
    gi = 0
    times = []
    trunc = 0
    events = 0
    step = 0
    random = _Uniforms(rng)
    while True:
        c = probs(n, r)
        ptot = c[4]
        if ptot <= 0:
            nxt = total_steps + 1
        else:
            u = 1.0 - random()  # (0, 1]
            nxt = step + max(1, math.ceil(math.log(u) / c[5]))
        if grid is not None:
            t_next = min(nxt, total_steps + 1) * dt
            while gi < len(grid) and grid[gi] < t_next:
                trace[gi] = n
                gi += 1
        if nxt > total_steps:
            break
        step = nxt
        ev = _pick(random() * ptot, c)
        events += 1
        if ev == 0:
            times.append(step * dt)
        n, r, t = _apply(ev, n, r, cfg, dynamic)
        trunc += t
    return times, (None if grid is None else np.column_stack([grid, trace])), trunc, events


def _run_step(cfg, rng, P, n, r, total_steps):
    # literal one-uniform-per-step scheme, kept as a reference
    dt = cfg.dt
    dynamic = cfg.reservoir_mode == "dynamic"
    probs = _event_table(cfg, P)
    grid = _trace_grid(cfg)
    trace = [] if grid is not None else None
    gi = 0
    times = []
    trunc = 0
    events = 0
    for step in range(1, total_steps + 1):
        if grid is not None:
            while gi < len(grid) and grid[gi] < step * dt:
                trace.append(n)
                gi += 1
        c = probs(n, r)
        u = rng.random()
        if u >= c[4]:
            continue
        ev = _pick(u, c)
        events += 1
        if ev == 0:
            times.append(step * dt)
        n, r, t = _apply(ev, n, r, cfg, dynamic)
        trunc += t
    if grid is not None:
        trace += [n] * (len(grid) - gi)
        trace = np.column_stack([grid, trace])
    return times, trace, trunc, events


def gillespie_oracle(cfg, stream=None):
    """Continuous-time exact simulation of the same jump process (rates = p / dt)."""
    if stream is None:
        stream = RandomStream(cfg.seed, 0)
    rng = stream.generator
    P = _transmissions(cfg)
    dynamic = cfg.reservoir_mode == "dynamic"
    probs = _event_table(cfg, P)
    n, r = _initial_state(cfg, rng)
    grid = _trace_grid(cfg)
    trace = np.empty(0 if grid is None else len(grid), dtype=np.int64)
    gi = 0
    t = 0.0
    times = []
    trunc = events = 0
    while True:
        c = probs(n, r)
        rate = c[4] / cfg.dt
        t_next = t + rng.exponential(1.0 / rate) if rate > 0 else math.inf
        if grid is not None:
            while gi < len(grid) and grid[gi] < min(t_next, cfg.duration):
                trace[gi] = n
                gi += 1
        if t_next > cfg.duration:
            break
        t = t_next
        ev = _pick(rng.random() * c[4], c)
        events += 1
        if ev == 0:
            times.append(t)
        n, r, tr = _apply(ev, n, r, cfg, dynamic)
        trunc += tr
    return ClickRecord(times=np.asarray(times), trajectory_id=stream.stream_id,
                       occupation_trace=None if grid is None else np.column_stack([grid, trace]),
                       steps=int(cfg.duration / cfg.dt), truncations=trunc, events=events)


def _run_chunk(args):
    cfg, ids, method = args
    return [run_trajectory(cfg, RandomStream(cfg.seed, i), method) for i in ids]


def run_ensemble(cfg, n_traj, workers=1, first_id=0, method="skip"):
    """Trajectories with stream ids first_id .. first_id + n_traj - 1.

    The result does not depend on ``workers``: every trajectory owns the
    stream keyed by its id and the records come back in id order.
    """
    ids = list(range(first_id, first_id + n_traj))
    if workers <= 1 or n_traj < 2:
        return _run_chunk((cfg, ids, method))
    chunks = [ids[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_run_chunk, [(cfg, c, method) for c in chunks]))
    out = {rec.trajectory_id: rec for part in parts for rec in part}
    return [out[i] for i in ids]


def ensemble_metadata(records):
    steps = sum(r.steps for r in records)
    trunc = sum(r.truncations for r in records)
    rate = trunc / steps if steps else 0.0
    meta = {"trajectories": len(records), "steps": steps, "events": sum(r.events for r in records),
            "clicks": int(sum(len(r.times) for r in records)), "truncations": trunc,
            "truncation_rate": rate, "warnings": []}
    if rate > 1e-6:
        meta["warnings"].append(f"truncation rate {rate:.3g} per step exceeds 1e-6; raise n_max")
    return meta


# ---------------------------------------------------------------- coincidences


@dataclass
class CoincidencePair:
    """Symmetric delay histograms on bins centred at j * bin, j = -M..M.

    ``w_c`` and ``w_u`` are the numbers of records and of record pairs
    (times two for the two delay signs) that went into ``h_c`` and ``h_u``.
    """

    tau: np.ndarray
    h_c: np.ndarray
    h_u: np.ndarray
    w_c: float
    w_u: float

    def __add__(self, other):
        if not np.array_equal(self.tau, other.tau):
            raise InvalidArgumentError("CoincidencePair: bin grids differ")
        return CoincidencePair(self.tau, self.h_c + other.h_c, self.h_u + other.h_u,
                               self.w_c + other.w_c, self.w_u + other.w_u)

    def __sub__(self, other):
        if not np.array_equal(self.tau, other.tau):
            raise InvalidArgumentError("CoincidencePair: bin grids differ")
        return CoincidencePair(self.tau, self.h_c - other.h_c, self.h_u - other.h_u,
                               self.w_c - other.w_c, self.w_u - other.w_u)

    @property
    def g2(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.h_c / self.w_c) / (self.h_u / self.w_u)

    def to_csv(self, path, comment=None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["tau_ps", "h_c", "h_u", "g2"])
            for row in zip(self.tau, self.h_c, self.h_u, self.g2):
                w.writerow([repr(float(v)) for v in row])


def _bin_delays(d, bin_width, M, out):
    j = np.rint(np.abs(d) / bin_width).astype(np.int64)
    j = j[j <= M]
    c = np.bincount(j, minlength=M + 1)
    out[M:] += c
    out[M::-1] += c


def _auto_delays(t, tau_max):
    parts = []
    for k in range(1, len(t)):
        d = t[k:] - t[:-k]
        d = d[d <= tau_max + 1e-9]
        if d.size == 0:
            break
        parts.append(d)
    return np.concatenate(parts) if parts else np.empty(0)


def _cross_delays(a, b, tau_max):
    if len(a) == 0 or len(b) == 0:
        return np.empty(0)
    lo = np.searchsorted(b, a - tau_max - 1e-9, side="left")
    hi = np.searchsorted(b, a + tau_max + 1e-9, side="right")
    cnt = hi - lo
    if cnt.sum() == 0:
        return np.empty(0)
    ia = np.repeat(np.arange(len(a)), cnt)
    offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    return b[np.repeat(lo, cnt) + offs] - a[ia]


def coincidence_histograms(ensemble, tau_max, bin_width, pairing="neighbours"):
    """Correlated (same record) and uncorrelated (different records) delay histograms.

    Pairing "neighbours" crosses records (0, 1), (2, 3), ...; an odd last
    record only contributes to h_c. Splitting an ensemble at even positions
    therefore gives histograms that add up exactly to the whole. Pairing
    "all" uses every pair of records (quadratic; small ensembles only).
    """
    recs = list(ensemble)
    if not recs:
        raise InvalidArgumentError("coincidence_histograms: empty ensemble")
    if not (tau_max > 0 and bin_width > 0):
        raise InvalidArgumentError("coincidence_histograms: tau_max and bin_width must be positive")
    M = int(round(tau_max / bin_width))
    tau = bin_width * np.arange(-M, M + 1)
    h_c = np.zeros(2 * M + 1, dtype=np.int64)
    h_u = np.zeros(2 * M + 1, dtype=np.int64)
    lim = (M + 0.5) * bin_width
    times = [np.asarray(r.times if isinstance(r, ClickRecord) else r, float) for r in recs]
    for t in times:
        _bin_delays(_auto_delays(t, lim), bin_width, M, h_c)
    if pairing == "neighbours":
        pairs = [(i, i + 1) for i in range(0, len(times) - 1, 2)]
    elif pairing == "all":
        pairs = [(i, j) for i in range(len(times)) for j in range(i + 1, len(times))]
    else:
        raise InvalidArgumentError(f"coincidence_histograms: unknown pairing {pairing!r}")
    for i, j in pairs:
        _bin_delays(_cross_delays(times[i], times[j], lim), bin_width, M, h_u)
    return CoincidencePair(tau, h_c.astype(float), h_u.astype(float), float(len(times)), 2.0 * len(pairs))


@dataclass
class G2Estimate:
    tau: np.ndarray
    g2_curve: np.ndarray
    g2_zero: float
    stderr: float
    fit: object = None


def _fit_exp(pair, tau_LP, tau_fit):
    sel = (pair.h_u > 0) & (pair.tau != 0) & (np.abs(pair.tau) <= tau_fit)
    if sel.sum() < 3:
        raise InvalidArgumentError("g2_from_histograms: too few populated bins")
    x = np.abs(pair.tau[sel])
    hu = pair.h_u[sel]
    hc = pair.h_c[sel]
    ratio = pair.w_u / pair.w_c
    y = hc * ratio / hu

    def model(x, p):
        return 1.0 + p[0] * np.exp(-x / tau_LP)

    def jac(x, p):
        return np.exp(-x / tau_LP)[:, None]

    # Poisson errors from the model prediction rather than the observed
    # counts, so empty bins do not get zero weight
    mu = np.maximum(hc, 1.0)
    for _ in range(3):
        sig = (mu / hu) * ratio * np.sqrt(1.0 / mu + 1.0 / hu)
        res = fit_least_squares(model, x, y, [1.0], sigma=sig, jac=jac)
        mu = np.maximum(model(x, res.params) * hu / ratio, 1e-3)
    return res


def g2_from_histograms(pair, tau_LP, tau_fit=None):
    """Fit g2(tau) = 1 + y0 exp(-|tau| / tau_LP) outside the tau = 0 bin; g2(0) = 1 + y0."""
    if not tau_LP > 0:
        raise InvalidArgumentError("g2_from_histograms: tau_LP must be positive")
    tau_fit = np.max(np.abs(pair.tau)) if tau_fit is None else tau_fit
    res = _fit_exp(pair, tau_LP, tau_fit)
    return G2Estimate(pair.tau, pair.g2, 1.0 + float(res.params[0]), float(res.std_errors[0]), res)


def jackknife_g2(blocks, tau_LP, tau_fit=None):
    """Delete-one-block jackknife of g2(0) over a list of CoincidencePair blocks."""
    if len(blocks) < 2:
        raise InvalidArgumentError("jackknife_g2: need at least two blocks")
    total = blocks[0]
    for b in blocks[1:]:
        total = total + b
    est = g2_from_histograms(total, tau_LP, tau_fit)
    loo = np.array([g2_from_histograms(total - b, tau_LP, tau_fit).g2_zero for b in blocks])
    B = len(blocks)
    se = math.sqrt((B - 1) / B * np.sum((loo - loo.mean()) ** 2))
    return replace(est, stderr=se)


def simulate_g2(cfg, n_traj, tau_max=None, bin_width=None, blocks=20, workers=1, first_id=0):
    """Ensemble -> histograms -> fitted g2(0) with a block-jackknife error.

    Returns (G2Estimate, CoincidencePair, metadata).
    """
    tau_LP = cfg.effective_lifetime
    tau_max = 5 * tau_LP if tau_max is None else tau_max
    bin_width = tau_LP / 4 if bin_width is None else bin_width
    recs = run_ensemble(cfg, n_traj, workers=workers, first_id=first_id)
    size = 2 * max(1, n_traj // (2 * blocks))
    parts = [coincidence_histograms(recs[i:i + size], tau_max, bin_width)
             for i in range(0, len(recs), size)]
    est = jackknife_g2(parts, tau_LP) if len(parts) >= 2 else g2_from_histograms(parts[0], tau_LP)
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return est, total, ensemble_metadata(recs)


def export_clicks(records, path):
    """Text export: one ``trajectory_id<TAB>time_ps`` line per click."""
    with open(path, "w") as fh:
        for r in records:
            for t in r.times:
                fh.write(f"{r.trajectory_id}\t{float(t)!r}\n")


def load_clicks(path):
    by_id = {}
    with open(path) as fh:
        for line in fh:
            if line.strip():
                i, t = line.split("\t")
                by_id.setdefault(int(i), []).append(float(t))
    return [ClickRecord(np.array(v), trajectory_id=k) for k, v in sorted(by_id.items())]


def poisson_clicks(rate, duration, stream, trajectory_id=None):
    """Homogeneous Poisson click record (rate in 1/ps): the g2 = 1 null source."""
    rng = stream.generator
    k = rng.poisson(rate * duration)
    t = np.sort(rng.uniform(0.0, duration, size=k))
    return ClickRecord(t, trajectory_id=stream.stream_id if trajectory_id is None else trajectory_id)


@dataclass
class OccupationTest:
    counts: np.ndarray
    expected: np.ndarray
    chi2: float
    dof: int
    p_value: float


def occupation_chi2(samples, A_over_C, min_expected=5.0):
    """Pearson chi-square of sampled occupations against the geometric law.

    Upper bins with expected count below ``min_expected`` are pooled into
    one tail bin. Samples should be spaced by several correlation times.
    """
    samples = np.asarray(samples, dtype=np.int64)
    N = len(samples)
    if N < 10:
        raise InvalidArgumentError("occupation_chi2: too few samples")
    x = float(A_over_C)
    # geometric law on the full half-line; the pooled last bin carries the tail
    k = 0
    while N * (1 - x) * x**k >= min_expected:
        k += 1
    k = max(k, 2)
    expected = N * (1 - x) * x ** np.arange(k)
    expected = np.append(expected, N * x**k)
    counts = np.bincount(np.minimum(samples, k), minlength=k + 1)[: k + 1].astype(float)
    if expected[-1] < min_expected:
        expected[-2] += expected[-1]
        counts[-2] += counts[-1]
        expected, counts = expected[:-1], counts[:-1]
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    dof = len(counts) - 1
    return OccupationTest(counts, expected, chi2, dof, float(chi2_dist.sf(chi2, dof)))
