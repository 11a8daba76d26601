"""Discrete-event simulator for two Poisson classes sharing one server.

The event calendar never holds more than four candidates: the completion of
the packet in service, the policy's next timed regime switch, and the next
arrival of each class, so the loop picks the minimum directly instead of
paying for a heap.  Arrival gaps are pre-drawn from per-stream generators in
chunks; service work, policy randomness, and each arrival stream all draw
from independent substreams of one seed, so runs with the same seed are
bit-identical and different policies see the same traffic sample path.

Preemption is resume-from-remainder: an interrupted packet returns to the
head of its queue carrying its unserved work, and per-packet served time is
reconciled against assigned work at departure.
"""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from statistics import fmean, stdev
from typing import Callable

import numpy as np

from .policies import Policy
from .traffic import SystemConfig

__all__ = [
    "RNG_ALGORITHM",
    "SimSpec",
    "ClassMetrics",
    "SimMetrics",
    "DepartureRecord",
    "MeanWithCI",
    "ReplicateSummary",
    "WorkConservationError",
    "InsufficientDataError",
    "run",
    "replicate",
    "replicate_seed",
]

# the counter-based generator behind every stream; recorded in CLI output
RNG_ALGORITHM = "philox4x64"

# normal 97.5% quantile for two-sided 95% confidence intervals
_Z95 = 1.959963984540054

# interarrival gaps drawn per refill; large enough that refill cost vanishes
_CHUNK = 16384
_INF = math.inf

# engine-internal guard; the sharper reporting bound lives in SimMetrics
_SERVED_WORK_SLACK = 1e-6

# work sampler: (generator, class index, count) -> work for `count` packets, bits
WorkSampler = Callable[[np.random.Generator, int, int], np.ndarray]


class WorkConservationError(RuntimeError):
    """Raised when the server idles with work queued or loses service time."""


class InsufficientDataError(RuntimeError):
    """Raised when a class with traffic logs no departures after warm-up."""


@dataclass(frozen=True)
class SimSpec:
    """One simulation run.

    Attributes:
        config: Traffic and server parameters.
        policy: Scheduling policy to drive.
        horizon: Simulated span in seconds.
        seed: Root seed; every random stream derives from it.
        warmup_fraction: Leading fraction of the horizon whose departures
            and occupancy are discarded.
        record_departures: Keep per-departure records (time, class, sojourn)
            for the measured window.
        work_sampler: Optional per-class packet-work sampler in bits;
            defaults to deterministic sizes from the config.
    """

    config: SystemConfig
    policy: Policy
    horizon: float
    seed: int
    warmup_fraction: float = 0.1
    record_departures: bool = False
    work_sampler: WorkSampler | None = None

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0.0 <= self.warmup_fraction < 0.5:
            raise ValueError(
                f"warmup_fraction must lie in [0, 0.5), got {self.warmup_fraction}"
            )
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True)
class DepartureRecord:
    time: float
    cls: int
    sojourn: float


@dataclass(frozen=True)
class ClassMetrics:
    """Post-warm-up statistics for one class.

    Attributes:
        departures: Packets that left in the measured window.
        mean_sojourn: Mean time in system, seconds.
        sojourn_variance: Sample variance of sojourn times.
        mean_in_system: Time-average number of packets present.
        mean_utility: Mean of the class utility curve over sojourns.
    """

    departures: int
    mean_sojourn: float
    sojourn_variance: float
    mean_in_system: float
    mean_utility: float


@dataclass(frozen=True)
class SimMetrics:
    """Everything a run reports.

    Attributes:
        class1: Class-1 statistics.
        class2: Class-2 statistics.
        horizon: Simulated span, seconds.
        warmup_end: Instant measurement started.
        busy_fraction: Fraction of the measured window the server worked.
        regime1_fraction: Fraction of the full run spent under a class-1
            priority regime; None for policies without regimes.
        total_arrivals: Arrivals over the full run, both classes.
        max_service_discrepancy: Largest |served - assigned| over departed
            packets, seconds; bounds how exactly work was conserved.
        seed: Root seed of the run.
        departures: Departure records if requested, else None.
    """

    class1: ClassMetrics
    class2: ClassMetrics
    horizon: float
    warmup_end: float
    busy_fraction: float
    regime1_fraction: float | None
    total_arrivals: int
    max_service_discrepancy: float
    seed: int
    departures: tuple[DepartureRecord, ...] | None = None

    def for_class(self, index: int) -> ClassMetrics:
        if index == 1:
            return self.class1
        if index == 2:
            return self.class2
        raise ValueError(f"class index must be 1 or 2, got {index}")


def _gap_chunks(gen: np.random.Generator, rate: float) -> list[float]:
    return gen.exponential(1.0 / rate, _CHUNK).tolist()


def run(spec: SimSpec) -> SimMetrics:
    """Simulate one run and reduce it to :class:`SimMetrics`.

    Raises:
        WorkConservationError: On an idle server with queued work or a
            served/assigned mismatch beyond engine slack; both indicate an
            engine or policy bug, not a statistical fluke.
        InsufficientDataError: If a class with positive arrival rate saw no
            measured departures (horizon too short for the warm-up split).
    """
    cfg = spec.config
    policy = spec.policy
    horizon = spec.horizon
    warm_end = spec.warmup_fraction * horizon
    rate = cfg.server_rate

    root = np.random.SeedSequence(spec.seed)
    seeds = root.spawn(5)
    gen_arr1 = np.random.Generator(np.random.Philox(seeds[0]))
    gen_arr2 = np.random.Generator(np.random.Philox(seeds[1]))
    gen_svc = (
        np.random.Generator(np.random.Philox(seeds[2])),
        np.random.Generator(np.random.Philox(seeds[3])),
    )
    gen_policy = np.random.Generator(np.random.Philox(seeds[4]))

    lam1 = cfg.class1.arrival_rate
    lam2 = cfg.class2.arrival_rate
    sampler = spec.work_sampler

    # arrival state per class: next absolute time, gap chunk, cursor
    if lam1 > 0.0:
        gaps1 = _gap_chunks(gen_arr1, lam1)
        idx1 = 0
        next1 = gaps1[0]
    else:
        gaps1, idx1, next1 = [], 0, _INF
    if lam2 > 0.0:
        gaps2 = _gap_chunks(gen_arr2, lam2)
        idx2 = 0
        next2 = gaps2[0]
    else:
        gaps2, idx2, next2 = [], 0, _INF

    det_work = (
        cfg.class1.packet_size / rate,
        cfg.class2.packet_size / rate,
    )
    if sampler is not None:
        # kept in arrival order; cursors advance alongside the gap chunks
        work1 = (sampler(gen_svc[0], 1, _CHUNK) / rate).tolist() if lam1 > 0.0 else []
        work2 = (sampler(gen_svc[1], 2, _CHUNK) / rate).tolist() if lam2 > 0.0 else []
    else:
        work1, work2 = [], []
    widx1 = 0
    widx2 = 0

    state = policy.fresh_state(gen_policy)
    choose = policy.choose
    preempt_target = policy.preempt_target
    begin_busy = policy.begin_busy_period
    note_start = policy.note_service_start
    switch_time = policy.next_switch(state)
    regime = policy.current_regime(state)
    regime_since = 0.0
    regime1_time = 0.0
    saw_regime = regime != 0

    q1: deque[list[float]] = deque()
    q2: deque[list[float]] = deque()
    qwork1 = 0.0  # queued remaining work per class, seconds
    qwork2 = 0.0
    n1_sys = 0  # in system, including in service
    n2_sys = 0

    # packet in service: [arrival, remaining, assigned, served], all seconds
    cur: list[float] | None = None
    cur_cls = 0
    cur_start = 0.0
    cur_done = _INF

    last_t = 0.0
    area1 = 0.0
    area2 = 0.0
    busy_area = 0.0

    count = [0, 0]
    sum_soj = [0.0, 0.0]
    sumsq_soj = [0.0, 0.0]
    sum_util = [0.0, 0.0]
    arrivals = 0
    max_disc = 0.0
    records: list[DepartureRecord] | None = [] if spec.record_departures else None

    curve1 = cfg.class1.curve
    curve2 = cfg.class2.curve
    a_coef = (curve1.steepness, curve2.steepness)
    b_coef = (curve1.inflection, curve2.inflection)
    u_scale = (curve1.scale, curve2.scale)
    exp = math.exp

    while True:
        t = cur_done
        kind = 0
        if switch_time < t:
            t = switch_time
            kind = 3
        if next1 < t:
            t = next1
            kind = 1
        if next2 < t:
            t = next2
            kind = 2
        if t >= horizon:
            break

        if t > warm_end:
            lo = last_t if last_t > warm_end else warm_end
            dt = t - lo
            if dt > 0.0:
                area1 += n1_sys * dt
                area2 += n2_sys * dt
                if cur_cls:
                    busy_area += dt
        last_t = t

        if kind == 0:
            # departure of the packet in service
            pkt = cur
            served = pkt[3] + (t - cur_start)
            disc = served - pkt[2]
            if disc < 0.0:
                disc = -disc
            if disc > max_disc:
                max_disc = disc
                if disc > _SERVED_WORK_SLACK:
                    raise WorkConservationError(
                        f"packet served {served:.12g}s of {pkt[2]:.12g}s assigned"
                    )
            cls = cur_cls
            if cls == 1:
                n1_sys -= 1
            else:
                n2_sys -= 1
            if t > warm_end:
                i = cls - 1
                sojourn = t - pkt[0]
                count[i] += 1
                sum_soj[i] += sojourn
                sumsq_soj[i] += sojourn * sojourn
                x = a_coef[i] * (sojourn - b_coef[i])
                if x > 700.0:
                    x = 700.0
                sum_util[i] += u_scale[i] / (1.0 + exp(x))
                if records is not None:
                    records.append(DepartureRecord(t, cls, sojourn))
            cur = None
            cur_cls = 0
            cur_done = _INF
            nq1 = len(q1)
            nq2 = len(q2)
            if nq1 or nq2:
                nxt = choose(state, nq1, nq2, qwork1 * rate, qwork2 * rate)
                if nxt == 1:
                    pkt = q1.popleft()
                    qwork1 -= pkt[1]
                else:
                    pkt = q2.popleft()
                    qwork2 -= pkt[1]
                cur = pkt
                cur_cls = nxt
                cur_start = t
                cur_done = t + pkt[1]
                note_start(state, nxt)
            continue

        if kind == 3:
            # timed regime switch
            policy.handle_switch(state, t)
            switch_time = policy.next_switch(state)
            new_regime = policy.current_regime(state)
            if new_regime != regime:
                if regime == 1:
                    regime1_time += t - regime_since
                regime = new_regime
                regime_since = t
            target = preempt_target(state)
            if target and cur_cls and cur_cls != target:
                waiting = len(q1) if target == 1 else len(q2)
                if waiting:
                    slice_len = t - cur_start
                    cur[1] -= slice_len
                    cur[3] += slice_len
                    if cur_cls == 1:
                        q1.appendleft(cur)
                        qwork1 += cur[1]
                    else:
                        q2.appendleft(cur)
                        qwork2 += cur[1]
                    if target == 1:
                        pkt = q1.popleft()
                        qwork1 -= pkt[1]
                    else:
                        pkt = q2.popleft()
                        qwork2 -= pkt[1]
                    cur = pkt
                    cur_cls = target
                    cur_start = t
                    cur_done = t + pkt[1]
                    note_start(state, target)
            continue

        # arrival of class `kind`
        arrivals += 1
        if kind == 1:
            if sampler is None:
                work = det_work[0]
            else:
                if widx1 == len(work1):
                    work1 = (sampler(gen_svc[0], 1, _CHUNK) / rate).tolist()
                    widx1 = 0
                work = work1[widx1]
                widx1 += 1
            pkt = [t, work, work, 0.0]
            idx1 += 1
            if idx1 == _CHUNK:
                gaps1 = _gap_chunks(gen_arr1, lam1)
                idx1 = 0
            next1 += gaps1[idx1]
        else:
            if sampler is None:
                work = det_work[1]
            else:
                if widx2 == len(work2):
                    work2 = (sampler(gen_svc[1], 2, _CHUNK) / rate).tolist()
                    widx2 = 0
                work = work2[widx2]
                widx2 += 1
            pkt = [t, work, work, 0.0]
            idx2 += 1
            if idx2 == _CHUNK:
                gaps2 = _gap_chunks(gen_arr2, lam2)
                idx2 = 0
            next2 += gaps2[idx2]

        if cur_cls == 0:
            # idle server: queues must be empty or work was left stranded
            if q1 or q2:
                raise WorkConservationError(
                    f"server idle at {t:.6g}s with packets queued"
                )
            begin_busy(state, gen_policy, t)
            new_regime = policy.current_regime(state)
            if new_regime != regime:
                if regime == 1:
                    regime1_time += t - regime_since
                regime = new_regime
                regime_since = t
            if kind == 1:
                q1.append(pkt)
                qwork1 += pkt[1]
                n1_sys += 1
            else:
                q2.append(pkt)
                qwork2 += pkt[1]
                n2_sys += 1
            nxt = choose(state, len(q1), len(q2), qwork1 * rate, qwork2 * rate)
            if nxt == 1:
                pkt = q1.popleft()
                qwork1 -= pkt[1]
            else:
                pkt = q2.popleft()
                qwork2 -= pkt[1]
            cur = pkt
            cur_cls = nxt
            cur_start = t
            cur_done = t + pkt[1]
            note_start(state, nxt)
            continue

        if kind == 1:
            q1.append(pkt)
            qwork1 += pkt[1]
            n1_sys += 1
        else:
            q2.append(pkt)
            qwork2 += pkt[1]
            n2_sys += 1
        if cur_cls != kind and preempt_target(state) == kind:
            # resume-from-remainder preemption
            slice_len = t - cur_start
            cur[1] -= slice_len
            cur[3] += slice_len
            if cur_cls == 1:
                q1.appendleft(cur)
                qwork1 += cur[1]
            else:
                q2.appendleft(cur)
                qwork2 += cur[1]
            nxt = choose(state, len(q1), len(q2), qwork1 * rate, qwork2 * rate)
            if nxt == 1:
                pkt = q1.popleft()
                qwork1 -= pkt[1]
            else:
                pkt = q2.popleft()
                qwork2 -= pkt[1]
            cur = pkt
            cur_cls = nxt
            cur_start = t
            cur_done = t + pkt[1]
            note_start(state, nxt)

    # close the occupancy integrals at the horizon
    if horizon > warm_end:
        lo = last_t if last_t > warm_end else warm_end
        dt = horizon - lo
        if dt > 0.0:
            area1 += n1_sys * dt
            area2 += n2_sys * dt
            if cur_cls:
                busy_area += dt
    if regime == 1:
        regime1_time += horizon - regime_since

    measured = horizon - warm_end
    if count[0] + count[1] == 0:
        raise InsufficientDataError(
            f"no departures after warm-up (horizon {horizon:.6g}s, warm-up "
            f"ends {warm_end:.6g}s); nothing to estimate"
        )

    def _metrics(i: int, lam: float) -> ClassMetrics:
        n = count[i]
        if n == 0:
            if lam > 0.0:
                raise InsufficientDataError(
                    f"class {i + 1} saw no departures after warm-up "
                    f"(horizon {horizon:.6g}s, warm-up ends {warm_end:.6g}s)"
                )
            return ClassMetrics(0, math.nan, math.nan, 0.0, math.nan)
        mean = sum_soj[i] / n
        if n >= 2:
            var = (sumsq_soj[i] - n * mean * mean) / (n - 1)
            var = max(var, 0.0)
        else:
            var = math.nan
        area = area1 if i == 0 else area2
        return ClassMetrics(
            departures=n,
            mean_sojourn=mean,
            sojourn_variance=var,
            mean_in_system=area / measured,
            mean_utility=sum_util[i] / n,
        )

    return SimMetrics(
        class1=_metrics(0, lam1),
        class2=_metrics(1, lam2),
        horizon=horizon,
        warmup_end=warm_end,
        busy_fraction=busy_area / measured,
        regime1_fraction=regime1_time / horizon if saw_regime else None,
        total_arrivals=arrivals,
        max_service_discrepancy=max_disc,
        seed=spec.seed,
        departures=tuple(records) if records is not None else None,
    )


@dataclass(frozen=True)
class MeanWithCI:
    """Sample mean with a 95% normal-approximation CI half-width."""

    mean: float
    ci_halfwidth: float


@dataclass(frozen=True)
class ReplicateSummary:
    """Across-replicate aggregates of the headline metrics."""

    replications: int
    l1: MeanWithCI
    l2: MeanWithCI
    var1: MeanWithCI
    var2: MeanWithCI
    busy_fraction: MeanWithCI


def replicate_seed(master_seed: int, index: int) -> int:
    """Root seed of one replicate, hashed from (master seed, index).

    Hashing keeps nearby indices statistically independent and gives every
    caller that shares a master seed the same replicate seeds, which is what
    lets different policies run against common random numbers.
    """
    return int(
        np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0]
    )


def _mean_ci(values: list[float]) -> MeanWithCI:
    n = len(values)
    m = fmean(values)
    if n < 2:
        return MeanWithCI(m, 0.0)
    return MeanWithCI(m, _Z95 * stdev(values) / math.sqrt(n))


def replicate(
    spec: SimSpec, n_seeds: int, jobs: int = 1
) -> tuple[list[SimMetrics], ReplicateSummary]:
    """Run ``n_seeds`` independent replicates and aggregate them.

    Args:
        spec: Run template; its seed acts as the master seed.
        n_seeds: Number of replicates, at least 1.
        jobs: Worker processes; 1 runs inline.

    Returns:
        The per-replicate metrics in index order, plus mean and 95% CI
        half-width per headline metric (CI is 0 for a single replicate).
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be at least 1, got {n_seeds}")
    specs = [
        replace(spec, seed=replicate_seed(spec.seed, i)) for i in range(n_seeds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(run, specs))
    else:
        runs = [run(s) for s in specs]
    summary = ReplicateSummary(
        replications=n_seeds,
        l1=_mean_ci([r.class1.mean_sojourn for r in runs]),
        l2=_mean_ci([r.class2.mean_sojourn for r in runs]),
        var1=_mean_ci([r.class1.sojourn_variance for r in runs]),
        var2=_mean_ci([r.class2.sojourn_variance for r in runs]),
        busy_fraction=_mean_ci([r.busy_fraction for r in runs]),
    )
    return runs, summary
