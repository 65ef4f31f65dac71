"""Vectorized lockstep trial engine (internal to the Monte Carlo harness).

Trials are independent units of work.  Each trial owns an RNG stream derived
from (master_seed, stream_tag, trial_index), and its path is sampled from
that stream alone, so per-trial results do not depend on batching or worker
count.  Increments and the detector recursions are deterministic functions
of the paths, evaluated with the same elementwise operations as the
streaming detectors (np.logaddexp / logaddexp.reduce in the same order), so
lockstep and streaming runs agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detectors import PriorSupportExhausted
from .measures import ChangePrior, MixingGrid
from .models import ObservationModel

CHUNK = 1024  # fixed: chunking never affects per-trial values


def trial_rng(master_seed: int, stream_tag: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, stream_tag, trial_index])
    )


@dataclass(frozen=True)
class TrialSpec:
    """How one scenario draws (nu, theta) for each trial.

    mode "no_change": nu beyond the horizon, theta unused.
    mode "fixed":     nu and theta fixed for every trial.
    mode "prior":     nu sampled from the prior restricted to k >= 0 (with an
                      optional q-mass short-circuit to "change already in
                      effect", i.e. nu = 0); theta fixed if given, otherwise
                      sampled from the mixing weights.
    """

    mode: str
    nu: int | None = None
    theta: tuple | None = None
    q_short_circuit: bool = False
    stream_tag: int = 0


@dataclass
class TrialData:
    """Per-trial outcomes in trial-index order (stop_time 0 = censored)."""

    stop_times: np.ndarray
    log_stat_at_stop: np.ndarray
    nus: np.ndarray
    final_log_stat: np.ndarray | None = None

    @staticmethod
    def concatenate(parts: list["TrialData"]) -> "TrialData":
        return TrialData(
            stop_times=np.concatenate([p.stop_times for p in parts]),
            log_stat_at_stop=np.concatenate([p.log_stat_at_stop for p in parts]),
            nus=np.concatenate([p.nus for p in parts]),
            final_log_stat=(
                np.concatenate([p.final_log_stat for p in parts])
                if parts and parts[0].final_log_stat is not None
                else None
            ),
        )


def _draw_trials(
    spec: TrialSpec,
    prior: ChangePrior,
    grid: MixingGrid,
    horizon: int,
    rngs: list[np.random.Generator],
):
    b = len(rngs)
    nus = np.empty(b, dtype=np.int64)
    thetas = np.zeros((b, grid.dimension))
    fixed_theta = None if spec.theta is None else np.asarray(spec.theta, dtype=float)
    if spec.mode == "no_change":
        nus[:] = horizon
    elif spec.mode == "fixed":
        if spec.nu is None or fixed_theta is None:
            raise ValueError("fixed mode needs both nu and theta")
        nus[:] = min(int(spec.nu), horizon)
        thetas[:] = fixed_theta
    elif spec.mode == "prior":
        for i, rng in enumerate(rngs):
            if spec.q_short_circuit and prior.q > 0.0 and rng.random() < prior.q:
                nu = 0
            else:
                nu = prior.sample(rng)
            nus[i] = min(nu, horizon)
            if fixed_theta is None:
                thetas[i] = grid.atoms[grid.sample_index(rng)]
            else:
                thetas[i] = fixed_theta
    else:
        raise ValueError(f"unknown trial mode {spec.mode!r}")
    return nus, thetas


def run_chunk(
    model: ObservationModel,
    prior: ChangePrior,
    grid: MixingGrid,
    detector: str,
    omega: float,
    log_threshold: float | None,
    horizon: int,
    spec: TrialSpec,
    master_seed: int,
    start: int,
    count: int,
    want_final_stat: bool = False,
) -> TrialData:
    """Run trials [start, start+count) of one scenario in lockstep."""
    rngs = [trial_rng(master_seed, spec.stream_tag, i) for i in range(start, start + count)]
    nus, thetas = _draw_trials(spec, prior, grid, horizon, rngs)
    paths = model.sample_paths(nus, thetas, horizon, rngs)
    ell = model.path_increments(paths)
    b, t, k = ell.shape
    logw = grid.log_weights

    kind = detector.lower()
    if kind == "ms":
        log_pi = prior.log_pmf_array(t)
        log_tail = prior.log_tail_array(t)
        with np.errstate(divide="ignore"):
            init = np.log(prior.q) if prior.q > 0.0 else -np.inf
    elif kind == "msr":
        log_pi = log_tail = None
        with np.errstate(divide="ignore"):
            init = np.log(omega) if omega > 0.0 else -np.inf
    else:
        raise ValueError(f"unknown detector kind {detector!r}")

    state = np.full((b, k), init)
    stop = np.zeros(b, dtype=np.int64)
    stat_at_stop = np.full(b, np.nan)
    alive = np.ones(b, dtype=bool)
    final_stat = np.full(b, np.nan) if want_final_stat else None

    for n in range(1, t + 1):
        if kind == "ms":
            if not np.isfinite(log_tail[n]) and (want_final_stat or alive.any()):
                raise PriorSupportExhausted(
                    f"prior tail Pi({n}) = 0; the MS recursion cannot continue"
                )
            state = np.logaddexp(state, log_pi[n - 1]) + ell[:, n - 1, :]
            log_stat = np.logaddexp.reduce(state + logw, axis=1) - log_tail[n]
        else:
            state = np.logaddexp(state, 0.0) + ell[:, n - 1, :]
            log_stat = np.logaddexp.reduce(state + logw, axis=1)
        if log_threshold is not None:
            newly = alive & (log_stat >= log_threshold)
            if newly.any():
                stop[newly] = n
                stat_at_stop[newly] = log_stat[newly]
                alive &= ~newly
            if not want_final_stat and not alive.any():
                break
    if want_final_stat:
        final_stat[:] = log_stat

    return TrialData(
        stop_times=stop, log_stat_at_stop=stat_at_stop, nus=nus, final_log_stat=final_stat
    )
