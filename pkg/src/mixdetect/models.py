"""Observation models: path sampling and per-step log-likelihood-ratio increments.

Every model exposes the same contract.  After ``reset()`` the model sits at
time 0 with empty history; each ``step(x)`` consumes one observation and
returns the vector of LLR increments ``l_n(theta_i)``, one per mixing-grid
atom, where

    l_n(theta) = log f_theta(x_n | history) - log g(x_n | history)

is the log-ratio of the post-change and pre-change conditional densities.
Partial sums of increments over j in (k, n] give the cumulative LLR of
"change at k" against "no change".  Increments are deterministic functions
of the observed path; all randomness lives in path sampling, which consumes
one caller-supplied generator per path so trials stay reproducible.

Batch variants (``sample_paths`` / ``path_increments``) compute many
independent paths in lockstep with vectorized arithmetic; they produce
bit-identical values to the streaming API on the same path.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.signal import lfilter

from .measures import MixingGrid

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ObservationModel(ABC):
    """Stateful LLR-increment machine over a mixing grid.

    Mutable single-owner state; use one instance per concurrent worker.
    The grid and the model spec objects are shared immutably.
    """

    grid: MixingGrid
    dimension: int

    @abstractmethod
    def reset(self) -> None:
        """Return to time 0 with empty history."""

    @abstractmethod
    def step(self, x) -> np.ndarray:
        """Consume one observation, return per-atom increments, shape (n_atoms,)."""

    @abstractmethod
    def sample_paths(
        self,
        nus: np.ndarray,
        thetas: np.ndarray,
        horizon: int,
        rngs: Sequence[np.random.Generator],
    ) -> np.ndarray:
        """Sample a batch of paths, shape (len(rngs), horizon, dimension).

        Path i follows the no-change law up to and including time nus[i]
        and the post-change law with parameter thetas[i] afterwards; a value
        nus[i] >= horizon means no change within the path.  Exactly one
        generator is consumed per path.
        """

    @abstractmethod
    def path_increments(self, paths: np.ndarray) -> np.ndarray:
        """Per-atom increments for a batch of paths.

        paths has shape (B, T, dimension); the result has shape
        (B, T, n_atoms) with entry [i, n-1, j] = l_n(theta_j) on path i.
        """

    def increments_for(self, observations: np.ndarray) -> np.ndarray:
        """Increments (T, n_atoms) for one observation sequence, from time 0."""
        obs = np.asarray(observations, dtype=float)
        if obs.ndim == 1:
            obs = obs[:, None]
        return self.path_increments(obs[None, :, :])[0]


def _as_nu_array(nus, horizon: int) -> np.ndarray:
    """Clamp change points into [0, horizon]; None/inf mean no change."""
    out = np.empty(len(nus), dtype=np.int64)
    for i, nu in enumerate(nus):
        if nu is None or (isinstance(nu, float) and math.isinf(nu)):
            out[i] = horizon
        else:
            v = int(nu)
            if v < 0:
                raise ValueError(f"change point must be >= 0, got {v}")
            out[i] = min(v, horizon)
    return out


def sample_path(model: ObservationModel, nu, theta, horizon: int, rng) -> np.ndarray:
    """One path of length ``horizon`` under change at ``nu`` (None or inf: never).

    ``theta`` is an atom index into the model's grid, or an explicit
    parameter vector; it is ignored when the change never happens.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    nus = _as_nu_array([nu], horizon)
    if theta is None:
        vec = np.zeros(model.grid.dimension)
    elif isinstance(theta, (int, np.integer)):
        vec = model.grid.atoms[int(theta)]
    else:
        vec = np.asarray(theta, dtype=float).reshape(model.grid.dimension)
    paths = model.sample_paths(nus, vec[None, :], horizon, [rng])
    return paths[0]


# ---------------------------------------------------------------------------
# Gaussian i.i.d. model: N(0,1) before the change, N(theta,1) after.
# ---------------------------------------------------------------------------


class GaussianIidModel(ObservationModel):
    """Unit-variance Gaussian mean shift; increment l_n(theta) = theta*x - theta^2/2."""

    def __init__(self, grid: MixingGrid):
        if grid.dimension != 1:
            raise ValueError("gaussian_iid_model requires scalar grid atoms")
        self.grid = grid
        self.dimension = 1
        self._theta = grid.atoms[:, 0]
        self._half_theta_sq = 0.5 * self._theta**2

    def reset(self) -> None:
        pass  # memoryless

    def step(self, x) -> np.ndarray:
        xv = float(np.asarray(x).reshape(()))
        return self._theta * xv - self._half_theta_sq

    def sample_paths(self, nus, thetas, horizon, rngs):
        nus = np.asarray(nus, dtype=np.int64)
        thetas = np.asarray(thetas, dtype=float).reshape(len(rngs), 1)
        paths = np.empty((len(rngs), horizon, 1))
        for i, rng in enumerate(rngs):
            paths[i, :, 0] = rng.standard_normal(horizon)
        post = np.arange(horizon)[None, :] >= nus[:, None]  # row t is time t+1
        paths[:, :, 0] += post * thetas
        return paths

    def path_increments(self, paths):
        x = paths[:, :, 0]
        return x[:, :, None] * self._theta[None, None, :] - self._half_theta_sq

    def info_number(self, theta_vec: np.ndarray) -> float:
        return 0.5 * float(theta_vec[0]) ** 2


def gaussian_iid_model(grid: MixingGrid) -> GaussianIidModel:
    return GaussianIidModel(grid)


# ---------------------------------------------------------------------------
# Multichannel AR model: deterministic signals with unknown amplitudes in
# Gaussian autoregressive noise.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicSignal:
    """Closed-form signal S_n = amplitude * sin(omega*n + phase) for n >= 1.

    Constant signals are the omega = 0, phase = pi/2 special case.
    The signal is treated as zero for n <= 0, matching the zero initial
    values of the noise recursion.
    """

    amplitude: float = 1.0
    omega: float = 0.0
    phase: float = 0.0

    def values(self, horizon: int) -> np.ndarray:
        n = np.arange(1, horizon + 1, dtype=float)
        return self.amplitude * np.sin(self.omega * n + self.phase)


@dataclass(frozen=True)
class ArChannelSpec:
    """Per-channel AR noise coefficients and signal shapes.

    ``ar_coeffs[i]`` lists the coefficients (beta_1 .. beta_p) of channel i's
    noise recursion xi_n = sum_j beta_j xi_{n-j} + w_n with standard normal
    w_n and zero initial values.  All AR polynomials must be stable (roots
    strictly inside the unit circle).
    """

    ar_coeffs: tuple[tuple[float, ...], ...]
    signals: tuple[HarmonicSignal, ...]

    def __post_init__(self):
        coeffs = tuple(tuple(float(b) for b in ch) for ch in self.ar_coeffs)
        sigs = tuple(self.signals)
        object.__setattr__(self, "ar_coeffs", coeffs)
        object.__setattr__(self, "signals", sigs)
        if len(coeffs) != len(sigs):
            raise ValueError("need one signal per channel")
        if not coeffs:
            raise ValueError("need at least one channel")
        for i, ch in enumerate(coeffs):
            if ch:
                roots = np.roots([1.0] + [-b for b in ch])
                if roots.size and np.max(np.abs(roots)) >= 1.0 - 1e-9:
                    raise ValueError(f"channel {i}: AR coefficients are not stable")

    @property
    def n_channels(self) -> int:
        return len(self.ar_coeffs)

    def fir(self, channel: int) -> np.ndarray:
        """Whitening FIR [1, -beta_1, ..., -beta_p] for one channel."""
        return np.array([1.0] + [-b for b in self.ar_coeffs[channel]])

    def signal_matrix(self, horizon: int) -> np.ndarray:
        """Raw signals S_n, shape (horizon, n_channels), n = 1..horizon."""
        return np.column_stack([s.values(horizon) for s in self.signals])

    def residual_signal_matrix(self, horizon: int) -> np.ndarray:
        """Whitened signals S~_n = S_n - sum_j beta_j S_{n-j} (zero-padded)."""
        sig = self.signal_matrix(horizon)
        out = np.empty_like(sig)
        for c in range(self.n_channels):
            out[:, c] = lfilter(self.fir(c), [1.0], sig[:, c])
        return out


@dataclass(frozen=True)
class QLimit:
    """Time-average of a squared whitened signal over two disjoint windows.

    ``value`` is the larger window average (the working estimate of the
    long-run limit); ``spread`` is the absolute difference between the two
    windows, a convergence diagnostic.
    """

    value: float
    spread: float


def q_limit(spec: ArChannelSpec, channel: int, horizon: int = 10_000) -> QLimit:
    """Numeric long-run average of (S~_n)^2 for one channel.

    Averages over the windows (0, horizon] and (horizon, 2*horizon] and
    returns the max with the two-window spread.
    """
    if horizon < 10_000:
        raise ValueError("horizon must be >= 10^4 for a stable average")
    sres = spec.residual_signal_matrix(2 * horizon)[:, channel]
    sq = sres**2
    a = float(sq[:horizon].mean())
    b = float(sq[horizon:].mean())
    return QLimit(value=max(a, b), spread=abs(a - b))


class MultichannelArModel(ObservationModel):
    """Signals with unknown positive amplitudes in AR Gaussian noise.

    The model whitens both the data and the signals with the channel FIR
    filters; the increment is

        l_n(theta) = sum_c [ theta_c S~_n^c X~_n^c - theta_c^2 (S~_n^c)^2 / 2 ]

    which is the exact conditional-density log-ratio given zero initial
    values of the noise recursions.
    """

    def __init__(self, spec: ArChannelSpec, grid: MixingGrid):
        n = spec.n_channels
        if grid.dimension != n:
            raise ValueError(
                f"grid atoms have dimension {grid.dimension}, model has {n} channels"
            )
        if np.any(grid.atoms <= 0.0):
            raise ValueError("amplitude atoms must have positive components")
        self.spec = spec
        self.grid = grid
        self.dimension = n
        self._order = max((len(c) for c in spec.ar_coeffs), default=0)
        self._betas = np.zeros((n, self._order))
        for c, ch in enumerate(spec.ar_coeffs):
            self._betas[c, : len(ch)] = ch
        self._sres = spec.residual_signal_matrix(1024)
        self.reset()

    def reset(self) -> None:
        self._t = 0
        # most-recent-first raw observation lags, one row per channel
        self._lags = np.zeros((self.dimension, max(self._order, 1)))

    def _sres_at(self, t: int) -> np.ndarray:
        while t > self._sres.shape[0]:
            self._sres = self.spec.residual_signal_matrix(2 * self._sres.shape[0])
        return self._sres[t - 1]

    def _ell(self, resid: np.ndarray, sres: np.ndarray) -> np.ndarray:
        """Increments from whitened data/signals; accumulates channels in order.

        resid and sres broadcast over leading axes with trailing axis =
        channels; the result gains a trailing atom axis.  Streaming and
        batch paths share this helper so they agree bit for bit.
        """
        atoms = self.grid.atoms
        out = np.zeros(resid.shape[:-1] + (atoms.shape[0],))
        for c in range(self.dimension):
            sx = sres[..., c] * resid[..., c]
            out += (
                sx[..., None] * atoms[:, c]
                - 0.5 * (sres[..., c] ** 2)[..., None] * atoms[:, c] ** 2
            )
        return out

    def step(self, x) -> np.ndarray:
        xv = np.asarray(x, dtype=float).reshape(self.dimension)
        self._t += 1
        resid = xv.copy()
        # subtract lags one order at a time, matching path_increments bit for bit
        for j in range(1, self._order + 1):
            resid = resid - self._betas[:, j - 1] * self._lags[:, j - 1]
        if self._order:
            self._lags = np.roll(self._lags, 1, axis=1)
            self._lags[:, 0] = xv
        return self._ell(resid, self._sres_at(self._t))

    def sample_paths(self, nus, thetas, horizon, rngs):
        nus = np.asarray(nus, dtype=np.int64)
        thetas = np.asarray(thetas, dtype=float).reshape(len(rngs), self.dimension)
        noise = np.empty((len(rngs), horizon, self.dimension))
        for i, rng in enumerate(rngs):
            noise[i] = rng.standard_normal((horizon, self.dimension))
        for c in range(self.dimension):
            fir = self.spec.fir(c)
            if fir.size > 1:
                noise[:, :, c] = lfilter([1.0], fir, noise[:, :, c], axis=1)
        sig = self.spec.signal_matrix(horizon)  # (T, N)
        post = (np.arange(horizon)[None, :] >= nus[:, None]).astype(float)
        noise += post[:, :, None] * sig[None, :, :] * thetas[:, None, :]
        return noise

    def path_increments(self, paths):
        b, t, n = paths.shape
        resid = paths.copy()
        for c in range(n):
            # lags before time 1 are zero, so row j-1 onward sees lag j
            for j, beta in enumerate(self.spec.ar_coeffs[c], start=1):
                if j < t:
                    resid[:, j:, c] -= beta * paths[:, :-j, c]
        sres = self.spec.residual_signal_matrix(t)  # (T, N)
        return self._ell(resid, np.broadcast_to(sres, paths.shape))

    def info_number(self, theta_vec: np.ndarray, q_horizon: int = 10_000) -> float:
        qs = [q_limit(self.spec, c, q_horizon).value for c in range(self.dimension)]
        return 0.5 * float(np.sum(np.asarray(theta_vec) ** 2 * np.asarray(qs)))


def multichannel_ar_model(spec: ArChannelSpec, grid: MixingGrid) -> MultichannelArModel:
    return MultichannelArModel(spec, grid)


# ---------------------------------------------------------------------------
# Two-state hidden Markov model with unit-variance Gaussian emissions.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hmm2Spec:
    """Two-state HMM: parameter = pair of state emission means.

    The hidden chain has transition probabilities beta (state 1 -> 2) and
    gamma (state 2 -> 1), shared by the pre- and post-change regimes; the
    regimes differ only in the emission means.  Time 0 starts from the
    initial distribution P(state = 2) = gamma / (beta + gamma).
    """

    theta0: tuple[float, float]
    beta: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "theta0", (float(self.theta0[0]), float(self.theta0[1])))
        if not (0.0 <= self.beta <= 1.0 and 0.0 <= self.gamma <= 1.0):
            raise ValueError("beta and gamma must lie in [0, 1]")
        if self.beta + self.gamma <= 0.0:
            raise ValueError("beta + gamma must be positive")

    @property
    def pi2(self) -> float:
        return self.gamma / (self.beta + self.gamma)

    @property
    def symmetric(self) -> bool:
        return self.beta == 0.5 and self.gamma == 0.5


def _log_normal_pdf(x, mean):
    return -0.5 * (x - mean) ** 2 - _LOG_SQRT_2PI


class TwoStateHmmModel(ObservationModel):
    """Marginal-likelihood forward filter per parameter value.

    For each parameter (the pre-change means plus every grid atom) the model
    runs a normalized two-state forward pass; the per-step log marginal
    increment is the log one-step predictive density log c_n(theta), and the
    LLR increment is l_n(theta) = log c_n(theta) - log c_n(theta0).  Summing
    increments over (k, n] telescopes to the log-ratio of full-path marginal
    likelihoods, the quantity the mixture statistics are built on.
    """

    def __init__(self, spec: Hmm2Spec, grid: MixingGrid):
        if grid.dimension != 2:
            raise ValueError("hmm2_model requires 2-dimensional atoms (state means)")
        self.spec = spec
        self.grid = grid
        self.dimension = 1
        # parameter table: row 0 is theta0, rows 1.. are the grid atoms
        self._means = np.vstack([np.asarray(spec.theta0), grid.atoms])  # (P, 2)
        with np.errstate(divide="ignore"):
            self._ltr = {
                "stay1": np.log(1.0 - spec.beta),
                "to2": np.log(spec.beta),
                "to1": np.log(spec.gamma),
                "stay2": np.log(1.0 - spec.gamma),
            }
        self.reset()

    def reset(self) -> None:
        p = self._means.shape[0]
        pi2 = self.spec.pi2
        with np.errstate(divide="ignore"):
            self._log_f1 = np.full(p, np.log(1.0 - pi2))
            self._log_f2 = np.full(p, np.log(pi2))

    def _filter_step(self, log_f1, log_f2, x):
        """One normalized forward step for all parameters at once.

        Returns (log_c, log_f1', log_f2') where c is the one-step predictive
        density of x under each parameter's model given the history.
        """
        t = self._ltr
        log_g1 = np.logaddexp(log_f2 + t["to1"], log_f1 + t["stay1"])
        log_g2 = np.logaddexp(log_f2 + t["stay2"], log_f1 + t["to2"])
        le1 = _log_normal_pdf(x, self._means[..., 0])
        le2 = _log_normal_pdf(x, self._means[..., 1])
        log_j1 = log_g1 + le1
        log_j2 = log_g2 + le2
        log_c = np.logaddexp(log_j1, log_j2)
        return log_c, log_j1 - log_c, log_j2 - log_c

    def step(self, x) -> np.ndarray:
        xv = float(np.asarray(x).reshape(()))
        log_c, self._log_f1, self._log_f2 = self._filter_step(
            self._log_f1, self._log_f2, xv
        )
        return log_c[1:] - log_c[0]

    def path_increments(self, paths):
        b, t, _ = paths.shape
        p = self._means.shape[0]
        pi2 = self.spec.pi2
        with np.errstate(divide="ignore"):
            log_f1 = np.full((p, b), np.log(1.0 - pi2))
            log_f2 = np.full((p, b), np.log(pi2))
        means = self._means[:, :, None]  # broadcast over batch
        out = np.empty((b, t, p - 1))
        tr = self._ltr
        for n in range(t):
            x = paths[:, n, 0][None, :]
            log_g1 = np.logaddexp(log_f2 + tr["to1"], log_f1 + tr["stay1"])
            log_g2 = np.logaddexp(log_f2 + tr["stay2"], log_f1 + tr["to2"])
            log_j1 = log_g1 + _log_normal_pdf(x, means[:, 0])
            log_j2 = log_g2 + _log_normal_pdf(x, means[:, 1])
            log_c = np.logaddexp(log_j1, log_j2)
            log_f1 = log_j1 - log_c
            log_f2 = log_j2 - log_c
            out[:, n, :] = (log_c[1:] - log_c[0]).T
        return out

    def sample_paths(self, nus, thetas, horizon, rngs):
        nus = np.asarray(nus, dtype=np.int64)
        thetas = np.asarray(thetas, dtype=float).reshape(len(rngs), 2)
        spec = self.spec
        paths = np.empty((len(rngs), horizon, 1))
        m0 = spec.theta0
        for i, rng in enumerate(rngs):
            u = rng.random(horizon + 1)
            z = rng.standard_normal(horizon)
            nu = int(nus[i])
            m1p, m2p = float(thetas[i, 0]), float(thetas[i, 1])
            # pre-change: simulate the hidden chain of the no-change model
            state2 = u[0] < spec.pi2
            # post-change sampling draws from the post-change model's
            # one-step predictive given the whole realized past, so the
            # detector's increments are exact conditional log-ratios; the
            # filter must therefore track the path from time 1.
            lf1 = math.log(1.0 - spec.pi2) if spec.pi2 < 1.0 else -math.inf
            lf2 = math.log(spec.pi2) if spec.pi2 > 0.0 else -math.inf
            for n in range(horizon):
                g2 = _scalar_predict2(lf1, lf2, spec)
                if n < nu:
                    # advance the true chain under the no-change law
                    state2 = (u[n + 1] < (1.0 - spec.gamma)) if state2 else (u[n + 1] < spec.beta)
                    x = (m0[1] if state2 else m0[0]) + z[n]
                else:
                    state2 = u[n + 1] < g2
                    x = (m2p if state2 else m1p) + z[n]
                paths[i, n, 0] = x
                lf1, lf2 = _scalar_filter_update(lf1, lf2, x, m1p, m2p, spec)
        return paths

    def info_number(self, theta_vec: np.ndarray) -> float:
        """Long-run LLR rate, by quadrature; symmetric transitions only."""
        if not self.spec.symmetric:
            raise NotImplementedError(
                "info number is only available for symmetric transitions "
                "(beta = gamma = 1/2)"
            )
        a1, a2 = float(theta_vec[0]), float(theta_vec[1])
        b1, b2 = self.spec.theta0

        def integrand(x):
            log_num = np.logaddexp(_log_normal_pdf(x, a1), _log_normal_pdf(x, a2))
            log_den = np.logaddexp(_log_normal_pdf(x, b1), _log_normal_pdf(x, b2))
            return (log_num - log_den) * 0.5 * math.exp(log_num)

        val, _ = quad(integrand, -np.inf, np.inf, epsabs=1e-10, limit=400)
        return float(val)


def _scalar_predict2(lf1: float, lf2: float, spec: Hmm2Spec) -> float:
    """P(next state = 2 | history) from normalized log filter values."""
    g1 = (1.0 - spec.beta) * math.exp(lf1) + spec.gamma * math.exp(lf2)
    g2 = spec.beta * math.exp(lf1) + (1.0 - spec.gamma) * math.exp(lf2)
    return g2 / (g1 + g2)


def _scalar_filter_update(lf1, lf2, x, m1, m2, spec):
    g1 = (1.0 - spec.beta) * math.exp(lf1) + spec.gamma * math.exp(lf2)
    g2 = spec.beta * math.exp(lf1) + (1.0 - spec.gamma) * math.exp(lf2)
    j1 = g1 * math.exp(_log_normal_pdf(x, m1))
    j2 = g2 * math.exp(_log_normal_pdf(x, m2))
    c = j1 + j2
    lf1 = math.log(j1 / c) if j1 > 0.0 else -math.inf
    lf2 = math.log(j2 / c) if j2 > 0.0 else -math.inf
    return lf1, lf2


def hmm2_model(spec: Hmm2Spec, grid: MixingGrid) -> TwoStateHmmModel:
    return TwoStateHmmModel(spec, grid)


def info_number(model: ObservationModel, theta) -> float:
    """Information number I_theta for an atom index or parameter vector.

    Gaussian i.i.d.: theta^2/2.  Multichannel AR: sum theta_c^2 Q_c / 2 with
    numeric Q_c.  HMM: Kullback-Leibler rate by quadrature (symmetric case).
    """
    if isinstance(theta, (int, np.integer)):
        vec = model.grid.atoms[int(theta)]
    else:
        vec = np.atleast_1d(np.asarray(theta, dtype=float))
    return model.info_number(vec)
