"""Synthetic sparse + low-rank sequences under subspace addition/deletion.

Time is 1-based throughout this module (frame ``t`` is column ``t - 1`` of
the generated matrices) to keep change times and schedules readable.

Columns of the orthonormalized Gaussian matrix ``U`` are referred to by
0-based id. Epoch ``j`` (``j = 0`` before the first change) has basis
``P_j = [P_{j-1} minus its deleted columns, P_{j,new}]`` in that order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .linalg import qr_decompose

# one independent stream per random role
STREAMS = ("U", "signs", "magnitudes", "coefficients", "noise")

MAGIC = b"RPCS"
FORMAT_VERSION = 1


def stream(seed: int, role: str) -> np.random.Generator:
    """Counter-based (Philox) generator for one role, independent of the others."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS.index(role),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SubspaceChangeModel:
    n: int
    r0: int
    change_times: list[int] = field(default_factory=list)
    c_new: list[int] = field(default_factory=list)
    # per change: U-column ids removed from the previous basis
    deleted: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        J = len(self.change_times)
        if len(self.c_new) != J or len(self.deleted) != J:
            raise ConfigError("change_times, c_new and deleted must have equal length")
        if any(b <= a for a, b in zip(self.change_times, self.change_times[1:])):
            raise ConfigError("change times must be strictly increasing")
        if self.r0 < 0 or self.r0 > self.n:
            raise ConfigError("need 0 <= r0 <= n")
        cols = list(range(self.r0))
        nxt = self.r0
        for j in range(J):
            dead = list(self.deleted[j])
            if len(set(dead)) != len(dead) or not set(dead) <= set(cols):
                raise ConfigError(f"epoch {j + 1}: deleted ids {dead} not all in the current basis")
            nxt += self.c_new[j]
        if nxt > self.n:
            raise ConfigError(f"total directions {nxt} exceed n={self.n}")

    @property
    def total_columns(self) -> int:
        return self.r0 + sum(self.c_new)

    def epoch_columns(self) -> list[list[int]]:
        """U-column ids of ``P_j`` for ``j = 0..J``."""
        out = [list(range(self.r0))]
        nxt = self.r0
        for j, t in enumerate(self.change_times):
            keep = [c for c in out[-1] if c not in set(self.deleted[j])]
            new = list(range(nxt, nxt + self.c_new[j]))
            nxt += self.c_new[j]
            out.append(keep + new)
        return out

    def new_columns(self, j: int) -> list[int]:
        """U-column ids of ``P_{j,new}`` (``j >= 1``)."""
        start = self.r0 + sum(self.c_new[: j - 1])
        return list(range(start, start + self.c_new[j - 1]))

    def ranks(self) -> list[int]:
        return [len(c) for c in self.epoch_columns()]

    def epoch_at(self, t: int) -> int:
        return int(np.searchsorted(self.change_times, t, side="right"))


@dataclass
class CoefficientSchedule:
    """Coefficient bounds: ``a_t`` entries are uniform on ``[-gamma, gamma]``.

    ``existing[j]`` lists the bounds for the non-new columns of ``P_j`` (in
    column order); for ``j = 0`` that is every column. The new columns of
    epoch ``j >= 1`` follow the ramp ``min(ratio**(k-1) * gamma_new, gamma_star)``
    over windows of ``ramp_width`` frames, ``k = 1..ramp_steps[j-1]``, then stay
    at the last ramp value.
    """

    existing: list[list[float]]
    gamma_new: float = 1.0
    ratio: float = 1.1
    ramp_steps: list[int] = field(default_factory=list)
    ramp_width: int = 100
    gamma_star: float = float("inf")

    def new_gamma(self, j: int, t: int, t_j: int) -> float:
        k = (t - t_j) // self.ramp_width + 1
        k = min(k, self.ramp_steps[j - 1])
        return float(min(self.ratio ** (k - 1) * self.gamma_new, self.gamma_star))


@dataclass
class SupportSchedule:
    """Sparse part: zero up to ``t_train``; afterwards ``s`` entries on a
    window shifted by one index every ``Delta`` frames, shift
    ``q = floor((t - t_train - 1) / Delta)``; wraps modulo ``n``."""

    s: int
    Delta: int
    t_train: int
    low: float = 2.0
    high: float = 3.0

    def support(self, t: int, n: int) -> np.ndarray:
        if t <= self.t_train:
            return np.zeros(0, dtype=int)
        q = (t - self.t_train - 1) // self.Delta
        return np.sort((np.arange(self.s) + q) % n)


@dataclass
class GeneratedSequence:
    M: np.ndarray
    S: np.ndarray
    L: np.ndarray
    U: np.ndarray
    gammas: np.ndarray  # (t_max, total_columns); zero where a column is inactive
    model: SubspaceChangeModel
    coeffs: CoefficientSchedule
    support_schedule: SupportSchedule
    seed: int

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def t_max(self) -> int:
        return self.M.shape[1]

    @property
    def t_train(self) -> int:
        return self.support_schedule.t_train

    def frame(self, t: int) -> np.ndarray:
        return self.M[:, t - 1]

    def basis_columns(self, t: int) -> list[int]:
        return self.model.epoch_columns()[self.model.epoch_at(t)]

    def P_at(self, t: int) -> np.ndarray:
        """True basis ``P_(t)``."""
        return self.U[:, self.basis_columns(t)]

    def P_epoch(self, j: int) -> np.ndarray:
        return self.U[:, self.model.epoch_columns()[j]]

    def P_new(self, j: int) -> np.ndarray:
        return self.U[:, self.model.new_columns(j)]

    def support(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.S[:, t - 1])

    def Lambda_at(self, t: int) -> np.ndarray:
        """Diagonal of ``Cov(a_t)`` in the column order of ``P_(t)``."""
        return self.gammas[t - 1, self.basis_columns(t)] ** 2 / 3.0


def _gamma_table(model: SubspaceChangeModel, coeffs: CoefficientSchedule, t_max: int) -> np.ndarray:
    J = len(model.change_times)
    if len(coeffs.existing) != J + 1:
        raise ConfigError(f"need {J + 1} coefficient tables, got {len(coeffs.existing)}")
    if len(coeffs.ramp_steps) != J:
        raise ConfigError(f"need {J} ramp step counts, got {len(coeffs.ramp_steps)}")
    cols = model.epoch_columns()
    G = np.zeros((t_max, model.total_columns))
    bounds = [1] + list(model.change_times) + [t_max + 1]
    for j in range(J + 1):
        new = set(model.new_columns(j)) if j else set()
        old = [c for c in cols[j] if c not in new]
        table = coeffs.existing[j]
        if len(table) != len(old):
            raise ConfigError(
                f"epoch {j}: coefficient table has {len(table)} entries, basis has {len(old)} old columns"
            )
        a, b = bounds[j], min(bounds[j + 1], t_max + 1)
        if a > t_max:
            continue
        G[a - 1 : b - 1, old] = table
        for t in range(a, b):
            g = coeffs.new_gamma(j, t, model.change_times[j - 1]) if j else 0.0
            for c in new:
                G[t - 1, c] = g
    return G


def generate(
    model: SubspaceChangeModel,
    coeffs: CoefficientSchedule,
    support_schedule: SupportSchedule,
    t_max: int,
    seed: int,
) -> GeneratedSequence:
    """Draw ``M = S + L`` for ``t = 1..t_max``."""
    n = model.n
    ss = support_schedule
    if ss.s > n or ss.s < 0:
        raise ConfigError(f"support size {ss.s} incompatible with n={n}")
    if model.change_times and model.change_times[0] <= ss.t_train:
        raise ConfigError("first change time must come after t_train")
    gammas = _gamma_table(model, coeffs, t_max)

    U = qr_decompose(stream(seed, "U").standard_normal((n, model.total_columns)))[0]
    unit = stream(seed, "coefficients").uniform(-1.0, 1.0, size=(t_max, model.total_columns))
    A = gammas * unit  # inactive columns have gamma 0
    L = U @ A.T

    S = np.zeros((n, t_max))
    n_sparse = max(t_max - ss.t_train, 0)
    signs = np.where(stream(seed, "signs").random((n_sparse, ss.s)) < 0.5, -1.0, 1.0)
    mags = stream(seed, "magnitudes").uniform(ss.low, ss.high, size=(n_sparse, ss.s))
    for i, t in enumerate(range(ss.t_train + 1, t_max + 1)):
        S[ss.support(t, n), t - 1] = signs[i] * mags[i]
    M = S + L
    return GeneratedSequence(M, S, L, U, gammas, model, coeffs, ss, int(seed))


def training_block(seq: GeneratedSequence, noise_amplitude: float = 1e-3) -> np.ndarray:
    """``L`` for ``t <= t_train`` plus i.i.d. uniform noise in ``[-a, a]``."""
    if noise_amplitude < 0:
        raise ValueError("noise amplitude must be nonnegative")
    block = seq.L[:, : seq.t_train].copy()
    if noise_amplitude > 0:
        block += stream(seq.seed, "noise").uniform(-noise_amplitude, noise_amplitude, size=block.shape)
    return block


def covariance_spectrum(seq: GeneratedSequence, t: int) -> np.ndarray:
    """Diagonal of ``Lambda_t`` sorted non-increasing."""
    if not 1 <= t <= seq.t_max:
        raise ValueError(f"t={t} outside 1..{seq.t_max}")
    return np.sort(seq.Lambda_at(t))[::-1]


def write_sequence(seq: GeneratedSequence, path) -> None:
    """Flat binary: ``RPCS``, u32 version, u32 n, u32 t_max, then M, S, L as
    column-major little-endian float64."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC + struct.pack("<III", FORMAT_VERSION, seq.n, seq.t_max))
        for X in (seq.M, seq.S, seq.L):
            fh.write(np.asarray(X, dtype="<f8").tobytes(order="F"))


def read_sequence(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_sequence`; returns ``(M, S, L)``."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    version, n, t_max = struct.unpack("<III", raw[4:16])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    size = n * t_max
    body = np.frombuffer(raw, dtype="<f8", offset=16)
    if body.size != 3 * size:
        raise ValueError(f"{path}: expected {3 * size} values, found {body.size}")
    M, S, L = (body[i * size : (i + 1) * size].reshape((n, t_max), order="F").astype(float) for i in range(3))
    return M, S, L
