"""Online ReProCS tracker with cluster-PCA subspace deletion.

Per frame: project the measurement orthogonally to the current subspace
estimate, recover the sparse part by l1 minimization, threshold its support,
debias by least squares on that support, and take the remainder as the
low-rank part. Low-rank estimates are buffered; every ``alpha`` frames after
a change time a projection-PCA step refines the new directions (``K`` times),
then ``vartheta`` windows of ``alpha_tilde`` frames are used to re-estimate
the whole subspace one eigenvalue cluster at a time, which drops deleted
directions. With ``deletion_enabled=False`` the tracker is plain ReProCS.

Change times are supplied, not detected. Time is 1-based, as in
:mod:`reprocs.datagen`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .clustering import cluster_eigenvalues
from .errors import ConfigError, RankDeficientError, SequencingError
from .linalg import PcaResult, as_basis, empty_basis, proj_pca, project_out
from .sparse import ProjectorOperator, energy_threshold, estimate_support, ls_debias, solve_bpdn

log = logging.getLogger(__name__)


@dataclass
class TrackerConfig:
    """Algorithm parameters plus the model knowledge the tracker needs.

    ``xi=None`` selects the adaptive bound ``xi_factor * ||beta_hat_{t-1}||``;
    ``omega=None`` selects ``omega_factor * energy_threshold(S_cs, energy_fraction)``.
    ``clusters[j]`` gives the cluster sizes for the subspace after change
    ``j + 1``; leave ``clusters`` as ``None`` to cluster eigenvalues at run
    time, in which case ``c_old`` is required to know the target rank.
    """

    alpha: int
    alpha_tilde: int
    K: int
    t_train: int
    change_times: list[int] = field(default_factory=list)
    c_new: list[int] = field(default_factory=list)
    clusters: list[list[int]] | None = None
    c_old: list[int] | None = None
    deletion_enabled: bool = True
    xi: float | None = None
    omega: float | None = None
    xi_factor: float = 2.0
    omega_factor: float = 0.5
    energy_fraction: float = 0.99
    cs_tol: float = 1e-4
    cs_max_iter: int = 5000
    d1: int = 3
    h_target: float = 0.1

    def validate(self, r0: int | None = None) -> None:
        if self.alpha < 1 or self.alpha_tilde < 1 or self.K < 1:
            raise ConfigError("alpha, alpha_tilde and K must all be >= 1")
        J = len(self.change_times)
        if len(self.c_new) != J:
            raise ConfigError("c_new needs one entry per change time")
        if any(b <= a for a, b in zip(self.change_times, self.change_times[1:])):
            raise ConfigError("change times must be strictly increasing")
        if J and self.change_times[0] <= self.t_train:
            raise ConfigError("first change time must be after t_train")
        if self.clusters is not None and len(self.clusters) != J:
            raise ConfigError("clusters needs one size list per change time")
        if self.c_old is not None and len(self.c_old) != J:
            raise ConfigError("c_old needs one entry per change time")
        if J and self.deletion_enabled and self.clusters is None and self.c_old is None:
            raise ConfigError("automatic clustering needs c_old to know each epoch's rank")
        if self.xi is not None and self.xi < 0:
            raise ConfigError("xi must be nonnegative")
        if self.omega is not None and self.omega < 0:
            raise ConfigError("omega must be nonnegative")
        for j in range(J - 1):
            gap = self.change_times[j + 1] - self.change_times[j]
            need = self.K * self.alpha
            if self.deletion_enabled:
                theta = len(self.clusters[j]) if self.clusters is not None else 1
                need += theta * self.alpha_tilde
                if gap <= need:
                    raise ConfigError(
                        f"t_{j + 2} - t_{j + 1} = {gap} must exceed K*alpha + theta*alpha_tilde = {need}"
                    )
            elif gap < need:
                raise ConfigError(f"t_{j + 2} - t_{j + 1} = {gap} is shorter than K*alpha = {need}")
        if r0 is not None and self.deletion_enabled:
            rank = r0
            for j in range(J):
                if self.c_old is not None:
                    rank = rank + self.c_new[j] - self.c_old[j]
                    if rank < 1:
                        raise ConfigError(f"epoch {j + 1} would have rank {rank}")
                if self.clusters is not None:
                    sizes = self.clusters[j]
                    if any(c < 1 for c in sizes):
                        raise ConfigError(f"epoch {j + 1}: cluster sizes must be positive")
                    if self.c_old is not None and sum(sizes) != rank:
                        raise ConfigError(
                            f"epoch {j + 1}: cluster sizes sum to {sum(sizes)}, expected rank {rank}"
                        )
                    rank = sum(sizes)


@dataclass
class TrackerState:
    t: int
    P_hat: np.ndarray
    P_prev: np.ndarray
    P_new_hat: np.ndarray
    G_hats: list[np.ndarray] = field(default_factory=list)
    j: int = 1
    k: int = 1
    phase: str = "stable"
    L_buffer: list[np.ndarray] = field(default_factory=list)
    window_frames: int = 0
    windows: list[np.ndarray] = field(default_factory=list)
    cluster_sizes: list[int] | None = None
    prev_L_hat: np.ndarray | None = None


@dataclass
class FrameRecord:
    t: int
    S_hat: np.ndarray
    L_hat: np.ndarray
    T_hat: np.ndarray
    xi_used: float
    omega_used: float
    warnings: tuple[str, ...] = ()
    failed: bool = False
    cs_iterations: int = 0
    event: str | None = None
    phase: str = "stable"
    P_hat: np.ndarray | None = field(default=None, repr=False)


def estimate_initial_subspace(training_block: np.ndarray, r0: int) -> PcaResult:
    """Top-``r0`` left singular vectors of the training block."""
    training_block = np.asarray(training_block, dtype=float)
    n, t_train = training_block.shape
    if r0 > min(n, t_train):
        raise ValueError(f"r0={r0} exceeds min(n, t_train) = {min(n, t_train)}")
    return proj_pca(training_block, None, r0)


class Tracker:
    """ReProCS / ReProCS-cPCA state machine; feed frames with :meth:`step`."""

    def __init__(self, P0_hat: np.ndarray, config: TrackerConfig, last_training_frame=None):
        P0 = as_basis(P0_hat)
        if P0.shape[1] == 0:
            raise ConfigError("initial subspace estimate must be nonempty")
        config.validate(r0=P0.shape[1])
        self.config = config
        self.n = P0.shape[0]
        self.state = TrackerState(
            t=config.t_train,
            P_hat=P0,
            P_prev=P0,
            P_new_hat=empty_basis(self.n),
            prev_L_hat=None if last_training_frame is None else np.asarray(last_training_frame, float),
        )

    # -- bookkeeping helpers -------------------------------------------------
    def _t_j(self) -> int | None:
        cts = self.config.change_times
        return cts[self.state.j - 1] if self.state.j <= len(cts) else None

    def _target_rank(self) -> int:
        cfg, st = self.config, self.state
        j = st.j - 1
        if cfg.c_old is not None:
            return st.P_prev.shape[1] + cfg.c_new[j] - cfg.c_old[j]
        return sum(cfg.clusters[j])

    # -- per-frame recovery --------------------------------------------------
    def _xi(self, phi: ProjectorOperator) -> float:
        cfg = self.config
        if cfg.xi is not None:
            return cfg.xi
        prev = self.state.prev_L_hat
        if prev is None:
            return 0.0
        return cfg.xi_factor * float(np.linalg.norm(phi.apply(prev)))

    def step(self, M_t: np.ndarray) -> FrameRecord:
        """Process the next frame and return its record."""
        cfg, st = self.config, self.state
        M_t = np.asarray(M_t, dtype=float)
        if M_t.shape != (self.n,) or not np.all(np.isfinite(M_t)):
            raise ValueError("frame must be a finite vector of length n")
        t = st.t + 1
        phi = ProjectorOperator(st.P_hat)
        y = phi.apply(M_t)
        xi = self._xi(phi)
        sol = solve_bpdn(phi, y, xi, tol=cfg.cs_tol, max_iter=cfg.cs_max_iter)
        warnings = [] if sol.converged else ["cs_not_converged"]
        x = sol.x_cs
        if cfg.omega is not None:
            omega = cfg.omega
        elif np.any(x):
            omega = cfg.omega_factor * energy_threshold(x, cfg.energy_fraction)
        else:
            omega = 0.0
        T_hat = estimate_support(x, omega)
        failed = False
        try:
            S_hat = ls_debias(phi, y, T_hat)
        except RankDeficientError:
            log.warning("t=%d: support columns of Phi are dependent; frame marked failed", t)
            S_hat = np.zeros(self.n)
            failed = True
            warnings.append("ls_rank_failure")
        L_hat = M_t - S_hat
        st.t = t
        st.prev_L_hat = L_hat
        event, extra = self._update_subspace(t, L_hat, failed)
        warnings.extend(extra)
        return FrameRecord(
            t=t,
            S_hat=S_hat,
            L_hat=L_hat,
            T_hat=T_hat,
            xi_used=xi,
            omega_used=omega,
            warnings=tuple(warnings),
            failed=failed,
            cs_iterations=sol.iterations,
            event=event,
            phase=st.phase if event is None else event.split()[0],
            P_hat=st.P_hat,
        )

    def run(self, frames) -> list[FrameRecord]:
        """Step through the columns of ``frames`` (an ``n x T`` array)."""
        frames = np.asarray(frames, dtype=float)
        return [self.step(frames[:, i]) for i in range(frames.shape[1])]

    # -- subspace updates ----------------------------------------------------
    def _buffer(self, L_hat: np.ndarray, failed: bool) -> None:
        st = self.state
        st.window_frames += 1
        if not failed:
            st.L_buffer.append(L_hat)

    def _take_window(self, expected: int) -> np.ndarray | None:
        st = self.state
        if st.window_frames != expected:
            raise SequencingError(
                f"t={st.t}: window holds {st.window_frames} frames, expected {expected}"
            )
        D = np.column_stack(st.L_buffer) if st.L_buffer else None
        st.L_buffer = []
        st.window_frames = 0
        return D

    def _update_subspace(self, t: int, L_hat: np.ndarray, failed: bool):
        cfg, st = self.config, self.state
        t_j = self._t_j()
        if st.phase == "stable" and t_j is not None and t == t_j:
            st.phase = "addition"
            st.k = 1
        if st.phase == "addition":
            self._buffer(L_hat, failed)
            if t == t_j + st.k * cfg.alpha - 1:
                k = st.k
                warnings = self.addition_update()
                return f"addition {k}", warnings
        elif st.phase == "deletion":
            self._buffer(L_hat, failed)
            t_tilde = t_j + cfg.K * cfg.alpha
            i = len(st.windows) + 1
            if t == t_tilde + i * cfg.alpha_tilde - 1:
                D = self._take_window(cfg.alpha_tilde)
                st.windows.append(D)
                if st.cluster_sizes is None:
                    st.cluster_sizes = self._auto_clusters(D)
                if len(st.windows) == len(st.cluster_sizes):
                    warnings = self.cluster_pca_update(st.cluster_sizes)
                    return "deletion", warnings
        return None, []

    def _auto_clusters(self, D: np.ndarray | None) -> list[int]:
        cfg, st = self.config, self.state
        r_j = self._target_rank()
        if D is None:
            return [r_j]
        values = proj_pca(D, None, min(r_j, D.shape[1])).values[:r_j]
        values = np.maximum(values, np.finfo(float).tiny)
        sizes = list(cluster_eigenvalues(values, d1=cfg.d1, h_target=cfg.h_target).sizes)
        t_next = cfg.change_times[st.j] if st.j < len(cfg.change_times) else None
        t_del = self._t_j() + cfg.K * cfg.alpha + len(sizes) * cfg.alpha_tilde - 1
        if t_next is not None and t_del >= t_next:
            raise ConfigError(
                f"epoch {st.j}: {len(sizes)} clusters put the deletion step at t={t_del}, "
                f"past the next change time {t_next}"
            )
        log.info("epoch %d: eigenvalue clusters %s", st.j, sizes)
        return sizes

    def addition_update(self) -> list[str]:
        """Projection-PCA on the last ``alpha`` frames to refine the new directions."""
        cfg, st = self.config, self.state
        if st.phase != "addition":
            raise SequencingError(f"addition update requested in phase {st.phase!r}")
        D = self._take_window(cfg.alpha)
        warnings = []
        c_new = cfg.c_new[st.j - 1]
        if D is None or D.shape[1] < c_new:
            warnings.append("addition_skipped")
        else:
            res = proj_pca(D, st.P_prev, c_new)
            warnings.extend(res.warnings)
            st.P_new_hat = res.basis
            st.P_hat = np.hstack([st.P_prev, st.P_new_hat])
        if st.k < cfg.K:
            st.k += 1
            return warnings
        st.k = 1
        if cfg.deletion_enabled:
            st.phase = "deletion"
            st.windows = []
            st.cluster_sizes = list(cfg.clusters[st.j - 1]) if cfg.clusters is not None else None
        else:
            self._finish_epoch(st.P_hat)
        return warnings

    def cluster_pca_update(self, cluster_sizes: list[int]) -> list[str]:
        """Re-estimate the subspace one cluster at a time, window ``i`` for cluster ``i``."""
        st = self.state
        r_j = self._target_rank() if self.config.c_old is not None else sum(cluster_sizes)
        if sum(cluster_sizes) != r_j:
            raise ConfigError(f"cluster sizes {cluster_sizes} do not sum to rank {r_j}")
        if len(st.windows) != len(cluster_sizes):
            raise SequencingError(
                f"{len(st.windows)} windows buffered for {len(cluster_sizes)} clusters"
            )
        warnings = []
        G_hats: list[np.ndarray] = []
        for D, c in zip(st.windows, cluster_sizes):
            detected = np.hstack(G_hats) if G_hats else empty_basis(self.n)
            if D is None or D.shape[1] < c:
                warnings.append("cluster_skipped")
                return warnings
            res = proj_pca(D, detected, c)
            warnings.extend(res.warnings)
            G_hats.append(res.basis)
        st.G_hats = G_hats
        self._finish_epoch(np.hstack(G_hats))
        return warnings

    def _finish_epoch(self, P_j: np.ndarray) -> None:
        st = self.state
        st.P_hat = P_j
        st.P_prev = P_j
        st.P_new_hat = empty_basis(self.n)
        st.windows = []
        st.cluster_sizes = None
        st.phase = "stable"
        st.j += 1
