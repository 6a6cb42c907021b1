"""Path division multiple access: antenna selection, MRC and MMSE transceiver
design, and the treat-interference-as-noise SINR of each user."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import EffectiveChannels
from .codebook import Codebook

__all__ = [
    "BeamformerSet",
    "RateReport",
    "select_antennas",
    "mrc_design",
    "mmse_design",
    "sinr_eq21",
    "exhaustive_p1_oracle",
]

_COND_LIMIT = 1e12


@dataclass(eq=False)
class BeamformerSet:
    """Transmit beamformers and receive combiners for all users.

    Attributes
    ----------
    mode : {"mrc", "mmse"}
    v_index : ndarray of int, shape (K,)
        Codebook index per user, ``-1`` for users that stay silent.
    v : ndarray, shape (K, M_MS)
    u : list
        Unit-norm combiner per user (``None`` when empty). For MRC it lives on
        the user's associated antennas, for MMSE on all selected antennas.
    support : list of ndarray
        Row positions (into ``M_S``) that each combiner's entries refer to.
    empty : ndarray of bool
        Users with no usable antenna; they get zero rate.
    design_sinr : ndarray or None
        SINR predicted by the design (MMSE closed form).
    """

    mode: str
    v_index: np.ndarray
    v: np.ndarray
    u: list
    support: list
    empty: np.ndarray
    design_sinr: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return len(self.v_index)

    def padded(self, k: int, n_selected: int) -> np.ndarray:
        """Combiner of user ``k`` zero-padded to all selected antennas."""
        out = np.zeros(n_selected, complex)
        if self.u[k] is not None:
            out[self.support[k]] = self.u[k]
        return out


@dataclass(eq=False)
class RateReport:
    sinr: np.ndarray
    empty: np.ndarray = field(default=None)

    def __post_init__(self):
        self.sinr = np.asarray(self.sinr, dtype=float)
        if self.empty is None:
            self.empty = np.zeros(self.sinr.shape, bool)

    @property
    def rate(self) -> np.ndarray:
        return np.log2(1.0 + self.sinr)

    @property
    def sum_rate(self) -> float:
        return float(self.rate.sum())


def select_antennas(power, m_rf: int) -> np.ndarray:
    """Positions of the ``m_rf`` strongest antennas, sorted canonically.

    Ties are resolved in favour of the lower canonical position.
    """
    power = np.asarray(power, dtype=float)
    if not 1 <= m_rf <= power.size:
        raise ValueError(f"m_rf={m_rf} outside [1, {power.size}]")
    order = np.argsort(-power, kind="stable")
    return np.sort(order[:m_rf])


def _best_codeword(g: np.ndarray, codebook: Codebook) -> tuple[int, float]:
    gains = np.sum(np.abs(g @ codebook.vectors.T) ** 2, axis=0)
    i = int(np.argmax(gains))
    return i, float(gains[i])


def mrc_design(g_k, codebook: Codebook, supports: Sequence[np.ndarray] | None = None) -> BeamformerSet:
    """Per-user maximum-ratio design on the effective channels ``G_k``.

    ``g_k`` is either an :class:`EffectiveChannels` (supports are taken from its
    association) or a sequence of per-user matrices, in which case
    ``supports`` gives the ``M_S`` row positions of each matrix.
    """
    if isinstance(g_k, EffectiveChannels):
        eff = g_k
        g_k = [eff.g_self(k) for k in range(eff.n_users)]
        supports = [eff.user_antennas(k) for k in range(eff.n_users)]
    if supports is None:
        supports = [np.arange(len(g)) for g in g_k]

    K = len(g_k)
    v_index = np.full(K, -1)
    v = np.zeros((K, codebook.n_ms), complex)
    u, empty = [], np.zeros(K, bool)
    for k, g in enumerate(g_k):
        g = np.asarray(g, complex).reshape(-1, codebook.n_ms)
        if g.shape[0] == 0 or not np.any(g):
            empty[k] = True
            u.append(None)
            continue
        i, _ = _best_codeword(g, codebook)
        v_index[k] = i
        v[k] = codebook.vectors[i]
        gv = g @ v[k]
        u.append(gv / np.linalg.norm(gv))
    return BeamformerSet("mrc", v_index, v, u, [np.asarray(s, int) for s in supports], empty)


def _coupling(eff: EffectiveChannels, k: int, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Columns ``G_{kk'}[i] v_k'`` for every (k', i) seen by user ``k``.

    Returns ``(A, owner, desired)`` where ``A`` is ``(S, n_keys)``, ``owner``
    the transmitting user of each column and ``desired`` the column of
    ``(k, 0)``.
    """
    S, K = eff.n_selected, eff.n_users
    width = 2 * eff.mu + 1
    hv = np.einsum("klsn,kn->kls", eff.rows, v)  # (K, L, S)
    shift = eff.shift[:, k]  # (S, K, L)
    kk, ll = np.nonzero(eff.active)
    keys = kk[None, :] * width + shift[:, kk, ll] + eff.mu  # (S, P)
    A = np.zeros((S, K * width), complex)
    np.add.at(A, (np.repeat(np.arange(S), kk.size), keys.ravel()), hv[kk, ll].T.ravel())
    owner = np.repeat(np.arange(K), width)
    return A, owner, k * width + eff.mu


def mmse_design(
    effective: EffectiveChannels, powers, noise_var: float, codebook: Codebook
) -> BeamformerSet:
    """Codeword by desired-signal power, then the MMSE combiner per user."""
    if noise_var <= 0:
        raise ValueError("MMSE design needs noise_var > 0")
    K, S = effective.n_users, effective.n_selected
    powers = np.broadcast_to(np.asarray(powers, float), (K,))
    v_index = np.full(K, -1)
    v = np.zeros((K, codebook.n_ms), complex)
    empty = np.zeros(K, bool)
    for k in range(K):
        g0 = effective.g0(k)
        if not np.any(g0):
            empty[k] = True
            continue
        v_index[k], _ = _best_codeword(g0, codebook)
        v[k] = codebook.vectors[v_index[k]]

    u, sinr = [], np.zeros(K)
    for k in range(K):
        if empty[k]:
            u.append(None)
            continue
        A, owner, des = _coupling(effective, k, v)
        d = A[:, des]
        interf = np.delete(A, des, axis=1) * np.sqrt(np.delete(powers[owner], des))
        cov = interf @ interf.conj().T + noise_var * np.eye(S)
        cond = np.linalg.cond(cov)
        if cond > _COND_LIMIT:
            warnings.warn(f"interference covariance of user {k} is ill-conditioned ({cond:.2e})", stacklevel=2)
        try:
            w = cho_solve(cho_factor(cov), d)
        except np.linalg.LinAlgError:
            # round-off broke positive definiteness; fall back to least squares
            w = np.linalg.lstsq(cov, d, rcond=None)[0]
        u.append(w / np.linalg.norm(w))
        sinr[k] = powers[k] * float(np.real(np.vdot(d, w)))
    support = [np.arange(S)] * K
    return BeamformerSet("mmse", v_index, v, u, support, empty, design_sinr=sinr)


def sinr_eq21(
    effective: EffectiveChannels, beamformers: BeamformerSet, powers, noise_var: float
) -> RateReport:
    """SINR with ISI and IUI treated as noise, summed term by term over ``G_{kk'}[i]``.

    MRC combiners are zero-padded to all selected antennas first, so both
    designs are scored with the same expression.
    """
    K, S = effective.n_users, effective.n_selected
    if beamformers.n_users != K:
        raise ValueError("beamformer set and channels disagree on the number of users")
    for k in range(K):
        if beamformers.u[k] is not None and len(beamformers.u[k]) != len(beamformers.support[k]):
            raise ValueError(f"combiner of user {k} does not match its antenna support")
        if len(beamformers.support[k]) and beamformers.support[k].max() >= S:
            raise ValueError(f"combiner of user {k} refers to antennas outside M_S")
    powers = np.broadcast_to(np.asarray(powers, float), (K,))

    sinr = np.zeros(K)
    empty = beamformers.empty.copy()
    for k in range(K):
        if empty[k]:
            continue
        ubar = beamformers.padded(k, S)
        desired = 0.0
        interference = 0.0
        for (kk, kp, i), g in effective.g_cross.items():
            if kk != k:
                continue
            term = powers[kp] * abs(np.vdot(ubar, g @ beamformers.v[kp])) ** 2
            if kp == k and i == 0:
                desired = term
            else:
                interference += term
        denom = interference + noise_var
        sinr[k] = desired / denom if denom > 0 else (np.inf if desired > 0 else 0.0)
    return RateReport(sinr, empty)


def exhaustive_p1_oracle(
    effective: EffectiveChannels, powers, noise_var: float, codebook: Codebook, max_evals: int = 10**6
) -> tuple[BeamformerSet, float]:
    """Brute-force sum-rate optimum over all codeword tuples (MMSE combiners).

    Only meant as a test oracle; refuses instances with ``N_CB^K > max_evals``.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    K, S = effective.n_users, effective.n_selected
    if codebook.n_cb**K > max_evals:
        raise ValueError(f"N_CB^K = {codebook.n_cb ** K} exceeds the limit of {max_evals}")
    powers = np.broadcast_to(np.asarray(powers, float), (K,))
    eye = noise_var * np.eye(S)

    best_rate, best = -np.inf, None
    for combo in itertools.product(range(codebook.n_cb), repeat=K):
        v = codebook.vectors[list(combo)]
        sinr = np.zeros(K)
        combiners = []
        for k in range(K):
            A, owner, des = _coupling(effective, k, v)
            d = A[:, des]
            interf = np.delete(A, des, axis=1) * np.sqrt(np.delete(powers[owner], des))
            w = np.linalg.solve(interf @ interf.conj().T + eye, d)
            sinr[k] = powers[k] * float(np.real(np.vdot(d, w)))
            nw = np.linalg.norm(w)
            combiners.append(w / nw if nw > 0 else None)
        rate = float(np.log2(1 + sinr).sum())
        if rate > best_rate:
            best_rate = rate
            best = (np.array(combo), v.copy(), combiners, sinr)
    v_index, v, combiners, sinr = best
    empty = np.array([c is None for c in combiners])
    out = BeamformerSet("mmse", v_index, v, combiners, [np.arange(S)] * K, empty, design_sinr=sinr)
    return out, best_rate
