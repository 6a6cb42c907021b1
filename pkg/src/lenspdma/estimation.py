"""Three-phase training protocol for MRC-based PDMA.

The protocol is simulated as one continuous frame through the true discrete
channel::

    | phase 1: probe  | guard | phase 2: pilots | guard | phase 3: F columns | tail |
    |  T1 = ceil(M/R)+mu | mu |       T2         |  mu   |       M_MS         |  mu  |

Users are silent outside their transmit windows (and before the frame), so any
leakage between phases comes only from the channel's delay spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import DiscreteChannel
from .codebook import omni_beamformer, training_matrix

__all__ = [
    "TrainingConfig",
    "Overhead",
    "Phase1Result",
    "Phase2Result",
    "Phase3Result",
    "TrainingReport",
    "training_overhead",
    "phase1_probe",
    "phase2_path_ls",
    "phase3_effective_ls",
    "estimate_channel",
]


@dataclass(frozen=True)
class TrainingConfig:
    """Training parameters.

    Parameters
    ----------
    p_tr : float
        Training power per user (linear, relative to unit noise power).
    rho : float
        Association threshold.
    t2 : int or None
        Phase-2 pilot length; ``None`` uses the minimum ``K (mu + 1)``.
    pilot_seed : int
        Seed of the QPSK pilot sequences.
    pilots : {"zc", "qpsk"}
        ``"zc"`` sends cyclic shifts of one Zadoff-Chu sequence and fills the
        guard before phase 2 with a cyclic prefix, which makes the pilot matrix
        circulant with ``S^H S = T2 I``. ``"qpsk"`` keeps the guard silent and
        uses seeded random QPSK, giving a zero-padded block-Toeplitz ``S``;
        that matrix is badly conditioned at the minimum ``T2``.
    mu : int or None
        Delay-spread bound assumed by the protocol; ``None`` takes the
        channel's largest delay.
    symbol : complex
        Unit-modulus symbol sent in phases 1 and 3.
    omni_range : float
        Half-width of the angular support the omni vector is tuned for.
    """

    p_tr: float = 10.0
    rho: float = 0.0
    t2: int | None = None
    pilot_seed: int = 0
    pilots: str = "zc"
    mu: int | None = None
    symbol: complex = 1.0 + 0.0j
    omni_range: float = math.pi / 2

    def __post_init__(self):
        if self.p_tr <= 0:
            raise ValueError("p_tr must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.pilots not in ("zc", "qpsk"):
            raise ValueError(f"unknown pilot family {self.pilots!r}")
        if not math.isclose(abs(self.symbol), 1.0):
            raise ValueError("training symbol must have unit modulus")

    def training_snr_db(self, noise_var: float = 1.0) -> float:
        return 10 * math.log10(self.p_tr / noise_var)


@dataclass(frozen=True)
class Overhead:
    t1: int
    t2_total: int
    t3: int
    total: int
    brute_force: int
    coherence: int

    @property
    def ratio(self) -> float:
        """Fraction of the coherence block spent on training."""
        return self.total / self.coherence

    @property
    def efficiency(self) -> float:
        """Rate scaling ``1 - T / T_c`` (floored at zero)."""
        return max(0.0, 1.0 - self.ratio)


def training_overhead(
    m_bs: int, m_rf: int, m_ms: int, mu: int, k: int, coherence: int = 50_000, t2: int | None = None
) -> Overhead:
    """Durations of the three phases and of brute-force tap estimation."""
    if min(m_bs, m_rf, m_ms, k) < 1 or mu < 0:
        raise ValueError("counts must be >= 1 and mu >= 0")
    if t2 is None:
        t2 = k * (mu + 1)
    scan = math.ceil(m_bs / m_rf)
    t1 = scan + mu
    t2_total = mu + t2
    t3 = m_ms + 2 * mu
    return Overhead(t1, t2_total, t3, t1 + t2_total + t3, scan * mu * k * m_ms, coherence)


@dataclass(frozen=True, eq=False)
class _Frame:
    """Transmit schedule of the whole training frame."""

    x: np.ndarray  # (K, T_total, M_MS)
    mu: int
    t1: int
    t2: int
    start2: int
    start3: int
    pilots: np.ndarray  # (K, t2)
    omni_gain: float
    train: np.ndarray  # F, (M_MS, M_MS)


def _frame_mu(discrete: DiscreteChannel, cfg: TrainingConfig) -> int:
    mu = discrete.mu if cfg.mu is None else cfg.mu
    if mu < discrete.mu:
        raise ValueError(f"protocol mu={mu} is below the channel's largest delay {discrete.mu}")
    return mu


def _qpsk_pilots(n_users: int, length: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=(n_users, length))))


def _zc_pilots(n_users: int, length: int, mu: int) -> np.ndarray:
    """Cyclic shifts of a root-1 Zadoff-Chu sequence, user ``k`` shifted by ``k * (length // K)``."""
    n = np.arange(length)
    base = np.exp(-1j * np.pi * n * (n + (length % 2)) / length)
    step = length // n_users
    return np.stack([np.roll(base, k * step) for k in range(n_users)])


def _pilot_matrix(pilots: np.ndarray, mu: int, cyclic: bool) -> np.ndarray:
    """``S`` with column ``i K + k`` holding ``s_k[n - i]``."""
    K, t2 = pilots.shape
    S = np.zeros((t2, (mu + 1) * K), complex)
    for i in range(mu + 1):
        if cyclic:
            S[:, i * K : (i + 1) * K] = np.roll(pilots, i, axis=1).T
        else:
            S[i:, i * K : (i + 1) * K] = pilots[:, : t2 - i].T
    return S


def _build_frame(discrete: DiscreteChannel, cfg: TrainingConfig, m_rf: int) -> _Frame:
    K, n_ms = discrete.n_users, discrete.n_ms
    mu = _frame_mu(discrete, cfg)
    t2 = K * (mu + 1) if cfg.t2 is None else cfg.t2
    if t2 < K * (mu + 1):
        raise ValueError(f"t2={t2} is below the identifiability limit K(mu+1)={K * (mu + 1)}")
    omni = omni_beamformer(discrete.upa, cfg.omni_range, cfg.omni_range)
    f_train = training_matrix(n_ms)
    amp = math.sqrt(cfg.p_tr)

    t1 = math.ceil(discrete.n_bs / m_rf) + mu
    start2 = t1 + mu
    start3 = start2 + t2 + mu
    total = start3 + n_ms + mu
    if cfg.pilots == "zc":
        pilots = _zc_pilots(K, t2, mu)
    else:
        pilots = _qpsk_pilots(K, t2, cfg.pilot_seed)

    x = np.zeros((K, total, n_ms), complex)
    x[:, :t1] = amp * cfg.symbol * omni.vector
    x[:, start2 : start2 + t2] = amp * pilots[:, :, None] * omni.vector
    if cfg.pilots == "zc" and mu:
        # cyclic prefix inside the guard; phase-1 leakage only reaches the prefix
        x[:, start2 - mu : start2] = amp * pilots[:, t2 - mu :, None] * omni.vector
    x[:, start3 : start3 + n_ms] = amp * cfg.symbol * f_train.T
    return _Frame(x, mu, t1, t2, start2, start3, pilots, omni.gain, f_train)


def _receive(discrete: DiscreteChannel, antennas: np.ndarray, times: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Noise-free samples ``y_m[t]`` for antenna positions ``antennas`` at ``times``.

    ``times`` has shape ``(len(antennas), n_t)``.
    """
    out = np.zeros(times.shape, complex)
    for k, l in zip(*np.nonzero(discrete.active)):
        idx = times - discrete.delays[k, l]
        valid = (idx >= 0) & (idx < x.shape[1])
        xs = x[k][np.clip(idx, 0, x.shape[1] - 1)] * valid[..., None]
        out += np.einsum("sn,stn->st", discrete.h[k, l, antennas], xs)
    return out


def _noise(rng: np.random.Generator, shape, noise_var: float) -> np.ndarray:
    if noise_var == 0:
        return np.zeros(shape, complex)
    return math.sqrt(noise_var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(eq=False)
class Phase1Result:
    power: np.ndarray
    selected: np.ndarray
    duration: int


def phase1_probe(
    discrete: DiscreteChannel, cfg: TrainingConfig, m_rf: int, noise_var: float, seed=None
) -> Phase1Result:
    """Power-based antenna selection.

    All users send the same symbol through the omni vector. After the first
    ``mu`` samples are discarded the RF chains scan the array ``m_rf`` antennas
    at a time; each antenna's power is one noisy snapshot in its scan slot.
    """
    from .pdma import select_antennas

    frame = _build_frame(discrete, cfg, m_rf)
    M = discrete.n_bs
    antennas = np.arange(M)
    times = (frame.mu + antennas // m_rf)[:, None]
    r = _receive(discrete, antennas, times, frame.x)[:, 0]
    r = r + _noise(np.random.default_rng(seed), M, noise_var)
    power = np.abs(r) ** 2
    return Phase1Result(power, select_antennas(power, m_rf), frame.t1)


@dataclass(eq=False)
class Phase2Result:
    """LS tap gains and path association for each selected antenna.

    ``beta_hat`` has shape ``(S, K, mu + 1)``; ``user``/``delay`` hold the
    associated user and tap per antenna (``-1`` when unassociated).
    """

    beta_hat: np.ndarray
    user: np.ndarray
    delay: np.ndarray
    duration: int
    pilot_condition: float


def _associate(beta_hat: np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray]:
    S, K, taps = beta_hat.shape
    pw = np.abs(beta_hat.reshape(S, K * taps)) ** 2
    best = pw.argmax(axis=1)
    peak = pw[np.arange(S), best]
    rest = pw.sum(axis=1) - peak
    ok = (peak > 0) & (peak >= rho * rest)
    return np.where(ok, best // taps, -1), np.where(ok, best % taps, -1)


def phase2_path_ls(
    discrete: DiscreteChannel, selected, cfg: TrainingConfig, noise_var: float, seed=None
) -> Phase2Result:
    """Per-antenna LS estimate of the ``K (mu + 1)`` tap gains, then association."""
    selected = np.asarray(selected, dtype=int)
    frame = _build_frame(discrete, cfg, len(selected))
    K, mu, t2 = discrete.n_users, frame.mu, frame.t2

    pilot_mat = _pilot_matrix(frame.pilots, mu, cyclic=cfg.pilots == "zc")

    times = np.broadcast_to(frame.start2 + np.arange(t2), (selected.size, t2))
    r = _receive(discrete, selected, times, frame.x)
    r = r + _noise(np.random.default_rng(seed), r.shape, noise_var)

    sol, *_ = np.linalg.lstsq(pilot_mat, r.T, rcond=None)
    sol = sol / (math.sqrt(cfg.p_tr) * frame.omni_gain)
    beta_hat = sol.T.reshape(selected.size, mu + 1, K).transpose(0, 2, 1)
    user, delay = _associate(beta_hat, cfg.rho)
    return Phase2Result(beta_hat, user, delay, mu + t2, float(np.linalg.cond(pilot_mat)))


@dataclass(eq=False)
class Phase3Result:
    """Estimated effective channels; ``support[k]`` lists the ``M_S`` rows of ``g_hat[k]``."""

    g_hat: list
    support: list
    empty: np.ndarray
    duration: int


def phase3_effective_ls(
    discrete: DiscreteChannel,
    selected,
    association: tuple[np.ndarray, np.ndarray],
    cfg: TrainingConfig,
    noise_var: float,
    seed=None,
    train: np.ndarray | None = None,
) -> Phase3Result:
    """Delay-compensated LS estimate of each user's reduced MIMO channel."""
    selected = np.asarray(selected, dtype=int)
    frame = _build_frame(discrete, cfg, len(selected))
    n_ms = discrete.n_ms
    f_train = frame.train if train is None else np.asarray(train, complex)
    if train is not None:
        frame.x[:, frame.start3 : frame.start3 + n_ms] = math.sqrt(cfg.p_tr) * cfg.symbol * f_train.T
    user, delay = (np.asarray(a, dtype=int) for a in association)

    rows = np.flatnonzero(user >= 0)
    times = frame.start3 + delay[rows, None] + np.arange(n_ms)[None, :]
    rbar = _receive(discrete, selected[rows], times, frame.x)
    rbar = rbar + _noise(np.random.default_rng(seed), rbar.shape, noise_var)
    # R F^-1 via a solve on the transposed system
    g_all = np.linalg.solve(f_train.T, rbar.T).T * np.conj(cfg.symbol) / math.sqrt(cfg.p_tr)

    g_hat, support = [], []
    K = discrete.n_users
    empty = np.zeros(K, bool)
    for k in range(K):
        mine = user[rows] == k
        g_hat.append(g_all[mine])
        support.append(rows[mine])
        empty[k] = not mine.any()
    return Phase3Result(g_hat, support, empty, n_ms + 2 * frame.mu)


@dataclass(eq=False)
class TrainingReport:
    selected: np.ndarray
    power: np.ndarray
    user: np.ndarray
    delay: np.ndarray
    beta_hat: np.ndarray
    g_hat: list
    support: list
    empty: np.ndarray
    overhead: Overhead
    pilot_condition: float
    feedback_bits: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def association(self) -> tuple[np.ndarray, np.ndarray]:
        return self.user, self.delay


def estimate_channel(
    discrete: DiscreteChannel,
    cfg: TrainingConfig,
    m_rf: int,
    noise_var: float,
    seed=None,
    codebook=None,
    coherence: int = 50_000,
) -> TrainingReport:
    """Run all three phases on one realization."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s1, s2, s3 = root.spawn(3)
    p1 = phase1_probe(discrete, cfg, m_rf, noise_var, s1)
    p2 = phase2_path_ls(discrete, p1.selected, cfg, noise_var, s2)
    p3 = phase3_effective_ls(discrete, p1.selected, (p2.user, p2.delay), cfg, noise_var, s3)
    mu = _frame_mu(discrete, cfg)
    t2 = cfg.t2 if cfg.t2 is not None else discrete.n_users * (mu + 1)
    overhead = training_overhead(discrete.n_bs, m_rf, discrete.n_ms, mu, discrete.n_users, coherence, t2)
    assert overhead.t1 == p1.duration and overhead.t2_total == p2.duration and overhead.t3 == p3.duration
    bits = None if codebook is None else codebook.feedback_bits(discrete.n_users)
    return TrainingReport(
        p1.selected, p1.power, p2.user, p2.delay, p2.beta_hat, p3.g_hat, p3.support, p3.empty,
        overhead, p2.pilot_condition, bits,
    )
