"""Uplink beam management with the hierarchical codebook.

Schemes
-------
``initialize``
    First-TTI sweep of all level-1 beams in ascending order; every AiP uses
    the same angle per control slot (CTS) and the UE sums per-antenna SNRs
    (MRC). Stops at the first slot where the best configuration so far meets
    the threshold.
``run_tti``
    The proposed scheme: 4 UL slots over the level-1 neighbours of the
    previous beam, then a DL phase that walks level-1 beams in the order
    given by the level-L -> ... -> level-2 hierarchy around the best UL beam.
``only_ul``, ``dl_assisted``, ``exhaustive``
    Benchmarks: UL phase only; UL phase plus a flat level-1 DL sweep; every
    level-1 beam.

All indices are 1-based, as in the codebook. A "search" is one CTS; all
AiPs are measured in parallel within a slot.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import ChannelRealization
from .codebook import HierarchicalCodebook

UL_SLOTS = 4
SCHEMES = ("proposed", "exhaustive", "only_ul", "dl_assisted")


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power ``P``, noise variance ``sigma^2`` and SNR threshold, all linear."""

    tx_power: float
    noise_var: float = 1.0
    snr_threshold: float = 1.0

    def __post_init__(self):
        if not (self.tx_power > 0 and self.noise_var > 0):
            raise ValueError("tx_power and noise_var must be positive")
        if self.snr_threshold < 0:
            raise ValueError("snr_threshold must be non-negative")

    @classmethod
    def from_db(cls, tx_snr_db: float, threshold_db: float) -> "LinkBudget":
        return cls(10 ** (tx_snr_db / 10), 1.0, 10 ** (threshold_db / 10))

    @property
    def snr(self) -> float:
        return self.tx_power / self.noise_var


@dataclass(frozen=True)
class BmState:
    """What the BS/UE carry from one TTI to the next.

    ``beams`` holds the per-AiP level-1 index in use, ``precoder`` the UE's
    MRT vector from the latest data phase; the cache and slot counter
    describe the TTI that produced this state.
    """

    beams: tuple[int, ...]
    precoder: np.ndarray | None = None
    snr_cache: dict = field(default_factory=dict)
    cts_counter: int = 0
    aligned: bool = False


@dataclass(frozen=True)
class TtiResult:
    scheme: str
    aligned: bool
    beams: tuple[int, ...]
    searches: int
    achieved_snr: float
    state: BmState


# ---------------------------------------------------------------------------
# measurements


def measure_snr(u, H_i, v, budget: LinkBudget) -> float:
    """``P |u^H H_i v|^2 / (sigma^2 ||u||^2)``."""
    u = np.asarray(u)
    nu = np.vdot(u, u).real
    if nu == 0:
        raise ValueError("beam vector is all zeros")
    return float(budget.snr * abs(np.vdot(u, np.asarray(H_i) @ v)) ** 2 / nu)


def mrc_init_snr(u, H_i, budget: LinkBudget) -> float:
    """Per-AiP SNR summed over the UE antennas: ``P ||H_i^H u||^2 / (sigma^2 ||u||^2)``."""
    u = np.asarray(u)
    nu = np.vdot(u, u).real
    if nu == 0:
        raise ValueError("beam vector is all zeros")
    e = np.asarray(H_i).conj().T @ u
    return float(budget.snr * np.vdot(e, e).real / nu)


def mrt_precoder(effective) -> np.ndarray:
    """Unit-norm dominant left singular vector of the ``N_ue x M_bs`` channel.

    The first non-negligible entry is rotated to be real and positive.
    """
    effective = np.atleast_2d(np.asarray(effective, dtype=complex))
    if effective.ndim != 2 or not np.any(effective):
        raise ValueError("effective channel must be a nonzero matrix")
    U, _, _ = np.linalg.svd(effective, full_matrices=False)
    v = U[:, 0]
    mag = np.abs(v)
    k = int(np.argmax(mag > 1e-12 * mag.max()))
    v = v * (np.conj(v[k]) / mag[k])
    return v / np.linalg.norm(v)


def achieved_snr(effective, active_counts, budget: LinkBudget) -> float:
    """Sum of per-AiP SNRs with the UE using the MRT precoder of ``effective``."""
    effective = np.asarray(effective)
    v = mrt_precoder(effective)
    per_aip = np.abs(effective.conj().T @ v) ** 2 / np.asarray(active_counts, dtype=float)
    return float(budget.snr * per_aip.sum())


# ---------------------------------------------------------------------------
# sweep ordering


@lru_cache(maxsize=None)
def _sweep(card: int, nu: int) -> tuple[int, ...]:
    out = []
    if nu + 1 <= card:
        out.append(nu + 1)
        mu = 1
        for _ in range(3, card + 1):
            mu = -mu - min(0, int(np.sign(mu)))
            xi = nu + mu
            if xi > card or xi <= 0:
                mu = -mu - min(0, int(np.sign(mu)))
                out.append(nu + mu)
            else:
                out.append(xi)
    else:
        out = [card - p + 1 for p in range(2, card + 1)]
    return tuple(out)


def sweep_sequence(card: int, nu: int) -> tuple[int, ...]:
    """Zig-zag order of ``{1..card} \\ {nu}`` around ``nu``: +1, -1, +2, -2, ...

    Once one end of the range is reached the sequence runs on to the other
    end. For ``nu == card`` it simply counts down.
    """
    if card < 2:
        raise ValueError("card must be >= 2")
    if not 1 <= nu <= card:
        raise ValueError(f"nu={nu} outside 1..{card}")
    return _sweep(card, nu)


def order_members(members, anchor: int, angles) -> list[int]:
    """Sweep order over a sorted index subset, seeded at ``anchor``.

    If ``anchor`` is not a member the member whose angle is closest to the
    anchor's angle seeds the sweep. ``angles[k-1]`` is the angle of index k.
    """
    members = list(members)
    if not members:
        return []
    if anchor in members:
        seed = anchor
    else:
        seed = min(members, key=lambda k: (abs(angles[k - 1] - angles[anchor - 1]), k))
    pos = members.index(seed) + 1
    if len(members) == 1:
        return [seed]
    return [seed] + [members[p - 1] for p in sweep_sequence(len(members), pos)]


def _anchor_chain(cb: HierarchicalCodebook, best: int) -> list[int]:
    chain = [best]
    for lvl in range(1, cb.n_levels):
        chain.append(cb.parent(lvl, chain[-1]))
    return chain  # chain[l-1] is the level-l anchor


def dl_items(cb: HierarchicalCodebook, best: int, swept) -> tuple[tuple[int, int, int], ...]:
    """Depth-first DL traversal as ``(level, index, subtree_end)`` items.

    Level-1 items are the beams to measure; higher-level items mark the FTB
    whose subtree follows and ``subtree_end`` is the position just past that
    subtree. Swept and repeated level-1 beams are dropped.
    """
    key = ("dl", best, frozenset(swept))
    cache = cb._cache
    if key in cache:
        return cache[key]
    swept = set(swept)
    chain = _anchor_chain(cb, best)
    items: list = []
    seen: set[int] = set()

    def expand(level, index):
        if level == 1:
            if index not in swept and index not in seen:
                seen.add(index)
                items.append((1, index, len(items) + 1))
            return
        slot = len(items)
        items.append(None)
        kids = cb.children[(level, index)]
        ordered = order_members(kids, chain[level - 2], cb.angles_deg(level - 1))
        for c in ordered:
            expand(level - 1, c)
        items[slot] = (level, index, len(items))

    top = cb.n_levels
    for k in order_members(range(1, cb.count(top) + 1), chain[top - 1], cb.angles_deg(top)):
        expand(top, k)
    out = tuple(items)
    cache[key] = out
    return out


def dl_sequence(cb: HierarchicalCodebook, best: int, swept) -> tuple[int, ...]:
    """Level-1 beams in hierarchical DL order (no repeats, swept ones excluded)."""
    return tuple(k for lvl, k, _ in dl_items(cb, best, swept) if lvl == 1)


def flat_sequence(card: int, prev: int, swept) -> tuple[int, ...]:
    """``[prev, sweep_sequence(card, prev)]`` with the already swept beams removed."""
    swept = set(swept)
    return tuple(k for k in (prev,) + sweep_sequence(card, prev) if k not in swept)


# ---------------------------------------------------------------------------
# beamformed-channel tables


class BeamProbe:
    """Beamformed channels ``H_i^H u`` for every AiP and codebook beam.

    Building this once per channel realization lets several schemes and
    thresholds share the matrix products.
    """

    def __init__(self, codebook: HierarchicalCodebook, channel: ChannelRealization):
        if channel.aip.shape != codebook.geom.shape:
            raise ValueError("codebook and channel AiP geometries differ")
        self.codebook = codebook
        self.channel = channel
        self._e: dict[int, np.ndarray] = {}
        self._n: dict[int, np.ndarray] = {}
        # budget-free quantities keyed by the level-1 configuration
        self._mrt: dict[tuple, tuple[np.ndarray, float]] = {}
        self._joint = None

    def beamformed(self, level: int) -> np.ndarray:
        """Array ``(M_bs, N_ue, K_level)``."""
        if level not in self._e:
            U = self.codebook.beam_matrix(level)
            blocks = self.channel.blocks
            self._e[level] = np.stack([B.conj().T @ U for B in blocks])
            self._n[level] = np.count_nonzero(U, axis=0).astype(float)
        return self._e[level]

    def active(self, level: int) -> np.ndarray:
        self.beamformed(level)
        return self._n[level]

    def snr_table(self, level: int, v, budget: LinkBudget) -> np.ndarray:
        """Per-AiP SNR of every (AiP, beam) pair under precoder ``v``."""
        e = self.beamformed(level)
        return budget.snr * np.abs(np.einsum("iuk,u->ik", e.conj(), v)) ** 2 / self.active(level)

    def mrc_table(self, level: int, budget: LinkBudget) -> np.ndarray:
        e = self.beamformed(level)
        return budget.snr * np.sum(np.abs(e) ** 2, axis=1) / self.active(level)

    def effective(self, beams) -> np.ndarray:
        e = self.beamformed(1)
        return np.stack([e[i, :, b - 1] for i, b in enumerate(beams)], axis=1)

    def _mrt_entry(self, beams):
        key = tuple(int(b) for b in beams)
        if key not in self._mrt:
            eff = self.effective(key)
            v = mrt_precoder(eff)
            n = self.active(1)[[b - 1 for b in key]]
            self._mrt[key] = (v, float((np.abs(eff.conj().T @ v) ** 2 / n).sum()))
        return self._mrt[key]

    def precoder(self, beams) -> np.ndarray:
        return self._mrt_entry(beams)[0]

    def achieved(self, beams, budget: LinkBudget) -> float:
        return float(budget.snr * self._mrt_entry(beams)[1])


def _probe(codebook, channel, probe) -> BeamProbe:
    if probe is not None:
        return probe
    return BeamProbe(codebook, channel)


def _finish(scheme, probe, budget, beams, searches, aligned, cache, snr=None) -> TtiResult:
    beams = tuple(int(b) for b in beams)
    v = probe.precoder(beams)
    if snr is None:
        snr = probe.achieved(beams, budget)
    state = BmState(beams, v, cache, searches, aligned)
    return TtiResult(scheme, aligned, beams, searches, float(snr), state)


# ---------------------------------------------------------------------------
# schemes


def initialize(codebook, channel, budget: LinkBudget, max_cts: int | None = None, *, probe=None) -> TtiResult:
    """BM initialization: ascending level-1 sweep with MRC at the UE.

    ``achieved_snr`` is the MRC sum the UE compared with the threshold.
    """
    probe = _probe(codebook, channel, probe)
    K1 = codebook.count(1)
    n_slots = K1 if max_cts is None else max(1, min(K1, max_cts))
    table = probe.mrc_table(1, budget)
    M = table.shape[0]
    cache = {}
    best = np.full(M, -1.0)
    arg = np.zeros(M, dtype=int)
    aligned = False
    j = 0
    for j in range(1, n_slots + 1):
        col = table[:, j - 1]
        for i in range(M):
            cache[(i, 1, j)] = float(col[i])
        better = col > best
        best[better] = col[better]
        arg[better] = j
        if best.sum() >= budget.snr_threshold:
            aligned = True
            break
    return _finish("init", probe, budget, arg, j, aligned, cache, snr=float(best.sum()))


def _ul_phase(state, codebook, probe, budget):
    K1 = codebook.count(1)
    if K1 < 2:
        raise ValueError("beam management needs at least two level-1 beams")
    if state.precoder is None:
        table = probe.mrc_table(1, budget)
    else:
        table = probe.snr_table(1, state.precoder, budget)
    n_ul = min(UL_SLOTS, K1 - 1)
    swept = [sweep_sequence(K1, nu)[:n_ul] for nu in state.beams]
    cache = {}
    for i, seq in enumerate(swept):
        for k in seq:
            cache[(i, 1, k)] = float(table[i, k - 1])
    best = [max(seq, key=lambda k: (table[i, k - 1], -seq.index(k))) for i, seq in enumerate(swept)]
    total = sum(table[i, b - 1] for i, b in enumerate(best))
    return table, swept, cache, best, total, n_ul


def _best_measured(cache, M):
    best = []
    for i in range(M):
        entries = [(g, k) for (ai, lvl, k), g in cache.items() if ai == i and lvl == 1]
        best.append(max(entries, key=lambda t: (t[0], -t[1]))[1])
    return best


def _dl_phase(scheme, state, codebook, probe, budget, orders, ul):
    table, swept, cache, best, total, n_ul = ul
    M = table.shape[0]
    searches = n_ul
    for rho in range(max(len(o) for o in orders)):
        cfg = [o[rho] if rho < len(o) else best[i] for i, o in enumerate(orders)]
        s = 0.0
        for i, k in enumerate(cfg):
            g = float(table[i, k - 1])
            cache[(i, 1, k)] = g
            s += g
        searches += 1
        if s >= budget.snr_threshold:
            return _finish(scheme, probe, budget, cfg, searches, True, cache)
    return _finish(scheme, probe, budget, _best_measured(cache, M), searches, False, cache)


def only_ul(state: BmState, codebook, channel, budget: LinkBudget, *, probe=None) -> TtiResult:
    """UL phase alone: best of the 4 swept neighbours per AiP."""
    probe = _probe(codebook, channel, probe)
    ul = _ul_phase(state, codebook, probe, budget)
    _, _, cache, best, total, n_ul = ul
    return _finish("only_ul", probe, budget, best, n_ul, bool(total >= budget.snr_threshold), cache)


def run_tti(
    state: BmState,
    codebook,
    channel,
    budget: LinkBudget,
    *,
    probe=None,
    wide_beam_pruning: bool = False,
    prune_backoff_db: float = 3.0,
) -> TtiResult:
    """Proposed multi-level BM for one TTI.

    With ``wide_beam_pruning`` (an extension, off by default) each AiP also
    measures every FTB on its DL path and skips that FTB's subtree when its
    SNR is more than ``prune_backoff_db`` below its share of the threshold.
    """
    probe = _probe(codebook, channel, probe)
    ul = _ul_phase(state, codebook, probe, budget)
    table, swept, cache, best, total, n_ul = ul
    if total >= budget.snr_threshold:
        return _finish("proposed", probe, budget, best, n_ul, True, cache)
    if wide_beam_pruning:
        return _dl_pruned(state, codebook, probe, budget, ul, prune_backoff_db)
    orders = [dl_sequence(codebook, b, s) for b, s in zip(best, swept)]
    return _dl_phase("proposed", state, codebook, probe, budget, orders, ul)


def dl_assisted(state: BmState, codebook, channel, budget: LinkBudget, *, probe=None) -> TtiResult:
    """UL phase, then the remaining level-1 beams in flat sweep order."""
    probe = _probe(codebook, channel, probe)
    ul = _ul_phase(state, codebook, probe, budget)
    table, swept, cache, best, total, n_ul = ul
    if total >= budget.snr_threshold:
        return _finish("dl_assisted", probe, budget, best, n_ul, True, cache)
    K1 = codebook.count(1)
    orders = [flat_sequence(K1, nu, s) for nu, s in zip(state.beams, swept)]
    return _dl_phase("dl_assisted", state, codebook, probe, budget, orders, ul)


def _dl_pruned(state, codebook, probe, budget, ul, backoff_db):
    table, swept, cache, best, total, n_ul = ul
    M = table.shape[0]
    share = budget.snr_threshold / M * 10 ** (-backoff_db / 10)
    v = state.precoder
    tables = {1: table}
    for lvl in range(2, codebook.n_levels + 1):
        tables[lvl] = probe.mrc_table(lvl, budget) if v is None else probe.snr_table(lvl, v, budget)
    items = [dl_items(codebook, b, s) for b, s in zip(best, swept)]
    pos = [0] * M
    current = list(best)
    searches = n_ul
    while any(p < len(it) for p, it in zip(pos, items)):
        cfg = []
        for i in range(M):
            while pos[i] < len(items[i]) and items[i][pos[i]] is None:
                pos[i] += 1
            if pos[i] >= len(items[i]):
                cfg.append(None)
                continue
            lvl, k, end = items[i][pos[i]]
            g = float(tables[lvl][i, k - 1])
            cache[(i, lvl, k)] = g
            if lvl == 1:
                current[i] = k
                pos[i] += 1
            else:
                pos[i] = pos[i] + 1 if g >= share else end
            cfg.append((lvl, k))
        searches += 1
        if all(c is None or c[0] == 1 for c in cfg):
            s = sum(float(table[i, current[i] - 1]) for i in range(M))
            if s >= budget.snr_threshold and any(c is not None for c in cfg):
                return _finish("proposed", probe, budget, current, searches, True, cache)
    return _finish("proposed", probe, budget, _best_measured(cache, M), searches, False, cache)


def _joint_best(probe: BeamProbe, budget: LinkBudget):
    if probe._joint is None:
        probe._joint = _joint_search(probe)
    beams, lam = probe._joint
    return beams, budget.snr * lam


def _joint_search(probe: BeamProbe):
    e = probe.beamformed(1)  # (M, U, K)
    n = probe.active(1)
    M, _, K = e.shape
    en = e / np.sqrt(n)
    # G[i, j, a, b] = e_{i,a}^H e_{j,b} / sqrt(n_a n_b)
    G = np.einsum("iua,jub->ijab", en.conj(), en)
    combos = np.array(list(itertools.product(range(K), repeat=M)))
    ii, jj = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    gram = G[ii, jj, combos[:, :, None], combos[:, None, :]]  # (C, M, M)
    lam = np.linalg.eigvalsh(gram)[:, -1]
    c = int(np.argmax(lam))
    return combos[c] + 1, float(lam[c])


def exhaustive_search(state, codebook, channel, budget: LinkBudget, *, probe=None) -> TtiResult:
    """Measure every level-1 beam; keep the configuration with the highest SNR.

    The UE knows ``H_i^H u`` for every AiP and beam after the sweep, so the
    pick is the joint best under the MRT precoder rather than a per-AiP one.
    """
    probe = _probe(codebook, channel, probe)
    K1 = codebook.count(1)
    table = probe.mrc_table(1, budget)
    cache = {(i, 1, k + 1): float(table[i, k]) for i in range(table.shape[0]) for k in range(K1)}
    if K1 ** table.shape[0] <= 200_000:
        beams, snr = _joint_best(probe, budget)
    else:
        beams = np.argmax(table, axis=1) + 1
        snr = None
    res = _finish("exhaustive", probe, budget, beams, K1, False, cache, snr=snr)
    aligned = res.achieved_snr >= budget.snr_threshold
    state = BmState(res.state.beams, res.state.precoder, cache, K1, aligned)
    return TtiResult("exhaustive", aligned, res.beams, K1, res.achieved_snr, state)


SCHEME_FUNCS = {
    "proposed": run_tti,
    "exhaustive": exhaustive_search,
    "only_ul": only_ul,
    "dl_assisted": dl_assisted,
}


def run_scheme(name: str, state, codebook, channel, budget, *, probe=None) -> TtiResult:
    try:
        fn = SCHEME_FUNCS[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; expected one of {SCHEMES}") from None
    return fn(state, codebook, channel, budget, probe=probe)
