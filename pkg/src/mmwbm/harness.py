"""Monte Carlo driver: channel sequences, scheme runs and metric aggregation.

Every trial draws its channel sequence from its own generator seeded with
``(master_seed, trial)``; all schemes, transmit SNRs and thresholds of a
trial see the same channels (paired comparison). Metrics cover the BM
TTIs only, not the initialization.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .beam_mgmt import BeamProbe, LinkBudget, initialize, run_scheme, run_tti
from .channel import draw_channel, evolve_channel
from .config import SimConfig

Z95 = 1.959963984540054


@dataclass(frozen=True)
class MetricsRecord:
    scheme: str
    tx_snr_db: float
    gamma_th_db: float
    avg_rx_snr_db: float
    avg_searches: float
    alignment_rate: float
    ci95_snr_db: float
    ci95_searches: float
    n_trials: int


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, trial]))


def channel_sequence(cfg: SimConfig, trial: int):
    """Initial channel followed by ``n_ttis_per_trial`` evolved ones."""
    rng = trial_rng(cfg.master_seed, trial)
    arr = cfg.array
    ch = draw_channel(cfg.channel, arr.aip, arr.ue, rng, arr.n_aips)
    seq = [ch]
    for _ in range(cfg.n_ttis_per_trial):
        ch = evolve_channel(ch, cfg.drift_deg_std, rng, cfg.channel.delay_spread_s)
        seq.append(ch)
    return seq


def _points(cfg: SimConfig):
    return [(s, tx, th) for s in cfg.schemes for tx in cfg.tx_snr_db for th in cfg.gamma_th_db_grid]


def _step(name, state, codebook, channel, budget, probe, cfg):
    if name == "proposed":
        return run_tti(state, codebook, channel, budget, probe=probe,
                       wide_beam_pruning=cfg.wide_beam_pruning,
                       prune_backoff_db=cfg.prune_backoff_db)
    return run_scheme(name, state, codebook, channel, budget, probe=probe)


def run_trial(cfg: SimConfig, codebook, trial: int) -> np.ndarray:
    """Per-TTI (searches, achieved SNR, aligned) for every point.

    Returns an array of shape ``(n_points, n_ttis, 3)`` ordered like
    :func:`_points`.
    """
    seq = channel_sequence(cfg, trial)
    probes = [BeamProbe(codebook, ch) for ch in seq]
    T = cfg.n_ttis_per_trial
    points = _points(cfg)
    out = np.zeros((len(points), T, 3))
    inits = {}
    for p, (name, tx, th) in enumerate(points):
        key = (tx, th)
        if key not in inits:
            budget = LinkBudget.from_db(tx, th + cfg.threshold_offset_db(0))
            inits[key] = initialize(codebook, seq[0], budget, cfg.max_init_cts, probe=probes[0]).state
        state = inits[key]
        for t in range(T):
            budget = LinkBudget.from_db(tx, th + cfg.threshold_offset_db(t + 1))
            res = _step(name, state, codebook, seq[t + 1], budget, probes[t + 1], cfg)
            out[p, t] = (res.searches, res.achieved_snr, res.aligned)
            state = res.state
    return out


def _run_chunk(args):
    cfg, trials = args
    codebook = cfg.build_codebook()
    return [run_trial(cfg, codebook, k) for k in trials]


def _ci95(per_trial: np.ndarray) -> float:
    n = len(per_trial)
    if n < 2:
        return 0.0
    return float(Z95 * per_trial.std(ddof=1) / np.sqrt(n))


def aggregate(cfg: SimConfig, results: np.ndarray) -> list[MetricsRecord]:
    """``results`` has shape ``(n_trials, n_points, n_ttis, 3)``."""
    records = []
    snr_db = 10 * np.log10(np.maximum(results[..., 1], 1e-300))
    for p, (name, tx, th) in enumerate(_points(cfg)):
        searches = results[:, p, :, 0]
        db = snr_db[:, p]
        records.append(MetricsRecord(
            scheme=name,
            tx_snr_db=float(tx),
            gamma_th_db=float(th),
            avg_rx_snr_db=float(db.mean()),
            avg_searches=float(searches.mean()),
            alignment_rate=float(results[:, p, :, 2].mean()),
            ci95_snr_db=_ci95(db.mean(axis=1)),
            ci95_searches=_ci95(searches.mean(axis=1)),
            n_trials=results.shape[0],
        ))
    return summarize(records)


def run_monte_carlo(cfg: SimConfig, workers: int | None = None) -> list[MetricsRecord]:
    """Run all trials and aggregate; results do not depend on ``workers``."""
    workers = cfg.workers if workers is None else workers
    trials = list(range(cfg.n_trials))
    if workers <= 1:
        codebook = cfg.build_codebook()
        per_trial = [run_trial(cfg, codebook, k) for k in trials]
    else:
        chunks = [(cfg, trials[i::workers]) for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, chunks))
        per_trial = [None] * cfg.n_trials
        for (_, idx), res in zip(chunks, parts):
            for k, r in zip(idx, res):
                per_trial[k] = r
    return aggregate(cfg, np.stack(per_trial))


def summarize(records) -> list[MetricsRecord]:
    """Records sorted by (scheme, tx SNR, threshold)."""
    return sorted(records, key=lambda r: (r.scheme, r.tx_snr_db, r.gamma_th_db))
