"""CSV and manifest emission for Monte Carlo results."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

SNR_FILE = "snr_vs_threshold.csv"
SEARCH_FILE = "searches_vs_threshold.csv"
MANIFEST_FILE = "manifest.json"

SNR_HEADER = ("scheme", "tx_snr_db", "gamma_th_db", "avg_rx_snr_db", "ci95_db", "alignment_rate")
SEARCH_HEADER = ("scheme", "tx_snr_db", "gamma_th_db", "avg_searches", "ci95")


@dataclass
class RunManifest:
    config: dict
    version: str
    master_seed: int
    runtime_s: float
    files: list[str] = field(default_factory=list)
    notes: str = "paired seeds: all schemes share each trial's channel sequence"

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "master_seed": self.master_seed,
            "runtime_s": self.runtime_s,
            "files": list(self.files),
            "notes": self.notes,
            "config": self.config,
        }


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_results(records, out_dir, *, config: dict | None = None, master_seed: int = 0,
                 runtime_s: float = 0.0) -> RunManifest:
    """Write both CSV views and ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    snr_rows = [
        (r.scheme, _fmt(r.tx_snr_db), _fmt(r.gamma_th_db), _fmt(r.avg_rx_snr_db),
         _fmt(r.ci95_snr_db), _fmt(r.alignment_rate))
        for r in records
    ]
    search_rows = [
        (r.scheme, _fmt(r.tx_snr_db), _fmt(r.gamma_th_db), _fmt(r.avg_searches), _fmt(r.ci95_searches))
        for r in records
    ]
    _write_csv(out / SNR_FILE, SNR_HEADER, snr_rows)
    _write_csv(out / SEARCH_FILE, SEARCH_HEADER, search_rows)
    manifest = RunManifest(config or {}, __version__, master_seed, runtime_s, [SNR_FILE, SEARCH_FILE])
    (out / MANIFEST_FILE).write_text(json.dumps(manifest.to_dict(), indent=1) + "\n")
    return manifest
