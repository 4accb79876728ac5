"""Quality and rate-distortion analytics.

Luma PSNR, Bjøntegaard deltas over cubic fits in the log-rate domain,
rate-quality point comparison against a fitted curve, and a subprocess
adapter for an external VMAF tool. RD data interchange is a small CSV
(sequence,codec,qp,bitrate_kbps,psnr_db[,vmaf]).
"""
from __future__ import annotations

import csv
import json
import re
import shlex
import subprocess
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import AdapterError, ConfigError, FormatError
from .video_io import Frame

PSNR_CAP_DB = 999.0


class RdMetric(Enum):
    PSNR = "psnr"
    VMAF = "vmaf"


class BdKind(Enum):
    BD_RATE = "rate"
    BD_QUALITY = "quality"


@dataclass(frozen=True)
class RdPoint:
    bitrate: float  # kilobits/second
    quality: float  # dB for PSNR, 0..100 for VMAF

    def __post_init__(self):
        if self.bitrate <= 0:
            raise ConfigError(f"bitrate {self.bitrate} must be positive")


@dataclass
class RdCurve:
    points: list[RdPoint]
    metric: RdMetric = RdMetric.PSNR

    def __post_init__(self):
        if len(self.points) < 4:
            raise ConfigError(f"{len(self.points)} RD points; need at least 4")
        rates = [p.bitrate for p in self.points]
        if any(b >= a for b, a in zip(rates, rates[1:])):
            raise ConfigError("bitrates must be strictly increasing")
        quals = [p.quality for p in self.points]
        if any(b >= a for b, a in zip(quals, quals[1:])):
            warnings.warn("RD curve is not monotone in quality; proceeding on the fit",
                          stacklevel=2)

    @property
    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points])

    @property
    def log_rates(self) -> np.ndarray:
        return np.log10([p.bitrate for p in self.points])


def psnr_luma(ref: Frame, test: Frame) -> float:
    """Luma-only PSNR against the coding-depth peak; identical frames cap
    at 999 dB so aggregation stays finite."""
    if ref.luma.shape != test.luma.shape:
        raise ConfigError(f"luma shapes differ: {ref.luma.shape} vs {test.luma.shape}")
    if ref.coding_bit_depth != test.coding_bit_depth:
        raise ConfigError("frames must share a coding bit depth")
    diff = ref.luma.astype(np.float64) - test.luma.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    peak = (1 << ref.coding_bit_depth) - 1
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def _fit_pair(anchor: RdCurve, test: RdCurve, x_of, y_of):
    pa = np.polyfit(x_of(anchor), y_of(anchor), 3)
    pt = np.polyfit(x_of(test), y_of(test), 3)
    lo = max(x_of(anchor).min(), x_of(test).min())
    hi = min(x_of(anchor).max(), x_of(test).max())
    if hi <= lo:
        raise ConfigError("RD curves do not overlap; no interval to integrate")
    return pa, pt, lo, hi


def _mean_fit_difference(pa, pt, lo, hi) -> float:
    ia, it = np.polyint(pa), np.polyint(pt)
    int_a = np.polyval(ia, hi) - np.polyval(ia, lo)
    int_t = np.polyval(it, hi) - np.polyval(it, lo)
    return (int_t - int_a) / (hi - lo)


def bd_metric(anchor: RdCurve, test: RdCurve, kind: BdKind) -> float:
    """Classic Bjøntegaard delta from cubic fits.

    BD_RATE fits log10(bitrate) as a function of quality and returns the
    mean rate change in percent; BD_QUALITY fits quality as a function of
    log10(bitrate) and returns the mean quality change.
    """
    if anchor.metric is not test.metric:
        raise ConfigError("curves measure different metrics")
    if kind is BdKind.BD_RATE:
        pa, pt, lo, hi = _fit_pair(anchor, test,
                                   lambda c: c.qualities, lambda c: c.log_rates)
        return (10.0 ** _mean_fit_difference(pa, pt, lo, hi) - 1.0) * 100.0
    pa, pt, lo, hi = _fit_pair(anchor, test,
                               lambda c: c.log_rates, lambda c: c.qualities)
    return _mean_fit_difference(pa, pt, lo, hi)


def point_above_curve(curve: RdCurve, point: RdPoint) -> bool:
    """True when the point's quality beats the fitted curve at its rate."""
    x = np.log10(point.bitrate)
    if not (curve.log_rates.min() <= x <= curve.log_rates.max()):
        warnings.warn("rate-quality point outside the fitted range; extrapolating",
                      stacklevel=2)
    fit = np.polyfit(curve.log_rates, curve.qualities, 3)
    return bool(point.quality > float(np.polyval(fit, x)))


_VMAF_TEXT_RE = re.compile(r"VMAF\s*(?:score)?\s*[:=]\s*([0-9]+(?:\.[0-9]+)?)",
                           re.IGNORECASE)


def _parse_vmaf_output(text: str) -> float:
    try:
        doc = json.loads(text)
    except ValueError:
        doc = None
    if isinstance(doc, dict):
        pooled = doc.get("pooled_metrics", {})
        if isinstance(pooled, dict) and "vmaf" in pooled:
            entry = pooled["vmaf"]
            if isinstance(entry, dict) and "mean" in entry:
                return float(entry["mean"])
        if "vmaf" in doc:
            return float(doc["vmaf"])
    match = _VMAF_TEXT_RE.search(text)
    if match:
        return float(match.group(1))
    tokens = text.split()
    if tokens:
        try:
            return float(tokens[-1])
        except ValueError:
            pass
    raise FormatError(f"could not parse a VMAF score from tool output: {text[:200]!r}")


def vmaf_external(ref_path: str | Path, test_path: str | Path, width: int,
                  height: int, bit_depth: int, tool_command: str) -> float:
    """Run an external VMAF tool and return its pooled score.

    The command template uses {ref} {dist} {width} {height} (and
    optionally {bitdepth}); literal braces in the command must be doubled.
    The score is read from stdout as JSON (pooled_metrics.vmaf.mean or a
    top-level "vmaf"), a "VMAF score: x" line, or a bare trailing number.
    """
    if "{ref}" not in tool_command or "{dist}" not in tool_command:
        raise ConfigError("VMAF command template must use {ref} and {dist}")
    tokens = shlex.split(tool_command)
    params = {"ref": str(ref_path), "dist": str(test_path), "width": width,
              "height": height, "bitdepth": bit_depth}
    cmd = [t.format(**params) for t in tokens]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True)
    except FileNotFoundError as exc:
        raise AdapterError(f"VMAF tool not found: {cmd[0]}") from exc
    if proc.returncode != 0:
        raise AdapterError(
            f"VMAF tool exited {proc.returncode}: {(proc.stderr or '').strip()[-300:]}")
    score = _parse_vmaf_output(proc.stdout)
    if not (0.0 <= score <= 100.0):
        raise FormatError(f"VMAF score {score} outside [0, 100]")
    return score


@dataclass
class RdRow:
    sequence: str
    codec: str
    qp: float
    bitrate_kbps: float
    psnr_db: float
    vmaf: float | None = None


def write_rd_csv(rows: list[RdRow], path: str | Path) -> None:
    has_vmaf = any(r.vmaf is not None for r in rows)
    header = ["sequence", "codec", "qp", "bitrate_kbps", "psnr_db"]
    if has_vmaf:
        header.append("vmaf")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            row = [r.sequence, r.codec, f"{r.qp:g}", f"{r.bitrate_kbps:.4f}",
                   f"{r.psnr_db:.4f}"]
            if has_vmaf:
                row.append("" if r.vmaf is None else f"{r.vmaf:.4f}")
            writer.writerow(row)


def read_rd_csv(path: str | Path) -> list[RdRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            vmaf = rec.get("vmaf")
            rows.append(RdRow(rec["sequence"], rec["codec"], float(rec["qp"]),
                              float(rec["bitrate_kbps"]), float(rec["psnr_db"]),
                              float(vmaf) if vmaf else None))
    return rows
