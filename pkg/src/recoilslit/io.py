"""CSV/JSON persistence with deterministic formatting."""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DomainError
from .fringes import FringeDataset
from .thermometry import SidebandSpectrum

KHZ_RAD = 2 * np.pi * 1e3


def fmt(value):
    """Stable text form of a number (shortest round-trip repr for floats)."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path, required):
    """Read a numeric CSV and return {column: float array} for ``required``."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in required if c not in (reader.fieldnames or [])]
            if missing:
                raise DomainError(f"{path}: missing columns {missing}")
            rows = list(reader)
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc}") from exc
    out = {}
    for col in required:
        try:
            out[col] = np.array([float(r[col]) for r in rows])
        except ValueError as exc:
            raise DomainError(f"{path}: non-numeric value in column {col!r}") from exc
    return out


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- spectra: detuning_khz, transfer, sigma ---

def write_spectrum(path, spectrum):
    rows = zip(spectrum.detunings / KHZ_RAD, spectrum.transfer, spectrum.uncertainty)
    return write_csv(path, ["detuning_khz", "transfer", "sigma"], rows)


def read_spectrum(path, shots=None):
    cols = read_csv(path, ["detuning_khz", "transfer", "sigma"])
    return SidebandSpectrum(cols["detuning_khz"] * KHZ_RAD, cols["transfer"], cols["sigma"], shots)


# --- fringes: phase_rad, c1, c2 ---

def write_fringe(path, dataset):
    return write_csv(path, ["phase_rad", "c1", "c2"], zip(dataset.phases, dataset.counts_1, dataset.counts_2))


def read_fringe(path):
    cols = read_csv(path, ["phase_rad", "c1", "c2"])
    return FringeDataset(cols["phase_rad"], cols["c1"], cols["c2"])


# --- dynamics ---

def write_series(path, series):
    rows = ((t0 * 1e6, t1 * 1e6, v, s, n, ns) for t0, t1, v, s, n, ns in series.rows())
    return write_csv(path, ["t_start_us", "t_end_us", "visibility", "stderr", "nbar", "nbar_stderr"], rows)


def write_wigner(path, density, x_edges, p_edges, hbar_k):
    """Long-format grid: bin centres in um and hbar k, with the density."""
    xc = 0.5 * (x_edges[1:] + x_edges[:-1]) * 1e6
    pc = 0.5 * (p_edges[1:] + p_edges[:-1]) / hbar_k
    rows = ((xc[i], pc[j], density[i, j]) for i in range(xc.size) for j in range(pc.size))
    return write_csv(path, ["x_um", "p_hbark", "density"], rows)


def write_trace(path, times, phase):
    return write_csv(path, ["t_s", "phase_rad"], zip(times, phase))
