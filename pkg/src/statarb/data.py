"""Daily bar ingestion, ADDV, universe selection and the refresh schedule."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BAR_HEADER = ("date", "ticker", "open", "close", "volume")


class DataError(ValueError):
    """Malformed or inconsistent bar data."""


@dataclass(frozen=True, eq=False)
class BarPanel:
    """Aligned date x ticker panel. Absent cells are NaN, never zero."""

    calendar: np.ndarray  # datetime64[D], strictly increasing
    tickers: tuple[str, ...]
    open: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)
    returns: np.ndarray = field(init=False, repr=False, compare=False)  # close-to-close, NaN on day 0

    def __post_init__(self):
        cal = np.asarray(self.calendar, dtype="datetime64[D]")
        object.__setattr__(self, "calendar", cal)
        if cal.size > 1 and not np.all(cal[1:] > cal[:-1]):
            raise DataError("calendar dates must be strictly increasing")
        shape = (cal.size, len(self.tickers))
        for name in ("open", "close", "volume"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise DataError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        with np.errstate(invalid="ignore"):
            if np.any(self.open <= 0) or np.any(self.close <= 0):
                raise DataError("open/close prices must be positive")
            if np.any(self.volume < 0):
                raise DataError("volume must be non-negative")
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers in panel")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tickers)})
        rets = np.full(shape, np.nan)
        rets[1:] = self.close[1:] / self.close[:-1] - 1.0
        rets.setflags(write=False)
        object.__setattr__(self, "returns", rets)

    @property
    def n_dates(self) -> int:
        return self.calendar.size

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    def date_index(self, d) -> int:
        """Position of trading date ``d`` in the calendar."""
        d64 = np.datetime64(d, "D")
        i = int(np.searchsorted(self.calendar, d64))
        if i >= self.calendar.size or self.calendar[i] != d64:
            raise KeyError(f"{d} is not a trading date in the panel")
        return i

    def ticker_index(self, tickers: Iterable[str]) -> np.ndarray:
        return np.array([self._index[t] for t in tickers], dtype=int)

    def present(self) -> np.ndarray:
        return ~np.isnan(self.close)


@dataclass(frozen=True)
class Universe:
    effective_start: np.datetime64
    effective_length: int
    members: tuple[str, ...]
    addv: np.ndarray
    sigma2: np.ndarray
    index: np.ndarray  # column positions of members in the source panel

    def __len__(self):
        return len(self.members)

    @property
    def bounds(self) -> np.ndarray:
        return 0.01 * self.addv


def _parse_float(text: str, where: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{where}: cannot parse {name}={text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{where}: non-finite {name}={text!r}")
    return value


def _read_csv(path: Path, rows: dict):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != BAR_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(BAR_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"{where}: expected 5 fields, got {len(row)}")
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{where}: bad date {row[0]!r}") from None
            ticker = row[1].strip()
            if not ticker:
                raise DataError(f"{where}: empty ticker")
            op = _parse_float(row[2], where, "open")
            cl = _parse_float(row[3], where, "close")
            vol = _parse_float(row[4], where, "volume")
            if op <= 0 or cl <= 0:
                raise DataError(f"{where}: prices must be positive")
            if vol < 0:
                raise DataError(f"{where}: negative volume {vol}")
            key = (d, ticker)
            if key in rows:
                raise DataError(f"{where}: duplicate row for {ticker} on {d} (first seen at {rows[key][3]})")
            rows[key] = (op, cl, vol, where)


def manifest_paths(manifest: Path) -> list[Path]:
    """CSV paths listed one per line in a manifest; relative paths resolve against it."""
    paths = []
    for line in manifest.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        paths.append(p if p.is_absolute() else manifest.parent / p)
    return paths


def load_bars(source, format: str = "auto") -> BarPanel:
    """Load bar CSVs into an aligned panel.

    ``source`` may be a single CSV, a manifest listing CSVs, a directory of
    CSVs, or a sequence of CSV paths. ``format`` is one of ``csv``,
    ``manifest`` or ``auto`` (decided from the suffix).
    """
    if isinstance(source, (list, tuple)):
        paths = [Path(p) for p in source]
    else:
        src = Path(source)
        if not src.exists():
            raise FileNotFoundError(f"bar source not found: {src}")
        if src.is_dir():
            paths = sorted(src.glob("*.csv"))
        elif format == "manifest" or (format == "auto" and src.suffix.lower() in {".txt", ".manifest", ".lst"}):
            paths = manifest_paths(src)
        else:
            paths = [src]
    if not paths:
        raise DataError(f"no bar files found in {source}")

    rows: dict = {}
    for p in paths:
        _read_csv(p, rows)
    if not rows:
        raise DataError("bar files contain no rows")

    dates = sorted({d for d, _ in rows})
    tickers = sorted({t for _, t in rows})
    di = {d: i for i, d in enumerate(dates)}
    ti = {t: i for i, t in enumerate(tickers)}
    shape = (len(dates), len(tickers))
    op, cl, vol = np.full(shape, np.nan), np.full(shape, np.nan), np.full(shape, np.nan)
    for (d, t), (o, c, v, _) in rows.items():
        i, j = di[d], ti[t]
        op[i, j], cl[i, j], vol[i, j] = o, c, v
    return BarPanel(np.array(dates, dtype="datetime64[D]"), tuple(tickers), op, cl, vol)


def write_bars(panel: BarPanel, path) -> Path:
    """Write a panel in the bar CSV format, skipping absent cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BAR_HEADER)
        for i, d in enumerate(panel.calendar.astype(str)):
            for j, t in enumerate(panel.tickers):
                c = panel.close[i, j]
                if np.isnan(c):
                    continue
                w.writerow((d, t, repr(float(panel.open[i, j])), repr(float(c)), repr(float(panel.volume[i, j]))))
    return path


def compute_addv(panel: BarPanel, asof, lookback: int = 21) -> np.ndarray:
    """Mean close*volume over the ``lookback`` days ending the day before ``asof``.

    Tickers with any missing bar in the window, or a calendar with too little
    history, get NaN.
    """
    t = panel.date_index(asof)
    if t < lookback:
        return np.full(panel.n_tickers, np.nan)
    dv = panel.close[t - lookback : t] * panel.volume[t - lookback : t]
    return dv.mean(axis=0)  # NaN propagates for any gap


def window_variance(panel: BarPanel, asof, lookback: int = 21) -> np.ndarray:
    """Sample variance (n-1) of the ``lookback`` close-to-close returns before ``asof``."""
    t = panel.date_index(asof)
    if t < lookback + 1:
        return np.full(panel.n_tickers, np.nan)
    return panel.returns[t - lookback : t].var(axis=0, ddof=1)


def select_universe(panel: BarPanel, asof, size: int = 2000, lookback: int = 21) -> Universe:
    """Top ``size`` tickers by ADDV among those with full lookback coverage."""
    addv = compute_addv(panel, asof, lookback)
    sigma2 = window_variance(panel, asof, lookback)
    eligible = np.flatnonzero(np.isfinite(addv) & np.isfinite(sigma2) & (addv > 0))
    if eligible.size < 2:
        raise DataError(f"only {eligible.size} eligible tickers on {asof}; need at least 2")
    # descending ADDV, ties by ascending ticker text
    order = sorted(eligible, key=lambda j: (-addv[j], panel.tickers[j]))[:size]
    idx = np.array(order, dtype=int)
    return Universe(
        effective_start=np.datetime64(asof, "D"),
        effective_length=lookback,
        members=tuple(panel.tickers[j] for j in idx),
        addv=addv[idx],
        sigma2=sigma2[idx],
        index=idx,
    )


def backtest_window(calendar: Sequence, backtest_days: int = 252, end=None) -> np.ndarray:
    """The last ``backtest_days`` trading dates of ``calendar`` (optionally ending at ``end``)."""
    cal = np.asarray(calendar, dtype="datetime64[D]")
    stop = cal.size if end is None else int(np.searchsorted(cal, np.datetime64(end, "D"), side="right"))
    if stop < backtest_days:
        raise DataError(f"calendar has {stop} dates, backtest needs {backtest_days}")
    return cal[stop - backtest_days : stop]


def rebalance_schedule(calendar: Sequence, backtest_days: int = 252, period: int = 21, end=None) -> list:
    """Refresh dates: backtest start and every ``period`` trading days after."""
    window = backtest_window(calendar, backtest_days, end)
    return list(window[::period])
