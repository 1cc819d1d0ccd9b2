"""Command line driver: ``statarb synth|backtest|report``.

Configuration is a flat ``key = value`` text file (``#`` comments allowed).
Relative paths resolve against the config file's directory. Every backtest
constant has a key whose default is the standard value, for example::

    bars = market/bars.csv
    classification = market/labels.csv
    strategies = all            # or a comma list such as C2C1_SIC_REG_N, MOM1_STAT_OPT_Y
    universe_size = 2000
    lookback = 21
    backtest_days = 252
    period = 21
    bound_fraction = 0.01
    gross = 20000000
    cost_linear_bps = 5
    cost_target_bps = 10
    stat_levels = 100, 30, 10
    drawdown_start = 2020-02-20
    drawdown_end = 2020-03-23

Synthetic-market keys are the field names of :class:`statarb.synth.SynthConfig`.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import logging
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, metrics
from .backtest import (
    FIGURE_RETURN_ORDER,
    BacktestParams,
    BacktestResult,
    Backtester,
    StrategySpec,
    strategy_grid,
)
from .classify import load_fundamental_classification
from .costs import BPS, calibrate
from .data import load_bars
from .signals import floor_variance
from .synth import SynthConfig, generate_market, write_market

logger = logging.getLogger("statarb")

SUMMARY_HEADER = ("Return", "Classification", "OPT/REG", "Costs", "ROC", "Sharpe", "CPC", "Drawdown")
DAILY_HEADER = ("date", "pnl", "traded_dollars", "traded_shares")
# drawdown is only reported for the close-to-close mean-reversion returns
NO_DRAWDOWN = "---"
SVG_SALT = "statarb"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    bars: tuple[Path, ...] = ()
    classification: Path | None = None
    out: Path = Path("out")
    strategies: tuple[StrategySpec, ...] = field(default_factory=lambda: tuple(strategy_grid()))
    params: BacktestParams = BacktestParams()
    synth: SynthConfig = SynthConfig()
    drawdown_window: tuple[str, str] | None = None
    jobs: int = 1

    def check(self) -> None:
        if not self.strategies:
            raise ConfigError("strategy grid is empty")
        if not self.bars:
            raise ConfigError("no bar files given (key 'bars')")
        for p in self.bars + ((self.classification,) if self.classification else ()):
            if not p.exists():
                raise ConfigError(f"path does not exist: {p}")
        if self.classification is None and any(s.classification == "SIC" for s in self.strategies):
            raise ConfigError("SIC strategies need a 'classification' file")


def _tuple(text: str, kind):
    return tuple(kind(x) for x in text.replace(",", " ").split())


def _coerce(name: str, text: str, default):
    """Parse ``text`` to the type of ``default`` (the dataclass field default)."""
    if isinstance(default, bool):
        if text.lower() not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{name}: expected a boolean, got {text!r}")
        return text.lower() in ("true", "yes", "1")
    try:
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            return _tuple(text, kind)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    if name == "industry_sizes":
        return _tuple(text, int) if text.lower() != "none" else None
    if name == "end":
        return text if text.lower() != "none" else None
    return text


def _parse_strategies(text: str) -> tuple[StrategySpec, ...]:
    text = text.strip()
    if text.lower() in ("all", "grid"):
        return tuple(strategy_grid())
    try:
        return tuple(StrategySpec.parse(s) for s in text.replace("\n", ",").split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a flat key-value config; ``overrides`` (already typed) win over the file."""
    raw: dict[str, str] = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string("[run]\n" + path.read_text(encoding="utf-8"), source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        raw = dict(parser["run"])
        base = path.parent

    params_fields = {f.name: f.default for f in dataclasses.fields(BacktestParams)}
    synth_fields = {f.name: f.default for f in dataclasses.fields(SynthConfig)}
    params_kw, synth_kw = {}, {}
    run: dict = {}
    for key, value in raw.items():
        if key == "bars":
            run["bars"] = tuple(base / p for p in value.replace(",", " ").split())
        elif key == "classification":
            run["classification"] = base / value
        elif key == "out":
            run["out"] = base / value
        elif key == "strategies":
            run["strategies"] = _parse_strategies(value)
        elif key in ("drawdown_start", "drawdown_end"):
            run[key] = str(np.datetime64(value, "D"))
        elif key == "jobs":
            run["jobs"] = _coerce(key, value, 1)
        elif key in ("cost_linear_bps", "cost_target_bps"):
            params_kw[key[:-4]] = _coerce(key, value, 1.0) * BPS
        elif key == "seed":
            params_kw["seed"] = synth_kw["seed"] = _coerce(key, value, 0)
        elif key in params_fields or key in synth_fields:
            if key in params_fields:
                params_kw[key] = _coerce(key, value, params_fields[key])
            if key in synth_fields:
                synth_kw[key] = _coerce(key, value, synth_fields[key])
        else:
            raise ConfigError(f"unknown config key {key!r}")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            params_kw["seed"] = synth_kw["seed"] = value
        else:
            run[key] = value

    start, end = run.pop("drawdown_start", None), run.pop("drawdown_end", None)
    if (start is None) != (end is None):
        raise ConfigError("drawdown_start and drawdown_end must be given together")
    try:
        params = BacktestParams(**params_kw)
        synth = SynthConfig(**synth_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(params=params, synth=synth, drawdown_window=(start, end) if start else None, **run)


# -- artifacts ---------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def write_daily(result: BacktestResult, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DAILY_HEADER)
        for row in zip(result.dates.astype(str), result.daily_pnl, result.traded_dollars, result.traded_shares):
            w.writerow([row[0]] + [_num(x) for x in row[1:]])


def read_daily(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != DAILY_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    body = rows[1:]
    dates = np.array([r[0] for r in body], dtype="datetime64[D]")
    cols = np.array([[float(x) for x in r[1:]] for r in body]).reshape(len(body), 3)
    return dates, cols[:, 0], cols[:, 1], cols[:, 2]


def summary_row(spec: StrategySpec, dates, pnl, shares, capital, window) -> list[str]:
    if spec.ret.startswith("C2C"):
        dd, _ = metrics.drawdown(pnl, dates, window, capital)
        dd_text = metrics.format_metric(dd)
    else:
        dd_text = NO_DRAWDOWN
    return spec.row() + [
        metrics.format_metric(metrics.roc(pnl, capital)),
        metrics.format_metric(metrics.sharpe(pnl)),
        metrics.format_metric(metrics.cps(pnl, shares)),
        dd_text,
    ]


def write_summary(rows: list[list[str]], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = SVG_SALT
    return plt


def _cum_axes(ax, dates, pnl, title):
    ax.plot(dates.astype("datetime64[D]").astype(object), np.cumsum(pnl), lw=1.0)
    ax.set_title(title, fontsize=9)
    ax.set_ylabel("cumulative P&L ($)", fontsize=8)
    ax.tick_params(labelsize=7)
    for label in ax.get_xticklabels():
        label.set_rotation(30)
        label.set_ha("right")


def plot_single(label: str, dates, pnl, path: Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    _cum_axes(ax, dates, pnl, label)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_panel(triple: tuple, series: dict, path: Path) -> None:
    """2x3 grid in figure order, left-to-right then top-to-bottom."""
    plt = _pyplot()
    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    for ax, ret in zip(axes.ravel(), FIGURE_RETURN_ORDER):
        if ret in series:
            dates, pnl = series[ret]
            _cum_axes(ax, dates, pnl, ret)
        else:
            ax.set_title(f"{ret} (not run)", fontsize=9)
            ax.set_axis_off()
    fig.suptitle(" / ".join(triple))
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_outputs(out: Path, specs, capital: float, window) -> list[list[str]]:
    """Per-strategy summary/plot, combined summary and panel plots from stored daily CSVs."""
    rows = []
    groups: dict[tuple, dict] = {}
    for spec in specs:
        d = out / spec.label
        dates, pnl, _, shares = read_daily(d / "daily_pnl.csv")
        row = summary_row(spec, dates, pnl, shares, capital, window)
        write_summary([row], d / "summary.csv")
        plot_single(spec.label, dates, pnl, d / "cumulative_pnl.svg")
        rows.append(row)
        triple = (spec.classification, spec.constructor, "Y" if spec.costs else "N")
        groups.setdefault(triple, {})[spec.ret] = (dates, pnl)
    write_summary(rows, out / "summary.csv")
    for triple, series in groups.items():
        if len(specs) > 1:
            plot_panel(triple, series, out / f"pnl_{'_'.join(triple)}.svg")
    return rows


# -- commands -----------------------------------------------------------------


def _run_cells(panel, params, fundamental, specs):
    engine = Backtester(panel, params, fundamental)
    return [engine.run(s) for s in specs]


def run_grid(cfg: RunConfig, panel, fundamental) -> list[BacktestResult]:
    """Run every cell; cells sharing a classification share refresh state."""
    specs = list(cfg.strategies)
    if cfg.jobs <= 1:
        return _run_cells(panel, cfg.params, fundamental, specs)
    # one chunk per (classification, constructor) keeps the cache useful inside workers
    chunks: dict[tuple, list] = {}
    for s in specs:
        chunks.setdefault((s.classification, s.constructor), []).append(s)
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [pool.submit(_run_cells, panel, cfg.params, fundamental, chunk) for chunk in chunks.values()]
        done = {r.spec: r for f in futures for r in f.result()}
    return [done[s] for s in specs]


def _publish(tmp: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for item in sorted(tmp.iterdir()):
        dest = out / item.name
        if dest.is_dir():
            shutil.rmtree(dest)
        elif dest.exists():
            dest.unlink()
        shutil.move(str(item), str(dest))


def _staged(out: Path, work):
    """Run ``work(tmpdir)``; publish its files into ``out`` only if it succeeds."""
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        result = work(tmp)
        _publish(tmp, out)
        return result
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _run_record(cfg: RunConfig) -> dict:
    return {
        "version": __version__,
        "strategies": [s.label for s in cfg.strategies],
        "params": dataclasses.asdict(cfg.params),
        "drawdown_window": list(cfg.drawdown_window) if cfg.drawdown_window else None,
        "bars": [str(p) for p in cfg.bars],
        "classification": str(cfg.classification) if cfg.classification else None,
    }


def cmd_backtest(cfg: RunConfig) -> int:
    cfg.check()
    panel = load_bars(list(cfg.bars) if len(cfg.bars) > 1 else cfg.bars[0])
    fundamental = load_fundamental_classification(cfg.classification) if cfg.classification else None

    def work(tmp: Path):
        results = run_grid(cfg, panel, fundamental)
        for r in results:
            d = tmp / r.spec.label
            d.mkdir()
            write_daily(r, d / "daily_pnl.csv")
            if r.nonconverged_days:
                logger.warning("%s: optimizer flagged %d non-converged days", r.spec.label, r.nonconverged_days)
        record = _run_record(cfg)
        record["cost_models"] = _cost_record(cfg, Backtester(panel, cfg.params, fundamental))
        (tmp / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        return render_outputs(tmp, cfg.strategies, cfg.params.gross, cfg.drawdown_window)

    rows = _staged(cfg.out, work)
    _print_table(rows)
    return 0


def _cost_record(cfg: RunConfig, engine: Backtester) -> list:
    """Calibrated cost parameters per refresh, for the run header."""
    if not any(s.costs for s in cfg.strategies):
        return []
    p = cfg.params
    out = []
    for k, day in enumerate(engine.refresh_dates):
        uni = engine.universe(k)
        m = calibrate(uni.addv, np.sqrt(floor_variance(uni.sigma2)), p.gross, p.cost_linear, p.cost_target)
        out.append({"refresh": str(day), **m.as_dict()})
    return out


def cmd_report(out: Path) -> int:
    record_path = out / "run.json"
    if not record_path.is_file():
        raise ConfigError(f"no run record at {record_path}; run 'backtest' first")
    record = json.loads(record_path.read_text())
    specs = [StrategySpec.parse(s) for s in record["strategies"]]
    window = tuple(record["drawdown_window"]) if record["drawdown_window"] else None
    rows = render_outputs(out, specs, float(record["params"]["gross"]), window)
    _print_table(rows)
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    market = generate_market(cfg.synth)

    def work(tmp: Path):
        write_market(market, tmp)
        (tmp / "synth.json").write_text(json.dumps(cfg.synth.as_dict(), indent=2, sort_keys=True) + "\n")

    _staged(cfg.out, work)
    msg = f"wrote {market.panel.n_tickers} tickers x {market.panel.n_dates} days to {cfg.out}"
    if cfg.synth.selloff_days:
        lo, hi = market.window("selloff")
        msg += f" (selloff {lo} .. {hi})"
    print(msg)
    return 0


def _print_table(rows) -> None:
    print("\t".join(SUMMARY_HEADER))
    for r in rows:
        print("\t".join(r))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="statarb", description="Daily-bar statistical arbitrage backtests.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synth", "generate a synthetic market (bars.csv, labels.csv, regimes.csv)"),
        ("backtest", "run the strategy grid and write summaries and plots"),
        ("report", "re-render summaries and plots from stored daily P&L"),
    ):
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", type=Path, help="flat key = value config file")
        s.add_argument("--out", type=Path, help="output directory (overrides the config)")
        s.add_argument("--seed", type=int, help="random seed (overrides the config)")
        s.add_argument("--jobs", type=int, help="worker processes for strategy cells")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            out = args.out or (load_config(args.config).out if args.config else None)
            if out is None:
                raise ConfigError("report needs --out or a config with 'out'")
            return cmd_report(out)
        cfg = load_config(args.config, {"out": args.out, "seed": args.seed, "jobs": args.jobs})
        if args.command == "synth":
            return cmd_synth(cfg)
        return cmd_backtest(cfg)
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"statarb {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
