"""Sign check on a real 2019-2020 adjusted daily-bar set.

Expects the C2C strategies (SIC, regression, no costs) to lose money over
the year ending 2020-03-23 with at least a 5% drawdown between 2020-02-20
and 2020-03-23, and the delay-0 strategy to make money.

    python scripts/real_data_check.py --bars bars_manifest.txt --sic sic.csv
"""

import argparse

from statarb.backtest import BacktestParams, Backtester, StrategySpec
from statarb.classify import load_fundamental_classification
from statarb.data import load_bars
from statarb.metrics import drawdown, format_metric, roc, sharpe

WINDOW = ("2020-02-20", "2020-03-23")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bars", required=True, help="bar CSV, manifest or directory")
    ap.add_argument("--sic", required=True, help="ticker,code file")
    ap.add_argument("--end", default="2020-03-23")
    args = ap.parse_args()

    engine = Backtester(load_bars(args.bars), BacktestParams(end=args.end), load_fundamental_classification(args.sic))
    ok = True
    for ret in ("D0", "MOM1", "C2C1", "C2C5", "C2C10", "C2C20"):
        res = engine.run(StrategySpec(ret))
        r = roc(res.daily_pnl)
        dd, trough = drawdown(res.daily_pnl, res.dates, WINDOW)
        line = f"{ret:6s} ROC {format_metric(r):>7s}  Sharpe {format_metric(sharpe(res.daily_pnl)):>6s}"
        if ret.startswith("C2C"):
            good = r < 0 and dd >= 5
            line += f"  drawdown {format_metric(dd)} (trough {trough})"
        else:
            good = r > 0 if ret == "D0" else True
        ok &= good
        print(line + ("" if good else "  <- unexpected sign"))
    print("sign check", "passed" if ok else "FAILED")
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
