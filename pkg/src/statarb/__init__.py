"""Daily-bar statistical-arbitrage backtesting on intraday (open-to-close) holdings."""

__version__ = "0.1.0"
