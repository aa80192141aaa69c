"""Credit-text pipeline: CDS pricing, earnings-call credit scores, panel
forecasting regressions, and zero-credit-exposure long-short backtests."""

__version__ = "0.1.0"
