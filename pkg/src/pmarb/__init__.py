"""Top-of-book reconstruction and arbitrage episode analysis for binary prediction markets."""

__version__ = "0.1.0"
