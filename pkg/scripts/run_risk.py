"""Empirical squared l2 risk of both estimators against the exact leading constants."""

from _common import run_from_config

if __name__ == "__main__":
    run_from_config("risk", __doc__)
