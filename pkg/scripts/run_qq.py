"""Normality of the standardized target-coordinate errors (KS distance and quantiles)."""

from _common import run_from_config

if __name__ == "__main__":
    run_from_config("qq", __doc__)
