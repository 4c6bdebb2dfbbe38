"""Scaled remainders of the first-order expansion across a grid of n."""

from _common import run_from_config

if __name__ == "__main__":
    run_from_config("expansion", __doc__)
