"""Coverage of the target merit interval and the rank interval."""

from _common import run_from_config

if __name__ == "__main__":
    run_from_config("coverage", __doc__)
