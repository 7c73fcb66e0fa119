"""
Trajectory CSV files: written with full float precision, read back losslessly.
"""

import logging

import pandas as pd

from src.dynamics import Trajectory
from src.report import write_atomic

FLOAT_FORMAT = "%.17g"


def trajectory_csv(trajectory: Trajectory) -> str:
    return trajectory.to_frame().to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_trajectory(path: str, trajectory: Trajectory) -> None:
    """Writes the trajectory table atomically."""
    write_atomic(path, trajectory_csv(trajectory))
    logging.info(f"Trajectory with {len(trajectory.times)} rows written to {path}")


def read_trajectory(path: str) -> pd.DataFrame:
    """Reads a trajectory table; floats round-trip to the last printed digit."""
    return pd.read_csv(path, float_precision="round_trip")
