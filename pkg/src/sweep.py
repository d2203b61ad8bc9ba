"""
Sweep module: batch error-ratio experiments over a parameter grid.

Each grid cell and realization generates a signed ER network, simulates the
Gaussian process, infers the network and scores it against the truth. Cell
means, standard errors and the critical sample size T* are aggregated with
pandas.
"""

import itertools
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from inference import InferenceMethod, SignificanceConfig, infer_network
from network_model import error_ratios, generate_er_signed
from ocse_errors import DegeneracyError, InvalidParameterError, NilpotentNetworkError
from process import GaussianProcessSpec, simulate_gaussian

logger = logging.getLogger(__name__)

SLICE_COLUMNS = ["n", "density", "rho", "method", "r", "theta"]
CELL_COLUMNS = ["n", "density", "rho", "T", "method", "r", "theta"]


class SweepSpec(BaseModel):
    """Parameter grid of a sweep; p and degree (n p) are alternative density axes."""

    model_config = ConfigDict(frozen=True)

    n: List[int] = Field(min_length=1)
    p: Optional[List[float]] = None
    degree: Optional[List[float]] = None
    rho: List[float] = Field(min_length=1)
    T: List[int] = Field(min_length=1)
    method: List[InferenceMethod] = Field(default=[InferenceMethod.OCSE], min_length=1)
    r: List[int] = Field(default=[100], min_length=1)
    theta: List[float] = Field(default=[0.99], min_length=1)
    realizations: int = Field(1, ge=1)
    master_seed: int = 0
    noise_std: float = Field(1.0, gt=0.0)
    n_jobs: int = 1

    @field_validator("n", "T", "r")
    @classmethod
    def _positive(cls, values):
        if any(v < 1 for v in values):
            raise ValueError("grid values must be positive")
        return values

    @field_validator("rho")
    @classmethod
    def _stable(cls, values):
        if any(not 0.0 < v < 1.0 for v in values):
            raise ValueError("rho values must lie in (0, 1)")
        return values

    @field_validator("theta")
    @classmethod
    def _level(cls, values):
        if any(not 0.0 < v < 1.0 for v in values):
            raise ValueError("theta values must lie in (0, 1)")
        return values

    @model_validator(mode="after")
    def _one_density_axis(self):
        if (self.p is None) == (self.degree is None):
            raise ValueError("exactly one of p and degree must be given")
        if not self.densities:
            raise ValueError("density axis must be nonempty")
        return self

    @property
    def densities(self) -> List[float]:
        return list(self.p if self.p is not None else self.degree)

    def link_probability(self, n: int, density: float) -> float:
        p = density if self.p is not None else density / n
        if not 0.0 < p <= 1.0:
            raise InvalidParameterError(f"Link probability {p:.4g} out of (0, 1] for n={n}")
        return p

    def cells(self) -> List[Tuple]:
        """Grid cells in deterministic order, one tuple per CELL_COLUMNS row."""
        return list(itertools.product(
            self.n, self.densities, self.rho, self.T, self.method, self.r, self.theta
        ))


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Per-cell summaries and T* per (n, density, rho, method, r, theta) slice."""

    cells: pd.DataFrame
    critical_sample_sizes: Dict[Tuple, Optional[int]]

    def to_frame(self) -> pd.DataFrame:
        t_star = [
            self.critical_sample_sizes.get(tuple(row)) for row in self.cells[SLICE_COLUMNS].itertuples(index=False)
        ]
        frame = self.cells.copy()
        frame["T_star"] = pd.array(t_star, dtype="Int64")
        return frame

    def write_csv(self, path) -> None:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.12g")
        logger.info(f"Wrote {len(self.cells)} sweep cells to {path}")


def derive_seed(master_seed: int, *key: int) -> int:
    """Independent integer seed for the given key path."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def _run_realization(spec: SweepSpec, cell_index: Tuple[int, ...], cell: Tuple, realization: int) -> Dict:
    """One network -> series -> inference -> error ratio run."""
    n, density, rho, T, method, r, theta = cell
    n_idx, density_idx, rho_idx, t_idx = cell_index
    # Network seeds skip the T, method, r and theta axes so those compare on one network.
    network_seed = derive_seed(spec.master_seed, n_idx, density_idx, rho_idx, realization)
    series_seed = derive_seed(spec.master_seed, n_idx, density_idx, rho_idx, realization, t_idx)
    record = {"cell": cell, "eps_minus": np.nan, "eps_plus": np.nan, "degenerate": False}

    started = time.perf_counter()
    try:
        p = spec.link_probability(n, density)
    except InvalidParameterError as e:
        logger.warning(f"Cell {cell} is infeasible: {e}")
        record.update(degenerate=True, runtime=0.0)
        return record
    try:
        truth = generate_er_signed(n, p, rho, network_seed)
        series = simulate_gaussian(GaussianProcessSpec(truth, spec.noise_std, seed=series_seed), T)
        cfg = SignificanceConfig(r=r, theta=theta, seed=series_seed)
        inferred = infer_network(series, method, cfg, keep_traces=False)
        if inferred.degenerate_nodes:
            record["degenerate"] = True
        else:
            ratios = error_ratios(truth, inferred.to_network())
            if ratios.false_negative is not None:
                record["eps_minus"] = ratios.false_negative
            if ratios.false_positive is not None:
                record["eps_plus"] = ratios.false_positive
    except (DegeneracyError, NilpotentNetworkError) as e:
        logger.warning(f"Cell {cell} realization {realization} is degenerate: {e}")
        record["degenerate"] = True
    record["runtime"] = time.perf_counter() - started
    return record


def critical_sample_size(by_T: pd.DataFrame, theta: float) -> Optional[int]:
    """Smallest T whose mean eps- falls below 1 - theta; None if none does."""
    below = by_T[by_T["eps_minus"] < 1.0 - theta]
    if below.empty:
        return None
    return int(below["T"].min())


def run_sweep(spec: SweepSpec) -> SweepResult:
    """
    Run every grid cell for spec.realizations realizations.

    Work is spread over spec.n_jobs joblib workers; results come back in
    submission order so the outcome only depends on master_seed.

    Args:
        spec: Validated sweep grid

    Returns:
        SweepResult with one row per cell and T* per slice
    """
    cells = spec.cells()
    axes = [spec.n, spec.densities, spec.rho, spec.T]
    tasks = []
    for cell in cells:
        cell_index = tuple(axis.index(value) for axis, value in zip(axes, cell[:4]))
        for realization in range(spec.realizations):
            tasks.append((cell_index, cell, realization))

    total = len(tasks)
    logger.info(f"Sweep: {len(cells)} cells x {spec.realizations} realizations = {total} inferences")
    records: List[Dict] = []
    results = Parallel(n_jobs=spec.n_jobs, return_as="generator")(
        delayed(_run_realization)(spec, cell_index, cell, realization)
        for cell_index, cell, realization in tasks
    )
    for completed, record in enumerate(results, start=1):
        records.append(record)
        logger.info(f"Sweep progress: completed {completed}/{total}")

    rows = []
    for cell in cells:
        cell_records = pd.DataFrame([rec for rec in records if rec["cell"] == cell])
        usable = cell_records[~cell_records["degenerate"]]
        row = dict(zip(CELL_COLUMNS, cell))
        row["method"] = cell[4].value
        row.update({
            "realizations": len(cell_records),
            "degenerate": int(cell_records["degenerate"].sum()),
            "eps_minus": usable["eps_minus"].mean(),
            "eps_plus": usable["eps_plus"].mean(),
            "eps_minus_stderr": usable["eps_minus"].sem(),
            "eps_plus_stderr": usable["eps_plus"].sem(),
            "runtime": cell_records["runtime"].mean(),
        })
        rows.append(row)
    frame = pd.DataFrame(rows)

    critical = {}
    for key, group in frame.groupby(SLICE_COLUMNS, sort=False):
        theta = key[SLICE_COLUMNS.index("theta")]
        critical[tuple(key)] = critical_sample_size(group, theta)
    return SweepResult(cells=frame, critical_sample_sizes=critical)
