"""Seeded synthetic profiling data from a known (2,3,3) polynomial plus noise.

The default scenario mirrors the qualitative behaviour of the original EC2
measurements: m3.medium is the slowest type, the T2 types are the cheapest per
run, and c4.large is on par with the bigger C4 machines. Magnitudes are
illustrative only.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from daleel.dataset import Dataset, RunRecord
from daleel.portfolio import (
    InstanceSpec,
    load_portfolio,
    make_portfolio,
    parse_ecu,
    parse_portfolio,
)
from daleel.regress import POLY_BASIS, expand_basis

# a Monday; cells advance in ten-minute slots, wrapping into later weeks
EPOCH = datetime(2016, 2, 1)
SLOT = timedelta(minutes=10)
SLOTS_PER_DAY = 144
MAX_RESAMPLE = 10_000


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    """intercept + 8 coefficients ordered ram, ram^2, vcpu, vcpu^2, vcpu^3, day, day^2, day^3."""

    intercept: float
    coefficients: tuple

    def __post_init__(self):
        coefs = tuple(float(c) for c in self.coefficients)
        if len(coefs) != POLY_BASIS.p:
            raise ScenarioError(f"ground truth needs {POLY_BASIS.p} coefficients, got {len(coefs)}")
        object.__setattr__(self, "coefficients", coefs)

    def __call__(self, ram_gb, vcpu, day) -> float:
        phi = expand_basis((ram_gb, vcpu, day), POLY_BASIS)
        return float(self.intercept + np.dot(phi[1:], self.coefficients))


@dataclass(frozen=True)
class Scenario:
    portfolio: tuple
    ground_truth: GroundTruth
    noise_sd_s: float = 10.0
    runs_per_cell: int = 41
    offsets: dict = field(default_factory=dict)
    app_id: str = "vard"

    def __post_init__(self):
        if self.noise_sd_s < 0:
            raise ScenarioError(f"noise_sd_s must be nonnegative, got {self.noise_sd_s}")
        if self.runs_per_cell < 1:
            raise ScenarioError(f"runs_per_cell must be >= 1, got {self.runs_per_cell}")
        names = {s.name for s in self.portfolio}
        unknown = sorted(set(self.offsets) - names)
        if unknown:
            raise ScenarioError(f"offsets for unknown instances: {unknown}")
        if not all(np.isfinite(v) for v in self.offsets.values()):
            raise ScenarioError("offsets must be finite")

    def cell_mean(self, inst: InstanceSpec, day: int) -> float:
        return self.ground_truth(inst.ram_gb, inst.vcpu, day) + self.offsets.get(inst.name, 0.0)


DEFAULT_GROUND_TRUTH = GroundTruth(
    intercept=133.0,
    coefficients=(111.0, -8.6, -255.0, 43.4, -1.0, 12.0, -4.0, 0.4),
)
DEFAULT_OFFSETS = {
    "t2.small": -0.8,
    "t2.medium": -12.8,
    "m3.medium": 1.5,
    "m3.large": -0.2,
    "c4.large": 13.3,
    "c4.xlarge": 0.1,
    "c4.2xlarge": -1.4,
}


def synthetic_portfolio() -> tuple:
    """Table-1 instance types plus c4.2xlarge.

    The six profiled types expose only three distinct vCPU counts, which makes
    a cubic vCPU term unidentifiable; the 8-vCPU type restores full rank.
    """
    ref = resources.files("daleel").joinpath("data/synthetic_portfolio.csv")
    with ref.open("r", newline="") as fh:
        return parse_portfolio(fh, source="synthetic_portfolio.csv")


def default_scenario() -> Scenario:
    return Scenario(
        portfolio=synthetic_portfolio(),
        ground_truth=DEFAULT_GROUND_TRUTH,
        noise_sd_s=10.0,
        runs_per_cell=41,
        offsets=dict(DEFAULT_OFFSETS),
    )


def _timestamp(day: int, run: int) -> datetime:
    week, slot = divmod(run, SLOTS_PER_DAY)
    return EPOCH + timedelta(days=7 * week + day - 1) + slot * SLOT


def generate(s: Scenario, seed: int = 42) -> Dataset:
    """runs_per_cell records per (instance, day), instance-major then day then run."""
    for inst in s.portfolio:
        for day in range(1, 8):
            if not s.cell_mean(inst, day) > 0:
                raise ScenarioError(
                    f"ground truth is nonpositive for {inst.name} on day {day}: "
                    f"{s.cell_mean(inst, day):.4g} s"
                )
    records = []
    for i, inst in enumerate(s.portfolio):
        for day in range(1, 8):
            rng = np.random.default_rng([seed, i, day])
            mu = s.cell_mean(inst, day)
            for run in range(s.runs_per_cell):
                t = mu + rng.normal(0.0, s.noise_sd_s) if s.noise_sd_s > 0 else mu
                tries = 0
                while t <= 0:
                    tries += 1
                    if tries > MAX_RESAMPLE:
                        raise ScenarioError(f"could not draw a positive time for {inst.name} day {day}")
                    t = mu + rng.normal(0.0, s.noise_sd_s)
                records.append(RunRecord(
                    timestamp=_timestamp(day, run),
                    instance_name=inst.name,
                    vcpu=inst.vcpu,
                    ram_gb=inst.ram_gb,
                    price_per_hour=inst.price_per_hour,
                    day_of_week=day,
                    execution_time_s=float(t),
                    app_id=s.app_id,
                ))
    return Dataset(tuple(records), provenance=f"synthetic(seed={seed})")


def scenario_from_dict(obj: dict, base_dir: Optional[Path] = None) -> Scenario:
    port = obj.get("portfolio")
    if port is None:
        portfolio = synthetic_portfolio()
    elif isinstance(port, str):
        path = Path(port)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        portfolio = load_portfolio(path)
    else:
        try:
            portfolio = make_portfolio(InstanceSpec(
                name=row["name"], series=row.get("series", ""), vcpu=int(row["vcpu"]),
                ecu=parse_ecu(str(row.get("ecu", "0"))),
                ram_gb=float(row["ram_gb"]), storage_gb=float(row.get("storage_gb", 1.0)),
                price_per_hour=float(row["price_per_hour"]),
            ) for row in port)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad inline portfolio: {exc}") from exc
    gt = obj.get("ground_truth")
    if gt is None:
        ground_truth = DEFAULT_GROUND_TRUTH
    else:
        ground_truth = GroundTruth(float(gt["intercept"]), tuple(gt["coefficients"]))
    return Scenario(
        portfolio=portfolio,
        ground_truth=ground_truth,
        noise_sd_s=float(obj.get("noise_sd_s", 10.0)),
        runs_per_cell=int(obj.get("runs_per_cell", 41)),
        offsets={k: float(v) for k, v in obj.get("offsets", {}).items()},
        app_id=str(obj.get("app_id", "vard")),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_dict(obj, base_dir=path.parent)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "app_id": s.app_id,
        "portfolio": [
            {"name": p.name, "series": p.series, "vcpu": p.vcpu, "ecu": str(p.ecu),
             "ram_gb": p.ram_gb, "storage_gb": p.storage_gb, "price_per_hour": p.price_per_hour}
            for p in s.portfolio
        ],
        "ground_truth": {"intercept": s.ground_truth.intercept,
                         "coefficients": list(s.ground_truth.coefficients)},
        "offsets": dict(s.offsets),
        "noise_sd_s": s.noise_sd_s,
        "runs_per_cell": s.runs_per_cell,
    }
