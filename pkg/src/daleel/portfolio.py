"""Provider instance catalog and customer constraints.

The catalog is a CSV with header
``name,series,vcpu,ecu,ram_gb,storage_gb,price_per_hour``; constraints are a
JSON object (see :func:`load_constraints`).
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

PORTFOLIO_COLUMNS = ("name", "series", "vcpu", "ecu", "ram_gb", "storage_gb", "price_per_hour")
ALL_DAYS = (1, 2, 3, 4, 5, 6, 7)


class PortfolioError(ValueError):
    """Malformed or invalid catalog / constraints input."""


class Ecu(enum.Enum):
    VARIABLE = "var"

    def __str__(self):
        return self.value


VARIABLE = Ecu.VARIABLE


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    series: str
    vcpu: int
    ecu: Union[float, Ecu]
    ram_gb: float
    storage_gb: float
    price_per_hour: float

    def __post_init__(self):
        if not self.name:
            raise PortfolioError("instance name must be nonempty")
        if self.vcpu < 1:
            raise PortfolioError(f"{self.name}: vcpu must be >= 1, got {self.vcpu}")
        if not (self.ram_gb > 0 and math.isfinite(self.ram_gb)):
            raise PortfolioError(f"{self.name}: ram_gb must be positive, got {self.ram_gb}")
        if not (self.storage_gb > 0 and math.isfinite(self.storage_gb)):
            raise PortfolioError(f"{self.name}: storage_gb must be positive, got {self.storage_gb}")
        if not (self.price_per_hour > 0 and math.isfinite(self.price_per_hour)):
            raise PortfolioError(
                f"{self.name}: price_per_hour must be positive, got {self.price_per_hour}"
            )
        if self.ecu is not VARIABLE and not (self.ecu >= 0 and math.isfinite(self.ecu)):
            raise PortfolioError(f"{self.name}: ecu must be nonnegative or 'var', got {self.ecu}")


Portfolio = tuple  # tuple[InstanceSpec, ...], file order


def _check_unique(specs):
    seen = set()
    for s in specs:
        if s.name in seen:
            raise PortfolioError(f"duplicate instance name {s.name!r}")
        seen.add(s.name)


def make_portfolio(specs) -> Portfolio:
    specs = tuple(specs)
    if not specs:
        raise PortfolioError("empty portfolio")
    _check_unique(specs)
    return specs


def parse_ecu(raw: str):
    txt = raw.strip().lower().rstrip(".")
    if txt in ("var", "variable"):
        return VARIABLE
    return float(txt)


def parse_portfolio(lines, source: str = "<portfolio>") -> Portfolio:
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise PortfolioError(f"{source}: missing header")
    missing = [c for c in PORTFOLIO_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise PortfolioError(f"{source}: missing columns {missing}")
    specs = []
    for i, row in enumerate(reader, start=1):
        try:
            vcpu_f = float(row["vcpu"])
            if vcpu_f != int(vcpu_f):
                raise ValueError(f"vcpu must be an integer, got {row['vcpu']!r}")
            spec = InstanceSpec(
                name=row["name"].strip(),
                series=row["series"].strip(),
                vcpu=int(vcpu_f),
                ecu=parse_ecu(row["ecu"]),
                ram_gb=float(row["ram_gb"]),
                storage_gb=float(row["storage_gb"]),
                price_per_hour=float(row["price_per_hour"]),
            )
        except PortfolioError:
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise PortfolioError(f"{source}: row {i}: {exc}") from exc
        specs.append(spec)
    return make_portfolio(specs)


def load_portfolio(path) -> Portfolio:
    path = Path(path)
    with path.open(newline="") as fh:
        return parse_portfolio(fh, source=str(path))


def default_portfolio() -> Portfolio:
    """The six EC2 instance types profiled in the original study."""
    ref = resources.files("daleel").joinpath("data/ec2_catalog.csv")
    with ref.open("r", newline="") as fh:
        return parse_portfolio(fh, source="ec2_catalog.csv")


def write_portfolio(portfolio, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PORTFOLIO_COLUMNS)
        for s in portfolio:
            w.writerow([s.name, s.series, s.vcpu, str(s.ecu), repr(s.ram_gb),
                        repr(s.storage_gb), repr(s.price_per_hour)])


@dataclass(frozen=True)
class Vignette:
    app_id: str
    attributes: tuple = ()

    def __post_init__(self):
        if not self.app_id:
            raise PortfolioError("vignette app_id must be nonempty")
        keys = [k for k, _ in self.attributes]
        if len(keys) != len(set(keys)):
            raise PortfolioError("vignette attribute keys must be unique")

    def get(self, key, default=None):
        return dict(self.attributes).get(key, default)


@dataclass(frozen=True)
class Constraints:
    max_execution_time_s: Optional[float] = None
    budget_usd: Optional[float] = None
    allowed_days: Optional[tuple] = None
    weights: Optional[tuple] = None  # (w_time, w_cost)


def validate_constraints(c: Constraints) -> Constraints:
    """Apply defaults and rescale weights to sum to one.

    Idempotent: a normalized Constraints passes through unchanged.
    """
    for label, value in (("max_execution_time_s", c.max_execution_time_s),
                         ("budget_usd", c.budget_usd)):
        if value is not None and not (value > 0 and math.isfinite(value)):
            raise PortfolioError(f"{label} must be positive, got {value}")

    if c.allowed_days is None:
        days = ALL_DAYS
    else:
        days = tuple(sorted({int(d) for d in c.allowed_days}))
        bad = [d for d in days if d not in ALL_DAYS]
        if bad:
            raise PortfolioError(f"allowed_days outside 1..7: {bad}")
        if not days:
            raise PortfolioError("allowed_days is empty")

    w_time, w_cost = (0.5, 0.5) if c.weights is None else (float(c.weights[0]), float(c.weights[1]))
    if w_time < 0 or w_cost < 0 or not (math.isfinite(w_time) and math.isfinite(w_cost)):
        raise PortfolioError(f"weights must be nonnegative, got ({w_time}, {w_cost})")
    total = w_time + w_cost
    if total <= 0:
        raise PortfolioError("weights must not both be zero")
    # already-normalized weights are left alone so that the function is idempotent
    if abs(total - 1.0) > 4 * 2.220446049250313e-16:
        w_time, w_cost = w_time / total, w_cost / total

    return replace(c, allowed_days=days, weights=(w_time, w_cost))


def constraints_from_dict(obj: dict) -> Constraints:
    weights = obj.get("weights")
    if weights is not None:
        if isinstance(weights, dict):
            weights = (weights.get("time", 0.0), weights.get("cost", 0.0))
        else:
            weights = tuple(weights)
    days = obj.get("allowed_days")
    return Constraints(
        max_execution_time_s=obj.get("max_execution_time_s"),
        budget_usd=obj.get("budget_usd"),
        allowed_days=None if days is None else tuple(days),
        weights=weights,
    )


def load_constraints(path) -> Constraints:
    """Read and normalize a constraints JSON file."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise PortfolioError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise PortfolioError(f"{path}: expected a JSON object")
    return validate_constraints(constraints_from_dict(obj))


def load_vignette(path) -> Optional[Vignette]:
    """Vignette stored under the ``vignette`` key of a constraints file, if any."""
    obj = json.loads(Path(path).read_text())
    v = obj.get("vignette") if isinstance(obj, dict) else None
    if v is None:
        return None
    attrs = v.get("attributes", {})
    if isinstance(attrs, dict):
        attrs = tuple((str(k), str(val)) for k, val in attrs.items())
    else:
        attrs = tuple((str(k), str(val)) for k, val in attrs)
    return Vignette(app_id=str(v.get("app_id", "")), attributes=attrs)


def constraints_to_dict(c: Constraints) -> dict:
    return {
        "max_execution_time_s": c.max_execution_time_s,
        "budget_usd": c.budget_usd,
        "allowed_days": None if c.allowed_days is None else list(c.allowed_days),
        "weights": None if c.weights is None else {"time": c.weights[0], "cost": c.weights[1]},
    }
