"""Re-learn / re-plan triggers driven by prediction error and catalog changes."""
from __future__ import annotations

import enum
import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

DEFAULT_EPSILON = 0.2
DEFAULT_WINDOW = 5


class EventKind(str, enum.Enum):
    RELEARN = "RELEARN"
    REPLAN = "REPLAN"
    PERIODIC = "PERIODIC"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TriggerEvent:
    kind: EventKind
    reason: str
    at: datetime

    def __post_init__(self):
        if not self.reason:
            raise ValueError("trigger reason must be nonempty")

    def to_dict(self) -> dict:
        return {"kind": str(self.kind), "reason": self.reason, "at": self.at.isoformat()}


def portfolio_snapshot(portfolio) -> dict:
    return {
        s.name: [s.series, s.vcpu, str(s.ecu), s.ram_gb, s.storage_gb, s.price_per_hour]
        for s in portfolio
    }


def portfolio_digest(portfolio) -> str:
    blob = json.dumps(sorted(portfolio_snapshot(portfolio).items()), separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ActuatorState:
    """Mutable trigger state; owned by a single writer."""

    epsilon: float = DEFAULT_EPSILON
    window_size: int = DEFAULT_WINDOW
    period_s: Optional[float] = None
    window: deque = field(default_factory=deque)
    last_portfolio_hash: Optional[str] = None
    last_portfolio: dict = field(default_factory=dict)
    last_periodic: Optional[datetime] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.window_size < 1:
            raise ValueError(f"window must be >= 1, got {self.window_size}")
        self.window = deque(self.window, maxlen=self.window_size)

    @classmethod
    def for_portfolio(cls, portfolio, **kw) -> "ActuatorState":
        state = cls(**kw)
        state.last_portfolio = portfolio_snapshot(portfolio)
        state.last_portfolio_hash = portfolio_digest(portfolio)
        return state


def _now(at):
    return at if at is not None else datetime.now(timezone.utc)


def observe(state: ActuatorState, actual_s: float, predicted_s: float,
            at: Optional[datetime] = None) -> Optional[TriggerEvent]:
    """Record one relative error; RELEARN once the whole window breaches epsilon."""
    if not predicted_s > 0:
        raise ValueError(f"predicted_s must be positive, got {predicted_s}")
    if not actual_s > 0:
        raise ValueError(f"actual_s must be positive, got {actual_s}")
    err = abs(actual_s - predicted_s) / actual_s
    state.window.append(err)
    if len(state.window) == state.window_size and all(e > state.epsilon for e in state.window):
        worst = max(state.window)
        state.window.clear()
        return TriggerEvent(
            EventKind.RELEARN,
            f"{state.window_size} consecutive relative errors above {state.epsilon:g} "
            f"(max {worst:.3f})",
            _now(at),
        )
    return None


def on_portfolio_change(state: ActuatorState, new_portfolio,
                        at: Optional[datetime] = None) -> Optional[TriggerEvent]:
    digest = portfolio_digest(new_portfolio)
    if digest == state.last_portfolio_hash:
        return None
    old, new = state.last_portfolio, portfolio_snapshot(new_portfolio)
    parts = []
    added = sorted(set(new) - set(old))
    removed = sorted(set(old) - set(new))
    changed = sorted(k for k in set(old) & set(new) if old[k] != new[k])
    if state.last_portfolio_hash is None:
        parts.append("initial portfolio")
    else:
        if added:
            parts.append("added " + ", ".join(added))
        if removed:
            parts.append("removed " + ", ".join(removed))
        if changed:
            parts.append("changed " + ", ".join(changed))
    state.last_portfolio_hash = digest
    state.last_portfolio = new
    return TriggerEvent(EventKind.REPLAN, "portfolio " + "; ".join(parts or ["reordered"]), _now(at))


def tick(state: ActuatorState, at: datetime) -> Optional[TriggerEvent]:
    """Emit PERIODIC when period_s has elapsed since the last periodic event."""
    if state.period_s is None:
        return None
    if state.last_periodic is None:
        state.last_periodic = at
        return None
    if (at - state.last_periodic).total_seconds() >= state.period_s:
        state.last_periodic = at
        return TriggerEvent(EventKind.PERIODIC, f"period of {state.period_s:g} s elapsed", at)
    return None


def write_events(events, path) -> None:
    with Path(path).open("w") as fh:
        for e in events:
            fh.write(json.dumps(e.to_dict()) + "\n")


def read_events(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            obj = json.loads(line)
            out.append(TriggerEvent(EventKind(obj["kind"]), obj["reason"],
                                    datetime.fromisoformat(obj["at"])))
    return out
