"""Threshold alarm rules evaluated over each published snapshot.

Consecutive-sample hysteresis (default 3) suppresses single-sample spikes.
NULL readings freeze a streak rather than reset it, so link dropouts cannot
mask a developing hazard. For any (rule, node) the emitted events strictly
alternate RAISED, CLEARED, RAISED, ...
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .environment import Channel
from .topology import NodeAddress, is_descendant


class AlertError(ValueError):
    """Base for rule-management problems."""


class DuplicateRuleError(AlertError):
    """A rule with this id already exists."""


class UnknownRuleError(AlertError):
    """No rule with this id."""


class InactiveAlarmError(AlertError):
    """Acknowledgment targeted an alarm that is not active."""


class Comparator(Enum):
    GE = "GE"
    LE = "LE"


class AlarmKind(Enum):
    RAISED = "RAISED"
    CLEARED = "CLEARED"


@dataclass(frozen=True)
class AlertRule:
    """Threshold predicate over a subtree.

    scope None means the whole network (serialized as "ALL").
    """

    id: str
    channel: Channel
    comparator: Comparator
    threshold: float
    scope: NodeAddress | None = None
    consecutive: int = 3

    def __post_init__(self) -> None:
        if not self.id:
            raise AlertError("rule id must be non-empty")
        if self.consecutive < 1:
            raise AlertError("consecutive must be >= 1")

    def matches(self, addr: NodeAddress, channel: Channel) -> bool:
        if channel is not self.channel:
            return False
        return self.scope is None or is_descendant(addr, self.scope)

    def satisfied(self, value: float) -> bool:
        if self.comparator is Comparator.GE:
            return value >= self.threshold
        return value <= self.threshold

    def scope_id(self) -> str:
        return "ALL" if self.scope is None else str(self.scope)


@dataclass
class AlarmStatus:
    """Mutable per-(rule, node) state."""

    streak: int = 0
    active: bool = False
    acknowledged: bool = False
    value: float | None = None
    seq: int | None = None


@dataclass(frozen=True)
class AlarmEvent:
    kind: AlarmKind
    rule_id: str
    address: NodeAddress
    value: float
    seq: int


def evaluate(
    snapshot,
    rules: dict[str, AlertRule],
    states: dict[tuple[str, NodeAddress], AlarmStatus],
) -> list[AlarmEvent]:
    """Advance alarm state over one snapshot; return the emitted events.

    Deterministic: rules in id order, entries in snapshot order. States for
    fresh (rule, node) pairs are created lazily.
    """
    events: list[AlarmEvent] = []
    for rule_id in sorted(rules):
        rule = rules[rule_id]
        for entry in snapshot.entries:
            if not rule.matches(entry.address, entry.channel):
                continue
            status = states.setdefault((rule.id, entry.address), AlarmStatus())
            if entry.value is None:
                continue  # absence freezes the streak
            if rule.satisfied(entry.value):
                if not status.active:
                    status.streak += 1
                    if status.streak >= rule.consecutive:
                        status.active = True
                        status.acknowledged = False
                        status.value = entry.value
                        status.seq = snapshot.seq
                        events.append(AlarmEvent(AlarmKind.RAISED, rule.id, entry.address, entry.value, snapshot.seq))
            else:
                status.streak = 0
                if status.active:
                    status.active = False
                    status.acknowledged = False
                    events.append(AlarmEvent(AlarmKind.CLEARED, rule.id, entry.address, entry.value, snapshot.seq))
    return events


@dataclass
class ActiveAlarm:
    """Listing row for one active alarm."""

    rule_id: str
    address: NodeAddress
    value: float | None
    seq: int | None
    acknowledged: bool


class AlertEngine:
    """Rules plus alarm state; mutations and evaluation are serialized by
    the owning gateway's publication lock."""

    def __init__(self, rules: tuple[AlertRule, ...] | list[AlertRule] = ()) -> None:
        self._rules: dict[str, AlertRule] = {}
        self._states: dict[tuple[str, NodeAddress], AlarmStatus] = {}
        for rule in rules:
            self.add_rule(rule)

    def add_rule(self, rule: AlertRule) -> None:
        if rule.id in self._rules:
            raise DuplicateRuleError(f"duplicate rule id {rule.id!r}")
        self._rules[rule.id] = rule

    def remove_rule(self, rule_id: str) -> None:
        if rule_id not in self._rules:
            raise UnknownRuleError(f"unknown rule id {rule_id!r}")
        del self._rules[rule_id]
        for key in [k for k in self._states if k[0] == rule_id]:
            del self._states[key]

    def list_rules(self) -> tuple[AlertRule, ...]:
        return tuple(self._rules[r] for r in sorted(self._rules))

    def get_rule(self, rule_id: str) -> AlertRule:
        if rule_id not in self._rules:
            raise UnknownRuleError(f"unknown rule id {rule_id!r}")
        return self._rules[rule_id]

    def active_alarms(self) -> tuple[ActiveAlarm, ...]:
        out = []
        for (rule_id, addr), status in sorted(self._states.items()):
            if status.active:
                out.append(ActiveAlarm(rule_id, addr, status.value, status.seq, status.acknowledged))
        return tuple(out)

    def acknowledge(self, rule_id: str, addr: NodeAddress) -> None:
        """Mark an active alarm acknowledged; it stays active until cleared."""
        if rule_id not in self._rules:
            raise UnknownRuleError(f"unknown rule id {rule_id!r}")
        status = self._states.get((rule_id, addr))
        if status is None or not status.active:
            raise InactiveAlarmError(f"no active alarm for rule {rule_id!r} at {addr}")
        status.acknowledged = True

    def evaluate(self, snapshot) -> list[AlarmEvent]:
        return evaluate(snapshot, self._rules, self._states)


def manage_rules(engine: AlertEngine, command: str, payload=None):
    """Dispatch one rule-management command: add | remove | list | ack."""
    if command == "add":
        engine.add_rule(payload)
        return payload
    if command == "remove":
        engine.remove_rule(payload)
        return None
    if command == "list":
        return {"rules": engine.list_rules(), "active": engine.active_alarms()}
    if command == "ack":
        rule_id, addr = payload
        engine.acknowledge(rule_id, addr)
        return None
    raise AlertError(f"unknown command {command!r}")
