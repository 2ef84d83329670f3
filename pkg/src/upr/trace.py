"""Reconfiguration trace: ordered event records and their line format.

One event per line, `key=value` fields separated by single spaces, so a
trace file is diffable, greppable and byte-stable for golden tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

from .tcdg import Dependency
from .topology import ChannelId, Network, NodeId

CONDITION_CHECK = "ConditionCheck"
UPGRADE = "Upgrade"
REMOVAL_REQUESTED = "RemovalRequested"
DEPENDENCY_REMOVED = "DependencyRemoved"
DEPENDENCY_ADDED = "DependencyAdded"
INJECTION_HALTED = "InjectionHalted"
INJECTION_RESUMED = "InjectionResumed"
RI_RESTORED = "RiRestored"
GHOST_REMOVED = "GhostRemoved"

EVENT_KINDS = (
    CONDITION_CHECK,
    UPGRADE,
    REMOVAL_REQUESTED,
    DEPENDENCY_REMOVED,
    DEPENDENCY_ADDED,
    INJECTION_HALTED,
    INJECTION_RESUMED,
    RI_RESTORED,
    GHOST_REMOVED,
)

# DependencyRemoved reasons; the drainage/halting fallback is what the
# drained-channel metric counts.
REASON_CONFORMABILITY = "conformability"
REASON_COMPATIBILITY = "compatibility"
REASON_DRAINED = "drained"
REASON_HALTED = "halted"
REASON_PRUNED = "pruned"
REASON_RI_REDUCTION = "ri_reduction"

FALLBACK_REASONS = frozenset({REASON_DRAINED, REASON_HALTED})


@dataclass(frozen=True)
class Event:
    ts: int
    kind: str
    channel: Optional[ChannelId] = None
    dep: Optional[Dependency] = None
    graph: Optional[str] = None  # "P" or "I"
    reason: Optional[str] = None
    outcome: Optional[str] = None  # ConditionCheck result
    offending: Tuple[NodeId, ...] = ()
    source: Optional[NodeId] = None  # halted/resumed flow endpoints
    target: Optional[NodeId] = None

    def to_line(self, net: Network) -> str:
        parts = [f"ts={self.ts}", f"kind={self.kind}"]
        if self.channel is not None:
            parts.append(f"channel={net.channel_label(self.channel)}")
        if self.dep is not None:
            parts.append(f"dep_src={net.channel_label(self.dep.src)}")
            parts.append(f"dep_dst={net.channel_label(self.dep.dst)}")
            parts.append(f"dep_target={net.node_label(self.dep.target)}")
        if self.graph is not None:
            parts.append(f"graph={self.graph}")
        if self.reason is not None:
            parts.append(f"reason={self.reason}")
        if self.outcome is not None:
            parts.append(f"outcome={self.outcome}")
        if self.offending:
            labels = ",".join(net.node_label(t) for t in self.offending)
            parts.append(f"offending={labels}")
        if self.source is not None:
            parts.append(f"source={net.node_label(self.source)}")
        if self.target is not None:
            parts.append(f"target={net.node_label(self.target)}")
        return " ".join(parts)


def parse_line(line: str, net: Network) -> Event:
    fields = dict(item.split("=", 1) for item in line.strip().split(" "))
    dep = None
    if "dep_src" in fields:
        dep = Dependency(
            net.parse_channel_label(fields["dep_src"]),
            net.parse_channel_label(fields["dep_dst"]),
            net.parse_node_label(fields["dep_target"]),
        )
    offending: Tuple[NodeId, ...] = ()
    if "offending" in fields:
        offending = tuple(
            net.parse_node_label(s) for s in fields["offending"].split(",")
        )
    return Event(
        ts=int(fields["ts"]),
        kind=fields["kind"],
        channel=net.parse_channel_label(fields["channel"]) if "channel" in fields else None,
        dep=dep,
        graph=fields.get("graph"),
        reason=fields.get("reason"),
        outcome=fields.get("outcome"),
        offending=offending,
        source=net.parse_node_label(fields["source"]) if "source" in fields else None,
        target=net.parse_node_label(fields["target"]) if "target" in fields else None,
    )


def format_trace(events: Iterable[Event], net: Network) -> str:
    return "".join(e.to_line(net) + "\n" for e in events)


def write_trace(path: Path, events: Iterable[Event], net: Network) -> None:
    Path(path).write_text(format_trace(events, net), encoding="utf-8")


def read_trace(path: Path, net: Network) -> List[Event]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [parse_line(line, net) for line in lines if line.strip()]
