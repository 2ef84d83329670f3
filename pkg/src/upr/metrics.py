"""Evaluation metrics computed from a reconfiguration trace.

Two headline numbers per run: the fraction of channels touched by forced
drainage (a dependency into or out of the channel removed through the
drainage/halting fallback; removals absorbed by conformability or
compatibility do not count) and the fraction of source-target flows whose
injection was halted at some point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, List, Sequence, Set, Tuple

from . import trace as tr
from .topology import ChannelId, Network, NodeId


class TruncatedTraceError(ValueError):
    pass


def _check_complete(trace: Sequence[tr.Event], net: Network) -> None:
    upgrades = sum(1 for e in trace if e.kind == tr.UPGRADE)
    if upgrades != len(net.channels):
        raise TruncatedTraceError(
            f"trace has {upgrades} upgrades for {len(net.channels)} channels"
        )


def drained_channels(trace: Sequence[tr.Event], net: Network) -> Set[ChannelId]:
    """Channels with a dependency into or out of them removed via the
    drainage/halting fallback."""
    _check_complete(trace, net)
    out: Set[ChannelId] = set()
    for e in trace:
        if e.kind == tr.DEPENDENCY_REMOVED and e.reason in tr.FALLBACK_REASONS:
            out.add(e.dep.src)
            out.add(e.dep.dst)
    return out

def drained_channel_ratio(
    trace: Sequence[tr.Event], net: Network, network_channels_only: bool = False
) -> Tuple[float, Set[ChannelId]]:
    chans = drained_channels(trace, net)
    if network_channels_only:
        chans = {c for c in chans if net.channel_class(c) == "network"}
        total = sum(1 for c in net.channels if net.channel_class(c) == "network")
    else:
        total = len(net.channels)
    return len(chans) / total, chans


def halted_flows(trace: Sequence[tr.Event], net: Network) -> Set[Tuple[NodeId, NodeId]]:
    _check_complete(trace, net)
    flows: Set[Tuple[NodeId, NodeId]] = set()
    resumed: Set[Tuple[NodeId, NodeId]] = set()
    for e in trace:
        if e.kind == tr.INJECTION_HALTED:
            flows.add((e.source, e.target))
        elif e.kind == tr.INJECTION_RESUMED:
            resumed.add((e.source, e.target))
    unresumed = flows - resumed
    if unresumed:
        raise TruncatedTraceError(f"{len(unresumed)} halted flows never resumed")
    return flows


def halted_flow_ratio(
    trace: Sequence[tr.Event], net: Network
) -> Tuple[float, Set[Tuple[NodeId, NodeId]]]:
    flows = halted_flows(trace, net)
    n = len(net.processing_nodes)
    return len(flows) / (n * (n - 1)), flows


def raw_condition_failures(trace: Sequence[tr.Event], net: Network) -> Set[ChannelId]:
    """Channels that ever failed the step condition, before any
    exploitation; the conservative drainage measure."""
    return {
        e.channel
        for e in trace
        if e.kind == tr.CONDITION_CHECK and e.outcome == "offending"
    }


@dataclass(frozen=True)
class ScenarioResult:
    initial: str
    final: str
    options: str  # baseline | conformability | compatibility | both
    seed: int
    drained_ratio: float
    halted_ratio: float
    drained: FrozenSet[ChannelId]
    halted: FrozenSet[Tuple[NodeId, NodeId]]
    raw_cond2_failures: int
    events: int
    violations: int

    @property
    def drained_count(self) -> int:
        return len(self.drained)

    @property
    def halted_count(self) -> int:
        return len(self.halted)


def summarize(
    trace: Sequence[tr.Event],
    net: Network,
    initial: str,
    final: str,
    options: str,
    seed: int,
    violations: int = 0,
) -> ScenarioResult:
    d_ratio, d_set = drained_channel_ratio(trace, net)
    h_ratio, h_set = halted_flow_ratio(trace, net)
    return ScenarioResult(
        initial=initial,
        final=final,
        options=options,
        seed=seed,
        drained_ratio=d_ratio,
        halted_ratio=h_ratio,
        drained=frozenset(d_set),
        halted=frozenset(h_set),
        raw_cond2_failures=len(raw_condition_failures(trace, net)),
        events=len(trace),
        violations=violations,
    )


CSV_COLUMNS = [
    "initial",
    "final",
    "options",
    "seed",
    "drained_ratio",
    "halted_ratio",
    "drained_count",
    "halted_count",
    "raw_cond2_failures",
    "events",
    "violations",
]


def result_row(r: ScenarioResult) -> List[str]:
    return [
        r.initial,
        r.final,
        r.options,
        str(r.seed),
        f"{r.drained_ratio:.6f}",
        f"{r.halted_ratio:.6f}",
        str(r.drained_count),
        str(r.halted_count),
        str(r.raw_cond2_failures),
        str(r.events),
        str(r.violations),
    ]
