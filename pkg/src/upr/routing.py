"""Routing functions as editable (channel, target) -> output-set tables.

The four stock mesh algorithms (xy, yx, odd-even, negative-first) are all
built the same way: a per-algorithm turn-legality predicate restricted to
minimal hops, closed under "a hop is only offered if the target stays
reachable through legal minimal continuations". That closure is what makes
the partially adaptive tables maximal: every minimal path legal under the
turn model is representable, and no table entry can strand a packet.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .topology import DELIVERY, ChannelId, Network, NodeId, channel_class_of

Choice = FrozenSet[ChannelId]
TableKey = Tuple[ChannelId, NodeId]

# direction unit vectors; E/N are the positive directions
_DIR = {"E": (1, 0), "W": (-1, 0), "N": (0, 1), "S": (0, -1)}


def _direction(net: Network, c: ChannelId) -> Optional[str]:
    """Compass direction of a network channel; None for injection."""
    if channel_class_of(c) != "network":
        return None
    sx, sy = net.coords(c.src)
    dx, dy = net.coords(c.dst)
    for name, (ux, uy) in _DIR.items():
        if (dx - sx, dy - sy) == (ux, uy):
            return name
    raise ValueError(f"channel {c} is not a unit mesh hop")


TurnRule = Callable[[Optional[str], str, Tuple[int, int]], bool]


def xy_turn_legal(indir: Optional[str], outdir: str, xy: Tuple[int, int]) -> bool:
    # once moving along y, never return to x
    return not (indir in ("N", "S") and outdir in ("E", "W"))


def yx_turn_legal(indir: Optional[str], outdir: str, xy: Tuple[int, int]) -> bool:
    return not (indir in ("E", "W") and outdir in ("N", "S"))


def odd_even_turn_legal(indir: Optional[str], outdir: str, xy: Tuple[int, int]) -> bool:
    x = xy[0]
    even = x % 2 == 0
    if indir == "E" and outdir in ("N", "S") and even:
        return False
    if indir in ("N", "S") and outdir == "W" and not even:
        return False
    return True


def negative_first_turn_legal(indir: Optional[str], outdir: str, xy: Tuple[int, int]) -> bool:
    # no turn from a positive direction (E, N) into a negative one (W, S)
    return not (indir in ("E", "N") and outdir in ("W", "S"))


@dataclass(frozen=True)
class LocalRoutingFunction:
    """The per-channel slice of a routing function."""

    channel: ChannelId
    choices: Dict[NodeId, Choice]


class RoutingFunction:
    """Queryable and editable map (current channel, target) -> output channels.

    Missing cells mean "no choice" (the target is unreachable from that
    channel). Edits go through extend/reduce, which return modified copies;
    the reconfiguration engine uses the in-place variants under its own
    event serialization.
    """

    def __init__(self, net: Network, table: Optional[Dict[TableKey, Choice]] = None):
        self.net = net
        self.table: Dict[TableKey, Set[ChannelId]] = {}
        if table:
            for key, outs in table.items():
                if outs:
                    self.table[key] = set(outs)

    def copy(self) -> "RoutingFunction":
        r = RoutingFunction(self.net)
        r.table = {k: set(v) for k, v in self.table.items()}
        return r

    def route(self, c: ChannelId, d: NodeId) -> FrozenSet[ChannelId]:
        if channel_class_of(c) == DELIVERY:
            raise ValueError(f"delivery channels terminate routes: {c}")
        if not d.is_processing:
            raise ValueError(f"targets must be processing nodes: {d}")
        return frozenset(self.table.get((c, d), ()))

    def local(self, c: ChannelId) -> LocalRoutingFunction:
        choices = {
            d: frozenset(outs) for (cc, d), outs in self.table.items() if cc == c and outs
        }
        return LocalRoutingFunction(c, choices)

    # --- edits -------------------------------------------------------------
    def _check_adjacent(self, c: ChannelId, out: ChannelId) -> None:
        if out.src != c.dst:
            raise ValueError(f"output {out} is not adjacent to the head of {c}")

    def add_choice(self, c: ChannelId, d: NodeId, out: ChannelId) -> bool:
        """In-place extension; returns False if already present."""
        self._check_adjacent(c, out)
        cell = self.table.setdefault((c, d), set())
        if out in cell:
            return False
        cell.add(out)
        return True

    def remove_choice(self, c: ChannelId, d: NodeId, out: ChannelId) -> None:
        """In-place reduction; raises if the choice is absent."""
        cell = self.table.get((c, d))
        if not cell or out not in cell:
            raise ValueError(f"choice {(c, d)} -> {out} not present")
        cell.discard(out)
        if not cell:
            del self.table[(c, d)]

    def extend(self, c: ChannelId, d: NodeId, out: ChannelId) -> "RoutingFunction":
        r = self.copy()
        r.add_choice(c, d, out)
        return r

    def reduce(self, c: ChannelId, d: NodeId, out: ChannelId) -> "RoutingFunction":
        r = self.copy()
        r.remove_choice(c, d, out)
        return r

    def set_local(self, c: ChannelId, choices: Dict[NodeId, Iterable[ChannelId]]) -> None:
        """Overwrite the whole local slice at channel c (step operation)."""
        for key in [k for k in self.table if k[0] == c]:
            del self.table[key]
        for d, outs in choices.items():
            outs = set(outs)
            if outs:
                self.table[(c, d)] = outs

    def local_choices(self, c: ChannelId) -> Dict[NodeId, Set[ChannelId]]:
        return {d: set(outs) for (cc, d), outs in self.table.items() if cc == c}

    # --- comparisons / export ----------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoutingFunction):
            return NotImplemented
        a = {k: v for k, v in self.table.items() if v}
        b = {k: v for k, v in other.table.items() if v}
        return a == b

    def __ne__(self, other: object) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def dump(self) -> str:
        """One line per (channel, target) -> outputs, sorted; for goldens."""
        lines = []
        for (c, d), outs in sorted(self.table.items()):
            outs_s = " ".join(self.net.channel_label(o) for o in sorted(outs))
            lines.append(f"{self.net.channel_label(c)} {self.net.node_label(d)} -> {outs_s}")
        return "\n".join(lines) + "\n"


def _build_turn_model_table(net: Network, legal: TurnRule) -> RoutingFunction:
    """Minimal-path table closed under legal-continuation reachability."""
    if net.mesh_shape is None:
        raise ValueError("stock algorithms require a mesh network")
    table: Dict[TableKey, Choice] = {}
    routable = [c for c in net.channels if channel_class_of(c) != DELIVERY]

    for t in net.processing_nodes:
        rt = net.router_of(t)
        tx, ty = net.coords(rt)
        viable: Dict[ChannelId, bool] = {}

        def minimal_outs(c: ChannelId) -> List[ChannelId]:
            r = c.dst  # head router of a packet occupying c
            x, y = net.coords(r)
            if r == rt:
                return [net.delivery_channel(t, lane) for lane in range(net.lanes)]
            indir = _direction(net, c)
            outs = []
            for o in net.output_channels(r):
                if channel_class_of(o) != "network":
                    continue
                odir = _direction(net, o)
                ox, oy = _DIR[odir]  # type: ignore[index]
                if abs(tx - (x + ox)) + abs(ty - (y + oy)) >= abs(tx - x) + abs(ty - y):
                    continue  # not a minimal hop
                if not legal(indir, odir, (x, y)):  # type: ignore[arg-type]
                    continue
                outs.append(o)
            return outs

        def is_viable(c: ChannelId) -> bool:
            # can a t-packet occupying (network channel) c still be delivered?
            known = viable.get(c)
            if known is not None:
                return known
            if c.dst == rt:
                viable[c] = True
                return True
            # minimal hops strictly decrease distance, so recursion is finite
            ok = any(
                channel_class_of(o) == DELIVERY or is_viable(o) for o in minimal_outs(c)
            )
            viable[c] = ok
            return ok

        for c in routable:
            outs = [
                o
                for o in minimal_outs(c)
                if channel_class_of(o) == DELIVERY or is_viable(o)
            ]
            if outs:
                table[(c, t)] = frozenset(outs)
    return RoutingFunction(net, table)


def make_xy(net: Network) -> RoutingFunction:
    return _build_turn_model_table(net, xy_turn_legal)


def make_yx(net: Network) -> RoutingFunction:
    return _build_turn_model_table(net, yx_turn_legal)


def make_odd_even(net: Network) -> RoutingFunction:
    return _build_turn_model_table(net, odd_even_turn_legal)


def make_negative_first(net: Network) -> RoutingFunction:
    return _build_turn_model_table(net, negative_first_turn_legal)


ALGORITHMS: Dict[str, Callable[[Network], RoutingFunction]] = {
    "xy": make_xy,
    "yx": make_yx,
    "oe": make_odd_even,
    "nf": make_negative_first,
}

TURN_RULES: Dict[str, TurnRule] = {
    "xy": xy_turn_legal,
    "yx": yx_turn_legal,
    "oe": odd_even_turn_legal,
    "nf": negative_first_turn_legal,
}


def make_routing(net: Network, name: str) -> RoutingFunction:
    try:
        return ALGORITHMS[name](net)
    except KeyError:
        raise ValueError(f"unknown routing algorithm: {name!r}") from None


def reachable_from(r: RoutingFunction, start: ChannelId, t: NodeId) -> Set[ChannelId]:
    """Closure of route() from start toward target t."""
    seen = {start}
    frontier = [start]
    while frontier:
        c = frontier.pop()
        if channel_class_of(c) == DELIVERY:
            continue
        for o in r.table.get((c, t), ()):
            if o not in seen:
                seen.add(o)
                frontier.append(o)
    return seen


def is_connected(r: RoutingFunction, net: Network) -> bool:
    """Every ordered (source, target) pair of distinct processing nodes has a
    route: following the table from the injection channel reaches the
    target's delivery channel."""
    for t in net.processing_nodes:
        # backward reachability over the t-slice handles all sources at once
        deliveries = {net.delivery_channel(t, lane) for lane in range(net.lanes)}
        preds: Dict[ChannelId, List[ChannelId]] = {}
        for (c, d), outs in r.table.items():
            if d != t:
                continue
            for o in outs:
                preds.setdefault(o, []).append(c)
        seen: Set[ChannelId] = set(deliveries)
        frontier = list(deliveries)
        while frontier:
            c = frontier.pop()
            for p in preds.get(c, ()):
                if p not in seen:
                    seen.add(p)
                    frontier.append(p)
        for s in net.processing_nodes:
            if s == t:
                continue
            if not any(
                net.injection_channel(s, lane) in seen for lane in range(net.lanes)
            ):
                return False
    return True
