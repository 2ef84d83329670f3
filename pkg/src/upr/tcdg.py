"""Target channel dependency graphs.

A dependency (c_i, c_j, t) means a packet bound for processing node t can
occupy channel c_i and be forwarded next into c_j. The graph is a directed
multigraph over the channel set: parallel arcs with distinct targets are
kept separate, while cycle questions are asked on the target-erased channel
projection (a deadlock cycle may mix targets).
"""
from __future__ import annotations

from typing import (
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Set,
    Tuple,
)

from .topology import ChannelId, Network, NodeId, channel_class_of


class Dependency(NamedTuple):
    src: ChannelId
    dst: ChannelId
    target: NodeId


class Tcdg:
    """Dependency multigraph with per-channel and per-target indices."""

    def __init__(self, channels: Iterable[ChannelId] = ()):
        self.channels: List[ChannelId] = list(channels)
        self._deps: Dict[Dependency, None] = {}
        self._out: Dict[ChannelId, Dict[Dependency, None]] = {}
        self._in: Dict[ChannelId, Dict[Dependency, None]] = {}
        self._out_t: Dict[ChannelId, Dict[NodeId, int]] = {}
        self._in_t: Dict[ChannelId, Dict[NodeId, int]] = {}
        # channel projection with arc multiplicities (one per target)
        self._succ: Dict[ChannelId, Dict[ChannelId, int]] = {}
        self._pred: Dict[ChannelId, Dict[ChannelId, int]] = {}
        # per-(channel, target) slices, for routed-flow reachability
        self._t_out: Dict[Tuple[ChannelId, NodeId], Dict[ChannelId, None]] = {}
        self._t_in: Dict[Tuple[ChannelId, NodeId], Dict[ChannelId, None]] = {}

    # --- mutation ----------------------------------------------------------
    def add(self, dep: Dependency) -> bool:
        if dep in self._deps:
            return False
        if dep.src.dst != dep.dst.src:
            raise ValueError(f"non-consecutive dependency: {dep}")
        self._deps[dep] = None
        self._out.setdefault(dep.src, {})[dep] = None
        self._in.setdefault(dep.dst, {})[dep] = None
        ot = self._out_t.setdefault(dep.src, {})
        ot[dep.target] = ot.get(dep.target, 0) + 1
        it = self._in_t.setdefault(dep.dst, {})
        it[dep.target] = it.get(dep.target, 0) + 1
        sc = self._succ.setdefault(dep.src, {})
        sc[dep.dst] = sc.get(dep.dst, 0) + 1
        pc = self._pred.setdefault(dep.dst, {})
        pc[dep.src] = pc.get(dep.src, 0) + 1
        self._t_out.setdefault((dep.src, dep.target), {})[dep.dst] = None
        self._t_in.setdefault((dep.dst, dep.target), {})[dep.src] = None
        return True

    def remove(self, dep: Dependency) -> None:
        if dep not in self._deps:
            raise ValueError(f"dependency not present: {dep}")
        del self._deps[dep]
        del self._out[dep.src][dep]
        del self._in[dep.dst][dep]

        def _dec(counter: Dict, key) -> None:
            counter[key] -= 1
            if counter[key] == 0:
                del counter[key]

        _dec(self._out_t[dep.src], dep.target)
        _dec(self._in_t[dep.dst], dep.target)
        _dec(self._succ[dep.src], dep.dst)
        _dec(self._pred[dep.dst], dep.src)
        del self._t_out[(dep.src, dep.target)][dep.dst]
        if not self._t_out[(dep.src, dep.target)]:
            del self._t_out[(dep.src, dep.target)]
        del self._t_in[(dep.dst, dep.target)][dep.src]
        if not self._t_in[(dep.dst, dep.target)]:
            del self._t_in[(dep.dst, dep.target)]

    def copy(self) -> "Tcdg":
        g = Tcdg(self.channels)
        for dep in self._deps:
            g.add(dep)
        return g

    # --- queries -----------------------------------------------------------
    def __contains__(self, dep: Dependency) -> bool:
        return dep in self._deps

    def __len__(self) -> int:
        return len(self._deps)

    def deps(self) -> Iterator[Dependency]:
        return iter(self._deps)

    def out_deps(self, c: ChannelId) -> List[Dependency]:
        return list(self._out.get(c, ()))

    def in_deps(self, c: ChannelId) -> List[Dependency]:
        return list(self._in.get(c, ()))

    def out_targets(self, c: ChannelId) -> Set[NodeId]:
        return set(self._out_t.get(c, ()))

    def in_targets(self, c: ChannelId) -> Set[NodeId]:
        return set(self._in_t.get(c, ()))

    def has_out_for(self, c: ChannelId, t: NodeId) -> bool:
        return t in self._out_t.get(c, ())

    def has_in_for(self, c: ChannelId, t: NodeId) -> bool:
        return t in self._in_t.get(c, ())

    def out_channels_for(self, c: ChannelId, t: NodeId) -> List[ChannelId]:
        return list(self._t_out.get((c, t), ()))

    def in_channels_for(self, c: ChannelId, t: NodeId) -> List[ChannelId]:
        return list(self._t_in.get((c, t), ()))

    def successors(self, c: ChannelId) -> List[ChannelId]:
        return list(self._succ.get(c, ()))

    def predecessors(self, c: ChannelId) -> List[ChannelId]:
        return list(self._pred.get(c, ()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tcdg):
            return NotImplemented
        return set(self._deps) == set(other._deps)

    def __ne__(self, other: object) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq


# --- construction ------------------------------------------------------------


def build_tcdg(net: Network, r) -> Tcdg:
    """Dependencies of all (channel, target) pairs live under routing r.

    A pair (c, t) is live when it is reachable from some injection channel:
    the least fixpoint seeded with (injection of s, t) for every ordered
    pair of distinct processing nodes, closed under following the table.
    """
    g = Tcdg(net.channels)
    seen: Set[Tuple[ChannelId, NodeId]] = set()
    frontier: List[Tuple[ChannelId, NodeId]] = []
    for s in net.processing_nodes:
        for t in net.processing_nodes:
            if s == t:
                continue
            for lane in range(net.lanes):
                state = (net.injection_channel(s, lane), t)
                if state not in seen:
                    seen.add(state)
                    frontier.append(state)
    while frontier:
        c, t = frontier.pop()
        for o in r.table.get((c, t), ()):
            g.add(Dependency(c, o, t))
            if channel_class_of(o) != "delivery" and (o, t) not in seen:
                seen.add((o, t))
                frontier.append((o, t))
    return g


# --- protocol-level predicates ------------------------------------------------


def is_target_conforming(t_a: Tcdg, t_b: Tcdg, c: ChannelId) -> bool:
    """Every target arriving at c under the function behind t_a has an
    outgoing choice at c under the function behind t_b."""
    out = t_b._out_t.get(c)
    if out is None:
        return not t_a._in_t.get(c)
    return all(t in out for t in t_a._in_t.get(c, ()))


def reverse_topological_ready(t_i: Tcdg, upgraded: Set[ChannelId], c: ChannelId) -> bool:
    """True when every direct successor of c has been upgraded (sinks are
    vacuously ready)."""
    return all(s in upgraded for s in t_i._succ.get(c, ()))


def projection_acyclic(g: Tcdg) -> bool:
    """No directed cycle in the target-erased channel projection (Kahn)."""
    nodes = set(g._succ) | set(g._pred)
    indeg: Dict[ChannelId, int] = {c: 0 for c in nodes}
    for c in nodes:
        for s in g._succ.get(c, ()):
            indeg[s] += 1
    ready = [c for c in nodes if indeg[c] == 0]
    seen = 0
    while ready:
        c = ready.pop()
        seen += 1
        for s in g._succ.get(c, ()):
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    return seen == len(nodes)


def compose_next(t_p: Tcdg, t_i: Tcdg, c: ChannelId) -> Tcdg:
    """Graph effect of upgrading channel c: drop c's outgoing dependencies
    from t_p and adopt all of c's outgoing dependencies from t_i."""
    g = t_p.copy()
    for dep in g.out_deps(c):
        g.remove(dep)
    for dep in t_i.out_deps(c):
        g.add(dep)
    return g


def is_predecessor(g: Tcdg, a: ChannelId, b: ChannelId) -> bool:
    """True iff a is reachable from b in the channel projection, so adding
    an arc b -> a (or a path through it) would close a cycle. a == b counts:
    a self-arc is a cycle."""
    return is_predecessor_multi((g,), a, b)


def is_predecessor_multi(graphs: Sequence[Tcdg], a: ChannelId, b: ChannelId) -> bool:
    """is_predecessor over the union of several graphs' projections."""
    if a == b:
        return True
    seen = {b}
    frontier = [b]
    while frontier:
        c = frontier.pop()
        for g in graphs:
            for s in g._succ.get(c, ()):
                if s == a:
                    return True
                if s not in seen:
                    seen.add(s)
                    frontier.append(s)
    return False


# --- export -------------------------------------------------------------------


def to_edge_list(g: Tcdg, net: Network) -> str:
    """Line-based dump: `src_channel -> dst_channel [target]`, sorted."""
    lines = []
    for dep in sorted(g.deps()):
        lines.append(
            f"{net.channel_label(dep.src)} -> {net.channel_label(dep.dst)}"
            f" [{net.node_label(dep.target)}]"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def to_dot(g: Tcdg, net: Network, name: str = "tcdg") -> str:
    """Graphviz export: channels as vertices, dependencies as labeled arcs."""
    lines = [f"digraph {name} {{"]
    used = sorted({dep.src for dep in g.deps()} | {dep.dst for dep in g.deps()})
    for c in used:
        lines.append(f'  "{net.channel_label(c)}";')
    for dep in sorted(g.deps()):
        lines.append(
            f'  "{net.channel_label(dep.src)}" -> "{net.channel_label(dep.dst)}"'
            f' [label="{net.node_label(dep.target)}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
