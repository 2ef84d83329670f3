"""Interconnection network as a directed channel multigraph.

Nodes are either processing elements or routers. Channels are unidirectional
arcs between nodes, partitioned into injection (processing -> router),
network (router -> router) and delivery (router -> processing) classes.
Bidirectional physical links appear as two independent unidirectional
channels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

PROCESSING = "processing"
ROUTER = "router"

INJECTION = "injection"
NETWORK = "network"
DELIVERY = "delivery"


@dataclass(frozen=True, order=True)
class NodeId:
    kind: str  # PROCESSING or ROUTER
    index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash((self.kind, self.index)))

    def __hash__(self) -> int:  # cached; nodes are hot dict keys
        return self._h  # type: ignore[attr-defined]

    @property
    def is_processing(self) -> bool:
        return self.kind == PROCESSING

    @property
    def is_router(self) -> bool:
        return self.kind == ROUTER


@dataclass(frozen=True, order=True)
class ChannelId:
    src: NodeId
    dst: NodeId
    lane: int = 0

    def __post_init__(self) -> None:
        h = hash((self.src.__hash__(), self.dst.__hash__(), self.lane))
        object.__setattr__(self, "_h", h)

    def __hash__(self) -> int:
        return self._h  # type: ignore[attr-defined]


def channel_class_of(c: ChannelId) -> str:
    """Channel class from endpoint node kinds (the classes partition C)."""
    if c.src.is_processing and c.dst.is_router:
        return INJECTION
    if c.src.is_router and c.dst.is_processing:
        return DELIVERY
    if c.src.is_router and c.dst.is_router:
        return NETWORK
    raise ValueError(f"illegal channel endpoints: {c}")


class Network:
    """Immutable channel multigraph with adjacency indices.

    Safe to share read-only across concurrent consumers; all mutation
    happens at construction time.
    """

    def __init__(
        self,
        nodes: Iterable[NodeId],
        channels: Iterable[ChannelId],
        mesh_shape: Optional[Tuple[int, int]] = None,
        lanes: int = 1,
    ):
        self.nodes: List[NodeId] = list(nodes)
        self.channels: List[ChannelId] = list(channels)
        self.mesh_shape = mesh_shape
        self.lanes = lanes
        self._node_set = set(self.nodes)
        self._channel_set = set(self.channels)
        self._out: Dict[NodeId, List[ChannelId]] = {n: [] for n in self.nodes}
        self._in: Dict[NodeId, List[ChannelId]] = {n: [] for n in self.nodes}
        for c in self.channels:
            if c.src not in self._node_set or c.dst not in self._node_set:
                raise ValueError(f"channel {c} references unknown node")
            self._out[c.src].append(c)
            self._in[c.dst].append(c)
        self.processing_nodes: List[NodeId] = [n for n in self.nodes if n.is_processing]
        self.router_nodes: List[NodeId] = [n for n in self.nodes if n.is_router]
        # one injection/delivery channel per (processing node, lane)
        self._injection: Dict[NodeId, List[ChannelId]] = {}
        self._delivery: Dict[NodeId, List[ChannelId]] = {}
        for p in self.processing_nodes:
            self._injection[p] = [c for c in self._out[p]]
            self._delivery[p] = [c for c in self._in[p]]

    # --- queries ---------------------------------------------------------
    def channel_class(self, c: ChannelId) -> str:
        if c not in self._channel_set:
            raise ValueError(f"unknown channel: {c}")
        return channel_class_of(c)

    def output_channels(self, n: NodeId) -> List[ChannelId]:
        if n not in self._node_set:
            raise ValueError(f"unknown node: {n}")
        return list(self._out[n])

    def input_channels(self, n: NodeId) -> List[ChannelId]:
        if n not in self._node_set:
            raise ValueError(f"unknown node: {n}")
        return list(self._in[n])

    def injection_channel(self, p: NodeId, lane: int = 0) -> ChannelId:
        return self._injection[p][lane]

    def delivery_channel(self, p: NodeId, lane: int = 0) -> ChannelId:
        return self._delivery[p][lane]

    def router_of(self, p: NodeId) -> NodeId:
        """The router a processing node attaches to."""
        return self._injection[p][0].dst

    def processing_at_router(self, r: NodeId) -> NodeId:
        return NodeId(PROCESSING, r.index)

    # --- mesh helpers ----------------------------------------------------
    def coords(self, n: NodeId) -> Tuple[int, int]:
        if self.mesh_shape is None:
            raise ValueError("not a mesh network")
        w, _ = self.mesh_shape
        return (n.index % w, n.index // w)

    def router_at(self, x: int, y: int) -> NodeId:
        if self.mesh_shape is None:
            raise ValueError("not a mesh network")
        w, h = self.mesh_shape
        if not (0 <= x < w and 0 <= y < h):
            raise ValueError(f"coordinates out of range: ({x}, {y})")
        return NodeId(ROUTER, y * w + x)

    def processing_at(self, x: int, y: int) -> NodeId:
        r = self.router_at(x, y)
        return NodeId(PROCESSING, r.index)

    def node_label(self, n: NodeId) -> str:
        tag = "p" if n.is_processing else "r"
        if self.mesh_shape is not None:
            x, y = self.coords(n)
            return f"{tag}{x},{y}"
        return f"{tag}#{n.index}"

    def channel_label(self, c: ChannelId) -> str:
        return f"{self.node_label(c.src)}>{self.node_label(c.dst)}:{c.lane}"

    def parse_node_label(self, s: str) -> NodeId:
        kind = PROCESSING if s[0] == "p" else ROUTER
        if s[1] == "#":
            return NodeId(kind, int(s[2:]))
        x, y = s[1:].split(",")
        w, _ = self.mesh_shape  # type: ignore[misc]
        return NodeId(kind, int(y) * w + int(x))

    def parse_channel_label(self, s: str) -> ChannelId:
        rest, lane = s.rsplit(":", 1)
        a, b = rest.split(">")
        return ChannelId(self.parse_node_label(a), self.parse_node_label(b), int(lane))


def build_mesh(width: int, height: int, lanes: int = 1) -> Network:
    """Build a width x height mesh with one processing node per router.

    Each bidirectional physical link becomes two opposing unidirectional
    network channels (per lane); every router gets one injection and one
    delivery channel per lane.
    """
    if width < 1 or height < 1:
        raise ValueError("mesh dimensions must be positive")
    if width * height < 2:
        raise ValueError("mesh needs at least two routers")
    if lanes < 1:
        raise ValueError("lanes must be positive")

    nodes: List[NodeId] = []
    for i in range(width * height):
        nodes.append(NodeId(ROUTER, i))
    for i in range(width * height):
        nodes.append(NodeId(PROCESSING, i))

    channels: List[ChannelId] = []
    for i in range(width * height):
        p = NodeId(PROCESSING, i)
        r = NodeId(ROUTER, i)
        for lane in range(lanes):
            channels.append(ChannelId(p, r, lane))
            channels.append(ChannelId(r, p, lane))
    for y in range(height):
        for x in range(width):
            r = NodeId(ROUTER, y * width + x)
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nx, ny = x + dx, y + dy
                if 0 <= nx < width and 0 <= ny < height:
                    nbr = NodeId(ROUTER, ny * width + nx)
                    for lane in range(lanes):
                        channels.append(ChannelId(r, nbr, lane))
    return Network(nodes, channels, mesh_shape=(width, height), lanes=lanes)
