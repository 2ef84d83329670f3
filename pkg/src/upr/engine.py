"""Upstream progressive reconfiguration engine.

Per-channel phase machines driven by a seeded event scheduler. A channel
upgrades (adopts the new routing function's local choices) once every
successor in the new function's dependency graph has upgraded and every
target arriving under the prevailing function has an outgoing choice under
the new one. Channels that cannot satisfy that condition either extend a
routing function with cycle-safe choices (compatibility), rely on existing
alternatives (conformability), or fall back to draining offending targets
upstream, halting injection of individual source-target flows at worst.

All graph state is shared and mutated atomically with respect to the event
loop, which serializes what the protocol describes as concurrent per-channel
processes. Runs are reproducible: all nondeterminism comes from one seeded
RNG that orders the event queue.
"""
from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .routing import RoutingFunction, is_connected
from .tcdg import (
    Dependency,
    Tcdg,
    build_tcdg,
    is_predecessor,
    is_predecessor_multi,
    projection_acyclic,
    reverse_topological_ready,
)
from .topology import DELIVERY, INJECTION, ChannelId, Network, NodeId, channel_class_of
from . import trace as tr

# channel phases
NOT_UPGRADED = "not_upgraded"
READY = "ready"
AWAITING_REMOVALS = "awaiting_removals"
UPGRADED = "upgraded"

# step-condition outcomes
SATISFIED = "satisfied"
SINK_EXCEPTION = "sink_exception"
OFFENDING = "offending"

CHECK_OFF = "off"
CHECK_FINAL = "final"
CHECK_EVERY_EVENT = "every_event"


@dataclass(frozen=True)
class ReconfigOptions:
    exploit_conformability: bool = False
    exploit_compatibility: bool = False
    scheduler_seed: int = 0
    invariant_checks: str = CHECK_FINAL  # off | final | every_event


@dataclass(frozen=True)
class Violation:
    condition: int  # 1..4, the violated sufficient condition
    message: str


class LysneViolationError(RuntimeError):
    def __init__(self, violations: List[Violation]):
        self.violations = violations
        lines = [f"condition {v.condition}: {v.message}" for v in violations]
        super().__init__("reconfiguration safety violated:\n" + "\n".join(lines))


class ProtocolError(RuntimeError):
    """Internal state corruption; always a bug, never a legal outcome."""


class Reconfiguration:
    """Live reconfiguration state: routing tables, the four dependency
    graphs, per-channel phases, halting ledger and request bookkeeping."""

    def __init__(
        self,
        net: Network,
        r_s: RoutingFunction,
        r_f: RoutingFunction,
        options: ReconfigOptions = ReconfigOptions(),
    ):
        if options.invariant_checks not in (CHECK_OFF, CHECK_FINAL, CHECK_EVERY_EVENT):
            raise ValueError(f"unknown invariant_checks mode: {options.invariant_checks!r}")
        self.net = net
        self.options = options
        self.r_s = r_s
        self.r_f = r_f
        self.rp = r_s.copy()  # prevailing, mutable
        self.ri = r_f.copy()  # intermediate, mutable
        self.t_s = build_tcdg(net, r_s)  # frozen snapshot
        self.t_f = build_tcdg(net, r_f)  # frozen snapshot
        self.t_p = self.t_s.copy()
        self.t_i = self.t_f.copy()
        self.phases: Dict[ChannelId, str] = {c: NOT_UPGRADED for c in net.channels}
        self.upgraded: Set[ChannelId] = set()
        self.halted: Set[Tuple[NodeId, NodeId]] = set()
        # choices removed from R_I awaiting restoration; dep -> None (ordered set)
        self.ri_removed: Dict[Dependency, None] = {}
        # choices added to R_I absent from R_F; dep -> had table choice already
        self.ri_added: Dict[Dependency, bool] = {}
        self.trace: List[tr.Event] = []

        self._rng = random.Random(options.scheduler_seed)
        self._queue: List[Tuple[float, int, tuple]] = []
        self._seq = 0
        self._ts = 0
        self._tu_scheduled: Set[ChannelId] = set()
        # dep -> waiter keys ("cond", channel) | ("drain", channel, target)
        self._dep_waiters: Dict[Dependency, List[tuple]] = {}
        self._requested: Set[Dependency] = set()
        self._cond_pending: Dict[ChannelId, Set[Dependency]] = {}
        self._drains: Dict[Tuple[ChannelId, NodeId], Set[Dependency]] = {}
        self._tasks: deque = deque()
        self._affected_targets: Set[NodeId] = set()
        self._done = False

    # ------------------------------------------------------------------ utils
    def _emit(self, kind: str, **kw) -> None:
        self.trace.append(tr.Event(ts=self._ts, kind=kind, **kw))
        self._ts += 1

    def _schedule(self, task: tuple) -> None:
        heapq.heappush(self._queue, (self._rng.random(), self._seq, task))
        self._seq += 1

    def _schedule_try_upgrade(self, c: ChannelId) -> None:
        if self.phases[c] == UPGRADED or c in self._tu_scheduled:
            return
        self._tu_scheduled.add(c)
        self._schedule(("try_upgrade", c))

    def pending_removals(self, c: ChannelId) -> FrozenSet[Dependency]:
        return frozenset(self._cond_pending.get(c, ()))

    def is_draining(self, c: ChannelId, t: NodeId) -> bool:
        return (c, t) in self._drains

    # ------------------------------------------------------------- run loop
    def run(self) -> Tuple[RoutingFunction, List[tr.Event]]:
        if self._done:
            raise ProtocolError("a Reconfiguration instance runs once")
        self._done = True
        for c in self.net.channels:
            self._schedule_try_upgrade(c)
        while self._queue:
            _, _, task = heapq.heappop(self._queue)
            if task[0] == "try_upgrade":
                self._handle_try_upgrade(task[1])
            else:
                self._handle_request(task[1])
            if self.options.invariant_checks == CHECK_EVERY_EVENT:
                self._check_incremental()
            else:
                self._affected_targets.clear()
        self._finish()
        return self.rp, self.trace

    def _finish(self) -> None:
        self._resume_ready_flows()
        stuck = [c for c in self.net.channels if self.phases[c] != UPGRADED]
        if stuck:
            labels = ", ".join(self.net.channel_label(c) for c in stuck[:8])
            raise ProtocolError(f"{len(stuck)} channels never upgraded: {labels}")
        if self.halted:
            raise ProtocolError(f"{len(self.halted)} halted flows never resumed")
        if self.ri_removed:
            raise ProtocolError("reduced choices not fully restored")
        if self.ri_added:
            raise ProtocolError("ghost choices not fully removed")
        if self.rp != self.r_f or self.ri != self.r_f:
            raise ProtocolError("final routing function differs from the target")
        if self.t_p != self.t_f or self.t_i != self.t_f:
            raise ProtocolError("final dependency graphs differ from the target")
        if self.options.invariant_checks in (CHECK_FINAL, CHECK_EVERY_EVENT):
            violations = verify_lysne_conditions(self)
            if violations:
                raise LysneViolationError(violations)

    # ------------------------------------------------------ channel upgrades
    def _handle_try_upgrade(self, c: ChannelId) -> None:
        self._tu_scheduled.discard(c)
        if self.phases[c] == UPGRADED:
            return
        if not reverse_topological_ready(self.t_i, self.upgraded, c):
            if self.options.exploit_conformability and self.phases[c] == NOT_UPGRADED:
                self.try_conformability_order_release(c)
            if not reverse_topological_ready(self.t_i, self.upgraded, c):
                return  # awakened when blocking successors upgrade
        if self.phases[c] == NOT_UPGRADED:
            self.phases[c] = READY
        if c in self._cond_pending:
            return  # acknowledgements still outstanding
        status, offending = self.check_step_condition(c)
        self._emit(
            tr.CONDITION_CHECK,
            channel=c,
            outcome=status,
            offending=tuple(sorted(offending)),
        )
        if status == OFFENDING:
            if self.options.exploit_compatibility:
                uncovered = self.try_compatibility_upgrade(c, offending)
                self._run_tasks()
                if uncovered != offending:
                    if uncovered:
                        self.issue_removal_requests(c, uncovered)
                    else:
                        self._schedule_try_upgrade(c)  # re-check with provisions
                    return
            self.issue_removal_requests(c, offending)
            return
        self.apply_step_operation(c)

    def check_step_condition(self, c: ChannelId) -> Tuple[str, FrozenSet[NodeId]]:
        """Target conformance of the new local function with sink exception."""
        out_t = self.t_i._out_t.get(c, {})
        offending = frozenset(
            t for t in self.t_p._in_t.get(c, ()) if t not in out_t
        )
        if not offending:
            return SATISFIED, offending
        if not out_t and self.t_i._in_t.get(c):
            return SINK_EXCEPTION, frozenset()
        return OFFENDING, offending

    def apply_step_operation(self, c: ChannelId) -> None:
        """Adopt the new function's local choices at c and swap its outgoing
        dependencies in the prevailing graph."""
        status, _ = self.check_step_condition(c)
        if status == OFFENDING:
            raise ProtocolError(f"upgrade of {self.net.channel_label(c)} out of phase")
        if not reverse_topological_ready(self.t_i, self.upgraded, c):
            raise ProtocolError(
                f"upgrade of {self.net.channel_label(c)} violates the order"
            )
        self._emit(tr.UPGRADE, channel=c)
        old = set(self.t_p.out_deps(c))
        new = set(self.t_i.out_deps(c))
        self.rp.set_local(c, self.ri.local_choices(c))
        for dep in sorted(old - new):
            self._unlink_p_dep(dep)
        for dep in sorted(new - old):
            self._link_p_dep(dep, table_synced=True)
        self.phases[c] = UPGRADED
        self.upgraded.add(c)
        # drains at an upgraded channel are moot: arrivals follow the new
        # function now, and its old choices are already gone
        for key in [k for k in self._drains if k[0] == c]:
            del self._drains[key]
        self.restore_ri_dependencies(c)
        for p in sorted(set(self.t_i.predecessors(c))):
            self._schedule_try_upgrade(p)
        if channel_class_of(c) == INJECTION:
            self._resume_ready_flows(source=c.src)
        self._run_tasks()

    # ------------------------------------------------- conformability (R_I'')
    def try_conformability_order_release(self, c: ChannelId) -> None:
        """Drop new-function choices toward non-upgraded successors when an
        upgraded alternative covers every affected target, releasing c from
        the partial order early."""
        blockers = [s for s in sorted(set(self.t_i.successors(c))) if s not in self.upgraded]
        for c_k in blockers:
            deps = sorted(d for d in self.t_i.out_deps(c) if d.dst == c_k)
            if any(d in self.ri_added for d in deps):
                continue  # provisioned ghosts stay pinned until removed
            releasable = True
            for d in deps:
                if not any(
                    alt in self.upgraded
                    for alt in self.t_i.out_channels_for(c, d.target)
                    if alt != c_k
                ):
                    releasable = False
                    break
            if not releasable:
                continue
            for d in deps:
                self.t_i.remove(d)
                self.ri.remove_choice(d.src, d.target, d.dst)
                self.ri_removed[d] = None
                self._emit(tr.DEPENDENCY_REMOVED, dep=d, graph="I", reason=tr.REASON_RI_REDUCTION)
                self._affected_targets.add(d.target)

    def restore_ri_dependencies(self, upgraded_channel: ChannelId) -> None:
        """Re-add reduced choices whose successor just completed its upgrade,
        deferring any restoration that would close a cycle until the blocking
        provisioned arc is gone."""
        for dep in sorted(d for d in self.ri_removed if d.dst == upgraded_channel):
            self._restore_one(dep)

    def _restore_one(self, dep: Dependency) -> bool:
        if is_predecessor(self.t_i, dep.src, dep.dst):
            return False  # deferred; retried after ghost removals
        del self.ri_removed[dep]
        self.t_i.add(dep)
        self.ri.add_choice(dep.src, dep.target, dep.dst)
        self._emit(tr.RI_RESTORED, dep=dep, graph="I")
        self._affected_targets.add(dep.target)
        if self.phases[dep.src] == UPGRADED:
            # an upgraded channel mirrors its new-function choices
            self._link_p_dep(dep)
            if channel_class_of(dep.src) == INJECTION:
                self._resume_ready_flows(source=dep.src.src)
        self._cancel_covered_requests(dep.src, dep.target)
        self._schedule_try_upgrade(dep.src)
        return True

    def _retry_deferred_restores(self) -> None:
        for dep in sorted(d for d in self.ri_removed if d.dst in self.upgraded):
            self._restore_one(dep)

    # -------------------------------------------------- compatibility (R_I')
    def try_compatibility_upgrade(
        self, c: ChannelId, offending: FrozenSet[NodeId]
    ) -> FrozenSet[NodeId]:
        """Extend the new function at c with cycle-safe choices covering
        offending targets; returns the targets still uncovered."""
        uncovered = set()
        for t in sorted(offending):
            c_v = self._find_ri_extension(c, t)
            if c_v is None:
                uncovered.add(t)
                continue
            dep = Dependency(c, c_v, t)
            had_choice = c_v in self.ri.table.get((c, t), ())
            if not had_choice:
                self.ri.add_choice(c, t, c_v)
            self.t_i.add(dep)
            self.ri_added[dep] = had_choice
            self._emit(tr.DEPENDENCY_ADDED, dep=dep, graph="I")
            self._affected_targets.add(t)
            if self.options.invariant_checks == CHECK_EVERY_EVENT:
                if is_predecessor(self.t_i, dep.src, dep.dst):
                    raise LysneViolationError(
                        [Violation(2, f"extension {dep} closed a cycle in the escape graph")]
                    )
        return frozenset(uncovered)

    def _find_ri_extension(self, c: ChannelId, t: NodeId) -> Optional[ChannelId]:
        """Adjacent output able to carry t under the new function, whose
        addition cannot close a cycle even after every final-function arc
        is restored (predecessors taken over the union of both graphs)."""
        best = None
        for c_v in self._candidate_outputs(c, t, self.t_i):
            dep = Dependency(c, c_v, t)
            if dep in self.t_i or dep in self.ri_removed:
                continue
            if is_predecessor_multi((self.t_i, self.t_f), c, c_v):
                continue
            key = (self._remaining_hops(c_v, t), c_v)
            if best is None or key < best:
                best = key
        return best[1] if best else None

    def _candidate_outputs(self, c: ChannelId, t: NodeId, graph: Tcdg) -> List[ChannelId]:
        outs = []
        for o in sorted(self.net.output_channels(c.dst)):
            cls = channel_class_of(o)
            if cls == DELIVERY:
                if o.dst == t:
                    outs.append(o)
            elif graph.has_out_for(o, t):
                outs.append(o)
        return outs

    def _remaining_hops(self, c_v: ChannelId, t: NodeId) -> int:
        if channel_class_of(c_v) == DELIVERY:
            return 0
        rx, ry = self.net.coords(c_v.dst)
        tx, ty = self.net.coords(self.net.router_of(t))
        return abs(rx - tx) + abs(ry - ty) + 1

    # -------------------------------------------------------- removal requests
    def issue_removal_requests(self, c: ChannelId, offending: Iterable[NodeId]) -> None:
        pending = self._cond_pending.setdefault(c, set())
        for t in sorted(offending):
            for src in sorted(self.t_p.in_channels_for(c, t)):
                dep = Dependency(src, c, t)
                if dep in pending:
                    continue
                pending.add(dep)
                self._request_removal(dep, ("cond", c), requester=c)
        if pending:
            self.phases[c] = AWAITING_REMOVALS
        else:
            del self._cond_pending[c]
            self._schedule_try_upgrade(c)

    def _request_removal(self, dep: Dependency, waiter: tuple, requester: ChannelId) -> None:
        self._dep_waiters.setdefault(dep, []).append(waiter)
        if dep not in self._requested:
            self._requested.add(dep)
            self._emit(tr.REMOVAL_REQUESTED, channel=requester, dep=dep)
            self._schedule(("request", dep))

    def _waiter_alive(self, wk: tuple, dep: Dependency) -> bool:
        if wk[0] == "cond":
            return dep in self._cond_pending.get(wk[1], ())
        return dep in self._drains.get((wk[1], wk[2]), ())

    def _handle_request(self, dep: Dependency) -> None:
        self._requested.discard(dep)
        if dep not in self.t_p:
            return  # already resolved by other means
        if not any(self._waiter_alive(w, dep) for w in self._dep_waiters.get(dep, ())):
            self._dep_waiters.pop(dep, None)
            return
        self.process_removal_request(dep)

    def process_removal_request(self, dep: Dependency) -> None:
        """Resolve in priority order: keep an existing alternative
        (conformability), add a cycle-safe alternative (compatibility),
        or drain the offending target upstream (halting at injections)."""
        c_j, _, t = dep
        if self.phases[c_j] == UPGRADED:
            raise ProtocolError(f"removal requested from upgraded {self.net.channel_label(c_j)}")
        if self.options.exploit_conformability:
            if any(k != dep.dst for k in self.t_p.out_channels_for(c_j, t)):
                self._remove_p_dep(dep, tr.REASON_CONFORMABILITY)
                self._run_tasks()
                return
        if self.options.exploit_compatibility:
            c_k = self._find_rp_extension(c_j, dep.dst, t)
            if c_k is not None:
                added = Dependency(c_j, c_k, t)
                self.rp.add_choice(c_j, t, c_k)
                self._link_p_dep(added, emit=True)
                self._remove_p_dep(dep, tr.REASON_COMPATIBILITY)
                self._run_tasks()
                return
        self._start_drain(c_j, t)
        self._run_tasks()

    def _find_rp_extension(self, c_j: ChannelId, avoiding: ChannelId, t: NodeId) -> Optional[ChannelId]:
        """Adjacent output already carrying t under the prevailing function
        (or t's delivery channel), cycle-safe, and actually leading to t."""
        best = None
        for c_k in self._candidate_outputs(c_j, t, self.t_p):
            if c_k == avoiding or Dependency(c_j, c_k, t) in self.t_p:
                continue
            if (c_k, t) in self._drains:
                continue  # its remaining routes for t are doomed
            if is_predecessor(self.t_p, c_j, c_k):
                continue
            if not self._leads_to_target(c_k, t):
                continue
            key = (self._remaining_hops(c_k, t), c_k)
            if best is None or key < best:
                best = key
        return best[1] if best else None

    def _leads_to_target(self, start: ChannelId, t: NodeId) -> bool:
        if channel_class_of(start) == DELIVERY:
            return start.dst == t
        seen = {start}
        frontier = [start]
        while frontier:
            c = frontier.pop()
            if (c, t) in self._drains:
                continue
            for o in self.t_p.out_channels_for(c, t):
                if channel_class_of(o) == DELIVERY:
                    if o.dst == t:
                        return True
                    continue
                if o not in seen:
                    seen.add(o)
                    frontier.append(o)
        return False

    # ------------------------------------------------------------- drainage
    def _start_drain(self, x: ChannelId, t: NodeId) -> None:
        if (x, t) in self._drains:
            return  # join the drain in progress
        if channel_class_of(x) == INJECTION:
            flow = (x.src, t)
            if flow not in self.halted:
                self.halted.add(flow)
                self._emit(tr.INJECTION_HALTED, channel=x, source=x.src, target=t)
            self._drains[(x, t)] = set()
            self._tasks.append(("complete_drain", x, t))
            return
        updeps = sorted(
            Dependency(w, x, t) for w in self.t_p.in_channels_for(x, t)
        )
        self._drains[(x, t)] = set(updeps)
        if not updeps:
            self._tasks.append(("complete_drain", x, t))
            return
        for up in updeps:
            self._request_removal(up, ("drain", x, t), requester=x)

    def _complete_drain(self, x: ChannelId, t: NodeId) -> None:
        pending = self._drains.get((x, t))
        if pending is None or pending:
            return  # cancelled, or still waiting
        if self.t_p.in_channels_for(x, t):
            raise ProtocolError(
                f"drain of {self.net.channel_label(x)} completed with live supply of "
                f"{self.net.node_label(t)}"
            )
        del self._drains[(x, t)]
        reason = tr.REASON_HALTED if channel_class_of(x) == INJECTION else tr.REASON_DRAINED
        for dst in sorted(self.t_p.out_channels_for(x, t)):
            self._remove_p_dep(Dependency(x, dst, t), reason)

    # ------------------------------------------------- graph mutation funnel
    def _link_p_dep(self, dep: Dependency, table_synced: bool = False, emit: bool = False) -> None:
        self.t_p.add(dep)
        if not table_synced:
            self.rp.add_choice(dep.src, dep.target, dep.dst)
        if emit:
            self._emit(tr.DEPENDENCY_ADDED, dep=dep, graph="P")
        self._affected_targets.add(dep.target)
        if self.options.invariant_checks == CHECK_EVERY_EVENT:
            if is_predecessor(self.t_p, dep.src, dep.dst):
                raise LysneViolationError(
                    [Violation(2, f"addition {dep} closed a dependency cycle")]
                )

    def _unlink_p_dep(self, dep: Dependency) -> None:
        """Remove from graph and table, settle waiters, queue consequences."""
        self.t_p.remove(dep)
        cell = self.rp.table.get((dep.src, dep.target))
        if cell and dep.dst in cell:
            self.rp.remove_choice(dep.src, dep.target, dep.dst)
        self._affected_targets.add(dep.target)
        self._requested.discard(dep)
        for wk in self._dep_waiters.pop(dep, ()):
            if wk[0] == "cond":
                pend = self._cond_pending.get(wk[1])
                if pend is not None and dep in pend:
                    pend.discard(dep)
                    if not pend:
                        del self._cond_pending[wk[1]]
                        self.phases[wk[1]] = READY
                        self._schedule_try_upgrade(wk[1])
            else:
                key = (wk[1], wk[2])
                pend = self._drains.get(key)
                if pend is not None and dep in pend:
                    pend.discard(dep)
                    if not pend:
                        self._tasks.append(("complete_drain", wk[1], wk[2]))
        self._tasks.append(("consequences", dep))

    def _remove_p_dep(self, dep: Dependency, reason: str) -> None:
        self._validate_removal(dep, reason)
        self._unlink_p_dep(dep)
        self._emit(tr.DEPENDENCY_REMOVED, dep=dep, graph="P", reason=reason)

    def _validate_removal(self, dep: Dependency, reason: str) -> None:
        if self.options.invariant_checks != CHECK_EVERY_EVENT:
            return
        src, _, t = dep
        if reason == tr.REASON_CONFORMABILITY or reason == tr.REASON_COMPATIBILITY:
            if not any(k != dep.dst for k in self.t_p.out_channels_for(src, t)):
                raise LysneViolationError(
                    [Violation(3, f"removal of {dep} without a surviving alternative")]
                )
        elif reason in (tr.REASON_DRAINED, tr.REASON_HALTED, tr.REASON_PRUNED):
            if self.t_p.in_channels_for(src, t):
                raise LysneViolationError(
                    [Violation(3, f"removal of {dep} before its supply drained")]
                )

    # --- consequence tasks: pruning, ghost removal, drain completion --------
    def _run_tasks(self) -> None:
        while self._tasks:
            task = self._tasks.popleft()
            if task[0] == "consequences":
                dep = task[1]
                self._maybe_remove_ghosts(dep.dst, dep.target)
                self._prune_step(dep.dst, dep.target)
                self._schedule_try_upgrade(dep.dst)
            elif task[0] == "complete_drain":
                self._complete_drain(task[1], task[2])
            elif task[0] == "retry_restores":
                self._retry_deferred_restores()

    def _prune_step(self, y: ChannelId, t: NodeId) -> None:
        """Drop y's choices for t once nothing can bring t into y anymore.
        Upgraded channels keep their (new-function) choices: upstream
        upgrades will feed them again."""
        if self.phases.get(y) == UPGRADED or channel_class_of(y) == INJECTION:
            return
        if self.t_p.has_in_for(y, t):
            return
        for dst in sorted(self.t_p.out_channels_for(y, t)):
            dep = Dependency(y, dst, t)
            if dep in self.t_p:
                self._remove_p_dep(dep, tr.REASON_PRUNED)

    def remove_ghost_dependencies(self, c: ChannelId, t: NodeId) -> None:
        """Drop a provisioned choice at c for t once t cannot arrive at c in
        either graph, and propagate downstream."""
        self._maybe_remove_ghosts(c, t)
        self._run_tasks()

    def _maybe_remove_ghosts(self, c: ChannelId, t: NodeId) -> None:
        if self.t_p.has_in_for(c, t) or self.t_i.has_in_for(c, t):
            return
        ghosts = sorted(d for d in self.ri_added if d.src == c and d.target == t)
        for dep in ghosts:
            had_choice = self.ri_added.pop(dep)
            self.t_i.remove(dep)
            if not had_choice:
                self.ri.remove_choice(dep.src, dep.target, dep.dst)
            if dep in self.t_p:
                self._unlink_p_dep(dep)
            self._emit(tr.GHOST_REMOVED, dep=dep)
            self._affected_targets.add(dep.target)
            self._schedule_try_upgrade(dep.src)
            self._tasks.append(("retry_restores",))

    def _cancel_covered_requests(self, c: ChannelId, t: NodeId) -> None:
        pend = self._cond_pending.get(c)
        if not pend:
            return
        for dep in [d for d in pend if d.target == t]:
            pend.discard(dep)
        if not pend:
            del self._cond_pending[c]
            self.phases[c] = READY
            self._schedule_try_upgrade(c)

    # ------------------------------------------------------------- halting
    def _resume_ready_flows(self, source: Optional[NodeId] = None) -> None:
        for s, t in sorted(self.halted):
            if source is not None and s != source:
                continue
            inj = self.net.injection_channel(s)
            if self.phases[inj] != UPGRADED:
                continue
            if self._leads_to_target_any(inj, t):
                self.halted.discard((s, t))
                self._emit(tr.INJECTION_RESUMED, channel=inj, source=s, target=t)

    def _leads_to_target_any(self, start: ChannelId, t: NodeId) -> bool:
        seen = {start}
        frontier = [start]
        while frontier:
            c = frontier.pop()
            for o in self.t_p.out_channels_for(c, t):
                if channel_class_of(o) == DELIVERY:
                    if o.dst == t:
                        return True
                    continue
                if o not in seen:
                    seen.add(o)
                    frontier.append(o)
        return False

    # ------------------------------------------------------- online checking
    def _check_incremental(self) -> None:
        bad = []
        for t in sorted(self._affected_targets):
            bad.extend(self._check_connectivity_for(t))
        self._affected_targets.clear()
        if bad:
            raise LysneViolationError(bad)

    def _check_connectivity_for(self, t: NodeId) -> List[Violation]:
        reach = self._reaches_delivery(self.t_p, t)
        out = []
        for s in self.net.processing_nodes:
            if s == t or (s, t) in self.halted:
                continue
            if not any(
                self.net.injection_channel(s, lane) in reach
                for lane in range(self.net.lanes)
            ):
                out.append(
                    Violation(
                        1,
                        f"flow {self.net.node_label(s)}->{self.net.node_label(t)} "
                        "disconnected under the prevailing function",
                    )
                )
        return out

    def _reaches_delivery(self, g: Tcdg, t: NodeId) -> Set[ChannelId]:
        seeds = [
            self.net.delivery_channel(t, lane) for lane in range(self.net.lanes)
        ]
        seen = set(seeds)
        frontier = list(seeds)
        while frontier:
            c = frontier.pop()
            for p in g.in_channels_for(c, t):
                if p not in seen:
                    seen.add(p)
                    frontier.append(p)
        return seen


def run_reconfiguration(
    net: Network,
    r_s: RoutingFunction,
    r_f: RoutingFunction,
    options: ReconfigOptions = ReconfigOptions(),
) -> Tuple[RoutingFunction, List[tr.Event]]:
    """Reconfigure from r_s to r_f; returns the final function and the trace."""
    if not is_connected(r_s, net):
        raise ValueError("initial routing function is not connected")
    if not is_connected(r_f, net):
        raise ValueError("final routing function is not connected")
    recon = Reconfiguration(net, r_s, r_f, options)
    if not projection_acyclic(recon.t_s):
        raise ValueError("initial routing function has a dependency cycle")
    if not projection_acyclic(recon.t_f):
        raise ValueError("final routing function has a dependency cycle")
    return recon.run()


# --------------------------------------------------------------- monitoring


def verify_lysne_conditions(state: Reconfiguration) -> List[Violation]:
    """The four sufficient conditions for a deadlock-free reconfiguration,
    checked against the live state plus a full trace replay. Returns the
    empty list when clean."""
    out: List[Violation] = []
    # (1) the prevailing function stays connected, halted flows excepted
    for t in state.net.processing_nodes:
        out.extend(state._check_connectivity_for(t))
    # (2) no dependency cycle among escape resources
    union = state.t_p.copy()
    for c in sorted(state.upgraded):
        for dep in state.t_i.out_deps(c):
            if dep not in union:
                union.add(dep)
    if not projection_acyclic(union):
        out.append(Violation(2, "dependency cycle among escape resources"))
    # (3) + (4) every removal was justified and every upgrade fully
    # provisioned: replay the trace from the starting graphs
    out.extend(replay_trace(state))
    return out


def replay_trace(state: Reconfiguration) -> List[Violation]:
    """Re-derive the graph evolution from the event log, re-checking each
    removal's justification and each upgrade's provisioning."""
    out: List[Violation] = []
    t_p = state.t_s.copy()
    t_i = state.t_f.copy()
    t_f = state.t_f
    upgraded: Set[ChannelId] = set()
    halted: Set[Tuple[NodeId, NodeId]] = set()
    ri_removed: Set[Dependency] = set()
    ri_added: Set[Dependency] = set()

    def fail(cond: int, ev: tr.Event, msg: str) -> None:
        out.append(Violation(cond, f"ts={ev.ts} {ev.kind}: {msg}"))

    for ev in state.trace:
        if ev.kind == tr.UPGRADE:
            c = ev.channel
            if not reverse_topological_ready(t_i, upgraded, c):
                fail(2, ev, "upgrade before its successors completed")
            in_t = t_p.in_targets(c)
            out_t = t_i.out_targets(c)
            sink = not t_i.out_deps(c) and bool(t_i.in_deps(c))
            if not in_t.issubset(out_t) and not sink:
                fail(4, ev, "upgrade with unprovisioned incoming targets")
            for dep in list(t_p.out_deps(c)):
                t_p.remove(dep)
            for dep in t_i.out_deps(c):
                if dep not in t_p:
                    t_p.add(dep)
            upgraded.add(c)
        elif ev.kind == tr.DEPENDENCY_REMOVED and ev.graph == "P":
            dep = ev.dep
            if dep not in t_p:
                fail(3, ev, "removed a dependency that did not exist")
                continue
            src, _, t = dep
            if ev.reason in (tr.REASON_CONFORMABILITY, tr.REASON_COMPATIBILITY):
                if not any(k != dep.dst for k in t_p.out_channels_for(src, t)):
                    fail(3, ev, "no surviving alternative for the removed choice")
            elif ev.reason in (tr.REASON_DRAINED, tr.REASON_HALTED, tr.REASON_PRUNED):
                if t_p.in_channels_for(src, t):
                    fail(3, ev, "removal before upstream supply was cleared")
                if ev.reason == tr.REASON_HALTED and (src.src, t) not in halted:
                    fail(3, ev, "injection choice removed without halting the flow")
            t_p.remove(dep)
        elif ev.kind == tr.DEPENDENCY_REMOVED and ev.graph == "I":
            dep = ev.dep
            if dep not in t_i:
                fail(3, ev, "reduced a choice absent from the new function")
                continue
            if not any(
                alt in upgraded
                for alt in t_i.out_channels_for(dep.src, dep.target)
                if alt != dep.dst
            ):
                fail(3, ev, "reduction without an upgraded alternative")
            t_i.remove(dep)
            ri_removed.add(dep)
        elif ev.kind == tr.DEPENDENCY_ADDED and ev.graph == "P":
            dep = ev.dep
            if is_predecessor(t_p, dep.src, dep.dst):
                fail(2, ev, "extension closes a cycle in the prevailing graph")
            t_p.add(dep)
        elif ev.kind == tr.DEPENDENCY_ADDED and ev.graph == "I":
            dep = ev.dep
            if is_predecessor_multi((t_i, t_f), dep.src, dep.dst):
                fail(2, ev, "extension closes a cycle in the escape graph union")
            t_i.add(dep)
            ri_added.add(dep)
        elif ev.kind == tr.RI_RESTORED:
            dep = ev.dep
            if dep not in ri_removed:
                fail(3, ev, "restored a choice that was never reduced")
                continue
            ri_removed.discard(dep)
            if is_predecessor(t_i, dep.src, dep.dst):
                fail(2, ev, "restoration closes a cycle in the escape graph")
            t_i.add(dep)
            if dep.src in upgraded and dep not in t_p:
                t_p.add(dep)
        elif ev.kind == tr.GHOST_REMOVED:
            dep = ev.dep
            if dep not in ri_added:
                fail(4, ev, "ghost removal of a choice never provisioned")
                continue
            ri_added.discard(dep)
            if t_p.has_in_for(dep.src, dep.target):
                fail(4, ev, "ghost removed while its target still arrives")
            if dep in t_i:
                t_i.remove(dep)
            if dep in t_p:
                t_p.remove(dep)
        elif ev.kind == tr.INJECTION_HALTED:
            halted.add((ev.source, ev.target))
        elif ev.kind == tr.INJECTION_RESUMED:
            flow = (ev.source, ev.target)
            if flow not in halted:
                fail(1, ev, "resumed a flow that was not halted")
            halted.discard(flow)

    if len(state.trace) and state.t_p != t_p:
        out.append(
            Violation(1, "trace does not replay to the live prevailing graph")
        )
    return out
