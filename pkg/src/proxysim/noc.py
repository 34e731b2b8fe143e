"""Cycle-stepped 2D mesh/torus network of input-buffered routers.

Transport is message-granularity wormhole: a whole message moves per link
traversal, occupying the output port for size_flits cycles and size_flits
slots of the downstream buffer, so flits of one message stay contiguous and
per-port bandwidth is one flit per cycle under load. A message injected or
arriving at cycle t becomes movable at t + router_delay; a link traversal
lands it at the neighbor at t + link_latency (plus the boundary latency on
links that cross chip panes). Delivery and capture are decided once, on
arrival at a router, using congestion/IQ flags registered at the end of the
previous cycle; an arriving message whose decision is local enters the tile
queue the same cycle, so an uncontended h-hop trip takes
h * (router_delay + link_latency) cycles.

Torus rings use two virtual channels with the dateline rule: a message
switches to VC1 when it crosses the wrap link of its current dimension and
returns to VC0 when it turns into the next dimension.

Stepping is event-driven for speed but cycle-exact: a router is scanned only
when one of its blocking conditions can have changed (head became movable,
output port freed, downstream space released, tile IQ popped), which is
observationally identical to scanning every router every cycle.
"""

from __future__ import annotations

from collections import deque

# Ports. y grows downward in the row-major grid, so S is the +y direction.
N, S, E, W, LOCAL = 0, 1, 2, 3, 4
OPPOSITE = (S, N, W, E)
PORT_NAMES = ("N", "S", "E", "W", "local")

# Resolved routing intents; 0..3 are the remote output ports.
DELIVER = 4
CAPTURE = 5

MODE_NONE = "none"
MODE_ALWAYS = "always"
MODE_SELECTIVE = "selective"


class Message:
    """A routed task invocation: channel, global data index, payload words."""

    __slots__ = ("channel", "dest_index", "payload", "dest_x", "dest_y",
                 "size", "vc", "axis", "hops", "ready_at", "intent",
                 "was_captured", "src_tile")

    def __init__(self, channel, dest_index, payload, dest_x, dest_y, src_tile=-1):
        self.channel = channel
        self.dest_index = dest_index
        self.payload = payload
        self.dest_x = dest_x
        self.dest_y = dest_y
        self.size = 1 + len(payload)  # the index word plus payload words
        self.vc = 0
        self.axis = -1
        self.hops = 0
        self.ready_at = 0
        self.intent = DELIVER
        self.was_captured = False
        self.src_tile = src_tile


def route_step(here, dest, topology, width, height):
    """X-first dimension-ordered output port; torus takes the shorter ring
    direction, ties toward the positive (E/S) direction."""
    x, y = here
    dx, dy = dest
    torus = topology != "mesh"
    if dx != x:
        if not torus:
            return E if dx > x else W
        pos = (dx - x) % width
        return E if pos <= width - pos else W
    if dy != y:
        if not torus:
            return S if dy > y else N
        pos = (dy - y) % height
        return S if pos <= height - pos else N
    return LOCAL


def capture_decision(is_dest, is_proxy_x, is_proxy_y, iq_lt_half,
                     opposite_port_full, mode):
    """Per-message routing decision at a router, mirroring the cascading
    router logic: destination wins; otherwise a proxy tile captures under
    'always', or under 'selective' when its proxy IQ ran below half capacity
    or the straight-ahead port was congested last cycle."""
    if is_dest:
        return "deliver_local"
    if mode != MODE_NONE and is_proxy_x and is_proxy_y:
        if mode == MODE_ALWAYS:
            return "capture_as_proxy"
        if iq_lt_half or opposite_port_full:
            return "capture_as_proxy"
    return "forward"


class Noc:
    """The full router grid. Tiles talk to it through inject(); deliveries
    and captures are pushed into the sink (the grid engine)."""

    def __init__(self, geom, topology, num_channels, ledger,
                 buffer_flits=8, router_delay=1, link_latency=1,
                 chip_pane=32, boundary_latency=20,
                 capture_mode=MODE_NONE, capture_channels=(),
                 proxy_channel=-1):
        if topology not in ("mesh", "torus", "multichip_torus"):
            raise ValueError(f"unknown topology {topology!r}")
        self.geom = geom
        self.topology = topology
        self.is_torus = topology != "mesh"
        self.nch = num_channels
        self.ledger = ledger
        self.buffer_flits = buffer_flits
        self.router_delay = router_delay
        self.link_latency = link_latency
        self.capture_mode = capture_mode
        self.capture_channels = frozenset(capture_channels)
        self.proxy_channel = proxy_channel
        self.nvc = 2 if self.is_torus else 1
        self.nchvc = self.nch * self.nvc
        self.w = geom.region_width

        gw, gh = geom.grid_width, geom.grid_height
        self.gw, self.gh = gw, gh
        n = gw * gh
        self.n = n
        self.port_cap = self.nchvc * buffer_flits

        # per-link adjacency: (neighbor_id, crosses_wrap, crosses_boundary)
        multichip = topology == "multichip_torus"
        self.adj = []
        for tid in range(n):
            x, y = tid % gw, tid // gw
            row = []
            for port, (ddx, ddy) in enumerate(((0, -1), (0, 1), (1, 0), (-1, 0))):
                nx, ny = x + ddx, y + ddy
                wrap = False
                if topology == "mesh":
                    if not (0 <= nx < gw and 0 <= ny < gh):
                        row.append(None)
                        continue
                else:
                    wrap = not (0 <= nx < gw and 0 <= ny < gh)
                    nx %= gw
                    ny %= gh
                boundary = multichip and (
                    (x // chip_pane, y // chip_pane) != (nx // chip_pane, ny // chip_pane))
                row.append((ny * gw + nx, wrap, boundary))
            self.adj.append(row)
        self.boundary_latency = boundary_latency

        self.bufs = [dict() for _ in range(n)]       # key -> deque[Message]
        self.occ = [dict() for _ in range(n)]        # key -> buffered flits
        self.port_occ = [[0] * 5 for _ in range(n)]
        self.pending = [[[], [], [], [], []] for _ in range(n)]  # 4 remote + local
        self.out_busy = [[0] * 4 for _ in range(n)]
        self.was_full = [[False] * 4 for _ in range(n)]
        self.msg_count = [0] * n
        self.touched = set()
        self.arrivals = {}                           # cycle -> [(rid, key, msg)]
        self.wakes = {}                              # cycle -> {rid: True}
        self.sink = None
        self.recorder = None
        self.last_active = [-1] * n
        # registered per-tile flag: proxy IQ below half capacity (engine-owned)
        self.iq_lt_half_prev = bytearray(n)

    # -- wake scheduling -----------------------------------------------------

    def wake(self, rid, cyc):
        d = self.wakes.get(cyc)
        if d is None:
            self.wakes[cyc] = {rid: True}
        else:
            d[rid] = True

    def wake_local(self, rid, cyc):
        """Retry local ejection after the engine popped an IQ entry."""
        if self.pending[rid][4]:
            self.wake(rid, cyc)

    def next_event(self):
        cands = []
        if self.arrivals:
            cands.append(min(self.arrivals))
        if self.wakes:
            cands.append(min(self.wakes))
        return min(cands) if cands else None

    # -- injection and arrival ---------------------------------------------

    def inject(self, tid, msg, cyc):
        """Move a message from a tile's OQ into its router's local input.
        Returns False when the buffer lacks space (backpressure)."""
        key = LOCAL * self.nchvc + msg.channel * self.nvc
        occ = self.occ[tid]
        cur = occ.get(key, 0)
        if cur + msg.size > self.buffer_flits:
            return False
        x, y = tid % self.gw, tid // self.gw
        msg.intent = route_step((x, y), (msg.dest_x, msg.dest_y),
                                self.topology, self.gw, self.gh)
        msg.ready_at = cyc + self.router_delay
        msg.axis = -1
        msg.vc = 0
        msg.src_tile = tid
        occ[key] = cur + msg.size
        self.port_occ[tid][LOCAL] += msg.size
        bufs = self.bufs[tid]
        dq = bufs.get(key)
        if dq is None:
            dq = bufs[key] = deque()
        dq.append(msg)
        if len(dq) == 1:
            self.pending[tid][msg.intent].append(key)
        self.msg_count[tid] += 1
        self.wake(tid, msg.ready_at)
        led = self.ledger
        led.messages_injected += 1
        led.injected_by_channel[msg.channel] += 1
        led.in_flight += 1
        return True

    def _release(self, rid, key, size, cyc):
        """Free buffered space and wake whoever waits on it: the upstream
        router across the link, or the local tile's OQ drain."""
        self.occ[rid][key] -= size
        port = key // self.nchvc
        self.port_occ[rid][port] -= size
        self.touched.add(rid)
        if port == LOCAL:
            self.sink.wake_tile(rid, cyc + 1)
        else:
            link = self.adj[rid][port]
            if link is not None:
                self.wake(link[0], cyc + 1)

    def _resolve_arrival(self, rid, msg, in_port):
        """Routing decision on arrival; uses last cycle's registered flags."""
        x, y = rid % self.gw, rid // self.gw
        if msg.dest_x == x and msg.dest_y == y:
            msg.intent = DELIVER
            return
        mode = self.capture_mode
        if (mode != MODE_NONE and msg.channel in self.capture_channels
                and in_port != LOCAL):
            w = self.w
            if msg.dest_x % w == x % w and msg.dest_y % w == y % w:
                if mode == MODE_ALWAYS:
                    msg.intent = CAPTURE
                    return
                opp_full = False
                link = self.adj[rid][OPPOSITE[in_port]]
                if link is not None:
                    # the buffer our straight-ahead output feeds: the input
                    # port facing back at the downstream router
                    opp_full = self.was_full[link[0]][in_port]
                if self.iq_lt_half_prev[rid] or opp_full:
                    msg.intent = CAPTURE
                    return
        msg.intent = route_step((x, y), (msg.dest_x, msg.dest_y),
                                self.topology, self.gw, self.gh)

    def _arrive(self, rid, key, msg, cyc):
        in_port = key // self.nchvc
        self._resolve_arrival(rid, msg, in_port)
        intent = msg.intent
        if intent == DELIVER and self.sink.deliver(rid, msg):
            self._release(rid, key, msg.size, cyc)
            return
        if intent == CAPTURE:
            if self.sink.capture(rid, msg):
                msg.was_captured = True
                self._release(rid, key, msg.size, cyc)
                return
            # full proxy IQ: the tile cannot accept the task, so it continues
            # toward the owner instead of closing a backpressure cycle
            msg.intent = route_step((rid % self.gw, rid // self.gw),
                                    (msg.dest_x, msg.dest_y),
                                    self.topology, self.gw, self.gh)
        msg.ready_at = cyc + self.router_delay
        # space was reserved at move time; materialize the queue entry
        bufs = self.bufs[rid]
        dq = bufs.get(key)
        if dq is None:
            dq = bufs[key] = deque()
        dq.append(msg)
        if len(dq) == 1:
            self.pending[rid][min(msg.intent, 4)].append(key)
        self.msg_count[rid] += 1
        self.wake(rid, msg.ready_at)

    # -- cycle step ----------------------------------------------------------

    def advance_cycle(self, cyc):
        """Process due arrivals, then scan the routers whose state can have
        changed. Returns the number of flits moved across links this cycle."""
        arr = self.arrivals.pop(cyc, None)
        if arr:
            for rid, key, msg in arr:
                self._arrive(rid, key, msg, cyc)
        moved = 0
        to_step = self.wakes.pop(cyc, None)
        if to_step:
            msg_count = self.msg_count
            for rid in to_step:
                if msg_count[rid]:
                    moved += self._step_router(rid, cyc)
        return moved

    def end_cycle(self):
        """Register the congestion flags the next cycle's capture decisions
        read; call after the tile phase so injections are visible."""
        if self.touched:
            cap = self.port_cap
            for rid in self.touched:
                pocc = self.port_occ[rid]
                wf = self.was_full[rid]
                wf[0] = pocc[0] >= cap
                wf[1] = pocc[1] >= cap
                wf[2] = pocc[2] >= cap
                wf[3] = pocc[3] >= cap
            self.touched.clear()

    def _step_router(self, rid, cyc):
        moved = 0
        acted = False
        pending = self.pending[rid]
        bufs = self.bufs[rid]
        busy = self.out_busy[rid]
        adjr = self.adj[rid]
        led = self.ledger
        nvc = self.nvc
        nchvc = self.nchvc
        cap = self.buffer_flits
        all_occ = self.occ

        for port in range(4):
            plist = pending[port]
            if not plist:
                continue
            if busy[port] > cyc:
                self.wake(rid, busy[port])
                continue
            link = adjr[port]
            nid, wrap, boundary = link
            docc = all_occ[nid]
            i = 0
            granted = -1
            while i < len(plist):
                key = plist[i]
                dq = bufs.get(key)
                if not dq or dq[0].intent != port:
                    plist.pop(i)
                    continue
                head = dq[0]
                if head.ready_at > cyc:
                    i += 1
                    continue
                axis = 0 if port >= 2 else 1
                if axis != head.axis:
                    vc2 = 1 if wrap else 0
                elif wrap:
                    vc2 = 1
                else:
                    vc2 = head.vc
                dkey = OPPOSITE[port] * nchvc + head.channel * nvc + vc2
                cur = docc.get(dkey, 0)
                size = head.size
                if cur + size > cap:
                    i += 1
                    continue
                # grant: reserve downstream space, schedule the arrival
                dq.popleft()
                self._release(rid, key, size, cyc)
                self.msg_count[rid] -= 1
                docc[dkey] = cur + size
                self.port_occ[nid][OPPOSITE[port]] += size
                self.touched.add(nid)
                head.vc = vc2
                head.axis = axis
                head.hops += 1
                lat = self.link_latency + (self.boundary_latency if boundary else 0)
                t = cyc + lat
                lst = self.arrivals.get(t)
                if lst is None:
                    self.arrivals[t] = [(nid, dkey, head)]
                else:
                    lst.append((nid, dkey, head))
                if size > 1:
                    busy[port] = cyc + size
                moved += size
                led.flit_hops += size
                if boundary:
                    led.boundary_flit_hops += size
                acted = True
                granted = i
                plist.pop(i)
                if dq:
                    pending[min(dq[0].intent, 4)].append(key)
                break
            if granted > 0:
                # rotate so arbitration resumes after the granted entry
                pending[port] = plist[granted:] + plist[:granted]

        # local ejection: one insertion per target queue per cycle (capture
        # never buffers: a refused capture falls back to forwarding on arrival)
        plist = pending[4]
        if plist:
            used = set()
            sink_deliver = self.sink.deliver
            i = 0
            while i < len(plist):
                key = plist[i]
                dq = bufs.get(key)
                if not dq or dq[0].intent != DELIVER:
                    plist.pop(i)
                    continue
                head = dq[0]
                target = head.channel
                if target in used or not sink_deliver(rid, head):
                    i += 1
                    continue
                used.add(target)
                dq.popleft()
                self._release(rid, key, head.size, cyc)
                self.msg_count[rid] -= 1
                acted = True
                plist.pop(i)
                if dq:
                    pending[min(dq[0].intent, 4)].append(key)

        if moved:
            if self.last_active[rid] != cyc:
                self.last_active[rid] = cyc
                led.router_active_cycles[rid] += 1
                if self.recorder is not None:
                    self.recorder.add_router_active(rid, cyc)
        if acted and self.msg_count[rid]:
            # promoted heads or remaining locals may be movable next cycle
            self.wake(rid, cyc + 1)
        return moved

    def pending_arrivals(self):
        return sum(len(v) for v in self.arrivals.values())

    def queue_diagnostics(self, limit=12):
        """Occupancy dump for non-progress aborts."""
        rows = []
        for rid in range(self.n):
            if not self.msg_count[rid]:
                continue
            occs = {f"{PORT_NAMES[k // self.nchvc]}/ch{(k // self.nvc) % self.nch}": v
                    for k, v in self.occ[rid].items() if v}
            rows.append(f"router {rid} ({rid % self.gw},{rid // self.gw}): {occs}")
            if len(rows) >= limit:
                break
        return "\n".join(rows)
