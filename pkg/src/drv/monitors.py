"""Monitor programs in the generic pick/exchange/send/receive/exchange/report shape.

Each monitor supplies three block generators (pre-exchange, post-exchange,
report) that yield shared-memory micro-ops; the report block returns the
verdict.  Every block has a declared step bound that the simulator enforces,
which keeps the wait-freedom contract testable.

Monitor ids: trivial_yes, wec, sec, lin:<object>, stabilized:<sd|wad|wod>:<inner>,
and script:<pattern> for fixture monitors emitting scripted verdict patterns.
"""

from __future__ import annotations

from .errors import ConfigError
from .objects import spec_by_id
from .oracles import IN, lin_check_windowed
from .sim import NO, READ, SNAPSHOT, WRITE, YES


class Monitor:
    monitor_id = "abstract"
    timed_required = False
    block_bounds = {"pre": 8, "post": 8, "report": 8}

    def shared_registers(self, n: int) -> dict:
        return {}

    def shared_arrays(self, n: int) -> dict:
        return {}

    def init_state(self, proc: int, n: int) -> dict:
        return {}

    def pre(self, st: dict, proc: int, v: str):
        yield from ()

    def post(self, st: dict, proc: int, v: str, w: str, view):
        yield from ()

    def report(self, st: dict, proc: int):
        yield from ()
        return YES


class TrivialYes(Monitor):
    """Reports YES forever; exchanges nothing."""

    monitor_id = "trivial_yes"


class ScriptedVerdicts(Monitor):
    """Fixture monitor reporting a scripted verdict pattern.

    Pattern syntax: `1=N0-3,Y4-;2=Y0-` maps each process (or `*`) to verdict
    segments over iteration ranges; uncovered iterations report YES.
    """

    def __init__(self, pattern: str):
        self.monitor_id = f"script:{pattern}"
        self.pattern = pattern
        self.segments = _parse_verdict_pattern(pattern)

    def init_state(self, proc: int, n: int) -> dict:
        return {"iter": 0}

    def report(self, st: dict, proc: int):
        yield from ()
        segs = self.segments.get(proc, self.segments.get(0, ()))
        verdict = YES
        for value, start, end in segs:
            if st["iter"] >= start and (end is None or st["iter"] <= end):
                verdict = value
                break
        st["iter"] += 1
        return verdict


def _parse_verdict_pattern(pattern: str) -> dict:
    out: dict[int, tuple] = {}
    for part in pattern.split(";"):
        if not part:
            continue
        proc_s, _, segs = part.partition("=")
        proc = 0 if proc_s == "*" else int(proc_s)
        parsed = []
        for seg in segs.split(","):
            value = {"Y": YES, "N": NO}[seg[0]]
            lo, _, hi = seg[1:].partition("-")
            parsed.append((value, int(lo), int(hi) if hi else None))
        out[proc] = tuple(parsed)
    return out


class WecMonitor(Monitor):
    """Weak decider for the eventually consistent counter.

    Announces its own inc count before invoking, snapshots all announcements
    after each response, and reports NO when its reads break the per-process
    lower bound or monotonicity (latching), or transiently while the global
    inc count keeps moving or disagrees with its latest read.
    """

    monitor_id = "wec"
    block_bounds = {"pre": 2, "post": 2, "report": 2}

    def shared_arrays(self, n: int) -> dict:
        return {"INCS": 0}

    def init_state(self, proc: int, n: int) -> dict:
        return {
            "prev_read": 0,
            "prev_incs": 0,
            "count": 0,
            "flag": False,
            "curr_read": 0,
            "curr_incs": 0,
            "snap_own": 0,
            "is_read": False,
        }

    def pre(self, st: dict, proc: int, v: str):
        if v == "inc":
            st["count"] += 1
            yield (WRITE, f"INCS[{proc}]", st["count"])

    def post(self, st: dict, proc: int, v: str, w: str, view):
        snap = yield (SNAPSHOT, "INCS")
        st["curr_incs"] = sum(snap)
        st["snap_own"] = snap[proc - 1]
        st["is_read"] = w.startswith("val:")
        if st["is_read"]:
            st["curr_read"] = int(w[4:])

    def report(self, st: dict, proc: int):
        yield from ()
        return _wec_verdict(st)


def _wec_verdict(st: dict) -> str:
    # The first two clauses only mean anything on read responses; the third
    # fires on any inc-count growth, so in-language runs with finitely many
    # incs report NO only finitely often.
    if st["flag"]:
        verdict = NO
    elif st["is_read"] and (
        st["curr_read"] < st["snap_own"] or st["curr_read"] < st["prev_read"]
    ):
        st["flag"] = True
        verdict = NO
    elif st["curr_read"] != st["curr_incs"] or st["prev_incs"] < st["curr_incs"]:
        verdict = NO
    else:
        verdict = YES
    st["prev_read"] = st["curr_read"]
    st["prev_incs"] = st["curr_incs"]
    return verdict


class SecMonitor(Monitor):
    """Predictive weak decider for the strongly eventual counter.

    The weak-counter logic plus a triple exchange: every (invocation,
    response, view) is published, and a read whose value exceeds the incs
    visible in its own view draws NO from every process that sees it.
    """

    monitor_id = "sec"
    timed_required = True
    block_bounds = {"pre": 2, "post": 4, "report": 2}

    def shared_arrays(self, n: int) -> dict:
        return {"INCS": 0, "M": ()}

    def init_state(self, proc: int, n: int) -> dict:
        st = WecMonitor().init_state(proc, n)
        st["s"] = ()
        st["snapM"] = ()
        return st

    def pre(self, st: dict, proc: int, v: str):
        if v == "inc":
            st["count"] += 1
            yield (WRITE, f"INCS[{proc}]", st["count"])

    def post(self, st: dict, proc: int, v: str, w: str, view):
        if view is None:
            raise ConfigError("sec monitor requires views (timed adversary)")
        snap = yield (SNAPSHOT, "INCS")
        st["curr_incs"] = sum(snap)
        st["snap_own"] = snap[proc - 1]
        st["is_read"] = w.startswith("val:")
        if st["is_read"]:
            st["curr_read"] = int(w[4:])
        st["s"] = st["s"] + (((proc, len(st["s"])), v, w, view),)
        yield (WRITE, f"M[{proc}]", st["s"])
        snap_m = yield (SNAPSHOT, "M")
        st["snapM"] = snap_m

    def report(self, st: dict, proc: int):
        yield from ()
        verdict = _wec_verdict(st)
        if verdict == YES:
            for slot in st["snapM"]:
                for _key, v, w, view in slot:
                    if v == "read" and int(w[4:]) > sum(
                        1 for (_p, _i, payload) in view if payload == "inc"
                    ):
                        return NO
        return verdict


class LinMonitor(Monitor):
    """Predictive strong decider for linearizability of a sequential object.

    Publishes (invocation, response, view) triples, snapshots everyone's, and
    reports YES exactly when the history reconstructed from the visible views
    is linearizable.
    """

    timed_required = True
    block_bounds = {"pre": 1, "post": 3, "report": 1}

    def __init__(self, object_id: str, cap: int = 10):
        self.monitor_id = f"lin:{object_id}"
        self.spec = spec_by_id(object_id)
        self.cap = cap

    def init_state(self, proc: int, n: int) -> dict:
        return {"s": (), "snapM": ()}

    def shared_arrays(self, n: int) -> dict:
        return {"M": ()}

    def post(self, st: dict, proc: int, v: str, w: str, view):
        if view is None:
            raise ConfigError("lin monitor requires views (timed adversary)")
        st["s"] = st["s"] + ((proc, len(st["s"]), v, w, view),)
        yield (WRITE, f"M[{proc}]", st["s"])
        snap_m = yield (SNAPSHOT, "M")
        st["snapM"] = snap_m

    def report(self, st: dict, proc: int):
        yield from ()
        from .adversaries import history_from_triples

        h = history_from_triples(st["snapM"])
        verdict = lin_check_windowed(h, self.spec, cap=self.cap)
        return YES if verdict.status == IN else NO


class _StabilizedBase(Monitor):
    def __init__(self, inner: Monitor):
        self.inner = inner
        self.timed_required = inner.timed_required
        self.block_bounds = {
            "pre": inner.block_bounds["pre"],
            "post": inner.block_bounds["post"],
            "report": inner.block_bounds["report"] + 3,
        }

    def shared_registers(self, n: int) -> dict:
        return dict(self.inner.shared_registers(n))

    def shared_arrays(self, n: int) -> dict:
        return dict(self.inner.shared_arrays(n))

    def init_state(self, proc: int, n: int) -> dict:
        return {"inner": self.inner.init_state(proc, n), "prev": [0] * n}

    def pre(self, st: dict, proc: int, v: str):
        yield from self.inner.pre(st["inner"], proc, v)

    def post(self, st: dict, proc: int, v: str, w: str, view):
        yield from self.inner.post(st["inner"], proc, v, w, view)


class SdStabilized(_StabilizedBase):
    """Once any process would report NO, a shared flag makes everyone report NO forever."""

    def __init__(self, inner: Monitor):
        super().__init__(inner)
        self.monitor_id = f"stabilized:sd:{inner.monitor_id}"

    def shared_registers(self, n: int) -> dict:
        regs = super().shared_registers(n)
        regs["FLAG"] = False
        return regs

    def report(self, st: dict, proc: int):
        d = yield from self.inner.report(st["inner"], proc)
        flag = yield (READ, "FLAG")
        if flag:
            return NO
        if d == NO:
            yield (WRITE, "FLAG", True)
        return d


class WadStabilized(_StabilizedBase):
    """Per-process NO counters spread any growth as NO to all processes."""

    def __init__(self, inner: Monitor):
        super().__init__(inner)
        self.monitor_id = f"stabilized:wad:{inner.monitor_id}"

    def shared_arrays(self, n: int) -> dict:
        arrays = super().shared_arrays(n)
        arrays["C"] = 0
        return arrays

    def report(self, st: dict, proc: int):
        d = yield from self.inner.report(st["inner"], proc)
        if d == NO:
            yield (WRITE, f"C[{proc}]", st["prev"][proc - 1] + 1)
        snap = yield (SNAPSHOT, "C")
        verdict = NO if any(snap[j] > st["prev"][j] for j in range(len(snap))) else YES
        st["prev"] = list(snap)
        return verdict


class WodStabilized(_StabilizedBase):
    """Any stabilized NO counter converts every process's verdict into YES."""

    def __init__(self, inner: Monitor):
        super().__init__(inner)
        self.monitor_id = f"stabilized:wod:{inner.monitor_id}"

    def shared_arrays(self, n: int) -> dict:
        arrays = super().shared_arrays(n)
        arrays["C"] = 0
        return arrays

    def report(self, st: dict, proc: int):
        d = yield from self.inner.report(st["inner"], proc)
        if d == NO:
            yield (WRITE, f"C[{proc}]", st["prev"][proc - 1] + 1)
        snap = yield (SNAPSHOT, "C")
        verdict = YES if any(snap[j] == st["prev"][j] for j in range(len(snap))) else NO
        st["prev"] = list(snap)
        return verdict


def stabilize_sd(inner: Monitor) -> Monitor:
    return SdStabilized(inner)


def stabilize_wad(inner: Monitor) -> Monitor:
    return WadStabilized(inner)


def stabilize_wod(inner: Monitor) -> Monitor:
    return WodStabilized(inner)


def wec_monitor() -> Monitor:
    return WecMonitor()


def sec_monitor() -> Monitor:
    return SecMonitor()


def lin_monitor(object_id: str, cap: int = 10) -> Monitor:
    return LinMonitor(object_id, cap)


def monitor_from_id(monitor_id: str) -> Monitor:
    if monitor_id == "trivial_yes":
        return TrivialYes()
    if monitor_id == "wec":
        return WecMonitor()
    if monitor_id == "sec":
        return SecMonitor()
    if monitor_id.startswith("lin:"):
        return LinMonitor(monitor_id.split(":", 1)[1])
    if monitor_id.startswith("script:"):
        return ScriptedVerdicts(monitor_id.split(":", 1)[1])
    if monitor_id.startswith("stabilized:"):
        _, kind, inner_id = monitor_id.split(":", 2)
        inner = monitor_from_id(inner_id)
        try:
            return {"sd": stabilize_sd, "wad": stabilize_wad, "wod": stabilize_wod}[kind](inner)
        except KeyError:
            raise ConfigError(f"unknown stabilization kind {kind!r}") from None
    raise ConfigError(f"unknown monitor id {monitor_id!r}")
