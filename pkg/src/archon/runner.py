"""Executing a build plan: real processes, kernel pipes, stage threads.

Every ``pipe`` channel is one kernel pipe.  A process stage gets the
read end as stdin and the write end as stdout; synthetic stages hold
their ends in coordinator threads inside this process.  After spawning,
the parent closes every descriptor it handed out, so end-of-file
propagates the moment a writer exits.

A downstream stage that stops reading kills its upstream with SIGPIPE;
that death is reported as early_close, not failure.  On timeout all
children are killed and the overall status is 124.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field

from .broker import EventBroker
from .diagnostics import fail
from .plan import MERGE, PROCESS, SEED, SPLIT, TEE, BuildPlan, Stage

SIGPIPE_STATUS = -int(signal.SIGPIPE)


@dataclass
class RunReport:
    statuses: dict[str, int] = field(default_factory=dict)
    spawn_failures: dict[str, str] = field(default_factory=dict)
    early_close: frozenset[str] = frozenset()
    channel_bytes: dict[str, int] = field(default_factory=dict)
    duration: float = 0.0
    timed_out: bool = False
    overall: int = 0


def _env_name(connector: str) -> str:
    return "ARCHON_RPC_" + connector.upper().replace("-", "_")


def _shell_status(raw: int) -> int:
    return 128 - raw if raw < 0 else raw


class _Counter:
    def __init__(self) -> None:
        self.bytes: dict[str, int] = {}
        self._lock = threading.Lock()

    def add(self, channel: str, n: int) -> None:
        with self._lock:
            self.bytes[channel] = self.bytes.get(channel, 0) + n


def run(
    built: BuildPlan,
    timeout: float | None = None,
    runtime_dir: str | None = None,
) -> RunReport:
    started = time.monotonic()
    own_dir = runtime_dir is None
    rt_dir = runtime_dir or tempfile.mkdtemp(prefix="archon-run-")
    broker = None
    report = RunReport()
    counter = _Counter()
    try:
        if built.broker:
            broker = EventBroker(os.path.join(rt_dir, built.broker)).start()
        _execute(built, rt_dir, timeout, report, counter)
    finally:
        if broker is not None:
            broker.stop()
        if own_dir:
            shutil.rmtree(rt_dir, ignore_errors=True)
    report.channel_bytes.update(counter.bytes)
    for channel in built.channels:
        if channel.kind in ("file-in", "file-out"):
            try:
                report.channel_bytes[channel.name] = os.path.getsize(channel.path)
            except OSError:
                pass
    report.duration = time.monotonic() - started
    report.overall = _overall(built, report)
    return report


def _execute(
    built: BuildPlan,
    rt_dir: str,
    timeout: float | None,
    report: RunReport,
    counter: _Counter,
) -> None:
    read_fd: dict[str, int] = {}
    write_fd: dict[str, int] = {}
    for channel in built.channels:
        if channel.kind == "pipe":
            r, w = os.pipe()
            read_fd[channel.name], write_fd[channel.name] = r, w
        elif channel.kind == "file-in":
            try:
                read_fd[channel.name] = os.open(channel.path, os.O_RDONLY)
            except OSError as err:
                _close_all(read_fd, write_fd)
                raise fail("IoError", f"cannot open input '{channel.path}': {err}")
        else:
            try:
                write_fd[channel.name] = os.open(
                    channel.path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644
                )
            except OSError as err:
                _close_all(read_fd, write_fd)
                raise fail("IoError", f"cannot open output '{channel.path}': {err}")

    env_base = dict(os.environ)
    if built.broker:
        env_base["ARCHON_BROKER"] = os.path.join(rt_dir, built.broker)
    for conn, endpoint in built.rpc:
        env_base[_env_name(conn)] = os.path.join(rt_dir, endpoint)

    reader_kind: dict[str, str] = {}
    writer_kind: dict[str, str] = {}
    for stage in built.stages:
        for ch in stage.reads:
            reader_kind[ch] = stage.kind
        for ch in stage.writes:
            writer_kind[ch] = stage.kind

    procs: dict[str, subprocess.Popen] = {}
    stage_threads: list[threading.Thread] = []
    for stage in built.stages:
        if stage.kind == PROCESS:
            stdin = read_fd[stage.reads[0]] if stage.reads else subprocess.DEVNULL
            stdout = write_fd[stage.writes[0]] if stage.writes else subprocess.DEVNULL
            env = dict(env_base)
            env["ARCHON_INSTANCE"] = stage.instance
            env["ARCHON_REPLICA"] = str(stage.replica)
            try:
                procs[stage.name] = subprocess.Popen(
                    stage.argv, stdin=stdin, stdout=stdout, env=env
                )
            except OSError as err:
                report.spawn_failures[stage.name] = str(err)
        else:
            thread = threading.Thread(
                target=_stage_body,
                args=(stage, read_fd, write_fd, counter),
                daemon=True,
            )
            thread.start()
            stage_threads.append(thread)

    # Parent copies of process-held descriptors must go so EOF can travel.
    for channel in built.channels:
        if reader_kind.get(channel.name, PROCESS) == PROCESS:
            fd = read_fd.pop(channel.name, None)
            if fd is not None:
                os.close(fd)
        if writer_kind.get(channel.name, PROCESS) == PROCESS:
            fd = write_fd.pop(channel.name, None)
            if fd is not None:
                os.close(fd)

    deadline = time.monotonic() + timeout if timeout else None
    waiters: list[threading.Thread] = []

    def reap(name: str, proc: subprocess.Popen) -> None:
        report.statuses[name] = proc.wait()

    for name, proc in procs.items():
        thread = threading.Thread(target=reap, args=(name, proc), daemon=True)
        thread.start()
        waiters.append(thread)

    for thread in waiters:
        if deadline is None:
            thread.join()
        else:
            remaining = deadline - time.monotonic()
            thread.join(max(remaining, 0))
    if any(t.is_alive() for t in waiters):
        report.timed_out = True
        for proc in procs.values():
            if proc.poll() is None:
                proc.kill()
        for thread in waiters:
            thread.join(5)

    for thread in stage_threads:
        thread.join(5)

    report.early_close = frozenset(
        name for name, status in report.statuses.items() if status == SIGPIPE_STATUS
    )


def _overall(built: BuildPlan, report: RunReport) -> int:
    if report.timed_out:
        return 124
    if built.final:
        if built.final in report.statuses:
            return _shell_status(report.statuses[built.final])
        if built.final in report.spawn_failures:
            return 127
    for stage in built.stages:
        if stage.name in report.spawn_failures:
            return 127
        status = report.statuses.get(stage.name)
        if status is not None and status != 0 and status != SIGPIPE_STATUS:
            return _shell_status(status)
    return 0


def _close_all(read_fd: dict[str, int], write_fd: dict[str, int]) -> None:
    for fd in list(read_fd.values()) + list(write_fd.values()):
        try:
            os.close(fd)
        except OSError:
            pass


# --- synthetic stage bodies -------------------------------------------------


def _stage_body(
    stage: Stage,
    read_fd: dict[str, int],
    write_fd: dict[str, int],
    counter: _Counter,
) -> None:
    rfiles = [(ch, os.fdopen(read_fd[ch], "rb")) for ch in stage.reads]
    wfiles = [(ch, os.fdopen(write_fd[ch], "wb", buffering=0)) for ch in stage.writes]
    try:
        if stage.kind == TEE:
            _tee(rfiles[0][1], wfiles, counter)
        elif stage.kind == MERGE:
            _merge(rfiles, wfiles[0], counter)
        elif stage.kind == SPLIT:
            _split(rfiles[0][1], wfiles, counter)
        elif stage.kind == SEED:
            _seed(stage, rfiles[0][1], wfiles[0], counter)
    finally:
        for _, f in rfiles + wfiles:
            try:
                f.close()
            except OSError:
                pass


def _tee(src, outs, counter: _Counter) -> None:
    live = list(outs)
    for line in src:
        dead = []
        for name, f in live:
            try:
                f.write(line)
                counter.add(name, len(line))
            except OSError:
                dead.append((name, f))
        for item in dead:
            live.remove(item)
            try:
                item[1].close()
            except OSError:
                pass
        if not live:
            break


def _merge(srcs, out, counter: _Counter) -> None:
    out_name, out_f = out
    lock = threading.Lock()
    stop = threading.Event()

    def pump(f) -> None:
        try:
            for line in f:
                if stop.is_set():
                    break
                with lock:
                    try:
                        out_f.write(line)
                        counter.add(out_name, len(line))
                    except OSError:
                        stop.set()
                        break
        finally:
            try:
                f.close()
            except OSError:
                pass

    threads = [threading.Thread(target=pump, args=(f,), daemon=True) for _, f in srcs]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()


def _split(src, outs, counter: _Counter) -> None:
    index = 0
    for line in src:
        name, f = outs[index % len(outs)]
        try:
            f.write(line)
            counter.add(name, len(line))
        except OSError:
            break
        index += 1


def _seed(stage: Stage, src, out, counter: _Counter) -> None:
    out_name, out_f = out
    primer = stage.seed.encode("utf-8")
    try:
        out_f.write(primer)
        counter.add(out_name, len(primer))
    except OSError:
        return
    for line in src:
        try:
            out_f.write(line)
            counter.add(out_name, len(line))
        except OSError:
            return
