"""Coordinator side: talk to worker hosts, collect replies in worker order."""

from __future__ import annotations

import os
import queue
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass

import numpy as np

from ddw.errors import ProtocolError
from ddw.model import BlockAngularInstance, dumps_instance
from ddw.runtime import messages as msg
from ddw.runtime.transport import DEFAULT_TIMEOUT, Channel, connect, parse_workers, queue_pair
from ddw.runtime.worker import make_agents, serve


@dataclass
class RemoteDual:
    pi_n: np.ndarray
    u_n: float
    lam_sum: float


def partition(num_blocks: int, hosts: int) -> list:
    """Contiguous, near-equal block ranges, one per host."""
    if not 1 <= hosts <= num_blocks:
        raise ValueError(f"need 1 <= hosts <= {num_blocks}, got {hosts}")
    return [list(map(int, chunk)) for chunk in np.array_split(np.arange(num_blocks), hosts)]


class Cluster:
    """A set of worker hosts that together serve blocks 0..N-1."""

    def __init__(self, channels: list, num_blocks: int, timeout: float = DEFAULT_TIMEOUT):
        self.channels = list(channels)
        self.num_blocks = num_blocks
        self.timeout = timeout
        self.owner = {}
        self.comm_time = 0.0  # coordinator-side encode/send/wait seconds
        for h, ch in enumerate(self.channels):
            hello = msg.decode(ch.recv(timeout))
            if not isinstance(hello, msg.Hello):
                raise ProtocolError(f"host {h} opened with {type(hello).__name__}, expected Hello")
            for b in hello.workers:
                if b in self.owner or not 0 <= b < num_blocks:
                    raise ProtocolError(f"block {b} announced twice or out of range")
                self.owner[b] = h
        missing = sorted(set(range(num_blocks)) - set(self.owner))
        if missing:
            raise ProtocolError(f"no host serves blocks {missing}")
        self._inbound: queue.Queue = queue.Queue()
        self._closing = False
        self._readers = [threading.Thread(target=self._read, args=(h, ch), daemon=True) for h, ch in enumerate(self.channels)]
        for r in self._readers:
            r.start()

    def _read(self, h: int, ch: Channel) -> None:
        while True:
            try:
                frame = ch.recv(None)
                self._inbound.put((h, msg.decode(frame)))
            except ProtocolError as exc:
                if not self._closing:
                    self._inbound.put((h, exc))
                return

    def _send(self, h: int, m) -> None:
        self.channels[h].send(msg.encode(m))

    def broadcast(self, m) -> None:
        t = time.perf_counter()
        frame = msg.encode(m)
        for ch in self.channels:
            ch.send(frame)
        self.comm_time += time.perf_counter() - t

    def gather(self, kind, epoch: tuple, ids=None) -> list:
        """Wait for one ``kind`` reply per worker id at ``epoch``; ordered by id."""
        ids = list(range(self.num_blocks)) if ids is None else list(ids)
        want = set(ids)
        got = {}
        t0 = time.perf_counter()
        deadline = t0 + self.timeout
        while len(got) < len(ids):
            try:
                h, m = self._inbound.get(timeout=max(deadline - time.perf_counter(), 0.0))
            except queue.Empty:
                raise ProtocolError(f"timed out after {self.timeout} s waiting for {kind.__name__}") from None
            if isinstance(m, Exception):
                raise ProtocolError(f"host {h}: {m}")
            if isinstance(m, msg.Error):
                raise ProtocolError(f"host {h} error {msg.ErrorCode(m.code).name}: {m.detail}")
            if not isinstance(m, kind):
                raise ProtocolError(f"host {h} sent {type(m).__name__}, expected {kind.__name__}")
            if (m.outer, m.inner) != tuple(epoch):
                raise ProtocolError(f"stale epoch {(m.outer, m.inner)} from worker {m.worker}, expected {tuple(epoch)}")
            if m.worker not in want or m.worker in got:
                raise ProtocolError(f"unexpected or repeated reply from worker {m.worker}")
            got[m.worker] = m
        self.comm_time += time.perf_counter() - t0
        return [got[i] for i in ids]

    def seed(self) -> list:
        self.broadcast(msg.SeedRequest(0, 0))
        return self.gather(msg.SeedResult, (0, 0))

    def step(self, outer: int, inner: int, pi, rho: float, phase: int = 0) -> list:
        self.broadcast(msg.BroadcastPi(outer, inner, phase, rho, np.asarray(pi, dtype=float)))
        return [RemoteDual(d.pi_n, d.u_n, d.lam_sum) for d in self.gather(msg.WorkerDual, (outer, inner))]

    def price(self, outer: int, inner: int, pi_hat, u_hat, eps_d: float) -> list:
        t = time.perf_counter()
        pi_hat = np.asarray(pi_hat, dtype=float)
        for b in range(self.num_blocks):
            self._send(self.owner[b], msg.PriceRequest(outer, inner, b, float(u_hat[b]), eps_d, pi_hat))
        self.comm_time += time.perf_counter() - t
        return self.gather(msg.PriceResult, (outer, inner))

    def recover(self, outer: int, inner: int) -> list:
        self.broadcast(msg.RecoverRequest(outer, inner))
        return self.gather(msg.RecoverResult, (outer, inner))

    def close(self) -> None:
        if self._closing:
            return
        self._closing = True
        for ch in self.channels:
            try:
                ch.send(msg.encode(msg.Shutdown(0, 0)))
            except ProtocolError:
                pass
        for r in self._readers:
            r.join(timeout=5.0)
        for ch in self.channels:
            ch.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class InProcessCluster(Cluster):
    """Worker hosts as threads in this process, joined by queue channels."""

    def __init__(self, instance: BlockAngularInstance, hosts: int = 1, timeout: float = DEFAULT_TIMEOUT):
        ours, self._threads = [], []
        for h, blocks in enumerate(partition(instance.num_blocks, hosts)):
            mine, theirs = queue_pair()
            th = threading.Thread(target=serve, args=(theirs, make_agents(instance, blocks), h), daemon=True)
            th.start()
            ours.append(mine)
            self._threads.append(th)
        super().__init__(ours, instance.num_blocks, timeout)

    def close(self) -> None:
        super().close()
        for th in self._threads:
            th.join(timeout=5.0)


class TcpCluster(Cluster):
    """Worker hosts reached over TCP, optionally spawned here as local processes."""

    def __init__(self, channels, num_blocks, timeout=DEFAULT_TIMEOUT, procs=(), tmpdir=None):
        self._procs = list(procs)
        self._tmpdir = tmpdir
        try:
            super().__init__(channels, num_blocks, timeout)
        except Exception:
            self._reap()
            raise

    @classmethod
    def connect(cls, addresses, num_blocks: int, timeout: float = DEFAULT_TIMEOUT) -> "TcpCluster":
        if isinstance(addresses, str):
            addresses = parse_workers(addresses)
        return cls([connect(a, timeout) for a in addresses], num_blocks, timeout)

    @classmethod
    def spawn(cls, instance: BlockAngularInstance, hosts: int = 1, timeout: float = DEFAULT_TIMEOUT) -> "TcpCluster":
        """Start ``hosts`` local worker processes on ephemeral ports and connect to them."""
        tmpdir = tempfile.TemporaryDirectory(prefix="ddw-")
        path = os.path.join(tmpdir.name, "instance.json")
        with open(path, "w") as fh:
            fh.write(dumps_instance(instance))
        procs, addresses = [], []
        try:
            for h, blocks in enumerate(partition(instance.num_blocks, hosts)):
                cmd = [
                    sys.executable, "-m", "ddw", "worker",
                    "--instance", path,
                    "--blocks", ",".join(map(str, blocks)),
                    "--listen", "127.0.0.1:0",
                    "--host-id", str(h),
                ]
                procs.append(subprocess.Popen(cmd, stdout=subprocess.PIPE, text=True))
            for p in procs:
                line = p.stdout.readline().strip()
                if not line.startswith("LISTENING "):
                    raise ProtocolError(f"worker process failed to start (said {line!r})")
                host, _, port = line.split()[1].rpartition(":")
                addresses.append((host, int(port)))
            channels = [connect(a, timeout) for a in addresses]
        except Exception:
            for p in procs:
                p.kill()
            tmpdir.cleanup()
            raise
        return cls(channels, instance.num_blocks, timeout, procs, tmpdir)

    def _reap(self):
        for p in self._procs:
            try:
                p.wait(timeout=10.0)
            except subprocess.TimeoutExpired:
                p.kill()
                p.wait()
            if p.stdout:
                p.stdout.close()
        if self._tmpdir is not None:
            self._tmpdir.cleanup()
            self._tmpdir = None

    def close(self) -> None:
        super().close()
        self._reap()


def open_cluster(instance: BlockAngularInstance, transport: str = "local", hosts: int = 1, workers=None, timeout=DEFAULT_TIMEOUT):
    """``local`` runs threads; ``tcp`` connects to ``workers`` (or DDW_WORKERS) or spawns ``hosts`` processes."""
    if transport == "local":
        return InProcessCluster(instance, hosts, timeout)
    if transport == "tcp":
        workers = workers or os.environ.get("DDW_WORKERS")
        if workers:
            return TcpCluster.connect(workers, instance.num_blocks, timeout)
        return TcpCluster.spawn(instance, hosts, timeout)
    raise ValueError(f"unknown transport {transport!r}")
