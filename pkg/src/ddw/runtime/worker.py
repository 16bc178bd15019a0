"""Worker side: per-block state and the host serve loop.

A host process owns one or more blocks. Everything a block needs stays on
the host: its data, its column pool (including the points x^i), its copy
multiplier alpha_n and its last convex weights. Only duals and column
summaries (cost, link) travel to the coordinator.

alpha_n is kept here and mirrored by the coordinator. After a step the
update alpha_n -= rho (pi - pi_n) is pending until the next consensus pi
arrives, either with the next BroadcastPi or with the PriceRequest that
follows the last ADMM iteration. Both sides apply the same float
operations, so the copies stay bitwise identical.
"""

from __future__ import annotations

import socket
import sys
import time

import numpy as np

from ddw.admm import DualBox, multiplier_update, worker_step
from ddw.driver import recover_block
from ddw.errors import DdwError, ProtocolError
from ddw.model import BlockAngularInstance, BlockData, ColumnPool
from ddw.pricing import price, seed_initial_column
from ddw.runtime import messages as msg
from ddw.runtime.transport import DEFAULT_TIMEOUT, Channel, SocketChannel


class BlockAgent:
    def __init__(self, block_id: int, block: BlockData, t, senses, num_blocks: int):
        self.block_id = block_id
        self.block = block
        self.t_share = np.asarray(t, dtype=float) / num_blocks
        self.box = DualBox.for_block(block, senses)
        self.pool = ColumnPool(block_id)
        m = len(senses)
        self.alpha = np.zeros(m)
        self.lam = np.zeros(0)
        self._pending = None  # (rho, pi_n) of the last step, awaiting the consensus pi
        self._hint = None

    @property
    def seeded(self) -> bool:
        return len(self.pool) > 0

    def seed(self):
        col = seed_initial_column(self.block_id, self.block)
        self.pool.add(col)
        self.lam = np.ones(1)
        return col

    def sync(self, pi) -> None:
        if self._pending is not None:
            rho, pi_n = self._pending
            self.alpha = multiplier_update(self.alpha, rho, pi, pi_n)
            self._pending = None

    def reset_multiplier(self, alpha) -> None:
        self.alpha = np.array(alpha, dtype=float)
        self._pending = None

    def step(self, pi, rho: float):
        self.sync(pi)
        d = worker_step(self.pool, self.t_share, pi, self.alpha, rho, self.box, self._hint)
        self._hint = d.active
        self.lam = d.lam
        self._pending = (rho, d.pi_n)
        return d

    def price(self, pi_hat, u_hat: float, eps_d: float):
        self.sync(pi_hat)
        out = price(self.block_id, self.block, self.pool, pi_hat, u_hat, eps_d)
        if out.column is not None:
            self.pool.add(out.column)
        return out

    def recover(self) -> np.ndarray:
        # the last step's weights cover the pool as it was then; later columns get zero weight
        lam = np.zeros(len(self.pool))
        lam[: self.lam.size] = self.lam
        return recover_block(self.pool.points(), lam)


class HostClock:
    """Busy (T_u), communication (T_c) and waiting (T_s) seconds of one host."""

    def __init__(self):
        self.t_u = self.t_c = self.t_s = 0.0


def _error(outer, inner, code, detail):
    return msg.Error(outer, inner, int(code), detail)


def serve(channel: Channel, agents: dict, host_id: int = 0, timeout: float | None = None) -> HostClock:
    """Answer coordinator requests for ``agents`` (block id -> BlockAgent) until Shutdown."""
    clock = HostClock()
    order = sorted(agents)
    t0 = time.perf_counter()
    channel.send(msg.encode(msg.Hello(0, 0, host_id, order)))
    clock.t_c += time.perf_counter() - t0
    last_epoch = (0, 0)

    def reply(messages):
        t = time.perf_counter()
        for m in messages:
            channel.send(msg.encode(m))
        clock.t_c += time.perf_counter() - t

    while True:
        t = time.perf_counter()
        try:
            frame = channel.recv(timeout)
        except ProtocolError:
            return clock
        t1 = time.perf_counter()
        clock.t_s += t1 - t
        try:
            m = msg.decode(frame)
        except ProtocolError as exc:
            clock.t_c += time.perf_counter() - t1
            reply([_error(0, 0, msg.ErrorCode.MALFORMED, str(exc))])
            channel.close()
            return clock
        t2 = time.perf_counter()
        clock.t_c += t2 - t1
        out = []
        try:
            if isinstance(m, msg.Shutdown):
                channel.close()
                return clock
            epoch = (m.outer, m.inner)
            if isinstance(m, msg.SeedRequest):
                for b in order:
                    col = agents[b].seed()
                    out.append(msg.SeedResult(m.outer, m.inner, b, col.cost, col.link))
            elif not all(agents[b].seeded for b in order):
                out.append(_error(m.outer, m.inner, msg.ErrorCode.OUT_OF_ORDER, f"{type(m).__name__} before SeedRequest"))
            elif isinstance(m, msg.BroadcastPi):
                if epoch <= last_epoch:
                    out.append(_error(m.outer, m.inner, msg.ErrorCode.OUT_OF_ORDER, f"stale epoch {epoch}, last {last_epoch}"))
                else:
                    last_epoch = epoch
                    for b in order:
                        d = agents[b].step(m.pi, m.rho)
                        out.append(msg.WorkerDual(m.outer, m.inner, b, d.u_n, d.lam_sum, d.pi_n))
            elif isinstance(m, msg.PriceRequest):
                if m.worker not in agents:
                    out.append(_error(m.outer, m.inner, msg.ErrorCode.UNKNOWN_WORKER, f"block {m.worker} is not served here"))
                else:
                    r = agents[m.worker].price(m.pi, m.u_hat, m.eps_d)
                    res = msg.PriceResult(m.outer, m.inner, m.worker, r.z_sep, r.threshold, r.column is not None, r.duplicate)
                    if r.column is not None:
                        res.cost, res.link = r.column.cost, r.column.link
                    out.append(res)
            elif isinstance(m, msg.RecoverRequest):
                xs = {b: agents[b].recover() for b in order}
                clock.t_u += time.perf_counter() - t2
                t2 = time.perf_counter()
                for b in order:
                    out.append(
                        msg.RecoverResult(
                            m.outer, m.inner, b, host_id, float(agents[b].lam.sum()), clock.t_u, clock.t_c, clock.t_s, xs[b]
                        )
                    )
            else:
                out.append(_error(m.outer, m.inner, msg.ErrorCode.OUT_OF_ORDER, f"unexpected {type(m).__name__}"))
        except DdwError as exc:
            out = [_error(m.outer, m.inner, msg.ErrorCode.SOLVER_FAILURE, f"{type(exc).__name__}: {exc}")]
        except Exception as exc:  # report, never hang the coordinator
            out = [_error(m.outer, m.inner, msg.ErrorCode.INTERNAL, f"{type(exc).__name__}: {exc}")]
        clock.t_u += time.perf_counter() - t2
        reply(out)


def make_agents(instance: BlockAngularInstance, block_ids) -> dict:
    N = instance.num_blocks
    return {b: BlockAgent(b, instance.blocks[b], instance.t, instance.senses, N) for b in block_ids}


def run_worker(block_id: int, instance: BlockAngularInstance, channel: Channel) -> HostClock:
    """Serve a single block over ``channel``."""
    return serve(channel, make_agents(instance, [block_id]), host_id=block_id)


def listen_and_serve(instance, block_ids, host: str = "127.0.0.1", port: int = 0, host_id: int = 0, announce=sys.stdout):
    """Accept one coordinator connection and serve it; the bound address is printed first."""
    with socket.create_server((host, port)) as srv:
        bound = srv.getsockname()
        print(f"LISTENING {bound[0]}:{bound[1]}", file=announce, flush=True)
        srv.settimeout(DEFAULT_TIMEOUT)
        conn, _ = srv.accept()
    return serve(SocketChannel(conn), make_agents(instance, block_ids), host_id)
