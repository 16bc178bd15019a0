"""Message codec, transports, worker hosts and the coordinator-side cluster."""

from ddw.runtime.coordinator import Cluster, InProcessCluster, TcpCluster, open_cluster, partition
from ddw.runtime.worker import BlockAgent, run_worker, serve

__all__ = [
    "BlockAgent",
    "Cluster",
    "InProcessCluster",
    "TcpCluster",
    "open_cluster",
    "partition",
    "run_worker",
    "serve",
]
