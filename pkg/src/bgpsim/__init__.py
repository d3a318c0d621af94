"""Deterministic AS-level interdomain routing simulator.

Policy path-vector routing (prefer-customer import, no-valley export) with
three multipath extensions: pull-based negotiated tunnels (miro),
precomputed failover paths with root-cause information (rbgp), and
per-link alternative paths with failure hiding (yamr / yamr_hiding).
"""

from .bgp_core import DEFAULT_LABEL, Announce, BgpNode, PathLabel, Route, Withdraw, decide
from .config import NonConvergence, ScenarioError, SimConfig
from .policy import export_allowed, import_rank, valley_free
from .sim_engine import (
    PROTOCOLS,
    LinkDown,
    LinkUp,
    MetricsReport,
    MiroIssue,
    Probe,
    Simulation,
    run,
    simulate,
)
from .topology import AsGraph, Link, Rel, RelKind, TopologyError, load_topology, serialize_topology

__version__ = "0.1.0"

__all__ = [
    "Announce",
    "AsGraph",
    "BgpNode",
    "DEFAULT_LABEL",
    "Link",
    "LinkDown",
    "LinkUp",
    "MetricsReport",
    "MiroIssue",
    "NonConvergence",
    "PROTOCOLS",
    "PathLabel",
    "Probe",
    "Rel",
    "RelKind",
    "Route",
    "ScenarioError",
    "SimConfig",
    "Simulation",
    "TopologyError",
    "Withdraw",
    "decide",
    "export_allowed",
    "import_rank",
    "load_topology",
    "run",
    "serialize_topology",
    "simulate",
    "valley_free",
]
