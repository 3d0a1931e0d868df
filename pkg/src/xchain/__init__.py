"""Deterministic simulation and checking of cross-chain payment protocols.

Protocols are networks of timed automata (``anta``) run by a discrete-event
engine (``engine``) over a synchrony model (``network``).  ``timebounded``
and ``eventual`` build the two payment protocols, ``tm`` the transaction
managers, ``adversary`` the deviations, and ``verifier`` checks traces.
"""

from .engine import Network, Trace, run
from .rational import Q, fmt_q, to_q
from .scenario import Scenario, load, loads
from .timebounded import closed_form_a, compute_params
from .verifier import PropertyReport, check_all

__version__ = "0.1.0"

__all__ = [
    "Network", "Trace", "run", "Q", "fmt_q", "to_q", "Scenario", "load", "loads",
    "closed_form_a", "compute_params", "PropertyReport", "check_all",
]
