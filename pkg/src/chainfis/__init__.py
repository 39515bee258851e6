__version__ = "0.1.0"  # managed by bump2version

from chainfis.fcm import run_fcm
from chainfis.ledger import LedgerChain, verify_chain
from chainfis.simulator import run_simulation

__all__ = [
    "LedgerChain",
    "run_fcm",
    "run_simulation",
    "verify_chain",
]
