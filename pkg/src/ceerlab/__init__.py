"""A workbench for computably enumerable equivalence relations: staged
ceers, reductions with verified witnesses, and finite-injury constructions
with trace audits."""

from .algebra import big_oplus, collapse_with_witness, jump, oplus, oplus_n, quotient, restrict, z_chain
from .ceer import Ceer, PartitionCeer, finite_ceer, id_ceer, id_n, indexed_ceer, r_u
from .machine import Converged, DivergentWithin, Registry, column, interpret, pair, unpair, w
from .partition import StagedPartition
from .priority import ConstructionTrace, Scheduler, audit, run
from .reductions import HypothesisRefuted, brute_force_reduction, verify_reduction

__version__ = "0.1.0"

__all__ = [
    "big_oplus", "collapse_with_witness", "jump", "oplus", "oplus_n", "quotient", "restrict",
    "z_chain", "Ceer", "PartitionCeer", "finite_ceer", "id_ceer", "id_n", "indexed_ceer", "r_u",
    "Converged", "DivergentWithin", "Registry", "column", "interpret", "pair", "unpair", "w",
    "StagedPartition", "ConstructionTrace", "Scheduler", "audit", "run", "HypothesisRefuted",
    "brute_force_reduction", "verify_reduction",
]
