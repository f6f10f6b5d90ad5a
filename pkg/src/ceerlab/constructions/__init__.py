from .common import ConstructionResult
from .dark import ParameterMirror, minimal_dark
from .exact import exact_pair, exact_pair_report, minimal_tuple, tuple_assembly, tuple_components
from .gadgets import cof_gadget, nsf_actions, selffull_gadget
from .joins import (class_sizes, dark_I_join, dark_join_pair, id_part_merges, planted_join_check,
                    sup_not_oplus)
from .selffull import frozen_class_report, self_full_covers, self_full_finite_classes

__all__ = [
    "ConstructionResult", "ParameterMirror", "minimal_dark", "frozen_class_report",
    "self_full_covers", "self_full_finite_classes", "dark_join_pair", "planted_join_check",
    "sup_not_oplus", "dark_I_join", "id_part_merges", "class_sizes", "exact_pair",
    "exact_pair_report", "minimal_tuple", "tuple_assembly", "tuple_components", "cof_gadget",
    "selffull_gadget", "nsf_actions",
]
