"""Identifiability certificates and estimation for linear non-Gaussian models with latent confounders."""

from .certify import (IdQuery, IdVerdict, Kind, Setting, certify, dce_known, dce_unknown,
                      matrix_known, matrix_unknown, tce_known, tce_unknown)
from .graph import (CanonicalDag, LvDag, NodeSet, WeightedModel, canonicalize,
                    observed_descendants, observed_descendants_cut, reduce_weights_to_canonical,
                    topological_order, validate)
from .mixing import MixingMatrix, build_mixing

__all__ = [
    "CanonicalDag", "IdQuery", "IdVerdict", "Kind", "LvDag", "MixingMatrix", "NodeSet",
    "Setting", "WeightedModel", "build_mixing", "canonicalize", "certify", "dce_known",
    "dce_unknown", "matrix_known", "matrix_unknown", "observed_descendants",
    "observed_descendants_cut", "reduce_weights_to_canonical", "tce_known", "tce_unknown",
    "topological_order", "validate",
]
