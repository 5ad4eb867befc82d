"""Column-dependency analysis for categorical sequence alignments."""

from .alignment_io import (Alphabet, AlignmentMatrix, AlignmentError,
                           AlphabetOverflowError, EmptyInputError,
                           InvalidAlignmentError, RaggedRowsError, from_rows,
                           parse_alignment, validate)
from .contingency import (CSV_HEADER, DependencyEdge, EdgeSet, MarginalProfile,
                          all_pairs_scan, edges_to_csv, expected_counts,
                          fisher_exact_p, joint_counts, marginal_counts,
                          marginal_profile, standardized_residuals)
from .crf_model import (DEFAULT_KAPPA, CrfModel, EmptySelection, ScoreReport,
                        build_crf, pssm_score, rank_variants)
from .demo import demo_matrix, demo_rows
from .layout import (CylinderScene, LayoutParams, colinear_overlaps,
                     compute_layout, emit_scene)
from .metagraph import (CycleReport, FilterSpec, InconsistentInputs, Metagraph,
                        SchemaViolation, UnknownEdge, build_graph,
                        detect_cycles, edge_key, parse_edge_key)
from .realign import (AmbiguousAnchor, EchoGroup, RealignResult, apply_shifts,
                      assign_shifts, detect_echoes, phi, realign_iterate)

__version__ = "0.1.0"
