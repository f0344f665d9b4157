"""Prototype-based topographic clustering for vector and dissimilarity data.

Batch K-means / neural gas / SOM for vectors, their median counterparts for
general dissimilarity matrices (with exact accelerated searches), and
single-pass patch clustering for matrices too large for memory.
"""

from .data import (AnnealingSchedule, ConfigError, DataError,
                   DissimilaritySource, InvariantError, Lattice, MatrixSource,
                   MetricSource, CountingSource, SequenceDataset,
                   VectorDataset, cosine_dissimilarity, load_dissimilarity,
                   load_sequence_file, load_vector_file,
                   materialize_dissimilarity, neighborhood_weight,
                   save_dissimilarity, sigma_at, squared_euclidean,
                   validate_source, weighted_edit_distance,
                   zscore_standardize)
from .euclid import (AssignmentState, BatchResult, EuclideanPrototypes,
                     QuantizationError, batch_kmeans, batch_ng, batch_som,
                     compute_ranks, quantization_error, rank_table,
                     som_winner, winner_index)
from .fast_ng import (NG_IMPLEMENTATIONS, RankPartition, factorized_criterion,
                      ng_prototype_search, order_candidates, rank_partition)
from .fast_som import (BlockSums, BoundTable, block_prototype_update,
                       block_sums, bnb_bounds, bnb_prototype_search,
                       receptive_fields)
from .harness import (ExperimentConfig, EvaluationReport, RunResult,
                      benchmark, beta_sweep, classify_by_prototypes,
                      cross_validate, square_lattice)
from .median import (SOM_IMPLEMENTATIONS, EpochRecord, MedianModel,
                     MedianPrototypes, SupervisionConfig, TrainConfig,
                     TrainResult, blended_distance, kmedoids, kmedoids_epoch,
                     median_ng_epoch, median_som_epoch, posterior_label,
                     resolve_collisions, train_median)
from .patch import (ExtendedPatch, PatchPlan, PatchResult,
                    build_extended_patch, patch_median_ng, plan_patches,
                    weighted_median_ng)

__version__ = "0.1.0"
