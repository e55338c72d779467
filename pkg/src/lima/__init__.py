"""Black-box attribution by greedy submodular subset selection over image
sub-regions, with faithfulness metrics and an opaque oracle interface."""

__version__ = "0.1.0"

from .attribution import (SaliencyMap, assign_scores, assign_scores_uniform,
                          render_saliency)
from .core import (Division, InvalidArgument, OrderedAttribution, RasterImage,
                   RegionMask, complement_composite, composite, load_image_png,
                   rle_decode, rle_encode, save_image_png)
from .division import (DivisionConfig, divide_grid, divide_superpixel,
                       resolve_imported_masks)
from .metrics import (FaithfulnessCurve, RevealSchedule, build_curve, deletion_auc,
                      highest_confidence, insertion_auc, mu_fidelity,
                      region_schedule)
from .oracle import (IdentityOracle, LinearPrototypeOracle, ModelOracle,
                     OracleCallLog, PlantedRegionOracle, SemanticTarget,
                     identity_oracle, linear_prototype_oracle,
                     make_semantic_target, planted_region_oracle)
from .search import (SearchConfig, SearchTrace, bidirectional_rank, greedy_rank,
                     naive_evaluation_count, bidirectional_evaluation_estimate,
                     verify_bound)
from .submodular import (DEFAULT_LAMBDAS, ScoreComponents, SubmodularContext,
                         collaboration_score, confidence_score, consistency_score,
                         effectiveness_score, submodular_value,
                         submodular_value_batch)

__all__ = [name for name in dir() if not name.startswith("_")]
