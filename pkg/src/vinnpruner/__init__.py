"""vinnpruner: interactive neural-network pruning workbench."""

from .model import (
    Dataset,
    LayerSpec,
    Masks,
    Model,
    ModelError,
    ShapeChainError,
    conv2d_forward,
    forward,
    forward_all_activations,
    layer_output_shapes,
    maxpool2d_forward,
)
from .pruning import (
    MaskEdit,
    MaskViewLayout,
    PruneError,
    PruneSettings,
    lap_scores,
    map_scores,
    mask_view_layout,
    prune_by_ratio,
)
from .metrics import EvalReport, LayerSparsity, compare_reports, evaluate
from .session import PruneStep, Session, SessionError
from .featuremaps import FeatureMaps, feature_maps
from .persistence import (
    ArchiveError,
    load_dataset,
    load_model,
    load_session,
    pack_mask,
    save_dataset,
    save_model,
    save_session,
    unpack_mask,
)
from .fixtures import generate_fixtures

__version__ = "0.1.0"
