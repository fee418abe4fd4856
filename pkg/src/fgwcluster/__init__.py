"""Graph node clustering by swapping fused Gromov-Wasserstein assignments
between augmented views against learnable prototypes."""

from .encoder import ModelParams, compute_R, forward, kaiming_uniform, softmax, swapped_loss
from .graph import (
    AttributeGraph,
    AugmentationConfig,
    augment,
    gcn_normalize,
    generate_sbm,
    load_graph,
    load_graph_dir,
    save_graph,
)
from .metrics import MetricsReport, evaluate, kmeans, lsa_map
from .ot import (
    Coupling,
    Marginals,
    OTConfig,
    coupling_to_assignment,
    entropic_fgw,
    entropic_gw,
    gw_linearized_cost,
    sinkhorn,
)
from .prototypes import PrototypeState, init_state, step_views
from .training import Ablation, Dims, TrainConfig, TrainedModel, cluster, infer, train

__version__ = "0.1.0"
