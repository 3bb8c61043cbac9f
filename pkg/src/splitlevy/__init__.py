"""splitlevy: splitting trees, supercritical Levy-tree genealogy and
branching processes, with a Monte Carlo verification harness."""

from .backend import BACKEND
from .branching import (
    simulate_cb,
    simulate_cb_batch,
    simulate_cbi_batch,
    simulate_twotype,
    simulate_twotype_batch,
    twotype_generator,
)
from .exponent import LaplaceExponent, LevyQuartet, load_exponent
from .experiments import list_experiments, run_experiment
from .genealogy import (
    discrete_generations,
    height_estimate,
    level_profile,
    sample_eta_genealogy,
    sample_genealogy_poisson,
)
from .paths import CadlagPath, StopRule, concatenate, post_minimum, simulate_levy, \
    time_change_below
from .splitting import (
    simulate_eta_x,
    simulate_nu_r,
    simulate_sin_tree,
    simulate_upsilon_tree,
    simulate_yule_contour,
)
from .trees import (
    ChronologicalTree,
    TomTreeView,
    decode_contour,
    graft_right,
    lukasiewicz_to_tree,
    prolific_skeleton,
    truncate,
)

__version__ = "0.1.0"
