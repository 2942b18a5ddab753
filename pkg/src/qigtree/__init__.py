"""Structure learning for tree-skeleton causal models over characteristic-imset polytopes."""
from .gaussian_score import InterventionalDataset, bic_direct, bic_via_alpha, objective_vector
from .graphs import Dag, IDag, Pdag, UndirectedTree, essential_graph
from .imsets import CharImset, char_imset
from .learn import LearnReport, RunConfig, learn, qig_learn
from .polytope import GluingTree, h_representation, vertex_table
from .solver import lp_maximize, reconstruct_dag, solve

__version__ = "0.1.0"

__all__ = [
    "CharImset", "Dag", "GluingTree", "IDag", "InterventionalDataset", "LearnReport", "Pdag",
    "RunConfig", "UndirectedTree", "bic_direct", "bic_via_alpha", "char_imset", "essential_graph",
    "h_representation", "learn", "lp_maximize", "objective_vector", "qig_learn", "reconstruct_dag",
    "solve", "vertex_table",
]
