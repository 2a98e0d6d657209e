"""2D mechanics: homogenization, connectivity metrics and assembly design."""
from .connectivity import n_disconnected, r_disconnected
from .dataset import gen2d_dataset
from .experiment import experiment_mbb
from .fem import AssemblyProblem, assemble_and_solve, mbb_problem
from .ga import GAConfig, ga_design
from .homogenize import ElasticTensor2D, homogenize2d

__all__ = ["AssemblyProblem", "ElasticTensor2D", "GAConfig", "assemble_and_solve",
           "experiment_mbb", "ga_design", "gen2d_dataset", "homogenize2d", "mbb_problem",
           "n_disconnected", "r_disconnected"]
