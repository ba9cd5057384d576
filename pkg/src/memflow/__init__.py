"""memflow: mini-element finite elements for incompressible flow with
tempered power-law memory."""

from .femspace import DiscreteField, MiniSpace, eval_field, interpolate, norms
from .memory_kernel import (KernelSOE, RegimeParams, TemperedKernel, build_soe,
                            convolve_direct, gronwall_bound, gronwall_verify,
                            history_advance, history_eval, kernel_eval,
                            kernel_moment, new_history, positivity_check,
                            regime_report)
from .mesh import (TriMesh, contraction_mesh, read_mesh, refine_uniform,
                   unit_square_mesh, write_mesh)
from .verification import ManufacturedCase, convergence_study, decay_study

__version__ = "0.1.0"

__all__ = [
    "DiscreteField", "MiniSpace", "eval_field", "interpolate", "norms",
    "KernelSOE", "RegimeParams", "TemperedKernel", "build_soe", "convolve_direct",
    "gronwall_bound", "gronwall_verify", "history_advance", "history_eval",
    "kernel_eval", "kernel_moment", "new_history", "positivity_check",
    "regime_report", "TriMesh", "contraction_mesh", "read_mesh", "refine_uniform",
    "unit_square_mesh", "write_mesh", "ManufacturedCase", "convergence_study",
    "decay_study", "__version__",
]
