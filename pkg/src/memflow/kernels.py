"""Backend selection for the hot kernels: compiled extension if built, numpy otherwise."""

try:
    from . import _kernels as _impl

    HAVE_COMPILED = True
except ImportError:
    from . import _kernels_py as _impl

    HAVE_COMPILED = False

BACKEND = _impl.BACKEND
convection_element_values = _impl.convection_element_values
scatter_accumulate = _impl.scatter_accumulate
