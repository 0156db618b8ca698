"""Enriched higher-order multiscale solver for the wave equation with
strongly heterogeneous coefficients."""

from ._core import (
    ELL_INF,
    CartesianMesh,
    CoefficientField,
    build_basis,
    build_mesh,
    fine_elements_in,
    ls_eoc,
    patch_elements,
    projection_coefficients,
    records_csv,
    refine_ratio,
    rodas5p_tableau,
    run_decay,
    run_localization,
    run_spatial,
    run_temporal,
    sample_coefficient,
    solve_one,
)

__all__ = [
    "ELL_INF",
    "CartesianMesh",
    "CoefficientField",
    "basis_matrix",
    "build_basis",
    "build_mesh",
    "fine_elements_in",
    "ls_eoc",
    "patch_elements",
    "projection_coefficients",
    "records_csv",
    "refine_ratio",
    "rodas5p_tableau",
    "run_decay",
    "run_localization",
    "run_spatial",
    "run_temporal",
    "sample_coefficient",
    "solve_one",
]

__version__ = "0.1.0"


def basis_matrix(*args, **kwargs):
    """build_basis returned as a scipy.sparse.csc_matrix."""
    import scipy.sparse as sp

    shape, rows, cols, values = build_basis(*args, **kwargs)
    return sp.csc_matrix((values, (rows, cols)), shape=shape)
