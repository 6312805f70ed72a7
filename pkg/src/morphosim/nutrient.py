"""Linear elliptic reaction-diffusion solve for the nutrient concentration.

Coefficients depend pointwise on the growth tensor and the total
deformation gradient; both are sampled at the volume quadrature points
(the gradient is piecewise constant, the growth tensor P1-interpolated
unless supplied analytically).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import NegativeSolutionWarning, SingularMatrix, ValidationError


@dataclass
class NutrientProblem:
    """One nutrient solve.

    `deformation` is the nodal total deformation y (not the displacement);
    `dirichlet_data` maps boundary points to concentrations >= 0 on the
    nutrient Dirichlet part and `neumann_flux` maps (points, normals) to
    the prescribed co-normal flux >= 0 (the physical outward flux is its
    negative).
    """

    mesh: object
    model: object
    growth: object
    deformation: np.ndarray
    dirichlet_data: object = None
    neumann_flux: object = None


@dataclass
class NutrientSolution:
    concentration: np.ndarray
    min_value: float
    residual_norm: float


def nutrient_coefficient_fields(problem):
    """Diffusion and absorption sampled at the quadrature points.

    Returns ``(D, beta)`` with shapes (cells, nq, 2, 2) and (cells, nq).
    Raises SingularMatrix when the deformation gradient degenerates.
    """
    mesh = problem.mesh
    Y = fem.interpolate_gradient(mesh, problem.deformation)
    if np.any(np.linalg.det(Y) <= 0.0):
        raise SingularMatrix("deformation gradient with non-positive "
                             "determinant")
    nq = mesh.quad_points().shape[1]
    Yq = np.broadcast_to(Y[:, None], (mesh.num_cells, nq, 2, 2))
    Gq = fem.growth_at_quadrature(mesh, problem.growth)
    x = mesh.quad_points()
    D = problem.model.diffusion(Gq, Yq, x)
    beta = problem.model.absorption(Gq, Yq, x)
    return np.asarray(D, dtype=float), np.asarray(beta, dtype=float)


def solve_nutrient(problem, tol=1e-12):
    """First-order FEM solution of the nutrient equation.

    Dirichlet data is imposed strongly, the flux datum weakly.  The
    diffusion matrices must pass the model's ellipticity constant at every
    quadrature point (EllipticityViolation otherwise); a singular reduced
    operator (no Dirichlet part and vanishing absorption) raises
    SingularSystem.  On meshes flagged Delaunay-like, a solution dipping
    below ``-1e-10 * scale`` emits NegativeSolutionWarning.
    """
    mesh = problem.mesh
    D, beta = nutrient_coefficient_fields(problem)

    dirichlet = None
    nodes = mesh.nutrient_dirichlet_nodes()
    if len(nodes):
        if problem.dirichlet_data is None:
            raise ValidationError("nutrient Dirichlet facets present but no "
                                  "boundary data given")
        values = np.asarray(problem.dirichlet_data(mesh.vertices[nodes]),
                            dtype=float).reshape(len(nodes))
        if np.any(values < 0.0):
            raise ValidationError("nutrient Dirichlet data must be >= 0")
        dirichlet = (nodes, values)

    flux = None
    if problem.neumann_flux is not None and np.any(~mesh.facet_nutrient_dirichlet):
        def flux(points, normals):
            vals = np.asarray(problem.neumann_flux(points, normals),
                              dtype=float)
            if np.any(vals < 0.0):
                raise ValidationError("nutrient flux datum must be >= 0")
            return vals

    system = fem.assemble_scalar_operator(
        mesh, D, reaction=beta, neumann_flux=flux, dirichlet=dirichlet,
        ellipticity_nu=problem.model.ellipticity_nu)
    N = fem.solve_sparse(system, tol=tol)

    Kff, bf, free = system.reduced()
    resid = float(np.linalg.norm(Kff @ N[free] - bf)) if len(free) else 0.0
    min_value = float(np.min(N))
    scale = max(1.0, float(np.max(np.abs(N))))
    if mesh.delaunay_like and min_value < -1e-10 * scale:
        warnings.warn("nutrient solution dips to %.3e on a Delaunay-type "
                      "mesh" % min_value, NegativeSolutionWarning)
    return NutrientSolution(N, min_value, resid)
