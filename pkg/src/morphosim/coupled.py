"""Coupled quasi-static time loop and file output.

Each step solves equilibrium and nutrient transport for the current
growth field, records a snapshot, and advances the growth tensor by one
guarded Runge-Kutta step.  Two coupling modes exist:

* staggered (default): the deformation gradient and nutrient field seen
  by the growth law are frozen at their start-of-step values;
* substeps: every Runge-Kutta stage re-solves equilibrium (and, when the
  law consumes it, the nutrient equation) at the stage time and stage
  growth field.  This evaluates the exact coupled rate and restores the
  integrator's full order; the analytic benchmark relies on it.

The loop is sequential and deterministic; repeated runs of the same
scenario produce byte-identical diagnostics.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import fem, growth as growth_mod, tensor
from .elasticity import EquilibriumProblem, solve_equilibrium, stress_field
from .errors import GuardViolation, IoError, MorphosimError
from .materials import ZeroGrowthLaw
from .nutrient import NutrientProblem, solve_nutrient
from .scenario import OutputConfig


@dataclass
class SystemState:
    """One snapshot of the solution triple plus derived fields."""

    t: float
    growth: np.ndarray          # (n, 2, 2) nodal growth tensor
    displacement: np.ndarray    # (n, 2), zero on the elastic Dirichlet part
    lifted: np.ndarray          # (n, 2) lifted Dirichlet data
    nutrient: np.ndarray        # (n,)
    stress_nodes: np.ndarray    # (n,) Frobenius norm of the Piola stress

    @property
    def deformation(self):
        return self.displacement + self.lifted


@dataclass
class StepDiagnostics:
    t: float
    min_det_growth: float
    max_growth_norm: float
    max_stress: float
    nutrient_min: float
    equilibrium_iterations: int
    rho_hat: float
    equilibrium_residual: float
    growth_gradient_surrogate: float


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    status: str = "completed"   # completed | guard_violation | solver_failure
    error: object = None

    @property
    def failed(self):
        return self.status != "completed"

    @property
    def times(self):
        return np.array([s.t for s in self.states])


def _resolve_guards(scenario, G0):
    guards = scenario.guards
    if guards.norm_max is None:
        base = float(np.max(np.abs(G0)))
        guards = growth_mod.GuardConfig(
            det_min=guards.det_min,
            norm_max=10.0 * max(base, 1e-12),
            contraction_budget=guards.contraction_budget)
    return guards


class _CoupledDriver:
    def __init__(self, scenario):
        self.scenario = scenario
        self.mesh = scenario.mesh
        self.law = scenario.growth_law
        self.warm_u = None
        self.static_sampler = None
        if isinstance(self.law, ZeroGrowthLaw):
            # static growth: keep the analytic description for sharp sampling
            self.static_sampler = scenario.growth_sampler()

    def growth_for_solves(self, G_nodal):
        return self.static_sampler if self.static_sampler is not None else G_nodal

    def solve_state(self, t, growth_repr, with_nutrient=True):
        sc = self.scenario
        problem = EquilibriumProblem(
            self.mesh, sc.energy, growth_repr,
            sc.dirichlet_at(t), sc.traction_at(t), options=sc.solver)
        initial = self.warm_u if sc.solver.warm_start else None
        sol = solve_equilibrium(problem, initial=initial)
        self.warm_u = sol.displacement
        nut = None
        if with_nutrient:
            nut = solve_nutrient(NutrientProblem(
                self.mesh, sc.nutrient_model, growth_repr, sol.deformation,
                sc.nutrient_dirichlet_at(t), sc.nutrient_flux_at(t)))
        return problem, sol, nut

    def law_inputs(self, sol, nut):
        Y = fem.nodal_from_cells(
            self.mesh, fem.interpolate_gradient(self.mesh, sol.deformation))
        N = nut.concentration if nut is not None \
            else np.zeros(self.mesh.num_vertices)
        return Y, N

    def make_rhs(self, t_step, Y_frozen, N_frozen):
        sc = self.scenario
        law = self.law
        x = self.mesh.vertices
        needs_solve = law.needs_deformation or law.needs_nutrient
        if not sc.substeps or not needs_solve:
            def rhs(ts, Gf):
                return law.evaluate(Gf, Y_frozen, N_frozen, x)
            return rhs

        def rhs(ts, Gf):
            _, sol, nut = self.solve_state(ts, Gf,
                                           with_nutrient=law.needs_nutrient)
            Y, N = self.law_inputs(sol, nut)
            return law.evaluate(Gf, Y, N, x)
        return rhs


def run_coupled(scenario):
    """Run the coupled loop of a validated scenario.

    Returns a Trajectory whose `status` records the halting cause
    (completion, guard violation, or a solver failure); the offending
    exception is kept on `error`.  Snapshots are recorded at every
    accepted time including t0 and, on success, t_end.
    """
    driver = _CoupledDriver(scenario)
    mesh = scenario.mesh
    G = scenario.initial_growth_nodal()
    guards = _resolve_guards(scenario, G)
    grid = scenario.time
    traj = Trajectory()
    t = grid.t0
    prev_rate = None
    prev_G = None

    while True:
        try:
            problem, sol, nut = driver.solve_state(
                t, driver.growth_for_solves(G))
        except MorphosimError as exc:
            traj.status = "solver_failure"
            traj.error = exc
            return traj
        P = stress_field(problem, sol.displacement)
        pnorm_cells = np.mean(tensor.frobenius_norm(P), axis=1)
        state = SystemState(
            t=t, growth=G.copy(), displacement=sol.displacement,
            lifted=sol.lifted_data, nutrient=nut.concentration,
            stress_nodes=fem.nodal_from_cells(mesh, pnorm_cells))
        report = growth_mod.det_guard(G, guards)
        traj.states.append(state)
        traj.diagnostics.append(StepDiagnostics(
            t=t,
            min_det_growth=report.min_det,
            max_growth_norm=report.max_norm,
            max_stress=float(np.max(tensor.frobenius_norm(P))),
            nutrient_min=nut.min_value,
            equilibrium_iterations=sol.iterations,
            rho_hat=sol.rho_hat,
            equilibrium_residual=sol.residual_norm,
            growth_gradient_surrogate=growth_mod.gradient_surrogate(mesh, G)))

        remaining = grid.t_end - t
        if remaining <= 1e-12 * max(1.0, abs(grid.t_end)):
            traj.status = "completed"
            return traj

        dt_k = min(grid.dt, remaining)
        Y_frozen, N_frozen = driver.law_inputs(sol, nut)
        rate_now = scenario.growth_law.evaluate(G, Y_frozen, N_frozen,
                                                mesh.vertices)
        if grid.adaptive:
            k_hat = 0.0
            if prev_rate is not None:
                k_hat = growth_mod.lipschitz_estimate(G, prev_G, rate_now,
                                                      prev_rate)
            m_hat = float(np.max(np.abs(rate_now)))
            r0 = np.inf
            if guards.norm_max is not None:
                r0 = max(guards.norm_max - float(np.max(np.abs(G))), 1e-12)
            dt_k = growth_mod.picard_step_control(
                k_hat, m_hat, r0, dt_k, safety=guards.contraction_budget)
            if dt_k < 1e-12 * max(1.0, grid.dt):
                traj.status = "guard_violation"
                traj.error = GuardViolation(
                    "admissible step size underflowed at t = %.6g (state "
                    "pinned against the guards)" % t)
                return traj
        prev_rate, prev_G = rate_now, G

        rhs = driver.make_rhs(t, Y_frozen, N_frozen)
        try:
            G = growth_mod.rk4_step(G, rhs, t, dt_k, guards=guards)
        except GuardViolation as exc:
            traj.status = "guard_violation"
            traj.error = exc
            return traj
        except MorphosimError as exc:
            traj.status = "solver_failure"
            traj.error = exc
            return traj
        if dt_k >= remaining - 1e-15:
            t = grid.t_end
        else:
            t = t + dt_k


# ---------------------------------------------------------------------------
# output files


CSV_HEADER = "t,min_det_G,max_stress,nutrient_min,equilibrium_iters,rho_hat"


def trajectory_csv(trajectory):
    """Run-level diagnostics as CSV text (deterministic formatting)."""
    lines = [CSV_HEADER]
    for d in trajectory.diagnostics:
        lines.append("%.17g,%.17g,%.17g,%.17g,%d,%.17g" % (
            d.t, d.min_det_growth, d.max_stress, d.nutrient_min,
            d.equilibrium_iterations, d.rho_hat))
    return "\n".join(lines) + "\n"


def _vtk_text(mesh, state):
    lines = [
        "# vtk DataFile Version 3.0",
        "morphosim fields at t=%.17g" % state.t,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        "POINTS %d double" % mesh.num_vertices,
    ]
    for v in mesh.vertices:
        lines.append("%.17g %.17g 0" % (v[0], v[1]))
    lines.append("CELLS %d %d" % (mesh.num_cells, 4 * mesh.num_cells))
    for c in mesh.cells:
        lines.append("3 %d %d %d" % (c[0], c[1], c[2]))
    lines.append("CELL_TYPES %d" % mesh.num_cells)
    lines.extend(["5"] * mesh.num_cells)
    lines.append("POINT_DATA %d" % mesh.num_vertices)
    lines.append("VECTORS displacement double")
    for u in state.displacement:
        lines.append("%.17g %.17g 0" % (u[0], u[1]))
    for name, values in (("nutrient", state.nutrient),
                         ("growth_det", np.linalg.det(state.growth)),
                         ("stress_frobenius", state.stress_nodes)):
        lines.append("SCALARS %s double 1" % name)
        lines.append("LOOKUP_TABLE default")
        for value in values:
            lines.append("%.17g" % value)
    return "\n".join(lines) + "\n"


def write_outputs(trajectory, mesh, config):
    """Write the run CSV, per-snapshot field files, and (on failure) a
    diagnostic snapshot of the final state.  Returns the list of paths."""
    if isinstance(config, str):
        config = OutputConfig(directory=config)
    paths = []
    try:
        os.makedirs(config.directory, exist_ok=True)
        csv_path = os.path.join(config.directory, "run.csv")
        with open(csv_path, "w") as fh:
            fh.write(trajectory_csv(trajectory))
        paths.append(csv_path)
        if config.write_fields and trajectory.states:
            last = len(trajectory.states) - 1
            for k, state in enumerate(trajectory.states):
                if k % max(config.every, 1) and k != last:
                    continue
                path = os.path.join(config.directory, "fields_%06d.vtk" % k)
                with open(path, "w") as fh:
                    fh.write(_vtk_text(mesh, state))
                paths.append(path)
        if trajectory.failed and trajectory.states:
            snap = os.path.join(config.directory, "failure_snapshot.vtk")
            with open(snap, "w") as fh:
                fh.write(_vtk_text(mesh, trajectory.states[-1]))
            note = os.path.join(config.directory, "failure.txt")
            with open(note, "w") as fh:
                fh.write("status: %s\n" % trajectory.status)
                fh.write("halted after %d snapshots at t=%.17g\n"
                         % (len(trajectory.states),
                            trajectory.states[-1].t))
                fh.write("cause: %s\n" % trajectory.error)
            paths.extend([snap, note])
    except OSError as exc:
        raise IoError("cannot write outputs: %s" % exc)
    return paths
