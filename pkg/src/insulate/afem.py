"""Adaptive loop: solve, estimate with the gap indicators, Doerfler-mark
elements and insulated sides, refine by newest-vertex bisection.
"""

import numpy as np

from . import functionals, mesh as meshmod, solver, spaces


class AfemConfig:
    """Marking fractions, stopping tolerance and solver parameters.

    theta_elements / theta_sides in [0, 1); a zero fraction disables the
    corresponding marking pass.
    """

    def __init__(self, theta_elements=0.25, theta_sides=0.0, eps_stop=0.0,
                 max_levels=10, alpha=1.0, newton_eps=1e-10,
                 newton_max_iter=100):
        if not (0.0 <= theta_elements < 1.0 and 0.0 <= theta_sides < 1.0):
            raise ValueError("marking fractions must lie in [0, 1)")
        self.theta_elements = theta_elements
        self.theta_sides = theta_sides
        self.eps_stop = eps_stop
        self.max_levels = max_levels
        self.alpha = alpha
        self.newton_eps = newton_eps
        self.newton_max_iter = newton_max_iter


class LevelRecord:
    def __init__(self, level, n_elements, n_dofs, eta2_A, eta2_B, gap,
                 primal_energy, dual_energy, iterations, marked_elements,
                 marked_sides):
        self.level = level
        self.n_elements = n_elements
        self.n_dofs = n_dofs
        self.eta2_A = eta2_A
        self.eta2_B = eta2_B
        self.gap = gap
        self.primal_energy = primal_energy
        self.dual_energy = dual_energy
        self.iterations = iterations
        self.marked_elements = marked_elements
        self.marked_sides = marked_sides


def dorfler_mark(indicators, theta):
    """Minimal index set whose indicator sum reaches theta times the total.

    Sorting is descending with ties broken by lower index; theta = 0
    returns the empty set.
    """
    indicators = np.asarray(indicators, dtype=float)
    if np.any(indicators < 0.0):
        raise ValueError("indicators must be nonnegative")
    total = indicators.sum()
    target = theta * total
    if target <= 0.0:
        return np.array([], dtype=np.int64)
    # stable sort on the negated values keeps ties in index order
    order = np.argsort(-indicators, kind="stable")
    csum = np.cumsum(indicators[order])
    k = int(np.searchsorted(csum, target))  # first prefix with sum >= target
    if k >= len(order):
        k = len(order) - 1
    return np.sort(order[:k + 1])


def afem_run(initial_mesh, data, config):
    """Run the adaptive loop and return one LevelRecord per level.

    The solver output is post-processed to an admissible conforming pair
    (node-averaged primal; the flux itself, which is admissible for the
    continuous problem exactly when the data is constant) and the gap
    indicators of that pair drive the marking.  The reported gap is the
    continuous primal-dual gap of the post-processed pair.
    """
    mesh = initial_mesh
    records = []
    meshes = [mesh]
    solutions = []
    for level in range(config.max_levels):
        z, it, rep = solver.solve_dual(
            mesh, data, alpha=config.alpha, eps_stop=config.newton_eps,
            max_iter=config.newton_max_iter)
        if not rep.converged:
            raise RuntimeError(
                f"dual solver did not converge on level {level}")
        disc = data.reduce(mesh)
        dirichlet = {int(s): disc.u_D_h[s] for s in mesh.dirichlet_sides}
        u = solver.marini_reconstruct(z, it.U_bar, dirichlet=dirichlet)
        u_bar = spaces.node_average(u, dirichlet=dirichlet or None)
        report = functionals.conforming_gap_report(u_bar, z, data, mesh)
        n_dofs = mesh.n_sides + mesh.n_elements
        elem_ind = report.element_indicators
        side_ind = report.side_indicators
        marked_elems = dorfler_mark(elem_ind, config.theta_elements)
        marked_sides = dorfler_mark(side_ind, config.theta_sides)
        records.append(LevelRecord(
            level, mesh.n_elements, n_dofs, report.eta2_A_global,
            report.eta2_B_global, report.gap, report.primal_energy,
            report.dual_energy, rep.iterations, len(marked_elems),
            len(marked_sides)))
        solutions.append((u, u_bar, z))
        if report.eta2_A_global + report.eta2_B_global <= config.eps_stop:
            break
        if level == config.max_levels - 1:
            break
        to_refine = set(int(t) for t in marked_elems)
        ins = mesh.insulated_sides
        for k in marked_sides:
            to_refine.add(int(mesh.side_elements[ins[k], 0]))
        mesh = meshmod.refine_nvb(mesh, to_refine)
        meshes.append(mesh)
    return records, meshes, solutions


def level_log_csv(records, path):
    with open(path, "w") as fh:
        fh.write("level,elements,dofs,eta2_A,eta2_B,gap,primal_energy,"
                 "dual_energy,iterations\n")
        for r in records:
            fh.write(f"{r.level},{r.n_elements},{r.n_dofs},{r.eta2_A!r},"
                     f"{r.eta2_B!r},{r.gap!r},{r.primal_energy!r},"
                     f"{r.dual_energy!r},{r.iterations}\n")
