import shutil
from pathlib import Path
from unittest import TestCase
from unittest.mock import patch

import numpy as np
import polars as pl
import yaml

from ebdg import cases
from ebdg.EBDGSolver import EBDGSolver, Simulation, _convergence_level
from ebdg.cases import CaseSpec
from ebdg.config_validation import Discretization, Limiter, RunConfig
from ebdg.errors import AdmissibilityError, CaseError, FatalDiagnostic
from ebdg.numerics.dg import conserved_totals, element_averages

RUN_DIR = Path(__file__).parent / "test_runs"


def _config(name: str, **sections) -> RunConfig:
    data = {
        "metadata": {"project_name": f"Test run {name}"},
        "setup": {"mode": "case", "case": "advect1d", "h": 0.1, "end_time": 0.02},
        "discretization": {"p": 1},
        "output": {"output_directory": str(RUN_DIR / name), "formats": ["csv"]},
        "processing": {"enable_parallel_processing": False, "max_workers": 1},
    }
    data.update(sections)
    return RunConfig.model_validate(data)


def _simulation(case: CaseSpec, p: int, check_conservation: bool = False, **limiter) -> Simulation:
    return Simulation.build(cases.build_mesh(case), cases.boundary_conditions(case), case.gas,
                            Discretization(p=p), Limiter(**limiter),
                            lambda geometry: cases.initialize(case, geometry), check_conservation)


class TestSimulation(TestCase):

    def test_runs_to_end_time_and_conserves(self):
        simulation = _simulation(CaseSpec("advect1d", 0.1), 1)
        before = conserved_totals(simulation.state.solution.coeffs, simulation.geometry)
        state = simulation.run_to(0.05)

        self.assertEqual("end_time", state.termination)
        self.assertAlmostEqual(0.05, state.time, places=12)
        self.assertGreater(state.step, 0)
        self.assertEqual(state.step, len(state.limiter_history))
        after = conserved_totals(state.solution.coeffs, simulation.geometry)
        np.testing.assert_allclose(after, before, rtol=1e-12)

    def test_stops_at_max_steps(self):
        simulation = _simulation(CaseSpec("advect1d", 0.1), 1)
        state = simulation.run_to(1.0, max_steps=3)
        self.assertEqual("max_steps", state.termination)
        self.assertEqual(3, state.step)
        self.assertLess(state.time, 1.0)

    def test_limited_discontinuous_run(self):
        simulation = _simulation(CaseSpec("sod_periodic", 0.1), 2, check_conservation=True)
        reports = []
        state = simulation.run_to(1.0, max_steps=5, callback=reports.append)

        self.assertEqual(5, len(reports))
        for report in reports:
            self.assertGreater(report.dt, 0.0)
            self.assertEqual(0, report.mean_bound_violations)
        self.assertTrue(np.all(np.isfinite(state.solution.coeffs)))
        self.assertIsNotNone(state.bound_state)

    def test_global_initial_bound(self):
        simulation = _simulation(CaseSpec("sod_periodic", 0.1), 1, strategy="global", global_bound="initial")
        initial = float(np.min(simulation.limiter.point_entropy(simulation.state.solution.coeffs)))
        simulation.run_to(1.0, max_steps=3)
        final = float(np.min(simulation.limiter.point_entropy(simulation.state.solution.coeffs)))
        self.assertGreaterEqual(final, initial - 1e-8)

    def test_element_cfl_route(self):
        case = CaseSpec("advect1d", 0.1)
        simulation = Simulation.build(cases.build_mesh(case), {}, case.gas,
                                      Discretization(p=1, cfl_route="element"), Limiter(),
                                      lambda geometry: cases.initialize(case, geometry))
        self.assertAlmostEqual(0.5, simulation.cfl, places=6)
        self.assertEqual(10, len(simulation.element_limits))


class TestVerificationRuns(TestCase):

    def test_smooth_advection_rates(self):
        case = CaseSpec("advect1d", 0.2)
        levels = [0.2, 0.1, 0.05]
        for p in (1, 2, 3):
            discretization = Discretization(p=p, scheme="rk4")
            errors = [_convergence_level(case, p, h, discretization, Limiter(mode="positivity")) for h in levels]
            rows = cases.convergence_rows(levels, errors)
            self.assertGreater(rows[-1]["rate"], p + 0.5, f"p={p}")

    def test_normal_shocks(self):
        for mach in (2.0, 5.0, 100.0):
            case = CaseSpec("shock1d", 0.01, mach=mach)
            simulation = _simulation(case, 2)
            initial = float(np.min(simulation.limiter.point_entropy(simulation.state.solution.coeffs)))
            reports = []

            def check(report):
                reports.append(report)
                s_min = float(np.min(simulation.limiter.point_entropy(simulation.state.solution.coeffs)))
                self.assertGreaterEqual(s_min, initial - 1e-8, f"Ma={mach} step {len(reports)}")
                self.assertEqual(0, report.mean_bound_violations, f"Ma={mach} step {len(reports)}")

            state = simulation.run_to(case.end_time, callback=check)
            self.assertEqual("end_time", state.termination)
            self.assertTrue(np.all(np.isfinite(state.solution.coeffs)))

            geometry = simulation.geometry
            centers = geometry.x_vol[:, :, 0].mean(axis=1)
            order = np.argsort(centers)
            rho = element_averages(state.solution.coeffs, geometry)[order, 0]
            middle = 0.5 * (case.shock.pre[0] + case.shock.post[0])
            front = centers[order][np.argmax(rho < middle)]
            self.assertLessEqual(abs(front - case.shock.speed * state.time), 2.0 * case.h, f"Ma={mach}")


class TestEBDGSolver(TestCase):

    def tearDown(self):
        if RUN_DIR.exists():
            shutil.rmtree(RUN_DIR)

    def test_run_writes_outputs(self):
        solver = EBDGSolver(_config("advect"))
        state = solver.run()
        output_dir = solver.output_dir

        self.assertEqual("end_time", state.termination)
        self.assertAlmostEqual(0.02, state.time, places=12)
        summary = pl.read_csv(output_dir / "summary.csv")
        self.assertEqual(state.step + 1, len(summary))
        self.assertEqual(state.step, summary["step"][-1])
        for name in ("run.log", "README.md", "final_state.npz", "errors.csv", f"fields_{state.step:06d}.vtk"):
            self.assertTrue((output_dir / name).exists(), name)

        self.assertLess(max(solver.results["relative_drift"]), 1e-12)
        self.assertLess(solver.results["errors"]["density"], 1e-2)
        readme = (output_dir / "README.md").read_text(encoding="utf-8")
        self.assertIn("**Case:** advect1d", readme)
        self.assertIn("**Termination:** end_time", readme)

    def test_run_without_setup(self):
        config = _config("empty")
        config.setup = None
        solver = EBDGSolver(config)
        with self.assertRaises(ValueError):
            solver.run()

    def test_numerical_failure_becomes_fatal_diagnostic(self):
        solver = EBDGSolver(_config("fatal"))
        failure = AdmissibilityError("Non-positive pressure", element=3, stage=2)
        with patch.object(Simulation, "run_to", side_effect=failure):
            with self.assertRaises(FatalDiagnostic) as context:
                solver.run()

        diagnostic = context.exception
        self.assertEqual(1, diagnostic.step)
        self.assertEqual(3, diagnostic.element)
        self.assertEqual(2, diagnostic.stage)
        self.assertTrue(Path(diagnostic.dump_path).exists())
        with (solver.output_dir / "state_dump.yaml").open(encoding="utf-8") as f:
            dump = yaml.safe_load(f)
        self.assertEqual("Non-positive pressure (element 3, stage 2)", dump["reason"])
        self.assertEqual(3, dump["element"])

    def test_cfl_table(self):
        solver = EBDGSolver(_config("cfl"))
        rows = solver.cfl_table(["line", "quad"], [1])
        self.assertEqual(["line", "quad"], [row["shape"] for row in rows])
        self.assertAlmostEqual(0.5, rows[0]["cfl"], places=6)
        self.assertAlmostEqual(0.25, rows[1]["cfl"], places=6)
        self.assertTrue((solver.output_dir / "cfl_table.csv").exists())

    def test_convergence_study(self):
        solver = EBDGSolver(_config("convergence", setup={"mode": "case", "case": "advect1d", "end_time": 0.01},
                                     limiter={"mode": "positivity"}))
        rows = solver.convergence_study([0.2, 0.1, 0.05])
        self.assertEqual([0.2, 0.1, 0.05], [row["h"] for row in rows])
        self.assertIsNone(rows[0]["rate"])
        for row in rows[1:]:
            self.assertGreater(row["rate"], 1.5)
        self.assertTrue((solver.output_dir / "convergence.csv").exists())

    def test_convergence_study_needs_three_levels(self):
        solver = EBDGSolver(_config("short"))
        with self.assertRaises(CaseError):
            solver.convergence_study([0.1, 0.05])

    def test_close_is_idempotent(self):
        solver = EBDGSolver(_config("close"))
        solver.close()
        solver.close()
