import dataclasses
import logging
import multiprocessing
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime
from functools import partial, reduce
from importlib.metadata import version, PackageNotFoundError
from logging import Logger
from logging.handlers import QueueListener, QueueHandler
from multiprocessing import Pool, current_process, Queue
from pathlib import Path
from typing import Callable

import numpy as np
from tqdm import tqdm
from tqdm.contrib.logging import logging_redirect_tqdm, _TqdmLoggingHandler

from ebdg import cases
from ebdg.cases import CaseSpec, DEFAULT_H
from ebdg.config_validation import RunConfig, Discretization, Limiter, validate_configuration
from ebdg.errors import AdmissibilityError, CflOptimizationError, ContractViolationError, FatalDiagnostic
from ebdg.mesh.geometry import ElementGeometry, Mesh, map_points
from ebdg.mesh.gmsh_reader import load_gmsh
from ebdg.numerics.basis import l2_project, reference_element
from ebdg.numerics.cfl import cfl_row, element_cfl_limits, optimize_cfl_eb, time_step
from ebdg.numerics.dg import BoundaryCondition, DgOperator, DgSolution, conserved_totals, element_averages
from ebdg.numerics.euler import GasModel, conservative_from_primitive, entropy, pressure
from ebdg.numerics.limiter import EntropyBoundState, EntropyLimiter, LimiterReport, MEAN_BOUND_TOL
from ebdg.numerics.quadrature import MAX_ORDER, volume_rule
from ebdg.numerics.timeint import Scheme, advance
from ebdg.storage.outputManager import OutputManager
from ebdg.utils import calculate_chunksize, resolve_worker_count

ENTROPY_FLOOR_TOL = 1e-8
CONSERVATION_TOL = 1e-12
NUMERICAL_ERRORS = (AdmissibilityError, CflOptimizationError, ContractViolationError)


def _get_worker_logger_name() -> str:
    proc = current_process()
    proc_name = proc.name or ""
    if "-" in proc_name:
        suffix = proc_name.rsplit("-", 1)[-1]
    else:
        suffix = str(proc.pid) if getattr(proc, "pid", None) is not None else "unknown"
    return f"ebdg_worker_{suffix}"


def _worker_init(log_queue: Queue):
    qh = QueueHandler(log_queue)
    worker_logger = logging.getLogger(_get_worker_logger_name())
    worker_logger.setLevel(logging.DEBUG)
    worker_logger.addHandler(qh)


def _cfl_entry(entry: tuple[str, int], interpolation: str = "lagrange", logger: Logger = None) -> dict:
    if logger is None:
        logger = logging.getLogger(_get_worker_logger_name())
    shape, p = entry
    return cfl_row(shape, p, optimize_cfl_eb(shape, p, interpolation=interpolation, logger=logger))


def _convergence_level(case: CaseSpec, p: int, h: float, discretization: Discretization, limiter: Limiter,
                       logger: Logger = None) -> float:
    """Runs one level of a convergence study and returns its density (cylinder: entropy) error."""
    if logger is None:
        logger = logging.getLogger(_get_worker_logger_name())
    level_case = dataclasses.replace(case, h=h)
    level_discretization = discretization.model_copy(update={"p": p})
    mesh = cases.build_mesh(level_case, logger)
    simulation = Simulation.build(mesh, cases.boundary_conditions(level_case), level_case.gas, level_discretization,
                                  limiter, partial(cases.initialize, level_case), logger=logger)
    simulation.run_to(level_case.end_time)
    errors = cases.error_norms(simulation.state.solution.coeffs, simulation.geometry, level_case,
                               simulation.state.time)
    key = "entropy" if level_case.name == "cylinder" else "density"
    logger.debug(f"Level h={h:.6g}: {key} error {errors[key]:.6e} after {simulation.state.step} steps")
    return errors[key]


def _constant_solution(U: np.ndarray, geometry: ElementGeometry) -> DgSolution:
    mesh, ref = geometry.mesh, geometry.ref
    rule = volume_rule(mesh.shape, MAX_ORDER)
    x, _, det = map_points(mesh, rule.points)
    coeffs = l2_project(lambda points: np.broadcast_to(U, points.shape[:-1] + U.shape).copy(), ref, x, det, rule)
    return DgSolution(coeffs, ref.p)


@dataclass
class RunState:
    time: float
    step: int
    solution: DgSolution
    bound_state: EntropyBoundState | None = None
    end_time: float = 0.0
    max_steps: int | None = None
    steady_tolerance: float | None = None
    last_report: LimiterReport | None = None
    # (step, limited elements, max epsilon)
    limiter_history: list[tuple[int, int, float]] = field(default_factory=list)
    initial_residual: float | None = None
    termination: str | None = None


@dataclass
class StepReport:
    dt: float
    max_speed: float
    limiter: LimiterReport
    residual_norm: float
    mean_bound_violations: int


class Simulation:
    """Time loop of one discretized problem: bound estimation, step size, limited Runge-Kutta step."""

    def __init__(self, geometry: ElementGeometry, operator: DgOperator, limiter: EntropyLimiter, scheme: Scheme,
                 cfl: float, safety: float = 0.8, element_limits: np.ndarray | None = None,
                 check_conservation: bool = False, logger: Logger = logging.getLogger(__name__)):
        self.geometry = geometry
        self.operator = operator
        self.limiter = limiter
        self.scheme = scheme
        self.cfl = cfl
        self.safety = safety
        self.element_limits = element_limits
        self.check_conservation = check_conservation
        self.logger = logger
        self.state: RunState | None = None

    @classmethod
    def build(cls, mesh: Mesh, boundary_conditions: dict[str, BoundaryCondition], gas: GasModel,
              discretization: Discretization, limiter: Limiter,
              initializer: Callable[[ElementGeometry], DgSolution], check_conservation: bool = False,
              logger: Logger = logging.getLogger(__name__)) -> "Simulation":
        start = time.perf_counter()
        ref = reference_element(mesh.shape, discretization.p)
        geometry = ElementGeometry(mesh, ref, logger)
        operator = DgOperator(geometry, boundary_conditions, gas, logger)
        solution = initializer(geometry)
        logger.debug(f"Discretization set up in {time.perf_counter() - start:.3f} s")

        global_bound = limiter.global_bound
        if limiter.mode == "entropy" and limiter.strategy == "global" and global_bound == "initial":
            global_bound = EntropyLimiter(operator, mode="none").initial_minimum_entropy(solution.coeffs)
            logger.info(f"Global entropy bound from the initial condition: {global_bound:.6f}")
        entropy_limiter = EntropyLimiter(operator, mode=limiter.mode, strategy=limiter.strategy,
                                         global_bound=global_bound, density_floor=limiter.density_floor,
                                         strict_mean_check=limiter.strict_mean_check, logger=logger)

        start = time.perf_counter()
        element_limits = None
        if discretization.cfl_route == "element":
            element_limits = element_cfl_limits(geometry, discretization.interpolation, logger)
            cfl = float(np.min(element_limits / geometry.characteristic_length))
        else:
            cfl = optimize_cfl_eb(mesh.shape, discretization.p, interpolation=discretization.interpolation,
                                  logger=logger)
        logger.debug(f"CFL computed in {time.perf_counter() - start:.3f} s")

        simulation = cls(geometry, operator, entropy_limiter, Scheme.from_name(discretization.scheme), cfl,
                         discretization.safety, element_limits, check_conservation, logger)
        simulation.initialize(solution)
        return simulation

    def initialize(self, solution: DgSolution, t: float = 0.0):
        self.state = RunState(time=t, step=0, solution=solution)

    def _limit_stage(self, values: np.ndarray, stage: int, bounds: np.ndarray | None,
                     reports: list[LimiterReport]) -> np.ndarray:
        limited, report = self.limiter.limit(values, bounds)
        if self.check_conservation:
            before = element_averages(values, self.geometry)
            after = element_averages(limited, self.geometry)
            drift = np.abs(after - before).max()
            if drift > CONSERVATION_TOL * (1.0 + np.abs(before).max()):
                raise ContractViolationError(f"Limiting changed element means by {drift:.3e} in stage {stage}")
        reports.append(report)
        return limited

    def step(self, end_time: float | None = None) -> StepReport:
        state = self.state
        coeffs = state.solution.coeffs
        bounds = self.limiter.update_bounds(coeffs, state.time)
        state.bound_state = self.limiter.state
        dt, lam = time_step(self.operator, coeffs, self.cfl, self.safety, state.time, self.element_limits)
        if end_time is not None:
            dt = min(dt, end_time - state.time)

        reports: list[LimiterReport] = []
        new_coeffs, residual = advance(coeffs, dt, self.scheme, self.operator.residual, state.time,
                                       limiter=partial(self._limit_stage, bounds=bounds, reports=reports))
        report = reduce(LimiterReport.merge, reports)

        state.solution = DgSolution(new_coeffs, state.solution.p)
        state.time += dt
        state.step += 1
        state.last_report = report
        state.limiter_history.append((state.step, report.active_count, report.max_epsilon))

        residual_norm = float(np.linalg.norm(residual[..., 0]))
        if state.initial_residual is None:
            state.initial_residual = residual_norm
        return StepReport(dt=dt, max_speed=float(lam.max()), limiter=report, residual_norm=residual_norm,
                          mean_bound_violations=self.mean_bound_violations(new_coeffs, report.bounds))

    def mean_bound_violations(self, coeffs: np.ndarray, bounds: np.ndarray | None) -> int:
        """Elements whose mean entropy fell below the bound of the step."""
        if bounds is None or self.limiter.mode != "entropy":
            return 0
        s_mean = entropy(element_averages(coeffs, self.geometry), self.operator.gas)
        return int(np.count_nonzero(s_mean < bounds - MEAN_BOUND_TOL))

    def reached_end(self, end_time: float) -> bool:
        return self.state.time >= end_time - 1e-14 * max(1.0, abs(end_time))

    def is_steady(self, report: StepReport, tolerance: float | None) -> bool:
        if tolerance is None or not self.state.initial_residual:
            return False
        return report.residual_norm / self.state.initial_residual < tolerance

    def run_to(self, end_time: float, max_steps: int | None = None, steady_tolerance: float | None = None,
               callback: Callable[[StepReport], None] | None = None) -> RunState:
        state = self.state
        state.end_time, state.max_steps, state.steady_tolerance = end_time, max_steps, steady_tolerance
        while True:
            if self.reached_end(end_time):
                state.termination = "end_time"
                break
            if max_steps is not None and state.step >= max_steps:
                state.termination = "max_steps"
                break
            report = self.step(end_time)
            if callback is not None:
                callback(report)
            if self.is_steady(report, steady_tolerance):
                state.termination = "steady_state"
                break
        return state


class EBDGSolver:

    def __init__(self, config: RunConfig | str | Path):
        try:
            current_version = version("ebdg")
        except PackageNotFoundError:
            current_version = "unknown"

        self.config: RunConfig = config if isinstance(config, RunConfig) else validate_configuration(config)
        self.output_dir: Path = (Path.cwd() / self.config.output.output_directory).resolve()
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger: logging.Logger = self._setup_logger()

        self.logger.debug(f"Running on Python {sys.version} on {sys.platform}")
        self.logger.debug(f"Running with ebdg version {current_version} ")
        self.logger.debug("-" * 60)

        self.logger.info(f"Initializing EBDG solver for '{self.config.metadata.project_name}'")
        self.logger.info(f"Created output directory: {self.output_dir}")

        self.store = OutputManager(self.output_dir, self.config.output.formats, self.logger)
        self.gas = GasModel(gamma=self.config.gas.gamma, s_ref=self.config.s_ref)
        self.case: CaseSpec | None = None
        self.simulation: Simulation | None = None
        self.results: dict = {}
        self._timings: dict[str, float] = {}
        self._last_step: StepReport | None = None

    def _setup_logger(self) -> logging.Logger:
        logger = logging.getLogger("ebdg_solver")
        logger.setLevel(logging.DEBUG)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)

        # File Handler
        log_file = self.output_dir / "run.log"
        self._file_handler = file_handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(name)s - %(message)s')
        file_handler.setFormatter(file_formatter)

        # Queue for Multiprocessing logging
        self.log_queue = multiprocessing.Manager().Queue()
        self.log_listener = QueueListener(self.log_queue, file_handler, respect_handler_level=True)
        self.log_listener.start()
        self._closed = False

        queue_handler = QueueHandler(self.log_queue)
        queue_handler.setLevel(logging.DEBUG)
        logger.addHandler(queue_handler)

        # Console Handler
        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging.INFO)
        console_formatter = logging.Formatter('%(message)s')
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)

        return logger

    def close(self):
        if self._closed:
            return
        self._closed = True
        self.log_listener.stop()
        self._file_handler.close()

    @property
    def workers(self) -> int:
        if not self.config.processing.enable_parallel_processing:
            return 1
        return resolve_worker_count(self.config.processing.max_workers)

    def _fix_tqdm_handlers(self):
        # Fix for tqdm not preserving logging level
        for handler in self.logger.handlers:
            try:
                if isinstance(handler, _TqdmLoggingHandler):
                    handler.setLevel(logging.INFO)
            except TypeError:
                if handler.level == logging.NOTSET:
                    handler.setLevel(logging.INFO)

    def _timed(self, phase: str, start: float):
        self._timings[phase] = self._timings.get(phase, 0.0) + time.perf_counter() - start
        self.logger.debug(f"Phase '{phase}' took {time.perf_counter() - start:.3f} s")

    # Setup
    def _build_case(self) -> CaseSpec:
        setup = self.config.setup
        h = setup.h if setup.h is not None else DEFAULT_H[setup.case]
        return CaseSpec(name=setup.case, h=h, gas=self.gas, mach=setup.mach, end_time=setup.end_time,
                        element=setup.element, level=setup.level)

    def _build_simulation(self) -> Simulation:
        setup = self.config.setup
        if setup is None:
            raise ValueError("The configuration has no 'setup' section; nothing to run.")
        start = time.perf_counter()
        if setup.mode == "case":
            self.case = self._build_case()
            self.logger.info(f"Case: {self.case.name}, h={self.case.h:.6g}, end time {self.case.end_time:.6g}")
            mesh = cases.build_mesh(self.case, self.logger)
            boundary_conditions = cases.boundary_conditions(self.case)
            initializer = partial(cases.initialize, self.case, logger=self.logger)
        else:
            self.logger.info(f"Mesh: {setup.mesh_path}, end time {setup.end_time:.6g}")
            mesh = load_gmsh(setup.mesh_path, logger=self.logger)
            boundary_conditions = {
                name: BoundaryCondition(spec.kind, state=None if spec.state is None else self._conserved(spec.state))
                for name, spec in setup.boundaries.items()}
            initializer = partial(_constant_solution, self._conserved(setup.initial_state))
        self._timed("mesh", start)

        start = time.perf_counter()
        simulation = Simulation.build(mesh, boundary_conditions, self.gas, self.config.discretization,
                                      self.config.limiter, initializer,
                                      check_conservation=self.config.run.check_conservation, logger=self.logger)
        self._timed("setup", start)
        self.logger.info(f"{mesh.num_elements} {mesh.shape} elements, p={self.config.discretization.p}, "
                         f"scheme {simulation.scheme.kind}, CFL {simulation.cfl:.6f}")
        return simulation

    def _conserved(self, spec) -> np.ndarray:
        return conservative_from_primitive(spec.rho, np.asarray(spec.velocity, dtype=float), spec.pressure, self.gas)

    @property
    def end_time(self) -> float:
        return self.case.end_time if self.case is not None else self.config.setup.end_time

    # Run
    def run(self) -> RunState:
        try:
            self.logger.info("=" * 60)
            self.logger.info("Starting EBDG run")
            self.logger.info("=" * 60)

            self.logger.debug(f"Discretization: {self.config.discretization.model_dump()}")
            self.logger.debug(f"Limiter: {self.config.limiter.model_dump()}")
            self.logger.debug(f"Parallel processing: {self.config.processing.enable_parallel_processing}")

            self.simulation = simulation = self._build_simulation()
            state = simulation.state
            self.initial_min_entropy = self._min_point_entropy(state.solution.coeffs)
            self.initial_totals = conserved_totals(state.solution.coeffs, simulation.geometry)
            self._record_summary(None)

            self.logger.info("-" * 60)
            start = time.perf_counter()
            with tqdm(total=self.end_time, unit="t", desc="Time Integration") as pbar, logging_redirect_tqdm(
                    loggers=[self.logger]):
                self._fix_tqdm_handlers()

                def on_step(report: StepReport):
                    pbar.update(report.dt)
                    self._after_step(report)

                try:
                    simulation.run_to(self.end_time, self.config.run.max_steps, self.config.run.steady_tolerance,
                                      callback=on_step)
                except NUMERICAL_ERRORS as e:
                    raise self._fatal(e) from e
                pbar.close()
            self._timed("time integration", start)

            self.logger.info("-" * 60)
            self.logger.info(f"Stopped at t={state.time:.6g} after {state.step} steps ({state.termination})")
            self._finish()

            self.logger.info("=" * 60)
            self.logger.info("Run completed successfully")
            self.logger.info("=" * 60)
            return state

        except Exception as e:
            self.logger.error("=" * 60)
            self.logger.error(f"Error occurred during run: {e}")
            self.logger.exception("Full traceback:")
            self.logger.error("=" * 60)
            raise
        finally:
            self.close()

    def _min_point_entropy(self, coeffs: np.ndarray) -> float:
        return float(np.min(self.simulation.limiter.point_entropy(coeffs)))

    def _after_step(self, report: StepReport):
        state = self.simulation.state
        self._last_step = report
        if report.mean_bound_violations:
            self.logger.warning(f"Step {state.step}: {report.mean_bound_violations} element means below their "
                                f"entropy bound")
        output = self.config.output
        if state.step % output.summary_interval == 0:
            self._record_summary(report)
        if output.field_interval and state.step % output.field_interval == 0:
            self._write_fields()

    def _record_summary(self, report: StepReport | None):
        simulation = self.simulation
        state = simulation.state
        coeffs = state.solution.coeffs
        points = simulation.limiter.point_values(coeffs)
        s_min = self._min_point_entropy(coeffs)
        if simulation.limiter.mode == "entropy" and s_min < self.initial_min_entropy - ENTROPY_FLOOR_TOL:
            self.logger.warning(f"Step {state.step}: minimum entropy {s_min:.10f} below the initial minimum "
                                f"{self.initial_min_entropy:.10f}")

        totals = conserved_totals(coeffs, simulation.geometry)
        row = {"step": state.step, "time": state.time, "dt": report.dt if report else 0.0}
        names = ["mass"] + [f"momentum_{axis}" for axis in "xy"[:len(totals) - 2]] + ["energy"]
        row.update({name: float(value) for name, value in zip(names, totals)})
        row.update({
            "min_entropy": s_min,
            "min_density": float(points[..., 0].min()),
            "min_pressure": float(pressure(points, self.gas).min()),
            "epsilon_active": report.limiter.active_count if report else 0,
            "max_epsilon": report.limiter.max_epsilon if report else 0.0,
            "refine_count": self._refine_count(report),
            "density_limited": report.limiter.density_count if report else 0,
            "mean_bound_violations": report.mean_bound_violations if report else 0,
            "residual_norm": report.residual_norm if report else 0.0,
        })
        self.store.record_summary(row)
        if report is not None and row["refine_count"]:
            self.logger.debug(f"Step {state.step}: {row['refine_count']} elements flagged for refinement")

    def _refine_count(self, report: StepReport | None) -> int:
        if report is None:
            return 0
        return int(np.count_nonzero(report.limiter.epsilon > self.config.limiter.epsilon_threshold))

    def _current_bounds_and_epsilon(self) -> tuple[np.ndarray | None, np.ndarray | None]:
        report = self.simulation.state.last_report
        if report is None:
            return None, None
        return report.bounds, report.epsilon

    def _write_fields(self):
        state = self.simulation.state
        bounds, epsilon = self._current_bounds_and_epsilon()
        self.store.write_fields(state.solution, self.simulation.geometry, state.step, self.gas, epsilon=epsilon,
                                bounds=bounds, epsilon_threshold=self.config.limiter.epsilon_threshold,
                                resolution=self.config.output.plot_resolution, time=state.time)

    def _fatal(self, error: Exception) -> FatalDiagnostic:
        state = self.simulation.state
        reason = getattr(error, "reason", None) or str(error)
        element = getattr(error, "element", None)
        stage = getattr(error, "stage", None)
        dump = self.store.write_state_dump(state.solution.coeffs, state.step, state.time, str(error),
                                           element=element, stage=stage)
        self.store.export_summary()
        self.logger.error(f"Fatal diagnostic at step {state.step + 1}: {error}")
        return FatalDiagnostic(reason, step=state.step + 1, time=state.time, element=element, stage=stage,
                               dump_path=dump)

    def _finish(self):
        start = time.perf_counter()
        simulation = self.simulation
        state = simulation.state
        if state.step % self.config.output.summary_interval != 0:
            self._record_summary(self._last_step)
        self.store.export_summary()
        self._write_fields()
        bounds, epsilon = self._current_bounds_and_epsilon()
        self.store.write_final_state(state.solution.coeffs, state.step, state.time, bounds, epsilon)

        totals = conserved_totals(state.solution.coeffs, simulation.geometry)
        drift = np.abs(totals - self.initial_totals) / np.maximum(np.abs(self.initial_totals), 1e-300)
        self.results["relative_drift"] = drift.tolist()
        self.logger.info(f"Relative drift of conserved totals: {', '.join(f'{d:.3e}' for d in drift)}")

        if self.case is not None and (self.case.has_exact_solution or self.case.name == "cylinder"):
            errors = cases.error_norms(state.solution.coeffs, simulation.geometry, self.case, state.time)
            self.results["errors"] = errors
            self.store.export_table([{"field": k, "error": v} for k, v in errors.items()], "errors")
            for name, value in errors.items():
                self.logger.info(f"L2 error ({name}): {value:.6e}")
        self._timed("output", start)
        self._export_readme()

    # Tables
    def cfl_table(self, shapes: list[str], orders: list[int]) -> list[dict]:
        try:
            entries = [(shape, p) for shape in shapes for p in orders]
            interpolation = self.config.discretization.interpolation
            self.logger.info(f"Computing {len(entries)} CFL entries ({interpolation} surface states)")
            func = partial(_cfl_entry, interpolation=interpolation)
            rows = self._map(func, entries, "CFL Table", unit="entry")
            self.store.export_table(rows, "cfl_table")
            for row in rows:
                self.logger.info(f"{row['shape']:>8} p={row['p']}: {row['cfl']:.6f}")
            return rows
        finally:
            self.close()

    def convergence_study(self, levels: list[float]) -> list[dict]:
        try:
            setup = self.config.setup
            if setup is None or setup.mode != "case":
                raise ValueError("A convergence study needs a built-in case in the 'setup' section.")
            case = self._build_case()
            p = self.config.discretization.p
            self.logger.info(f"Convergence study of {case.name}, p={p}, scheme "
                             f"{self.config.discretization.scheme}, {len(levels)} levels")
            func = partial(_convergence_level, discretization=self.config.discretization,
                           limiter=self.config.limiter)
            rows = cases.convergence_study(case, p, levels, func,
                                           mapper=lambda f, xs: self._map(f, list(xs), "Convergence", "level"))
            self.store.export_table(rows, "convergence")
            self.logger.info(f"{'h':>12} {'error':>14} {'rate':>8}")
            for row in rows:
                rate = "-" if row["rate"] is None else f"{row['rate']:.3f}"
                self.logger.info(f"{row['h']:>12.6g} {row['error']:>14.4e} {rate:>8}")
            return rows
        finally:
            self.close()

    def _map(self, func, items: list, desc: str, unit: str) -> list:
        """Ordered results of ``func`` over ``items``, in a worker pool when more than one worker is allowed."""
        workers = min(self.workers, len(items))
        results = []
        with tqdm(total=len(items), unit=unit, desc=desc) as pbar, logging_redirect_tqdm(loggers=[self.logger]):
            self._fix_tqdm_handlers()
            if workers <= 1:
                for item in items:
                    results.append(func(item, logger=self.logger))
                    pbar.update()
                return results

            chunksize = calculate_chunksize(len(items), workers)
            self.logger.debug(f"Worker pool with {workers} workers, chunksize {chunksize}")
            with Pool(processes=workers, initializer=_worker_init, initargs=(self.log_queue,)) as pool:
                try:
                    for result in pool.imap(func, items, chunksize=chunksize):
                        results.append(result)
                        pbar.update()
                except KeyboardInterrupt:
                    self.logger.warning("KeyboardInterrupt received - terminating worker pool")
                    pool.terminate()
                    pool.join()
                    raise
        return results

    def _export_readme(self) -> None:
        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        state = self.simulation.state
        config = self.config
        readme_path = self.output_dir / "README.md"
        with open(readme_path, 'w', encoding='utf-8') as f:
            f.write(f"# {config.metadata.project_name}\n\n")
            if config.metadata.description:
                f.write(f"{config.metadata.description}\n\n")

            f.write("## Setup\n\n")
            if self.case is not None:
                f.write(f"**Case:** {self.case.name}\n\n")
                f.write(f"**Element Size:** {self.case.h:.6g}\n\n")
                if self.case.name == "shock1d":
                    f.write(f"**Shock Mach Number:** {self.case.mach:g}\n\n")
            else:
                f.write(f"**Mesh:** `{config.setup.mesh_path}`\n\n")
            mesh = self.simulation.geometry.mesh
            f.write(f"**Elements:** {mesh.num_elements:,} ({mesh.element_type})\n\n")
            f.write(f"**Gas:** gamma = {self.gas.gamma:g}, s_ref = {self.gas.s_ref:g}\n\n")

            f.write("## Discretization\n\n")
            f.write(f"- Polynomial order: {config.discretization.p}\n")
            f.write(f"- Time integration: {self.simulation.scheme.kind}\n")
            f.write(f"- CFL ({config.discretization.cfl_route}, {config.discretization.interpolation}): "
                    f"{self.simulation.cfl:.6f}, safety {config.discretization.safety:g}\n")
            f.write(f"- Limiter: {config.limiter.mode} ({config.limiter.strategy} bounds)\n\n")

            f.write("## Result\n\n")
            f.write(f"**Final Time:** {state.time:.10g}\n\n")
            f.write(f"**Steps:** {state.step:,}\n\n")
            f.write(f"**Termination:** {state.termination}\n\n")
            limited_steps = sum(1 for _, active, _ in state.limiter_history if active)
            f.write(f"**Steps with Entropy Limiting:** {limited_steps:,}\n\n")
            drift = self.results.get("relative_drift", [])
            f.write(f"**Relative Drift of Conserved Totals:** {', '.join(f'{d:.3e}' for d in drift)}\n\n")
            for name, value in self.results.get("errors", {}).items():
                f.write(f"**L2 Error ({name}):** {value:.6e}\n\n")

            f.write("## Timing\n\n")
            for phase, seconds in self._timings.items():
                f.write(f"- {phase}: {seconds:.3f} s\n")

            f.write("\n## Files\n\n")
            f.write("- `run.log` - full log of the run\n")
            for fmt in sorted(config.output.formats):
                f.write(f"- `summary.{fmt}` - per-step diagnostics\n")
            f.write("- `fields_*.vtk` - legacy VTK fields\n")
            f.write("- `final_state.npz` - final coefficients, bounds and limiter parameters\n")
            if "errors" in self.results:
                f.write("- `errors.csv` - L2 errors against the exact solution\n")
            f.write(f"\n*Generated {timestamp}*\n")
        self.logger.debug(f"Wrote run report to {readme_path}")
