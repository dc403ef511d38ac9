import logging
from pathlib import Path

import numpy as np
import polars as pl
import yaml

from ebdg.mesh.geometry import ElementGeometry, map_points
from ebdg.numerics.dg import DgSolution, element_averages
from ebdg.numerics.euler import GasModel, pressure
from ebdg.numerics.quadrature import REFERENCE_VERTICES

VTK_CELL_TYPES = {"line": 3, "triangle": 5, "quad": 9}
SUMMARY_FILE = "summary"
FIELDS_PREFIX = "fields"


def format_float(value: float) -> str:
    return format(value, ".17g")


def _unchecked_primitives(U: np.ndarray, gas: GasModel) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Density, velocity, pressure and entropy; inadmissible states give NaN entropy instead of raising."""
    rho = U[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        velocity = U[..., 1:-1] / rho[..., np.newaxis]
        p = pressure(U, gas)
        s = np.log(p) - gas.gamma * np.log(rho) + gas.s_ref
    return rho, velocity, p, s


def plotting_lattice(shape: str, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Reference points of the sub-cell lattice and the connectivity of its cells.

    Returns: points ``(N_l, d)`` and cells ``(N_c, k)`` with the vertex count of the base shape
    """
    if resolution < 2:
        raise ValueError(f"Plot resolution must be at least 2, got {resolution}.")
    n = resolution
    if shape == "line":
        points = np.linspace(-1.0, 1.0, n)[:, np.newaxis]
        cells = np.array([[i, i + 1] for i in range(n - 1)])
        return points, cells
    if shape == "quad":
        line = np.linspace(-1.0, 1.0, n)
        points = np.array([[line[i], line[j]] for j in range(n) for i in range(n)])
        cells = np.array([[i + j * n, i + 1 + j * n, i + 1 + (j + 1) * n, i + (j + 1) * n]
                          for j in range(n - 1) for i in range(n - 1)])
        return points, cells
    if shape == "triangle":
        index = {}
        coords = []
        for j in range(n):
            for i in range(n - j):
                index[(i, j)] = len(coords)
                coords.append((i / (n - 1), j / (n - 1)))
        cells = []
        for j in range(n - 1):
            for i in range(n - 1 - j):
                cells.append([index[(i, j)], index[(i + 1, j)], index[(i, j + 1)]])
                if i + j <= n - 3:
                    cells.append([index[(i + 1, j)], index[(i + 1, j + 1)], index[(i, j + 1)]])
        vertices = REFERENCE_VERTICES["triangle"]
        points = vertices[0] + np.array(coords) @ (vertices[1:] - vertices[0])
        return points, np.array(cells)
    raise ValueError(f"Unsupported element shape '{shape}'.")


def write_fields(sol: DgSolution | np.ndarray, geometry: ElementGeometry, path: str | Path, gas: GasModel,
                 epsilon: np.ndarray | None = None, bounds: np.ndarray | None = None,
                 epsilon_threshold: float = 1e-3, resolution: int | None = None, time: float | None = None) -> Path:
    """Legacy ASCII VTK of the solution with element means as cell data and lattice samples as point data."""
    coeffs = sol.coeffs if isinstance(sol, DgSolution) else np.asarray(sol)
    mesh, ref = geometry.mesh, geometry.ref
    n_e = mesh.num_elements
    resolution = resolution or ref.p + 1
    lattice, cells = plotting_lattice(mesh.shape, max(2, resolution))
    n_l, n_c = len(lattice), len(cells)

    x, _, _ = map_points(mesh, lattice)
    point_states = np.einsum("lm,emv->elv", ref.eval_basis(lattice).reshape(n_l, ref.n_basis), coeffs)
    rho_pt, _, p_pt, s_pt = _unchecked_primitives(point_states, gas)

    means = element_averages(coeffs, geometry)
    rho, velocity, p, s = _unchecked_primitives(means, gas)
    with np.errstate(divide="ignore", invalid="ignore"):
        mach = np.linalg.norm(velocity, axis=-1) / np.sqrt(gas.gamma * p / rho)
    epsilon = np.zeros(n_e) if epsilon is None else np.asarray(epsilon, dtype=float)
    bounds = np.full(n_e, np.nan) if bounds is None else np.asarray(bounds, dtype=float)
    flags = (epsilon > epsilon_threshold).astype(float)

    coords = np.zeros((n_e * n_l, 3))
    coords[:, :mesh.n_dims] = x.reshape(-1, mesh.n_dims)
    connectivity = (cells[np.newaxis] + (np.arange(n_e) * n_l)[:, np.newaxis, np.newaxis]).reshape(-1, cells.shape[1])
    vel3 = np.zeros((n_e, 3))
    vel3[:, :mesh.n_dims] = velocity

    def per_cell(values: np.ndarray) -> np.ndarray:
        return np.repeat(values, n_c, axis=0)

    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as f:
            f.write("# vtk DataFile Version 3.0\n")
            f.write(f"ebdg solution p={ref.p}" + (f" t={format_float(time)}" if time is not None else "") + "\n")
            f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            f.write(f"POINTS {len(coords)} double\n")
            for row in coords:
                f.write(" ".join(format_float(c) for c in row) + "\n")
            f.write(f"CELLS {len(connectivity)} {connectivity.size + len(connectivity)}\n")
            for row in connectivity:
                f.write(f"{len(row)} " + " ".join(str(i) for i in row) + "\n")
            f.write(f"CELL_TYPES {len(connectivity)}\n")
            f.write(f"{VTK_CELL_TYPES[mesh.shape]}\n" * len(connectivity))

            f.write(f"CELL_DATA {len(connectivity)}\n")
            for name, values in (("density", rho), ("pressure", p), ("mach", mach), ("entropy", s),
                                 ("epsilon", epsilon), ("entropy_bound", bounds), ("refine", flags)):
                _write_scalars(f, name, per_cell(values))
            f.write("VECTORS velocity double\n")
            for row in per_cell(vel3):
                f.write(" ".join(format_float(c) for c in row) + "\n")

            f.write(f"POINT_DATA {len(coords)}\n")
            for name, values in (("point_density", rho_pt), ("point_pressure", p_pt), ("point_entropy", s_pt)):
                _write_scalars(f, name, values.ravel())
    except OSError as e:
        raise OSError(f"Failed to write fields to {path}: {e}") from e
    return path


def _write_scalars(f, name: str, values: np.ndarray):
    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    f.write("\n".join(format_float(v) for v in values) + "\n")


class OutputManager:

    def __init__(self, output_dir: str | Path, formats: set[str] | None = None,
                 logger: logging.Logger = logging.getLogger(__name__)):
        self.output_dir = Path(output_dir)
        self.formats = {"csv"} if formats is None else set(formats)
        self.logger = logger
        self.summary_rows: list[dict] = []

    def record_summary(self, row: dict):
        self.summary_rows.append(dict(row))

    def _export_to_formats(self, df: pl.DataFrame, file_base_name: str, formats: set[str]) -> list[Path]:
        written = []
        try:
            if "csv" in formats:
                csv_path = self.output_dir / f"{file_base_name}.csv"
                _as_exact_text(df).write_csv(csv_path)
                written.append(csv_path)
                self.logger.debug(f"Successfully exported {file_base_name} to {csv_path} as csv.")

            if "parquet" in formats:
                parquet_path = self.output_dir / f"{file_base_name}.parquet"
                df.write_parquet(
                    parquet_path,
                    compression='snappy',
                    statistics=True,
                    use_pyarrow=False
                )
                written.append(parquet_path)
                self.logger.debug(f"Successfully exported {file_base_name} to {parquet_path} as parquet.")

        except Exception as e:
            self.logger.error(f"Error exporting {file_base_name}: {str(e)}")
            raise e
        return written

    def export_summary(self) -> list[Path]:
        if not self.summary_rows:
            self.logger.warning("No summary rows recorded, skipping summary export")
            return []
        df = pl.DataFrame(self.summary_rows, infer_schema_length=None)
        return self._export_to_formats(df, SUMMARY_FILE, self.formats)

    def export_table(self, rows: list[dict], file_base_name: str, formats: set[str] | None = None) -> list[Path]:
        return self._export_to_formats(pl.DataFrame(rows, infer_schema_length=None), file_base_name, formats or {"csv"})

    def write_fields(self, sol: DgSolution | np.ndarray, geometry: ElementGeometry, step: int, gas: GasModel,
                     **kwargs) -> Path:
        path = write_fields(sol, geometry, self.output_dir / f"{FIELDS_PREFIX}_{step:06d}.vtk", gas, **kwargs)
        self.logger.debug(f"Wrote fields of step {step} to {path.name}")
        return path

    def write_final_state(self, coeffs: np.ndarray, step: int, time: float, bounds: np.ndarray | None = None,
                          epsilon: np.ndarray | None = None) -> Path:
        path = self.output_dir / "final_state.npz"
        n_e = coeffs.shape[0]
        np.savez(path, coeffs=coeffs, step=step, time=time,
                 bounds=np.full(n_e, np.nan) if bounds is None else bounds,
                 epsilon=np.zeros(n_e) if epsilon is None else epsilon)
        self.logger.debug(f"Wrote final state to {path.name}")
        return path

    def write_state_dump(self, coeffs: np.ndarray, step: int, time: float, reason: str,
                         element: int | None = None, stage: int | None = None) -> Path:
        """Coefficients of all elements plus a YAML sidecar describing the failure."""
        path = self.output_dir / "state_dump.npz"
        arrays = {"coeffs": coeffs}
        if element is not None and 0 <= element < coeffs.shape[0]:
            arrays["element_coeffs"] = coeffs[element]
        np.savez(path, **arrays)
        with (self.output_dir / "state_dump.yaml").open("w", encoding="utf-8") as f:
            yaml.safe_dump({"step": int(step), "time": float(time), "stage": stage, "element": element,
                            "reason": reason, "coefficients": path.name}, f, sort_keys=False)
        self.logger.debug(f"Wrote state dump to {path}")
        return path


def _as_exact_text(df: pl.DataFrame) -> pl.DataFrame:
    """Float columns as 17-digit strings."""
    floats = [name for name, dtype in df.schema.items() if dtype in (pl.Float64, pl.Float32)]
    if not floats:
        return df
    return df.with_columns([pl.col(name).map_elements(format_float, return_dtype=pl.String) for name in floats])
