"""Reader for Gmsh MSH 2.2 ASCII files."""
import logging
import shlex
from pathlib import Path

import numpy as np

from ebdg.errors import MeshParseError, UnsupportedElementError
from ebdg.mesh.geometry import GEOMETRIC_ELEMENTS, ElementGeometry, Mesh, build_connectivity
from ebdg.numerics.basis import reference_element

# Gmsh element type codes; boundary types map to their node count
GMSH_DOMAIN_TYPES = {2: "tri3", 3: "quad4", 9: "tri6", 10: "quad9", 21: "tri10", 36: "quad16"}
GMSH_BOUNDARY_TYPES = {1: 2, 8: 3, 26: 4}
GMSH_POINT_TYPE = 15


class _Lines:

    def __init__(self, text: str):
        self._lines = text.splitlines()
        self.position = 0

    @property
    def line_number(self) -> int:
        return self.position

    def next(self, expected: str) -> str:
        while self.position < len(self._lines):
            line = self._lines[self.position].strip()
            self.position += 1
            if line:
                return line
        raise MeshParseError(f"Unexpected end of file while reading {expected}", self.position)

    def at_end(self) -> bool:
        return all(not line.strip() for line in self._lines[self.position:])


def _parse_ints(line: str, lines: _Lines, what: str) -> list[int]:
    try:
        return [int(v) for v in line.split()]
    except ValueError:
        raise MeshParseError(f"Malformed {what}: '{line}'", lines.line_number) from None


def _expect(lines: _Lines, marker: str):
    line = lines.next(marker)
    if line != marker:
        raise MeshParseError(f"Expected '{marker}', found '{line}'", lines.line_number)


def _read_format(lines: _Lines):
    line = lines.next("mesh format")
    parts = line.split()
    if len(parts) != 3 or not parts[0].startswith("2."):
        raise MeshParseError(f"Only MSH 2.x ASCII is supported, found '{line}'", lines.line_number)
    if parts[1] != "0":
        raise MeshParseError("Binary MSH files are not supported", lines.line_number)
    _expect(lines, "$EndMeshFormat")


def _read_physical_names(lines: _Lines) -> dict[int, str]:
    count = _parse_ints(lines.next("physical name count"), lines, "physical name count")[0]
    names = {}
    for _ in range(count):
        line = lines.next("physical name")
        try:
            dim, tag, name = shlex.split(line)
            names[int(tag)] = name
        except ValueError:
            raise MeshParseError(f"Malformed physical name: '{line}'", lines.line_number) from None
    _expect(lines, "$EndPhysicalNames")
    return names


def _read_nodes(lines: _Lines) -> tuple[dict[int, int], np.ndarray]:
    count = _parse_ints(lines.next("node count"), lines, "node count")[0]
    index, coords = {}, np.empty((count, 3))
    for i in range(count):
        line = lines.next("node")
        parts = line.split()
        if len(parts) != 4:
            raise MeshParseError(f"Malformed node: '{line}'", lines.line_number)
        try:
            index[int(parts[0])] = i
            coords[i] = [float(v) for v in parts[1:]]
        except ValueError:
            raise MeshParseError(f"Malformed node: '{line}'", lines.line_number) from None
    _expect(lines, "$EndNodes")
    return index, coords


def _read_elements(lines: _Lines, node_index: dict[int, int]):
    count = _parse_ints(lines.next("element count"), lines, "element count")[0]
    domain, boundary = [], []
    for _ in range(count):
        values = _parse_ints(lines.next("element"), lines, "element")
        if len(values) < 3:
            raise MeshParseError("Element record too short", lines.line_number)
        elem_id, elem_type, num_tags = values[:3]
        tags = values[3:3 + num_tags]
        node_ids = values[3 + num_tags:]
        try:
            nodes = [node_index[n] for n in node_ids]
        except KeyError as e:
            raise MeshParseError(f"Element {elem_id} references unknown node {e.args[0]}", lines.line_number) from None
        physical = tags[0] if tags else 0
        if elem_type in GMSH_DOMAIN_TYPES:
            expected = GEOMETRIC_ELEMENTS[GMSH_DOMAIN_TYPES[elem_type]].num_nodes
            if len(nodes) != expected:
                raise MeshParseError(f"Element {elem_id} has {len(nodes)} nodes, expected {expected}",
                                     lines.line_number)
            domain.append((elem_id, GMSH_DOMAIN_TYPES[elem_type], nodes))
        elif elem_type in GMSH_BOUNDARY_TYPES:
            if len(nodes) != GMSH_BOUNDARY_TYPES[elem_type]:
                raise MeshParseError(f"Boundary element {elem_id} has {len(nodes)} nodes", lines.line_number)
            boundary.append((physical, nodes))
        elif elem_type != GMSH_POINT_TYPE:
            raise UnsupportedElementError(f"Unsupported Gmsh element type {elem_type} (element {elem_id})")
    _expect(lines, "$EndElements")
    return domain, boundary


def load_gmsh(path: str | Path, validate: bool = True, logger: logging.Logger = logging.getLogger(__name__)) -> Mesh:
    """
    Read a two-dimensional MSH 2.2 ASCII mesh.

    Boundary faces are tagged with the physical-group names of the boundary
    line elements that cover them.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Mesh file not found at {path}.")
    lines = _Lines(path.read_text(encoding="utf-8"))
    if lines.at_end():
        raise MeshParseError("Empty mesh file", 0)

    physical_names: dict[int, str] = {}
    node_index, coords = None, None
    domain, boundary = None, []
    seen_format = False
    while not lines.at_end():
        section = lines.next("section header")
        if section == "$MeshFormat":
            _read_format(lines)
            seen_format = True
        elif section == "$PhysicalNames":
            physical_names = _read_physical_names(lines)
        elif section == "$Nodes":
            node_index, coords = _read_nodes(lines)
        elif section == "$Elements":
            if node_index is None:
                raise MeshParseError("$Elements section before $Nodes", lines.line_number)
            domain, boundary = _read_elements(lines, node_index)
        elif section.startswith("$"):
            end = "$End" + section[1:]
            while lines.next(end) != end:
                pass
        else:
            raise MeshParseError(f"Unexpected content '{section}'", lines.line_number)

    if not seen_format:
        raise MeshParseError("Missing $MeshFormat section", lines.line_number)
    if node_index is None or domain is None:
        raise MeshParseError("Missing $Nodes or $Elements section", lines.line_number)
    if not domain:
        raise MeshParseError("No two-dimensional elements found", lines.line_number)

    types = {t for _, t, _ in domain}
    if len(types) > 1:
        raise UnsupportedElementError(f"Mixed element types are not supported: {sorted(types)}")
    element_type = types.pop()

    mesh = Mesh(element_type=element_type, nodes=coords[:, :2].copy(),
                elements=np.array([n for _, _, n in domain], dtype=int),
                element_ids=np.array([i for i, _, _ in domain], dtype=int))
    boundary_tags = {tuple(sorted(nodes[:2])): physical_names.get(tag, str(tag)) for tag, nodes in boundary}
    build_connectivity(mesh, boundary_tags, logger=logger)
    logger.info(f"Loaded {mesh.num_elements} {element_type} elements from {path}")

    if validate:
        ElementGeometry(mesh, reference_element(mesh.shape, 1), logger=logger)
    return mesh
