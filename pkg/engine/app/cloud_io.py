"""Text point-cloud formats: PCD v0.7 ASCII, PLY ASCII 1.0, plain xyz, and label files."""

import csv
import enum
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from app.errors import ErrorCode, ShapeError
from app.models import InadField, LabelMask, LikelihoodField, PointCloud, SurfaceClass

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

XYZ_FIELDS = ("x", "y", "z")
NORMAL_FIELDS = ("normal_x", "normal_y", "normal_z")
PLY_NORMAL_FIELDS = ("nx", "ny", "nz")

GREY = (128, 128, 128)
LABEL_COLORS = {
    SurfaceClass.PLANAR.value: (0, 200, 0),
    SurfaceClass.CURVED.value: (0, 0, 255),
    SurfaceClass.EDGE.value: (255, 0, 0),
    SurfaceClass.UNLABELED.value: GREY,
}


class CloudFormat(str, enum.Enum):
    PCD = "pcd-ascii"
    PLY = "ply-ascii"
    XYZ = "xyz"


_SUFFIXES = {".pcd": CloudFormat.PCD, ".ply": CloudFormat.PLY, ".xyz": CloudFormat.XYZ}


def infer_format(path: PathLike) -> CloudFormat:
    suffix = Path(path).suffix.lower()
    if suffix not in _SUFFIXES:
        raise ShapeError(ErrorCode.UNSUPPORTED_FORMAT, f"cannot infer cloud format from '{suffix}'")
    return _SUFFIXES[suffix]


def _read_lines(path: PathLike) -> List[str]:
    try:
        with open(path, "r", encoding="ascii", errors="strict") as fh:
            return fh.read().splitlines()
    except UnicodeDecodeError as exc:
        raise ShapeError(ErrorCode.UNSUPPORTED_FORMAT, f"{path}: not an ASCII file (binary data?)") from exc
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc


def _write_text(path: PathLike, text: str) -> None:
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc


def _parse_records(
    lines: Iterable[Tuple[int, str]], width: int
) -> Tuple[np.ndarray, List[int]]:
    rows, line_numbers = [], []
    for lineno, line in lines:
        fields = line.split()
        if not fields:
            continue
        if len(fields) != width:
            raise ShapeError(ErrorCode.PARSE_ERROR, f"line {lineno}: expected {width} values, got {len(fields)}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise ShapeError(ErrorCode.PARSE_ERROR, f"line {lineno}: {exc}") from exc
        line_numbers.append(lineno)
    data = np.array(rows, dtype=np.float64).reshape(-1, width)
    return data, line_numbers


def _assemble(
    data: np.ndarray,
    line_numbers: List[int],
    xyz_cols: List[int],
    normal_cols: Optional[List[int]],
    drop_nan: bool,
) -> PointCloud:
    points = data[:, xyz_cols]
    if drop_nan:
        no_return = np.all(np.isnan(points), axis=1)
        if no_return.any():
            logger.warning("Dropped %d records with NaN coordinates", int(no_return.sum()))
            keep = ~no_return
            data, points = data[keep], points[keep]
            line_numbers = [ln for ln, k in zip(line_numbers, keep) if k]
    bad = ~np.all(np.isfinite(points), axis=1)
    if bad.any():
        first = int(np.argmax(bad))
        raise ShapeError(ErrorCode.NON_FINITE, f"line {line_numbers[first]}: non-finite coordinate")

    if normal_cols is None:
        return PointCloud(points=points)

    normals = data[:, normal_cols]
    if np.isinf(normals).any():
        first = int(np.argmax(np.isinf(normals).any(axis=1)))
        raise ShapeError(ErrorCode.NON_FINITE, f"line {line_numbers[first]}: infinite normal component")
    norms = np.linalg.norm(normals, axis=1)
    valid = np.isfinite(norms) & (norms > 0)
    unit = np.zeros_like(normals)
    unit[valid] = normals[valid] / norms[valid, None]
    unit[~valid] = np.nan
    return PointCloud(points=points, normals=unit, valid=valid)


# ---------- PCD ----------

def _load_pcd(lines: List[str], drop_nan: bool) -> PointCloud:
    header = {}
    data_start = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, _, rest = stripped.partition(" ")
        header[key.upper()] = rest.split()
        if key.upper() == "DATA":
            data_start = i + 1
            break
    if data_start is None:
        raise ShapeError(ErrorCode.PARSE_ERROR, "PCD header has no DATA line")
    data_kind = header["DATA"][0].lower() if header["DATA"] else ""
    if data_kind != "ascii":
        raise ShapeError(ErrorCode.UNSUPPORTED_FORMAT, f"PCD DATA '{data_kind}' is not supported, only ascii")

    fields = header.get("FIELDS")
    if not fields or not set(XYZ_FIELDS) <= set(fields):
        raise ShapeError(ErrorCode.PARSE_ERROR, "PCD FIELDS must contain x y z")
    counts = header.get("COUNT", ["1"] * len(fields))
    if any(c != "1" for c in counts):
        raise ShapeError(ErrorCode.UNSUPPORTED_FIELDS, "PCD fields with COUNT > 1 are not supported")
    try:
        declared = int(header["POINTS"][0]) if "POINTS" in header else None
    except (ValueError, IndexError) as exc:
        raise ShapeError(ErrorCode.PARSE_ERROR, "PCD POINTS is not an integer") from exc

    body = ((i + 1, line) for i, line in enumerate(lines) if i >= data_start)
    data, line_numbers = _parse_records(body, len(fields))
    if declared is not None and declared != len(data):
        raise ShapeError(ErrorCode.PARSE_ERROR, f"PCD header declares {declared} points, found {len(data)}")

    xyz_cols = [fields.index(f) for f in XYZ_FIELDS]
    normal_cols = [fields.index(f) for f in NORMAL_FIELDS] if set(NORMAL_FIELDS) <= set(fields) else None
    return _assemble(data, line_numbers, xyz_cols, normal_cols, drop_nan)


def _format_rows(cloud: PointCloud) -> List[str]:
    rows = []
    for i, p in enumerate(cloud.points):
        row = "%.6f %.6f %.6f" % tuple(p)
        if cloud.normals is not None:
            n = cloud.normals[i] if cloud.valid[i] else (np.nan, np.nan, np.nan)
            row += " %.9f %.9f %.9f" % tuple(n)
        rows.append(row)
    return rows


def _save_pcd(cloud: PointCloud) -> str:
    fields = XYZ_FIELDS + (NORMAL_FIELDS if cloud.has_normals else ())
    n = len(cloud)
    header = [
        "# .PCD v0.7 - Point Cloud Data file format",
        "VERSION 0.7",
        "FIELDS " + " ".join(fields),
        "SIZE " + " ".join("4" for _ in fields),
        "TYPE " + " ".join("F" for _ in fields),
        "COUNT " + " ".join("1" for _ in fields),
        f"WIDTH {n}",
        "HEIGHT 1",
        "VIEWPOINT 0 0 0 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    return "\n".join(header + _format_rows(cloud)) + "\n"


# ---------- PLY ----------

def _load_ply(lines: List[str], drop_nan: bool) -> PointCloud:
    if not lines or lines[0].strip() != "ply":
        raise ShapeError(ErrorCode.PARSE_ERROR, "line 1: missing 'ply' magic")
    elements: List[Tuple[str, int, List[str]]] = []
    header_end = None
    for i, line in enumerate(lines[1:], start=1):
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ShapeError(ErrorCode.UNSUPPORTED_FORMAT, f"PLY format '{' '.join(tokens[1:])}' is not supported")
        elif tokens[0] == "element":
            try:
                elements.append((tokens[1], int(tokens[2]), []))
            except (IndexError, ValueError) as exc:
                raise ShapeError(ErrorCode.PARSE_ERROR, f"line {i + 1}: malformed element line") from exc
        elif tokens[0] == "property":
            if not elements:
                raise ShapeError(ErrorCode.PARSE_ERROR, f"line {i + 1}: property outside of an element")
            elements[-1][2].append(tokens[-1] if tokens[1] != "list" else "__list__")
        elif tokens[0] == "end_header":
            header_end = i + 1
            break
        else:
            raise ShapeError(ErrorCode.PARSE_ERROR, f"line {i + 1}: unexpected header keyword '{tokens[0]}'")
    if header_end is None:
        raise ShapeError(ErrorCode.PARSE_ERROR, "PLY header has no end_header")

    body = [(i + 1, line) for i, line in enumerate(lines) if i >= header_end and line.strip()]
    cursor = 0
    for name, count, props in elements:
        chunk = body[cursor:cursor + count]
        cursor += count
        if name != "vertex":
            continue
        if "__list__" in props:
            raise ShapeError(ErrorCode.UNSUPPORTED_FIELDS, "list properties on vertices are not supported")
        if not set(XYZ_FIELDS) <= set(props):
            raise ShapeError(ErrorCode.PARSE_ERROR, "PLY vertex element must have x y z")
        if len(chunk) != count:
            raise ShapeError(ErrorCode.PARSE_ERROR, f"PLY header declares {count} vertices, found {len(chunk)}")
        data, line_numbers = _parse_records(chunk, len(props))
        xyz_cols = [props.index(f) for f in XYZ_FIELDS]
        normal_cols = [props.index(f) for f in PLY_NORMAL_FIELDS] if set(PLY_NORMAL_FIELDS) <= set(props) else None
        return _assemble(data, line_numbers, xyz_cols, normal_cols, drop_nan)
    raise ShapeError(ErrorCode.PARSE_ERROR, "PLY file has no vertex element")


def _ply_header(n: int, properties: List[str]) -> List[str]:
    return ["ply", "format ascii 1.0", f"element vertex {n}"] + properties + ["end_header"]


def _save_ply(cloud: PointCloud) -> str:
    properties = ["property float x", "property float y", "property float z"]
    if cloud.has_normals:
        properties += ["property float nx", "property float ny", "property float nz"]
    return "\n".join(_ply_header(len(cloud), properties) + _format_rows(cloud)) + "\n"


# ---------- XYZ ----------

def _load_xyz(lines: List[str], drop_nan: bool) -> PointCloud:
    data, line_numbers = _parse_records(((i + 1, line) for i, line in enumerate(lines)), 3)
    return _assemble(data, line_numbers, [0, 1, 2], None, drop_nan)


def _save_xyz(cloud: PointCloud) -> str:
    if cloud.has_normals:
        raise ShapeError(ErrorCode.UNSUPPORTED_FIELDS, "xyz format cannot store normals")
    return "\n".join(_format_rows(cloud)) + "\n"


_LOADERS = {CloudFormat.PCD: _load_pcd, CloudFormat.PLY: _load_ply, CloudFormat.XYZ: _load_xyz}
_SAVERS = {CloudFormat.PCD: _save_pcd, CloudFormat.PLY: _save_ply, CloudFormat.XYZ: _save_xyz}


# ---------- PUBLIC ----------

def load_cloud(path: PathLike, format: Optional[CloudFormat] = None, drop_nan: bool = False) -> PointCloud:
    fmt = CloudFormat(format) if format is not None else infer_format(path)
    cloud = _LOADERS[fmt](_read_lines(path), drop_nan)
    logger.info("Loaded %d points from %s (%s)", len(cloud), path, fmt.value)
    return cloud


def save_cloud(cloud: PointCloud, path: PathLike, format: Optional[CloudFormat] = None) -> None:
    cloud.require_points()
    fmt = CloudFormat(format) if format is not None else infer_format(path)
    _write_text(path, _SAVERS[fmt](cloud))


def load_labels(path: PathLike) -> LabelMask:
    values = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            values.append(int(token))
        except ValueError as exc:
            raise ShapeError(ErrorCode.PARSE_ERROR, f"line {lineno}: '{token}' is not an integer") from exc
    return LabelMask(labels=np.array(values, dtype=np.int64))


def save_labels(mask: LabelMask, path: PathLike) -> None:
    _write_text(path, "".join(f"{int(v)}\n" for v in mask.labels))


def likelihood_colors(field: LikelihoodField) -> np.ndarray:
    """Green for score 1 fading to blue for score 0; grey where invalid."""
    scores = np.nan_to_num(field.scores, nan=0.0)
    colors = np.zeros((len(field), 3), dtype=np.uint8)
    colors[:, 1] = np.rint(255 * scores).astype(np.uint8)
    colors[:, 2] = np.rint(255 * (1.0 - scores)).astype(np.uint8)
    colors[~field.valid] = GREY
    return colors


def label_colors(mask: LabelMask) -> np.ndarray:
    colors = np.empty((len(mask), 3), dtype=np.uint8)
    for label, rgb in LABEL_COLORS.items():
        colors[mask.labels == label] = rgb
    return colors


def save_colored_ply(cloud: PointCloud, colors: np.ndarray, path: PathLike) -> None:
    cloud.require_points()
    colors = np.asarray(colors, dtype=np.uint8)
    if len(colors) != len(cloud):
        raise ShapeError(ErrorCode.LENGTH_MISMATCH, f"{len(colors)} colors for {len(cloud)} points")
    properties = [
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
    ]
    rows = ["%.6f %.6f %.6f %d %d %d" % (*p, *c) for p, c in zip(cloud.points, colors)]
    _write_text(path, "\n".join(_ply_header(len(cloud), properties) + rows) + "\n")


def _write_csv(path: PathLike, header: List[str], rows: Iterable[list]) -> None:
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ShapeError(ErrorCode.IO_ERROR, f"{path}: {exc.strerror or exc}") from exc


def _fmt(value: float) -> str:
    return "nan" if np.isnan(value) else f"{value:.6f}"


def export_likelihood_csv(field: LikelihoodField, path: PathLike) -> None:
    rows = ([i, _fmt(s), int(v)] for i, (s, v) in enumerate(zip(field.scores, field.valid)))
    _write_csv(path, ["point_id", "score", "valid"], rows)


def export_inad_csv(field: InadField, path: PathLike) -> None:
    rows = (
        [i, _fmt(m), _fmt(s), int(n), int(v)]
        for i, (m, s, n, v) in enumerate(zip(field.mu, field.sigma, field.inliers, field.valid))
    )
    _write_csv(path, ["point_id", "mu", "sigma", "inliers", "valid"], rows)
