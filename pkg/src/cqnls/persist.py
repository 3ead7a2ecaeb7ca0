"""On-disk formats: CQF1 field files, key=value sidecars, CSV tables.

CQF1 layout (little endian):
  8 bytes   magic "CQNLSFD1"
  3 x u64   n1, n2, n3
  3 x f64   L1, L2, L3
  6 x f64   omega, k, mu, m, l, rho
  payload   n1*n2*n3 interleaved (re, im) f64 pairs, row-major, x3 fastest
  u64       CRC-64/XZ of the payload bytes
"""

import struct
from pathlib import Path

import numpy as np

from . import kernels
from .errors import FileFormatError
from .field import Field, ProblemParams
from .grid import GridSpec

MAGIC = b"CQNLSFD1"
_HEADER = struct.Struct("<3Q9d")


def write_field(path, field: Field, params: ProblemParams):
    g = field.grid
    payload = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    crc = kernels.crc64(payload)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(
            _HEADER.pack(
                g.n1, g.n2, g.n3, g.L1, g.L2, g.L3,
                params.omega, params.k, params.mu,
                params.m, params.l, params.rho,
            )
        )
        fh.write(payload)
        fh.write(struct.pack("<Q", crc))


def read_field(path):
    """Returns (Field, ProblemParams); raises FileFormatError when corrupt."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + _HEADER.size + 8:
        raise FileFormatError(f"{path}: truncated header")
    if raw[: len(MAGIC)] != MAGIC:
        raise FileFormatError(f"{path}: bad magic")
    off = len(MAGIC)
    n1, n2, n3, L1, L2, L3, omega, k, mu, m, l, rho = _HEADER.unpack_from(raw, off)
    off += _HEADER.size
    count = n1 * n2 * n3
    need = off + 16 * count + 8
    if len(raw) != need:
        raise FileFormatError(
            f"{path}: size {len(raw)} != expected {need} for {n1}x{n2}x{n3}"
        )
    payload = raw[off : off + 16 * count]
    (crc_stored,) = struct.unpack_from("<Q", raw, off + 16 * count)
    crc = kernels.crc64(payload)
    if crc != crc_stored:
        raise FileFormatError(
            f"{path}: CRC mismatch (stored {crc_stored:#x}, computed {crc:#x})"
        )
    grid = GridSpec(n1, n2, n3, L1, L2, L3)
    values = np.frombuffer(payload, dtype="<c16").reshape(grid.shape)
    params = ProblemParams(omega=omega, k=k, mu=mu, m=m, l=l, rho=rho)
    return Field(grid, values.copy()), params


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_sidecar(path, result, params: ProblemParams):
    """key=value record next to a field file; fixed key order."""
    rep = result.report
    rows = [
        ("classification", result.classification),
        ("energy", rep.energy),
        ("kinetic", rep.kinetic),
        ("trap", rep.trap),
        ("quartic", rep.quartic),
        ("sextic", rep.sextic),
        ("mass", rep.mass),
        ("angmom", rep.angmom),
        ("angmom_imag_residual", rep.angmom_imag_residual),
        ("sigma_dot", rep.sigma_dot),
        ("pohozaev", rep.pohozaev),
        ("lambda", result.lam),
        ("Omega", result.Omega),
        ("kkt_residual", result.kkt_residual),
        ("iterations", result.iterations),
        ("m", params.m),
        ("l", params.l),
        ("omega", params.omega),
        ("k", params.k),
        ("mu", params.mu),
        ("rho", params.rho),
    ]
    with open(path, "w", newline="\n") as fh:
        for key, val in rows:
            fh.write(f"{key}={_fmt(val)}\n")


def read_sidecar(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, val = line.partition("=")
        out[key] = val
    return out


def write_csv(path, header, rows):
    """RFC-4180 CSV: LF line endings, '.' decimal, %.17g floats."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_path_csv(path, path_result, p: ProblemParams):
    from .field import functionals

    rows = []
    for j, (node, tau) in enumerate(zip(path_result.nodes, path_result.taus)):
        rep = functionals(node, p)
        t = (tau - path_result.l1) / (1.0 - path_result.l1)
        rows.append(
            (j, t, tau, rep.energy, rep.sigma_dot,
             rep.mass - p.m, rep.angmom - p.l)
        )
    write_csv(
        path,
        ("node_index", "t", "tau", "energy", "sigma_dot", "mass_err", "angmom_err"),
        rows,
    )


def write_trajectory_csv(path, stats):
    rows = []
    dist = stats.dist_series if stats.dist_series else [float("nan")] * len(stats.times)
    for t, m_, e, l_, d in zip(
        stats.times, stats.mass_series, stats.energy_series,
        stats.angmom_series, dist,
    ):
        rows.append((t, m_, e, l_, d))
    write_csv(path, ("t", "mass", "energy", "angmom", "dist"), rows)
