"""CSV schemas for the figures; headers must match exactly."""

from __future__ import annotations

import csv


class SchemaError(ValueError):
    pass


SCHEMAS = {
    "sweep": ["eps", "t0", "R", "lambda_hat", "lambda_ci_low",
              "argmin_start", "argmin_cell", "n_traj", "seed"],
    "tv_curves": ["eps", "t", "tv"],
    "sumset_growth": ["set", "k", "components", "measure"],
    # density dumps carry d coordinate columns between cell_index and estimate
    "density_prefix": ["cell_index"],
    "density_suffix": ["estimate", "ci_lo", "ci_hi", "hr_mask"],
}


def read_rows(path: str, kind: str) -> list[dict]:
    """Read a CSV after validating its header against the schema."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        try:
            header = next(rd)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if kind == "density":
            if (
                header[:1] != SCHEMAS["density_prefix"]
                or header[-4:] != SCHEMAS["density_suffix"]
                or len(header) < 6
                or any(not h.startswith("x") for h in header[1:-4])
            ):
                raise SchemaError(f"{path}: header {header} is not a density dump")
        else:
            if header != SCHEMAS[kind]:
                raise SchemaError(
                    f"{path}: header {header} does not match the {kind} schema"
                )
        rows = []
        for line in rd:
            if not line:
                continue
            if len(line) != len(header):
                raise SchemaError(f"{path}: ragged row {line}")
            rows.append(dict(zip(header, line)))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows
