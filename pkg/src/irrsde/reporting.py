"""CSV / JSON serialization of study results.

CSV uses '.' decimals and 17 significant digits so every 64-bit float
round-trips exactly; JSON relies on repr-based serialization which has the
same property.
"""

from __future__ import annotations

import json

import numpy as np

from .analysis import DiagnosticsReport, ErrorTable

__all__ = [
    "format_float",
    "error_table_rows_csv",
    "error_table_metadata",
    "write_error_table",
    "write_trace_csv",
    "write_diagnostics",
    "write_json",
]


def format_float(x: float) -> str:
    return "%.17g" % float(x)


def write_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def error_table_rows_csv(table: ErrorTable) -> str:
    lines = ["delta,error,stderr,n_paths"]
    for row in table.rows:
        lines.append(
            ",".join(
                [
                    format_float(row.delta),
                    format_float(row.error_l2sup),
                    format_float(row.std_error),
                    str(row.n_paths),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def error_table_metadata(table: ErrorTable) -> dict:
    return {
        "fitted_slope": table.fitted_slope,
        "fitted_intercept": table.fitted_intercept,
        "r_squared": table.r_squared,
        "overflow_paths": table.overflow_paths,
    }


def write_error_table(table: ErrorTable, out: str, fmt: str) -> list[str]:
    """Write the table; CSV gets a sidecar .meta.json with the fit results.

    Returns the list of files written.
    """
    if fmt == "json":
        doc = {
            "rows": [
                {
                    "delta": r.delta,
                    "error": r.error_l2sup,
                    "stderr": r.std_error,
                    "n_paths": r.n_paths,
                }
                for r in table.rows
            ],
            **error_table_metadata(table),
        }
        write_json(doc, out)
        return [out]
    with open(out, "w") as fh:
        fh.write(error_table_rows_csv(table))
    meta_path = out + ".meta.json"
    write_json(error_table_metadata(table), meta_path)
    return [out, meta_path]


def write_trace_csv(path: str, times, x, z=None, g_of_x=None) -> None:
    header = "t,x"
    columns = [np.asarray(times), np.asarray(x)]
    if z is not None:
        header += ",z,g_of_x"
        columns += [np.asarray(z), np.asarray(g_of_x)]
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*columns):
            fh.write(",".join(format_float(v) for v in row) + "\n")


def _diagnostics_rows(report: DiagnosticsReport):
    rows = []
    for p, entry in report.moment_sup_p.items():
        rows.append(("moment_sup", f"p={p:g}", entry.estimate, entry.std_error))
    for p, value in report.increment_p.items():
        rows.append(("increment_moment", f"p={p:g}", value, ""))
    for key, entry in report.occupation.items():
        rows.append(("occupation_time", key, entry.estimate, entry.std_error))
    if report.crossing_l2 is not None:
        rows.append(("crossing_l2", "", report.crossing_l2.estimate, report.crossing_l2.std_error))
    return rows


def write_diagnostics(reports: list[DiagnosticsReport], out: str, fmt: str) -> list[str]:
    if fmt == "json":
        write_json([r.to_dict() for r in reports], out)
        return [out]
    with open(out, "w") as fh:
        fh.write("level,delta,n_paths,quantity,key,estimate,stderr\n")
        for report in reports:
            for quantity, key, est, se in _diagnostics_rows(report):
                fh.write(
                    ",".join(
                        [
                            str(report.level),
                            format_float(report.delta),
                            str(report.n_paths),
                            quantity,
                            key,
                            format_float(est),
                            format_float(se) if se != "" else "",
                        ]
                    )
                    + "\n"
                )
    return [out]
