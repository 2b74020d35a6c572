import csv
import io
import sys

SCHEMA_LINE = "# advprobe-csv v1"


def fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header, rows, trailer=None):
    """CSV text with the schema comment first; ``trailer`` is an optional extra
    ``(header, rows)`` block introduced by a ``# summary`` line."""
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([fmt(v) for v in row] for row in rows)
    if trailer is not None:
        buf.write("# summary\n")
        writer.writerow(trailer[0])
        writer.writerows([fmt(v) for v in row] for row in trailer[1])
    return buf.getvalue()


def write_csv(path, header, rows, trailer=None):
    text = render_csv(header, rows, trailer)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text


def read_csv(path):
    """Parse a file written by :func:`write_csv`; returns ``(header, rows)`` of the main block."""
    with open(path, newline="") as f:
        lines = f.read().split("\n")
    if not lines or lines[0] != SCHEMA_LINE:
        raise ValueError(f"{path}: missing '{SCHEMA_LINE}' line")
    body = []
    for line in lines[1:]:
        if line.startswith("#"):
            break
        if line:
            body.append(line)
    parsed = list(csv.reader(body))
    return parsed[0], parsed[1:]
