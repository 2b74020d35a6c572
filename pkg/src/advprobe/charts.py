"""Minimal static SVG 1.1 line and grouped-bar charts (no external resources)."""
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=60)
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def _num(v):
    return f"{v:.2f}"


def _frame(title, xlabel, ylabel, body):
    x0, y0 = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    x1, y1 = WIDTH - MARGIN["right"], MARGIN["top"]
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 15}" text-anchor="middle" '
        f'font-size="13">{escape(xlabel)}</text>',
        f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2})">{escape(ylabel)}</text>',
    ]
    parts += body
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _y_axis(lo, hi, ticks=5):
    x0, y0, y1 = MARGIN["left"], HEIGHT - MARGIN["bottom"], MARGIN["top"]
    out = []
    for i in range(ticks + 1):
        v = lo + (hi - lo) * i / ticks
        y = y0 - (y0 - y1) * i / ticks
        out.append(f'<line x1="{x0 - 4}" y1="{_num(y)}" x2="{x0}" y2="{_num(y)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{_num(y + 4)}" text-anchor="end" '
                   f'font-size="11">{v:.3g}</text>')
    return out


def line_chart(x, series, title="", xlabel="", ylabel="", y_range=None):
    """``series`` maps a legend label to y values aligned with ``x``."""
    x = [float(v) for v in x]
    all_y = [float(v) for ys in series.values() for v in ys]
    lo, hi = y_range if y_range is not None else (min(all_y), max(all_y))
    if hi <= lo:
        hi = lo + 1.0
    xlo, xhi = min(x), max(x)
    if xhi <= xlo:
        xhi = xlo + 1.0
    x0, y0 = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    w = WIDTH - MARGIN["left"] - MARGIN["right"]
    h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return x0 + w * (v - xlo) / (xhi - xlo)

    def py(v):
        return y0 - h * (v - lo) / (hi - lo)

    body = _y_axis(lo, hi)
    for v in x:
        body.append(f'<text x="{_num(px(v))}" y="{y0 + 16}" text-anchor="middle" '
                    f'font-size="11">{v:.4g}</text>')
    for n, (label, ys) in enumerate(series.items()):
        color = PALETTE[n % len(PALETTE)]
        points = " ".join(f"{_num(px(a))},{_num(py(float(b)))}" for a, b in zip(x, ys))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>')
        body.append(f'<text x="{WIDTH - MARGIN["right"] - 5}" y="{MARGIN["top"] + 14 * (n + 1)}" '
                    f'text-anchor="end" font-size="12" fill="{color}">{escape(label)}</text>')
    return _frame(title, xlabel, ylabel, body)


def bar_chart(categories, groups, title="", xlabel="", ylabel=""):
    """Grouped bars: ``groups`` maps a legend label to one value per category."""
    values = [float(v) for vs in groups.values() for v in vs]
    hi = max(values + [1e-12])
    x0, y0 = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    w = WIDTH - MARGIN["left"] - MARGIN["right"]
    h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    slot = w / max(len(categories), 1)
    bar = slot * 0.8 / max(len(groups), 1)
    body = _y_axis(0.0, hi)
    for c, name in enumerate(categories):
        body.append(f'<text x="{_num(x0 + slot * (c + 0.5))}" y="{y0 + 16}" text-anchor="middle" '
                    f'font-size="11">{escape(str(name))}</text>')
    for g, (label, vs) in enumerate(groups.items()):
        color = PALETTE[g % len(PALETTE)]
        for c, v in enumerate(vs):
            bh = h * float(v) / hi
            bx = x0 + slot * c + slot * 0.1 + bar * g
            body.append(f'<rect x="{_num(bx)}" y="{_num(y0 - bh)}" width="{_num(bar)}" '
                        f'height="{_num(bh)}" fill="{color}"/>')
        body.append(f'<text x="{WIDTH - MARGIN["right"] - 5}" y="{MARGIN["top"] + 14 * (g + 1)}" '
                    f'text-anchor="end" font-size="12" fill="{color}">{escape(label)}</text>')
    return _frame(title, xlabel, ylabel, body)
