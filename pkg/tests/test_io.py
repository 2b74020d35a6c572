import xml.etree.ElementTree as ET

import numpy as np
import pytest

from advprobe.arch import ArchParseError, build_network, parse_arch
from advprobe.charts import bar_chart, line_chart
from advprobe.csvio import SCHEMA_LINE, fmt, read_csv, render_csv, write_csv
from advprobe.experiments import parse_grid
from advprobe.network import Conv2d, Linear, ReLU

SVG_NS = "{http://www.w3.org/2000/svg}"


def test_mlp_arch():
    shape, plan = parse_arch("mlp:4-8-3")
    assert shape == (4,) and plan == [("linear", 8), ("linear", 3)]
    net = build_network("mlp:4-8-3", seed=1)
    assert [type(l) for l in net.layers] == [Linear, ReLU, Linear]
    assert net.class_count == 3


def test_cnn_arch():
    net = build_network("cnn:1x8x8:conv(4,3,1,1)-conv(6,3,2,0)-mlp(16-10)", seed=0)
    kinds = [type(l) for l in net.layers]
    assert kinds == [Conv2d, ReLU, Conv2d, ReLU, Linear, ReLU, Linear]
    assert net.layers[4].weight.shape == (16, 6 * 3 * 3)
    assert net.input_shape == (1, 8, 8) and net.class_count == 10


def test_arch_is_seeded():
    a = build_network("mlp:3-5-2", seed=4).to_json()
    assert a == build_network("mlp:3-5-2", seed=4).to_json()
    assert a != build_network("mlp:3-5-2", seed=5).to_json()
    net = build_network("mlp:3-5-2", seed=4, bias=False)
    assert all(l.bias is None for l in net.layers if not isinstance(l, ReLU))


@pytest.mark.parametrize("text,pos", [
    ("mlp:2-x", 6), ("mlp:2", 5), ("rnn:2-3", 0), ("mlp:2-3)", 7),
    ("cnn:1x8:conv(2,3,1,0)-mlp(2)", 7), ("cnn:1x8x8:conv(2,3,1)-mlp(2)", 20),
    ("cnn:1x8x8:conv(2,3,1,0)mlp(2)", 23), ("mlp:0-2", 4),
])
def test_arch_errors_carry_position(text, pos):
    with pytest.raises(ArchParseError, match=f"position {pos}") as info:
        parse_arch(text)
    assert info.value.pos == pos


def test_grid_parsing():
    assert parse_grid("0:0.1:0.01") == pytest.approx([i / 100 for i in range(11)])
    assert parse_grid("1,2,4,8,10") == [1, 2, 4, 8, 10]
    for bad in ("0.1:0:0.01", "0:1:0", "", "1,1", "2,1", "0:1"):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_csv_format(tmp_path, capsys):
    text = render_csv(["a", "b", "c"], [[1, 0.1, True], [2, 1e-20, False]])
    lines = text.split("\n")
    assert lines[0] == SCHEMA_LINE
    assert lines[2] == "1,0.1,true" and lines[3] == "2,1e-20,false"
    assert fmt(0.1 + 0.2) == "0.30000000000000004"
    path = tmp_path / "x.csv"
    write_csv(path, ["a"], [[1]], (["n"], [[5]]))
    assert read_csv(path) == (["a"], [["1"]])
    assert "\r" not in path.read_bytes().decode()
    write_csv("-", ["a"], [[1]])
    assert capsys.readouterr().out.startswith(SCHEMA_LINE)


def test_line_chart_is_valid_svg():
    svg = line_chart([0, 0.5, 1], {"acc <&>": [1.0, 0.5, 0.2]}, title="t & t", xlabel="eps",
                     ylabel="accuracy", y_range=(0, 1))
    root = ET.fromstring(svg.split("\n", 1)[1])
    assert root.tag == SVG_NS + "svg"
    assert len(root.findall(f"{SVG_NS}polyline")) == 1
    texts = [t.text for t in root.iter(SVG_NS + "text")]
    assert "eps" in texts and "accuracy" in texts and "acc <&>" in texts
    assert "href" not in svg and "http://" not in svg.replace("http://www.w3.org/2000/svg", "")


def test_bar_chart_is_valid_svg():
    svg = bar_chart([0, 1, 2], {"before": [0.2, 0.5, 0.3], "after": [0.1, 0.2, 0.7]})
    root = ET.fromstring(svg.split("\n", 1)[1])
    rects = root.findall(f"{SVG_NS}rect")
    assert len(rects) == 1 + 6  # background plus two bars per class
