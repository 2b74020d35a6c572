"""Architecture strings.

Grammar::

    mlp:D0-D1-...-Dk                      linear layers, ReLU between, linear last
    cnn:CxHxW:conv(oc,k,s,p)-...-mlp(D1-...-Dk)

In the cnn form every conv is followed by a ReLU, the mlp input dim is inferred
from the flattened conv output, and the last mlp dim is the class count.
"""
import re

import numpy as np

from .network import Network, ReLU, init_conv, init_linear


class ArchParseError(ValueError):
    def __init__(self, text, pos, message):
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.pos = pos


_INT = re.compile(r"[1-9][0-9]*")


class _Cursor:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise ArchParseError(self.text, self.pos, message)

    def expect(self, literal):
        if not self.text.startswith(literal, self.pos):
            self.error(f"expected {literal!r}")
        self.pos += len(literal)

    def accept(self, literal):
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def integer(self, allow_zero=False):
        pattern = re.compile(r"[0-9]+") if allow_zero else _INT
        m = pattern.match(self.text, self.pos)
        if not m:
            self.error("expected a non-negative integer" if allow_zero else "expected a positive integer")
        self.pos = m.end()
        return int(m.group())

    def dims(self):
        out = [self.integer()]
        while self.accept("-"):
            out.append(self.integer())
        return out

    def done(self):
        if self.pos != len(self.text):
            self.error("unexpected trailing text")


def parse_arch(text):
    """Parse an arch string into ``(input_shape, plan)``.

    ``plan`` is a list of ``("conv", oc, k, s, p)`` and ``("linear", out_dim)`` steps.
    """
    cur = _Cursor(text)
    if cur.accept("mlp:"):
        dims = cur.dims()
        cur.done()
        if len(dims) < 2:
            cur.error("an mlp needs at least two dims")
        return (dims[0],), [("linear", d) for d in dims[1:]]
    if not cur.accept("cnn:"):
        cur.error("expected 'mlp:' or 'cnn:'")
    shape = [cur.integer()]
    for _ in range(2):
        cur.expect("x")
        shape.append(cur.integer())
    cur.expect(":")
    plan = []
    while cur.accept("conv("):
        oc = cur.integer()
        cur.expect(",")
        k = cur.integer()
        cur.expect(",")
        s = cur.integer()
        cur.expect(",")
        p = cur.integer(allow_zero=True)
        cur.expect(")")
        plan.append(("conv", oc, k, s, p))
        if not cur.accept("-"):
            cur.error("expected '-mlp(...)' after the conv layers")
    cur.expect("mlp(")
    plan += [("linear", d) for d in cur.dims()]
    cur.expect(")")
    cur.done()
    return tuple(shape), plan


def build_network(text, seed=0, bias=True):
    """Seeded network for an arch string (uniform(-a, a) init, a = sqrt(1/fan_in))."""
    input_shape, plan = parse_arch(text)
    rng = np.random.default_rng(seed)
    layers = []
    shape = input_shape
    for j, step in enumerate(plan):
        if j:
            layers.append(ReLU())
        if step[0] == "conv":
            _, oc, k, s, p = step
            layer = init_conv(rng, shape[0], oc, k, s, p, bias)
            shape = layer.output_shape(shape)
        else:
            layer = init_linear(rng, int(np.prod(shape)), step[1], bias)
            shape = (step[1],)
        layers.append(layer)
    return Network(layers, input_shape, shape[0])
