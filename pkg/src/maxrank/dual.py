"""Forward-mode automatic differentiation with vector-valued dual numbers.

A :class:`Dual` carries a value array ``val`` of shape ``S`` and a tangent
array ``der`` of shape ``S + (k,)`` holding ``k`` directional derivatives at
once.  Numpy ufuncs dispatch to it through ``__array_ufunc__``, so chart
functions can be written with plain ``np.sin``/``np.sqrt`` and then
differentiated exactly by seeding their inputs.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Dual:
    __slots__ = ("val", "der")
    __array_priority__ = 1000

    def __init__(self, val, der):
        self.val = np.asarray(val, dtype=float)
        self.der = np.asarray(der, dtype=float)

    @property
    def nder(self) -> int:
        return self.der.shape[-1]

    def __repr__(self) -> str:
        return f"Dual({self.val!r}, {self.der!r})"

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.der[idx + (slice(None),)])

    def __len__(self) -> int:
        return len(self.val)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    # arithmetic goes through the ufunc machinery
    def __add__(self, o):
        return np.add(self, o)

    def __radd__(self, o):
        return np.add(o, self)

    def __sub__(self, o):
        return np.subtract(self, o)

    def __rsub__(self, o):
        return np.subtract(o, self)

    def __mul__(self, o):
        return np.multiply(self, o)

    def __rmul__(self, o):
        return np.multiply(o, self)

    def __truediv__(self, o):
        return np.true_divide(self, o)

    def __rtruediv__(self, o):
        return np.true_divide(o, self)

    def __pow__(self, o):
        return np.power(self, o)

    def __neg__(self):
        return np.negative(self)

    def __pos__(self):
        return self

    def __abs__(self):
        return np.absolute(self)

    # comparisons act on the value part only
    def __lt__(self, o):
        return self.val < _val(o)

    def __le__(self, o):
        return self.val <= _val(o)

    def __gt__(self, o):
        return self.val > _val(o)

    def __ge__(self, o):
        return self.val >= _val(o)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        rule = _RULES.get(ufunc)
        if rule is None:
            return NotImplemented
        return rule(*inputs)


def _val(x):
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


def _lift(x, k: int) -> Dual:
    if isinstance(x, Dual):
        return x
    v = np.asarray(x, dtype=float)
    return Dual(v, np.zeros(v.shape + (k,)))


def _nder(*xs) -> int:
    for x in xs:
        if isinstance(x, Dual):
            return x.nder
    raise TypeError("no dual operand")


def _scale(der, factor):
    return der * np.asarray(factor)[..., None]


def _unary(f, df):
    def rule(x):
        v = x.val
        return Dual(f(v), _scale(x.der, df(v)))

    return rule


def _add(a, b):
    k = _nder(a, b)
    a, b = _lift(a, k), _lift(b, k)
    return Dual(a.val + b.val, a.der + b.der)


def _sub(a, b):
    k = _nder(a, b)
    a, b = _lift(a, k), _lift(b, k)
    return Dual(a.val - b.val, a.der - b.der)


def _mul(a, b):
    if not isinstance(a, Dual):
        return Dual(_val(a) * b.val, _scale(b.der, _val(a)))
    if not isinstance(b, Dual):
        return Dual(a.val * _val(b), _scale(a.der, _val(b)))
    return Dual(a.val * b.val, _scale(a.der, b.val) + _scale(b.der, a.val))


def _div(a, b):
    if not isinstance(b, Dual):
        bv = _val(b)
        return Dual(a.val / bv, _scale(a.der, 1.0 / bv))
    k = b.nder
    a = _lift(a, k)
    q = a.val / b.val
    return Dual(q, _scale(a.der - _scale(b.der, q), 1.0 / b.val))


def _power(a, b):
    if isinstance(b, Dual):
        # a**b = exp(b log a)
        return np.exp(np.multiply(b, np.log(a)))
    p = _val(b)
    return Dual(a.val**p, _scale(a.der, p * a.val ** (p - 1.0)))


def _sqrt(x):
    r = np.sqrt(x.val)
    return Dual(r, _scale(x.der, 0.5 / r))


def _exp(x):
    e = np.exp(x.val)
    return Dual(e, _scale(x.der, e))


def _arctan2(y, x):
    k = _nder(y, x)
    y, x = _lift(y, k), _lift(x, k)
    rr = x.val**2 + y.val**2
    der = _scale(y.der, x.val / rr) - _scale(x.der, y.val / rr)
    return Dual(np.arctan2(y.val, x.val), der)


def _hypot(x, y):
    return np.sqrt(x * x + y * y)


_RULES: dict = {
    np.add: _add,
    np.subtract: _sub,
    np.multiply: _mul,
    np.true_divide: _div,
    np.power: _power,
    np.sqrt: _sqrt,
    np.exp: _exp,
    np.arctan2: _arctan2,
    np.hypot: _hypot,
    np.negative: lambda x: Dual(-x.val, -x.der),
    np.positive: lambda x: x,
    np.sin: _unary(np.sin, np.cos),
    np.cos: _unary(np.cos, lambda v: -np.sin(v)),
    np.tan: _unary(np.tan, lambda v: 1.0 / np.cos(v) ** 2),
    np.log: _unary(np.log, lambda v: 1.0 / v),
    np.expm1: _unary(np.expm1, np.exp),
    np.log1p: _unary(np.log1p, lambda v: 1.0 / (1.0 + v)),
    np.sinh: _unary(np.sinh, np.cosh),
    np.cosh: _unary(np.cosh, np.sinh),
    np.tanh: _unary(np.tanh, lambda v: 1.0 - np.tanh(v) ** 2),
    np.arctan: _unary(np.arctan, lambda v: 1.0 / (1.0 + v * v)),
    np.absolute: _unary(np.absolute, np.sign),
}


def where(cond, a, b):
    """Branch selection that keeps derivatives of the chosen branch."""
    if not (isinstance(a, Dual) or isinstance(b, Dual)):
        return np.where(cond, a, b)
    k = _nder(a, b)
    a, b = _lift(a, k), _lift(b, k)
    c = np.asarray(cond)
    return Dual(np.where(c, a.val, b.val), np.where(c[..., None], a.der, b.der))


def seed(values) -> list[Dual]:
    """Seed each coordinate of ``values`` (shape ``(k,)`` or ``(k, N)``) with a unit tangent."""
    u = np.asarray(values, dtype=float)
    k = u.shape[0]
    out = []
    for i in range(k):
        der = np.zeros(u.shape[1:] + (k,))
        der[..., i] = 1.0
        out.append(Dual(u[i], der))
    return out


def stack(components: Sequence, shape: tuple, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack chart outputs into (values, derivatives) of shapes ``(n,)+shape`` and ``(n,)+shape+(k,)``.

    Components may be constants; they broadcast to ``shape`` with zero derivative.
    """
    vals, ders = [], []
    for c in components:
        if isinstance(c, Dual):
            vals.append(np.broadcast_to(c.val, shape))
            ders.append(np.broadcast_to(c.der, shape + (k,)))
        else:
            vals.append(np.broadcast_to(np.asarray(c, dtype=float), shape))
            ders.append(np.zeros(shape + (k,)))
    return np.stack(vals), np.stack(ders)


def derivative(f: Callable, x: float) -> float:
    """First derivative of a scalar function at ``x``."""
    out = f(Dual(float(x), np.ones(1)))
    if not isinstance(out, Dual):
        return 0.0
    return float(out.der[..., 0])
