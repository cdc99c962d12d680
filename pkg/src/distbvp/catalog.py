"""Named functions accepted in problem files and on the command line.

Grammar: ``zero``, ``const(c)``, ``heaviside(center)``, ``weierstrass(tolerance)``,
``step(points, values)`` and ``expr(id)`` with ``id`` from :data:`EXPRESSIONS`.
A bare whitelisted id (``h42``) is accepted as shorthand for ``expr(h42)``.
Arguments are Python literals; nothing else is evaluated.
"""

from __future__ import annotations

import ast
import math

import numpy as np

from .integrate import Integrand
from .operator import CouplingTerm, SourceTerm
from .regulated import RegulatedFn, StepFn, Weierstrass, constant, gstar, heaviside


class CatalogError(ValueError):
    pass


def _k41(t):
    return 1.0 / (3.0 * np.sqrt(5.0 + t))


def _K41(t):
    return (2.0 / 3.0) * (np.sqrt(5.0 + t) - math.sqrt(5.0))


def _q42(t):
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 * t * np.sin(t**-2.0) - (2.0 / t) * np.cos(t**-2.0)


def _Q42(t):
    t = np.asarray(t, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t > 0.0, t * t * np.sin(t**-2.0), 0.0)


K41 = Integrand(_k41, _K41, name="k41")
Q42 = Integrand(_q42, _Q42, singular=(0.0,), name="q42")
H42 = Integrand(lambda t: 1.0 + _q42(t), lambda t: np.asarray(t, float) + _Q42(t), singular=(0.0,), name="h42")

EX41_F = SourceTerm(state=lambda t, x: x * np.sin(x) / (3.0 * np.sqrt(5.0 + t)), name="ex41_f")
EX42_F = SourceTerm(state=lambda t, x: np.sin(x), forcing=Q42, name="ex42_f")
SIN_X = SourceTerm(state=lambda t, x: np.sin(x), name="sin_x")

# id -> object; the kind of object decides where the id may be used
EXPRESSIONS: dict[str, object] = {
    "k41": K41,
    "h42": H42,
    "q42": Q42,
    "gstar": gstar(),
    "ex41_f": EX41_F,
    "ex42_f": EX42_F,
    "sin_x": SIN_X,
}


def parse_call(text: str) -> tuple[str, tuple]:
    """``"step([0.5], [0, 1])"`` -> ``("step", ([0.5], [0, 1]))``."""
    text = text.strip()
    try:
        node = ast.parse(text, mode="eval").body
    except SyntaxError as exc:
        raise CatalogError(f"cannot parse {text!r}") from exc
    if isinstance(node, ast.Name):
        return node.id, ()
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        args = []
        for arg in node.args:
            if isinstance(arg, ast.Name):
                args.append(arg.id)
                continue
            try:
                args.append(ast.literal_eval(arg))
            except ValueError as exc:
                raise CatalogError(f"arguments of {text!r} must be literals") from exc
        return node.func.id, tuple(args)
    raise CatalogError(f"not a catalog name: {text!r}")


def _lookup(name: str, args: tuple, text: str):
    if name == "expr":
        if len(args) != 1 or not isinstance(args[0], str):
            raise CatalogError(f"expr() takes one id: {text!r}")
        name, args = args[0], ()
    if name in EXPRESSIONS:
        if args:
            raise CatalogError(f"{name} takes no arguments")
        return EXPRESSIONS[name]
    return None


def _number(x, text: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise CatalogError(f"numeric argument expected in {text!r}")
    return float(x)


def regulated(text: str) -> RegulatedFn:
    """A regulated function of t (for u or the time factor of g)."""
    name, args = parse_call(text)
    obj = _lookup(name, args, text)
    if obj is not None:
        if not isinstance(obj, RegulatedFn):
            raise CatalogError(f"{text!r} is not a regulated function of t")
        return obj
    try:
        if name == "zero" and not args:
            return constant(0.0)
        if name == "const" and len(args) == 1:
            return constant(_number(args[0], text))
        if name == "heaviside" and len(args) == 1:
            return heaviside(_number(args[0], text))
        if name == "weierstrass" and len(args) <= 1:
            return Weierstrass(_number(args[0], text)) if args else Weierstrass()
        if name == "step" and len(args) == 2:
            return StepFn([_number(p, text) for p in args[0]], [_number(v, text) for v in args[1]])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CatalogError):
            raise
        raise CatalogError(f"{text!r}: {exc}") from exc
    raise CatalogError(f"unknown catalog name {text!r}")


def integrand(text: str) -> Integrand:
    """A function of t to integrate (bound data k, h; ``integrate hk``)."""
    name, args = parse_call(text)
    obj = _lookup(name, args, text)
    if isinstance(obj, Integrand):
        return obj
    if isinstance(obj, SourceTerm):
        raise CatalogError(f"{text!r} depends on x; expected a function of t")
    if name == "zero" and not args:
        return Integrand(lambda t: np.zeros_like(t), lambda t: np.zeros_like(np.asarray(t, float)), name="zero")
    if name == "const" and len(args) == 1:
        c = _number(args[0], text)
        return Integrand(lambda t: np.full_like(t, c), lambda t: c * np.asarray(t, float), name=text)
    fn = regulated(text)
    return Integrand(fn._eval, name=text)


def source(text: str) -> SourceTerm:
    """The right-hand side f(t, x)."""
    name, args = parse_call(text)
    obj = _lookup(name, args, text)
    if isinstance(obj, SourceTerm):
        return obj
    if name == "zero" and not args:
        return SourceTerm(name="zero")
    if name == "const" and len(args) == 1:
        c = _number(args[0], text)
        return SourceTerm(state=lambda t, x: np.full(np.broadcast(t, x).shape, c), name=text)
    if isinstance(obj, Integrand):
        return SourceTerm(forcing=obj, name=text)
    raise CatalogError(f"unknown right-hand side {text!r}")


def coupling(text: str) -> CouplingTerm:
    """The coefficient g(t, x) of Du; catalog g's depend on t only."""
    return CouplingTerm(time=regulated(text), name=text)
