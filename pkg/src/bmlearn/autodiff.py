"""Reverse-mode automatic differentiation on an explicit tape.

A ``Tape`` is an append-only list of nodes. Each node stores an operation
tag, the indices of its input nodes, and the cached primal value, so input
indices are always smaller than the node's own index and a single reverse
sweep visits nodes in valid topological order. ``Var`` is a lightweight
handle (tape, index) with operator overloading; combining two Vars from
different tapes is a usage error.

Values are 64-bit floats throughout: scalars (0-d), vectors (1-d) and
matrices (2-d). Broadcasting is restricted to scalar-with-array; anything
else is a shape error, which keeps the adjoint rules exact.

Matrix factorizations get dedicated adjoint rules instead of being taped
elementwise, so a Cholesky-based log density costs O(n^3) work and O(1)
tape nodes. The Cholesky adjoint uses the symmetric construction: the
returned sensitivity is symmetrized, i.e. it is the gradient under
symmetric perturbations of the input. A failed factorization raises
``NumericError`` naming the pivot; inference engines treat that as a
log density of -inf rather than a fatal error.

The module-level functions (``exp``, ``dot``, ``cholesky``, ...) dispatch
on their arguments: any ``Var`` input records a node, plain numbers and
arrays are computed eagerly through the *same* forward kernels, so taped
and untaped evaluations of the same formula are bit-identical.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf

from .errors import NumericError, ShapeError, UsageError

Value = Union[float, np.ndarray]

_LOG_2PI = math.log(2.0 * math.pi)


def _shape(v) -> tuple:
    return np.shape(v)


def _as_value(v) -> Value:
    """Coerce to float or a float64 ndarray."""
    if isinstance(v, (int, float, np.floating, np.integer)):
        return float(v)
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr)
    return arr


class Var:
    """Handle to one tape node: carries the tape and the node index."""

    __slots__ = ("tape", "index")

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> Value:
        return self.tape.vals[self.index]

    @property
    def shape(self) -> tuple:
        return _shape(self.tape.vals[self.index])

    def __repr__(self):
        return f"Var(node={self.index}, value={self.value!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Var)
            and other.tape is self.tape
            and other.index == self.index
        )

    def __hash__(self):
        return hash((id(self.tape), self.index))

    # arithmetic sugar; all routed through the dispatching ops below
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)


class Tape:
    """Append-only record of a computation, traversed backwards for grads."""

    __slots__ = ("ops", "inputs", "vals", "aux", "_leaves")

    def __init__(self):
        self.ops: list[str] = []
        self.inputs: list[tuple[int, ...]] = []
        self.vals: list[Value] = []
        self.aux: list = []
        self._leaves: list[Var] = []

    def __len__(self):
        return len(self.ops)

    def _append(self, op: str, inputs: tuple[int, ...], value: Value, aux=None) -> Var:
        self.ops.append(op)
        self.inputs.append(inputs)
        self.vals.append(value)
        self.aux.append(aux)
        return Var(self, len(self.ops) - 1)

    def leaf(self, value) -> Var:
        """Create an input node; its adjoint appears in backward()'s map."""
        v = self._append("leaf", (), _as_value(value))
        self._leaves.append(v)
        return v

    def const(self, value) -> Var:
        """Create a constant node, excluded from gradient maps."""
        return self._append("const", (), _as_value(value))

    @property
    def leaves(self) -> list[Var]:
        return list(self._leaves)


def is_var(x) -> bool:
    return isinstance(x, Var)


def value_of(x) -> Value:
    """Primal value of a Var, or the input itself coerced to a value."""
    return x.value if isinstance(x, Var) else _as_value(x)


# ---------------------------------------------------------------------------
# forward kernels (shared verbatim by taped and untaped evaluation)
# ---------------------------------------------------------------------------


def _k_cholesky(a: np.ndarray) -> np.ndarray:
    c, info = dpotrf(a, lower=1, clean=1)
    if info != 0:
        raise NumericError(
            f"cholesky: matrix is not positive definite (failing pivot {info})"
        )
    return c


def _k_solve_lower(l: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(l, b, lower=True)


def _k_solve_lower_t(l: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(l, b, lower=True, trans="T")


def _k_log_diag_sum(a: np.ndarray) -> float:
    return float(np.sum(np.log(np.diagonal(a))))


_FORWARD = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "neg": lambda a: -a,
    "exp": np.exp,
    "log": np.log,
    "sum": lambda a: float(np.sum(a)),
    "dot": lambda a, b: float(np.dot(a, b)),
    "matvec": lambda a, b: a @ b,
    "matmul": lambda a, b: a @ b,
    "cholesky": _k_cholesky,
    "solve_lower": _k_solve_lower,
    "solve_lower_t": _k_solve_lower_t,
    "log_diag_sum": _k_log_diag_sum,
}


def _check_shapes(op: str, shapes: list[tuple], aux=None) -> None:
    def fail(msg):
        raise ShapeError(f"{op}: {msg}")

    if op in ("add", "sub", "mul", "div"):
        a, b = shapes
        if a != b and a != () and b != ():
            fail(f"operands have shapes {a} and {b}; only scalar-with-array "
                 "broadcasting is supported")
    elif op in ("neg", "exp", "log", "sum", "power"):
        pass
    elif op == "dot":
        a, b = shapes
        if len(a) != 1 or len(b) != 1:
            fail(f"expects two vectors, got shapes {a} and {b}")
        if a != b:
            fail(f"vector lengths differ: {a[0]} vs {b[0]}")
    elif op == "matvec":
        a, b = shapes
        if len(a) != 2 or len(b) != 1:
            fail(f"expects matrix and vector, got shapes {a} and {b}")
        if a[1] != b[0]:
            fail(f"matrix columns ({a[1]}) != vector length ({b[0]})")
    elif op == "matmul":
        a, b = shapes
        if len(a) != 2 or len(b) != 2:
            fail(f"expects two matrices, got shapes {a} and {b}")
        if a[1] != b[0]:
            fail(f"inner dimensions differ: {a[1]} vs {b[0]}")
    elif op in ("cholesky", "log_diag_sum"):
        (a,) = shapes
        if len(a) != 2 or a[0] != a[1]:
            fail(f"expects a square matrix, got shape {a}")
    elif op in ("solve_lower", "solve_lower_t"):
        a, b = shapes
        if len(a) != 2 or a[0] != a[1]:
            fail(f"expects a square matrix, got shape {a}")
        if len(b) != 1 or b[0] != a[0]:
            fail(f"right-hand side shape {b} does not match matrix {a}")
    else:
        raise UsageError(f"unknown primitive: {op}")


def record(tape: Tape, op: str, inputs: list, aux=None) -> Var:
    """Validate shapes, run the forward kernel, append a node.

    Non-Var inputs are lifted to constant nodes on `tape`. Var inputs must
    already live on `tape`.
    """
    lifted = []
    for x in inputs:
        if isinstance(x, Var):
            if x.tape is not tape:
                raise UsageError("cannot combine Vars from different tapes")
            lifted.append(x)
        else:
            lifted.append(tape.const(x))
    vals = [v.value for v in lifted]
    _check_shapes(op, [_shape(v) for v in vals], aux)
    if op == "power":
        out = vals[0] ** aux
    else:
        out = _FORWARD[op](*vals)
    return tape._append(op, tuple(v.index for v in lifted), _as_value(out), aux)


def _apply(op: str, args: tuple, aux=None):
    """Dispatch: record on a tape if any arg is a Var, else compute eagerly."""
    tape = None
    for a in args:
        if isinstance(a, Var):
            if tape is not None and a.tape is not tape:
                raise UsageError("cannot combine Vars from different tapes")
            tape = a.tape
    if tape is not None:
        return record(tape, op, list(args), aux)
    vals = [_as_value(a) for a in args]
    _check_shapes(op, [_shape(v) for v in vals], aux)
    if op == "power":
        return _as_value(vals[0] ** aux)
    return _as_value(_FORWARD[op](*vals))


def add(a, b):
    return _apply("add", (a, b))


def sub(a, b):
    return _apply("sub", (a, b))


def mul(a, b):
    return _apply("mul", (a, b))


def div(a, b):
    return _apply("div", (a, b))


def neg(a):
    return _apply("neg", (a,))


def exp(a):
    return _apply("exp", (a,))


def log(a):
    return _apply("log", (a,))


def power(a, exponent: float):
    return _apply("power", (a,), float(exponent))


def vsum(a):
    """Sum of all elements, returning a scalar."""
    return _apply("sum", (a,))


def dot(a, b):
    return _apply("dot", (a, b))


def matvec(a, b):
    return _apply("matvec", (a, b))


def matmul(a, b):
    return _apply("matmul", (a, b))


def cholesky(a):
    """Lower Cholesky factor; NumericError names the failing pivot."""
    return _apply("cholesky", (a,))


def solve_lower(l, b):
    """Solve L x = b with L lower triangular."""
    return _apply("solve_lower", (l, b))


def solve_lower_t(l, b):
    """Solve L^T x = b with L lower triangular."""
    return _apply("solve_lower_t", (l, b))


def log_diag_sum(a):
    """Sum of the log of the diagonal entries."""
    return _apply("log_diag_sum", (a,))


# ---------------------------------------------------------------------------
# adjoint rules
# ---------------------------------------------------------------------------


def _unb(delta, ref: Value):
    """Reduce a broadcast adjoint back to the operand's shape."""
    if _shape(ref) == () and _shape(delta) != ():
        return float(np.sum(delta))
    return delta


def _adj_cholesky(g, a, l):
    # symmetric-adjoint construction: sensitivity under symmetric
    # perturbations of the input matrix
    gl = np.tril(np.asarray(g, dtype=np.float64))
    p = np.tril(l.T @ gl)
    n = p.shape[0]
    p[np.arange(n), np.arange(n)] *= 0.5
    m = solve_triangular(l, p, lower=True, trans="T")
    s = solve_triangular(l, m.T, lower=True, trans="T").T
    return (0.5 * (s + s.T),)


def _adjoints(op: str, g, in_vals: tuple, out_val, aux):
    """Adjoint contributions for each input of one node."""
    if op == "add":
        a, b = in_vals
        return (_unb(g, a), _unb(g, b))
    if op == "sub":
        a, b = in_vals
        return (_unb(g, a), _unb(-g, b))
    if op == "mul":
        a, b = in_vals
        return (_unb(g * b, a), _unb(g * a, b))
    if op == "div":
        a, b = in_vals
        return (_unb(g / b, a), _unb(-g * a / (b * b), b))
    if op == "neg":
        return (-g,)
    if op == "exp":
        return (g * out_val,)
    if op == "log":
        (a,) = in_vals
        return (g / a,)
    if op == "power":
        (a,) = in_vals
        return (g * aux * a ** (aux - 1.0),)
    if op == "sum":
        (a,) = in_vals
        return (np.full(_shape(a), g) if _shape(a) != () else g,)
    if op == "dot":
        a, b = in_vals
        return (g * b, g * a)
    if op == "matvec":
        a, b = in_vals
        return (np.outer(g, b), a.T @ g)
    if op == "matmul":
        a, b = in_vals
        return (g @ b.T, a.T @ g)
    if op == "cholesky":
        return _adj_cholesky(g, in_vals[0], out_val)
    if op == "solve_lower":
        l, _ = in_vals
        x = out_val
        bbar = solve_triangular(l, g, lower=True, trans="T")
        return (-np.tril(np.outer(bbar, x)), bbar)
    if op == "solve_lower_t":
        l, _ = in_vals
        x = out_val
        bbar = solve_triangular(l, g, lower=True)
        return (-np.tril(np.outer(x, bbar)), bbar)
    if op == "log_diag_sum":
        (a,) = in_vals
        out = np.zeros_like(a)
        d = np.arange(a.shape[0])
        out[d, d] = g / np.diagonal(a)
        return (out,)
    raise UsageError(f"unknown primitive: {op}")


def backward(tape: Tape, output: Var) -> dict[Var, Value]:
    """Reverse sweep seeded at `output`; returns {leaf Var: adjoint}.

    Leaves that are not ancestors of `output` map to exact zeros. Primal
    values on the tape are left untouched.
    """
    if not isinstance(output, Var) or output.tape is not tape:
        raise UsageError("output must be a Var recorded on this tape")
    if _shape(output.value) != ():
        raise UsageError(
            f"backward requires a scalar output, got shape {_shape(output.value)}"
        )
    adj: list = [None] * (output.index + 1)
    adj[output.index] = 1.0
    ops, inputs, vals, aux = tape.ops, tape.inputs, tape.vals, tape.aux
    for i in range(output.index, -1, -1):
        g = adj[i]
        if g is None:
            continue
        op = ops[i]
        if op in ("leaf", "const"):
            continue
        idxs = inputs[i]
        in_vals = tuple(vals[j] for j in idxs)
        deltas = _adjoints(op, g, in_vals, vals[i], aux[i])
        for j, d in zip(idxs, deltas):
            if ops[j] == "const":
                continue
            adj[j] = d if adj[j] is None else adj[j] + d

    out: dict[Var, Value] = {}
    for leaf in tape._leaves:
        a = adj[leaf.index] if leaf.index <= output.index else None
        if a is None:
            sh = _shape(leaf.value)
            a = 0.0 if sh == () else np.zeros(sh)
        out[leaf] = a
    return out
