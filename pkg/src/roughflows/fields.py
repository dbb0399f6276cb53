"""Lifting driving-space vector fields to differential operators.

A system assigns to each driving letter i a vector field V_i on R^m.  A
single letter acts on a scalar function f as the first-order operator
(Df)(V_i); a word acts as the composition of its letters' operators, the
leftmost letter outermost; general tensors act by linearity.  Applying a
tensor to the identity map recovers state-space objects: the field generating
the log-ODE step for Lie tensors, and the high-order Euler step for
group-like ones.

Two field representations are supported.  Polynomial fields carry exact
derivatives of every order, so operator compositions are computed once,
symbolically, and evaluated on whole batches of state points.  Callable
fields carry user-supplied derivative-tensor evaluators (finite-difference
validated at construction) and are composed pointwise through truncated
Taylor jets; a word of length k consumes field derivatives up to order k-1.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .tensor import TensorElement, lie_defect, words_of_length


# ---------------------------------------------------------------------------
# scalar polynomials on R^m (doubles as the truncated-jet representation)
# ---------------------------------------------------------------------------


class Polynomial:
    """Scalar polynomial on R^m: {exponent tuple of length m: coefficient}."""

    __slots__ = ("m", "terms")

    def __init__(self, m: int, terms: dict | None = None):
        self.m = int(m)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != m:
                raise ValueError(f"exponent tuple {exps} has length != {m}")
            c = float(c)
            if c != 0.0:
                clean[exps] = clean.get(exps, 0.0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0.0}

    @classmethod
    def zero(cls, m: int) -> "Polynomial":
        return cls(m, {})

    @classmethod
    def constant(cls, m: int, value: float) -> "Polynomial":
        return cls(m, {(0,) * m: value})

    @classmethod
    def coordinate(cls, m: int, j: int) -> "Polynomial":
        exps = [0] * m
        exps[j] = 1
        return cls(m, {tuple(exps): 1.0})

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def constant_term(self) -> float:
        return self.terms.get((0,) * self.m, 0.0)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.m, out)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            out: dict = {}
            for ea, ca in self.terms.items():
                for eb, cb in other.terms.items():
                    key = tuple(i + j for i, j in zip(ea, eb))
                    out[key] = out.get(key, 0.0) + ca * cb
            return Polynomial(self.m, out)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial(self.m, {e: float(other) * c for e, c in self.terms.items()})
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * other
        return NotImplemented

    def partial(self, j: int) -> "Polynomial":
        out = {}
        for exps, c in self.terms.items():
            if exps[j] > 0:
                lowered = list(exps)
                lowered[j] -= 1
                out[tuple(lowered)] = c * exps[j]
        return Polynomial(self.m, out)

    def truncate(self, max_degree: int) -> "Polynomial":
        return Polynomial(
            self.m, {e: c for e, c in self.terms.items() if sum(e) <= max_degree}
        )

    def shift(self, center) -> "Polynomial":
        """Taylor re-expansion p(center + h) as a polynomial in h (exact)."""
        center = np.asarray(center, dtype=float)
        out = Polynomial.zero(self.m)
        for exps, c in self.terms.items():
            factor = Polynomial.constant(self.m, c)
            for j, e in enumerate(exps):
                binom = Polynomial(self.m, {(0,) * self.m: center[j]}) + Polynomial.coordinate(self.m, j)
                for _ in range(e):
                    factor = factor * binom
            out = out + factor
        return out

    def __call__(self, x):
        """Evaluate at x of shape (..., m); returns shape (...)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for exps, c in self.terms.items():
            term = np.full(x.shape[:-1], c)
            for j, e in enumerate(exps):
                if e:
                    term = term * x[..., j] ** e
            out = out + term
        return out if out.shape else float(out)

    def derivative_tensor(self, x, order: int) -> np.ndarray:
        """All order-th partials at x, shape (m,)*order (exact)."""
        x = np.asarray(x, dtype=float)
        out = np.empty((self.m,) * order)
        for idx in itertools.product(range(self.m), repeat=order):
            q = self
            for j in idx:
                q = q.partial(j)
            out[idx] = q(x)
        return out

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        bits = []
        for exps in sorted(self.terms, key=lambda e: (sum(e), e)):
            mono = "".join(f"x{j + 1}^{e}" if e > 1 else f"x{j + 1}" for j, e in enumerate(exps) if e)
            bits.append(f"{self.terms[exps]:+g}{('*' + mono) if mono else ''}")
        return f"Polynomial({' '.join(bits)})"


# A test function is just a scalar polynomial with its exact calculus.
TestFunction = Polynomial


def _jet_of_polynomial(f: Polynomial, x, order: int) -> Polynomial:
    return f.shift(x).truncate(order)


# ---------------------------------------------------------------------------
# per-letter field representations
# ---------------------------------------------------------------------------


class PolynomialField:
    """One driving letter's field V: R^m -> R^m with polynomial components."""

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise ValueError("need at least one component")
        m = components[0].m
        if any(c.m != m for c in components) or len(components) != m:
            raise ValueError("need exactly m polynomial components on R^m")
        self.components = components
        self.m = m
        self.max_derivative_order = None  # exact derivatives of every order

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([c(x) for c in self.components], axis=-1)

    def jet(self, x, order: int):
        return [_jet_of_polynomial(c, x, order) for c in self.components]

    def derivative_tensor(self, x, order: int) -> np.ndarray:
        return np.stack([c.derivative_tensor(x, order) for c in self.components])


class CallableField:
    """Field given by callables: value plus derivative-tensor evaluators.

    derivs[r-1](x) must return the order-r derivative tensor with shape
    (m,) + (m,)*r, output axis first, input axes symmetric.
    """

    def __init__(self, f, derivs, m: int):
        self.f = f
        self.derivs = tuple(derivs)
        self.m = int(m)
        self.max_derivative_order = len(self.derivs)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.asarray(self.f(x), dtype=float)
        flat = x.reshape(-1, self.m)
        return np.stack([np.asarray(self.f(row), dtype=float) for row in flat]).reshape(x.shape)

    def derivative_tensor(self, x, order: int) -> np.ndarray:
        if order == 0:
            return self.value(x)
        if order > self.max_derivative_order:
            raise ValueError(
                f"derivative order {order} exceeds supplied order {self.max_derivative_order}"
            )
        return np.asarray(self.derivs[order - 1](x), dtype=float)

    def jet(self, x, order: int):
        """Taylor jets of the components at x, to the given order."""
        if order > self.max_derivative_order:
            raise ValueError(
                f"jet order {order} exceeds supplied derivative order {self.max_derivative_order}"
            )
        x = np.asarray(x, dtype=float)
        value = self.value(x)
        jets = [Polynomial.constant(self.m, value[j]) for j in range(self.m)]
        for r in range(1, order + 1):
            tensor = self.derivative_tensor(x, r)
            scale = 1.0 / math.factorial(r)
            for j in range(self.m):
                terms: dict = {}
                for idx in itertools.product(range(self.m), repeat=r):
                    exps = [0] * self.m
                    for i in idx:
                        exps[i] += 1
                    key = tuple(exps)
                    terms[key] = terms.get(key, 0.0) + tensor[(j, *idx)] * scale
                jets[j] = jets[j] + Polynomial(self.m, terms)
        return jets


def _finite_difference_tensor(fn, x, m: int, h: float) -> np.ndarray:
    """Central difference of a (tensor-valued) map along each state direction."""
    cols = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        cols.append((np.asarray(fn(x + e), dtype=float) - np.asarray(fn(x - e), dtype=float)) / (2 * h))
    # the new差 axis is the first input axis, right after the output axis
    return np.stack(cols, axis=1)


def validate_field_derivatives(field: CallableField, probes, h: float = 1e-4,
                               tol: float = 1e-6) -> float:
    """Check each derivative order against central differences of the one below.

    Returns the worst discrepancy; raises if it exceeds tol.
    """
    worst = 0.0
    for x in probes:
        x = np.asarray(x, dtype=float)
        for order in range(1, field.max_derivative_order + 1):
            below = (lambda y: field.value(y)) if order == 1 else (
                lambda y, r=order - 1: field.derivative_tensor(y, r)
            )
            fd = _finite_difference_tensor(below, x, field.m, h)
            gap = float(np.max(np.abs(fd - field.derivative_tensor(x, order))))
            worst = max(worst, gap)
            if gap > tol:
                raise ValueError(
                    f"order-{order} derivative tensor disagrees with finite differences "
                    f"at {x.tolist()} (gap {gap:.3e} > tol {tol:.3e})"
                )
    return worst


# ---------------------------------------------------------------------------
# the system: letters -> fields, plus the operator lift
# ---------------------------------------------------------------------------


class VectorFieldSystem:
    """Linear map from R^d driving directions to vector fields on R^m.

    Immutable after construction; word-operator compositions are cached on
    the instance for the polynomial backend.
    """

    def __init__(self, letters):
        letters = tuple(letters)
        if not letters:
            raise ValueError("need at least one driving letter")
        m = letters[0].m
        if any(f.m != m for f in letters):
            raise ValueError("all letters must share the state dimension")
        self.letters = letters
        self.d = len(letters)
        self.m = m
        self._word_ops: dict = {}

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_polynomials(cls, per_letter_components) -> "VectorFieldSystem":
        return cls([PolynomialField(comps) for comps in per_letter_components])

    @classmethod
    def linear(cls, matrices) -> "VectorFieldSystem":
        """V_i(x) = A_i x from a list of (m, m) matrices."""
        mats = [np.asarray(a, dtype=float) for a in matrices]
        m = mats[0].shape[0]
        fields = []
        for a in mats:
            if a.shape != (m, m):
                raise ValueError("all matrices must be square with equal size")
            comps = []
            for row in a:
                comps.append(Polynomial(m, {
                    tuple(1 if j == k else 0 for k in range(m)): row[j]
                    for j in range(m) if row[j] != 0.0
                }))
            fields.append(PolynomialField(comps))
        return cls(fields)

    @classmethod
    def from_callables(cls, specs, m: int, validate: bool = True, probes=None,
                       fd_step: float = 1e-4, fd_tol: float = 1e-6) -> "VectorFieldSystem":
        """specs: per letter, (value_fn, [jacobian_fn, hessian_fn, ...])."""
        fields = [CallableField(f, derivs, m) for f, derivs in specs]
        if validate:
            if probes is None:
                probes = [np.zeros(m)] + [0.5 * row for row in np.eye(m)]
            for field in fields:
                validate_field_derivatives(field, probes, h=fd_step, tol=fd_tol)
        return cls(fields)

    # -- properties ---------------------------------------------------------

    @property
    def is_polynomial(self) -> bool:
        return all(isinstance(f, PolynomialField) for f in self.letters)

    @property
    def max_word_length(self):
        """Longest word applicable to the identity map (None = unlimited)."""
        orders = [f.max_derivative_order for f in self.letters]
        if any(o is None for o in orders):
            return None
        return min(orders) + 1

    def _check_word_length(self, k: int):
        cap = self.max_word_length
        if cap is not None and k > cap:
            raise ValueError(
                f"word of length {k} needs derivative order {k - 1}, "
                f"but only {cap - 1} is available"
            )

    # -- symbolic composition (polynomial backend) ---------------------------

    def _word_op(self, word) -> tuple:
        """F(word) applied to Id, as m polynomials (cached)."""
        if word in self._word_ops:
            return self._word_ops[word]
        if not word:
            out = tuple(Polynomial.coordinate(self.m, c) for c in range(self.m))
        else:
            inner = self._word_op(word[1:])
            out = tuple(self._apply_letter_poly(word[0], g) for g in inner)
        self._word_ops[word] = out
        return out

    def _apply_letter_poly(self, letter: int, g: Polynomial) -> Polynomial:
        field = self.letters[letter - 1]
        out = Polynomial.zero(self.m)
        for j in range(self.m):
            out = out + g.partial(j) * field.components[j]
        return out

    def _word_apply_poly(self, word, f: Polynomial) -> Polynomial:
        g = f
        for letter in reversed(word):
            g = self._apply_letter_poly(letter, g)
        return g

    # -- pointwise composition via jets (callable backend) -------------------

    def _letter_jet(self, letter: int, x, order: int):
        return self.letters[letter - 1].jet(x, order)

    def _apply_word_to_jet(self, word, jet: Polynomial, order: int, x) -> Polynomial:
        """Apply the word's operator to a function given by its order-`order` jet at x.

        Each letter consumes one jet order (a derivative plus a product with
        the letter's own jet), so the result is valid to order - len(word),
        which must be nonnegative.
        """
        if order < len(word):
            raise ValueError(f"jet order {order} too low for word of length {len(word)}")
        g = jet.truncate(order)
        for letter in reversed(word):
            comps = self._letter_jet(letter, x, order - 1)
            nxt = Polynomial.zero(self.m)
            for j in range(self.m):
                nxt = nxt + g.partial(j) * comps[j]
            order -= 1
            g = nxt.truncate(order)
        return g

    def _tensor_on_jet(self, a: TensorElement, jet: Polynomial, order: int, x) -> Polynomial:
        """F(a) applied to a function known through its order-`order` jet at x.

        The result is a jet of order (order - top degree of a).
        """
        target = order - a.top_degree()
        if target < 0:
            raise ValueError("jet order too low for the tensor's top degree")
        out = a.levels[0][0] * jet.truncate(target)
        for k in range(1, a.n + 1):
            lv = a.levels[k]
            if not np.any(lv):
                continue
            for idx in np.nonzero(lv)[0]:
                word = _index_to_word(int(idx), k, a.d)
                res = self._apply_word_to_jet(word, jet, order, x)
                out = out + lv[idx] * res.truncate(target)
        return out


def _index_to_word(idx: int, k: int, d: int):
    letters = []
    for _ in range(k):
        letters.append(idx % d + 1)
        idx //= d
    return tuple(reversed(letters))


# ---------------------------------------------------------------------------
# state fields produced by tensor application
# ---------------------------------------------------------------------------


class PolynomialStateField:
    """Vector field on R^m with polynomial components and batch evaluation.

    Affine components collapse to a (matrix, offset) pair, so the common
    linear-field case costs one matmul per evaluation.
    """

    def __init__(self, components):
        self.components = tuple(components)
        self.m = self.components[0].m
        if all(c.degree() <= 1 for c in self.components):
            mat = np.zeros((self.m, self.m))
            off = np.zeros(self.m)
            for c_idx, comp in enumerate(self.components):
                for exps, coeff in comp.terms.items():
                    deg = sum(exps)
                    if deg == 0:
                        off[c_idx] = coeff
                    else:
                        mat[c_idx, exps.index(1)] = coeff
            self._affine = (mat, off)
        else:
            self._affine = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self._affine is not None:
            mat, off = self._affine
            return x @ mat.T + off
        return np.stack([c(x) for c in self.components], axis=-1)


class JetStateField:
    """Pointwise vector field F(tensor)Id for callable-backed systems."""

    def __init__(self, sys: "VectorFieldSystem", tensor: TensorElement):
        self.sys = sys
        self.tensor = tensor

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return _apply_to_identity_pointwise(self.sys, self.tensor, x)
        flat = x.reshape(-1, self.sys.m)
        rows = [_apply_to_identity_pointwise(self.sys, self.tensor, row) for row in flat]
        return np.stack(rows).reshape(x.shape)


def _apply_to_identity_pointwise(sys: VectorFieldSystem, a: TensorElement, x) -> np.ndarray:
    k_max = a.top_degree()
    out = np.empty(sys.m)
    for c in range(sys.m):
        # the identity's jet x_c + h_c is exact to every order
        id_jet = Polynomial.constant(sys.m, float(x[c])) + Polynomial.coordinate(sys.m, c)
        out[c] = sys._tensor_on_jet(a, id_jet, k_max, x).constant_term()
    return out


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def apply_operator(sys: VectorFieldSystem, a: TensorElement, f, x):
    """Evaluate (F(a) f)(x); f is a scalar TestFunction or None for Id.

    With f=None the result is a state point (batch-aware for polynomial
    systems); with a polynomial f it is the scalar value at x.
    """
    if a.d != sys.d:
        raise ValueError(f"tensor alphabet {a.d} != driving dimension {sys.d}")
    sys._check_word_length(a.top_degree())
    x = np.asarray(x, dtype=float)
    if f is None:
        if sys.is_polynomial:
            comps = _combined_identity_polys(sys, a)
            return PolynomialStateField(comps)(x)
        return JetStateField(sys, a)(x)
    if not isinstance(f, Polynomial):
        raise TypeError("f must be a Polynomial test function or None for Id")
    if sys.is_polynomial:
        total = a.levels[0][0] * f(x)
        for k in range(1, a.n + 1):
            lv = a.levels[k]
            if not np.any(lv):
                continue
            for idx in np.nonzero(lv)[0]:
                word = _index_to_word(int(idx), k, a.d)
                total = total + lv[idx] * sys._word_apply_poly(word, f)(x)
        return total
    jet = _jet_of_polynomial(f, x, a.top_degree())
    return sys._tensor_on_jet(a, jet, x).constant_term()


def _combined_identity_polys(sys: VectorFieldSystem, a: TensorElement):
    comps = [Polynomial.zero(sys.m) for _ in range(sys.m)]
    a0 = a.levels[0][0]
    if a0 != 0.0:
        for c in range(sys.m):
            comps[c] = comps[c] + a0 * Polynomial.coordinate(sys.m, c)
    for k in range(1, a.n + 1):
        lv = a.levels[k]
        if not np.any(lv):
            continue
        for idx in np.nonzero(lv)[0]:
            word = _index_to_word(int(idx), k, a.d)
            op = sys._word_op(word)
            for c in range(sys.m):
                comps[c] = comps[c] + lv[idx] * op[c]
    return comps


def morphism_check(sys: VectorFieldSystem, a: TensorElement, b: TensorElement,
                   f: Polynomial, x) -> float:
    """|F(a)(F(b)f)(x) - F(ab)f(x)|; zero up to rounding within level budget."""
    a._check_shape(b)
    if a.top_degree() + b.top_degree() > a.n:
        raise ValueError(
            f"combined level {a.top_degree()} + {b.top_degree()} overflows truncation {a.n}"
        )
    sys._check_word_length(a.top_degree() + b.top_degree())
    x = np.asarray(x, dtype=float)
    from .tensor import tensor_mul

    rhs = apply_operator(sys, tensor_mul(a, b), f, x)
    if sys.is_polynomial:
        inner = Polynomial.constant(sys.m, 0.0) + b.levels[0][0] * f
        for k in range(1, b.n + 1):
            lv = b.levels[k]
            if not np.any(lv):
                continue
            for idx in np.nonzero(lv)[0]:
                word = _index_to_word(int(idx), k, b.d)
                inner = inner + lv[idx] * sys._word_apply_poly(word, f)
        lhs = apply_operator(sys, a, inner, x)
    else:
        order = a.top_degree()
        f_jet = _jet_of_polynomial(f, x, order + b.top_degree())
        inner_jet = sys._tensor_on_jet(b, f_jet, x)
        lhs = sys._tensor_on_jet(a, inner_jet.truncate(order), x).constant_term()
    return abs(float(lhs) - float(rhs))


def lie_field(sys: VectorFieldSystem, lam: TensorElement, lie_tol: float | None = 1e-8):
    """The first-order field F(lam)Id generated by a Lie tensor.

    Returns a callable state field; rejects non-Lie input (the operator
    would not be first order).  Pass lie_tol=None to skip the membership
    check when the caller has already performed it.
    """
    if lie_tol is not None and lie_defect(lam) > lie_tol:
        raise ValueError("not a Lie element: Dynkin defect above tolerance")
    sys._check_word_length(lam.top_degree())
    if sys.is_polynomial:
        return PolynomialStateField(_combined_identity_polys(sys, lam))
    return JetStateField(sys, lam)


def euler_map(sys: VectorFieldSystem, g: TensorElement, x):
    """High-order Euler step F(g)Id(x) = x + sum_k F(pi_k g)Id(x) for group-like g."""
    if abs(g.levels[0][0] - 1.0) > 1e-12:
        raise ValueError("euler_map expects a group-like element (unit scalar part)")
    return apply_operator(sys, g, None, x)


def direction_field(sys: VectorFieldSystem, v):
    """The field sum_i v_i V_i (the drive along a fixed direction v)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (sys.d,):
        raise ValueError(f"direction must have shape ({sys.d},)")
    if sys.is_polynomial:
        comps = [Polynomial.zero(sys.m) for _ in range(sys.m)]
        for i, field in enumerate(sys.letters):
            if v[i] == 0.0:
                continue
            for c in range(sys.m):
                comps[c] = comps[c] + v[i] * field.components[c]
        return PolynomialStateField(comps)

    def fn(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for i, field in enumerate(sys.letters):
            if v[i] != 0.0:
                out = out + v[i] * field.value(x)
        return out

    return fn
