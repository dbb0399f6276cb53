"""Exact arithmetic in the truncated tensor algebra over R^d.

Elements are stored densely, one flat coefficient array per tensor level:
``levels[k]`` has ``d**k`` entries, and the word ``(i1, ..., ik)`` with
letters in ``1..d`` sits at index ``((i1-1)*d + (i2-1))*d + ...``.  With this
layout the graded product is a truncated convolution of outer products, and
exp/log are finite polynomials (everything above the truncation level is
nilpotent), so both are computed exactly rather than as iterative series.

The algebra norm used throughout (`tensor_norm`) is the l1 norm of all
coefficients, i.e. the sum of the per-level l1 norms.  Per level the l1 norm
is a cross norm, and summing levels keeps it submultiplicative for the
truncated product.  Per-level values are available via `level_norms`; they
feed the Hölder scaling quotients downstream.
"""

from __future__ import annotations

import functools
import itertools

import numpy as np

# recorded in every artifact so downstream distances are unambiguous
NORM_CHOICE = "levelwise-l1-sum"

Word = tuple[int, ...]


def words_of_length(d: int, k: int):
    """All words of length k over letters 1..d, in index order."""
    return itertools.product(range(1, d + 1), repeat=k)


def word_index(word: Word, d: int) -> int:
    idx = 0
    for letter in word:
        if not 1 <= letter <= d:
            raise ValueError(f"letter {letter} outside alphabet 1..{d}")
        idx = idx * d + (letter - 1)
    return idx


def index_word(idx: int, k: int, d: int) -> Word:
    letters = []
    for _ in range(k):
        letters.append(idx % d + 1)
        idx //= d
    return tuple(reversed(letters))


class TensorElement:
    """Element of the tensor algebra over R^d truncated at level n.

    Immutable: the per-level arrays are frozen at construction and all
    operations return new elements.  Arithmetic between elements of
    different (d, n) is rejected.
    """

    __slots__ = ("d", "n", "levels")

    def __init__(self, d: int, n: int, levels):
        if d < 1 or n < 1:
            raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
        if len(levels) != n + 1:
            raise ValueError(f"expected {n + 1} levels, got {len(levels)}")
        frozen = []
        for k, lv in enumerate(levels):
            arr = np.ascontiguousarray(lv, dtype=float)
            if arr.shape != (d**k,):
                raise ValueError(f"level {k} has shape {arr.shape}, expected ({d**k},)")
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "levels", tuple(frozen))

    def __setattr__(self, name, value):
        raise AttributeError("TensorElement is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, d: int, n: int) -> "TensorElement":
        return cls(d, n, [np.zeros(d**k) for k in range(n + 1)])

    @classmethod
    def unit(cls, d: int, n: int) -> "TensorElement":
        levels = [np.zeros(d**k) for k in range(n + 1)]
        levels[0][0] = 1.0
        return cls(d, n, levels)

    @classmethod
    def from_word(cls, d: int, n: int, word: Word, coeff: float = 1.0) -> "TensorElement":
        k = len(word)
        if k > n:
            raise ValueError(f"word {word} longer than truncation level {n}")
        levels = [np.zeros(d**j) for j in range(n + 1)]
        levels[k][word_index(word, d)] = coeff
        return cls(d, n, levels)

    @classmethod
    def from_vector(cls, v, n: int) -> "TensorElement":
        """Embed a vector of R^d as a level-1 element."""
        v = np.asarray(v, dtype=float)
        d = v.shape[0]
        levels = [np.zeros(d**k) for k in range(n + 1)]
        levels[1] = v.copy()
        return cls(d, n, levels)

    @classmethod
    def from_coeffs(cls, d: int, n: int, coeffs: dict) -> "TensorElement":
        """Build from {word tuple: coefficient}; missing words are zero."""
        levels = [np.zeros(d**k) for k in range(n + 1)]
        for word, c in coeffs.items():
            word = tuple(word)
            if len(word) > n:
                raise ValueError(f"word {word} longer than truncation level {n}")
            levels[len(word)][word_index(word, d)] += float(c)
        return cls(d, n, levels)

    # -- access ------------------------------------------------------------

    def coeff(self, word: Word) -> float:
        word = tuple(word)
        if len(word) > self.n:
            return 0.0
        return float(self.levels[len(word)][word_index(word, self.d)])

    def level(self, k: int) -> np.ndarray:
        """Read-only coefficient array of level k."""
        return self.levels[k]

    def project(self, k: int) -> "TensorElement":
        """The element with only its level-k part kept."""
        levels = [np.zeros(self.d**j) for j in range(self.n + 1)]
        levels[k] = self.levels[k].copy()
        return TensorElement(self.d, self.n, levels)

    def top_degree(self) -> int:
        """Highest level carrying a nonzero coefficient (0 for zero/scalars)."""
        for k in range(self.n, -1, -1):
            if np.any(self.levels[k]):
                return k
        return 0

    # -- arithmetic ---------------------------------------------------------

    def _check_shape(self, other: "TensorElement"):
        if self.d != other.d or self.n != other.n:
            raise ValueError(
                f"shape mismatch: (d={self.d}, n={self.n}) vs (d={other.d}, n={other.n})"
            )

    def __add__(self, other):
        if not isinstance(other, TensorElement):
            return NotImplemented
        self._check_shape(other)
        return TensorElement(
            self.d, self.n, [a + b for a, b in zip(self.levels, other.levels)]
        )

    def __sub__(self, other):
        if not isinstance(other, TensorElement):
            return NotImplemented
        self._check_shape(other)
        return TensorElement(
            self.d, self.n, [a - b for a, b in zip(self.levels, other.levels)]
        )

    def __neg__(self):
        return TensorElement(self.d, self.n, [-a for a in self.levels])

    def __mul__(self, other):
        if isinstance(other, TensorElement):
            return tensor_mul(self, other)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return TensorElement(self.d, self.n, [float(other) * a for a in self.levels])
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * other
        return NotImplemented

    def allclose(self, other: "TensorElement", atol: float = 1e-12) -> bool:
        return max_abs_diff(self, other) <= atol

    def __repr__(self):
        parts = []
        for k, lv in enumerate(self.levels):
            for idx in np.nonzero(lv)[0]:
                word = index_word(int(idx), k, self.d)
                label = ".".join(map(str, word)) if word else "1"
                parts.append(f"{lv[idx]:+.6g}*{label}")
                if len(parts) >= 12:
                    return f"TensorElement(d={self.d}, n={self.n}: {' '.join(parts)} ...)"
        body = " ".join(parts) if parts else "0"
        return f"TensorElement(d={self.d}, n={self.n}: {body})"

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        """JSON form {d, n, coeffs} with word keys "i1.i2...ik" ("" = scalar)."""
        coeffs = {}
        for k in range(self.n + 1):
            lv = self.levels[k]
            for idx, word in enumerate(words_of_length(self.d, k)):
                coeffs[".".join(map(str, word))] = float(lv[idx])
        return {"d": self.d, "n": self.n, "coeffs": coeffs}

    @classmethod
    def from_dict(cls, obj: dict) -> "TensorElement":
        d, n = int(obj["d"]), int(obj["n"])
        coeffs = {}
        for key, value in obj["coeffs"].items():
            word = tuple(int(tok) for tok in key.split(".")) if key else ()
            coeffs[word] = float(value)
        return cls.from_coeffs(d, n, coeffs)


def max_abs_diff(a: TensorElement, b: TensorElement) -> float:
    a._check_shape(b)
    return max(
        float(np.max(np.abs(la - lb))) if la.size else 0.0
        for la, lb in zip(a.levels, b.levels)
    )


# ---------------------------------------------------------------------------
# product, exp, log, inverse
# ---------------------------------------------------------------------------


def tensor_mul(a: TensorElement, b: TensorElement) -> TensorElement:
    """Graded concatenation product truncated at level n."""
    a._check_shape(b)
    out = [np.zeros(a.d**k) for k in range(a.n + 1)]
    for i in range(a.n + 1):
        ai = a.levels[i]
        if not np.any(ai):
            continue
        for j in range(a.n + 1 - i):
            bj = b.levels[j]
            if not np.any(bj):
                continue
            out[i + j] += np.outer(ai, bj).ravel()
    return TensorElement(a.d, a.n, out)


def tensor_exp(a: TensorElement) -> TensorElement:
    """exp(a) = sum_k a^k / k!, exact by nilpotency; requires zero scalar part."""
    if a.levels[0][0] != 0.0:
        raise ValueError("tensor_exp requires zero scalar part")
    out = TensorElement.unit(a.d, a.n) + a
    term = a
    for m in range(2, a.n + 1):
        term = tensor_mul(term, a) * (1.0 / m)
        out = out + term
    return out


def tensor_log(g: TensorElement) -> TensorElement:
    """log(g) = sum_k (-1)^(k+1) (g-1)^k / k, exact; requires unit scalar part."""
    if g.levels[0][0] != 1.0:
        raise ValueError("tensor_log requires unit scalar part")
    x = g - TensorElement.unit(g.d, g.n)
    out = x
    power = x
    for m in range(2, g.n + 1):
        power = tensor_mul(power, x)
        out = out + power * ((-1.0) ** (m + 1) / m)
    return out


def inverse(g: TensorElement) -> "GroupLikeElement":
    """Group inverse exp(-log g); requires unit scalar part."""
    if g.levels[0][0] != 1.0:
        raise ValueError("inverse requires unit scalar part")
    return GroupLikeElement.wrap(tensor_exp(-tensor_log(g)))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def level_norms(a: TensorElement) -> np.ndarray:
    """Per-level l1 coefficient norms, index k = tensor level."""
    return np.array([float(np.sum(np.abs(lv))) for lv in a.levels])


def tensor_norm(a: TensorElement) -> float:
    """The algebra norm: sum of per-level l1 norms (submultiplicative)."""
    return float(np.sum(level_norms(a)))


def dilate(a: TensorElement, lam: float) -> TensorElement:
    """Dilation: scale level k by lam**k."""
    return TensorElement(
        a.d, a.n, [lam**k * lv for k, lv in enumerate(a.levels)]
    )


# ---------------------------------------------------------------------------
# shuffle identity (group-like test)
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _shuffle_words(u: Word, w: Word) -> tuple:
    """Shuffle product of two words as ((word, multiplicity), ...)."""
    if not u:
        return ((w, 1),)
    if not w:
        return ((u, 1),)
    acc: dict = {}
    for word, mult in _shuffle_words(u[:-1], w):
        acc[word + (u[-1],)] = acc.get(word + (u[-1],), 0) + mult
    for word, mult in _shuffle_words(u, w[:-1]):
        acc[word + (w[-1],)] = acc.get(word + (w[-1],), 0) + mult
    return tuple(acc.items())


def shuffle_defect(g: TensorElement) -> float:
    """Worst violation of <g, u shuffle w> = <g,u><g,w> over |u|+|w| <= n.

    Also folds in |pi_0(g) - 1|; zero exactly on group-like elements.
    """
    worst = abs(g.levels[0][0] - 1.0)
    for ku in range(1, g.n):
        for kw in range(ku, g.n - ku + 1):
            for u in words_of_length(g.d, ku):
                cu = g.levels[ku][word_index(u, g.d)]
                for w in words_of_length(g.d, kw):
                    cw = g.levels[kw][word_index(w, g.d)]
                    lhs = 0.0
                    for word, mult in _shuffle_words(u, w):
                        lhs += mult * g.levels[len(word)][word_index(word, g.d)]
                    worst = max(worst, abs(lhs - cu * cw))
    return worst


def is_grouplike(g: TensorElement, tol: float = 1e-10) -> bool:
    """True iff the scalar part is 1 and all shuffle relations hold within tol."""
    return shuffle_defect(g) <= tol


# ---------------------------------------------------------------------------
# free-Lie membership via the Dynkin idempotent
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _dynkin_matrix(d: int, k: int) -> np.ndarray:
    """Matrix of the right-to-left bracketing map on level k.

    Column w holds the word expansion of [e_w1, [e_w2, ..., [e_wk-1, e_wk]]].
    An element a_k is free-Lie iff this matrix sends it to k * a_k.
    """
    size = d**k
    mat = np.zeros((size, size))
    for col, word in enumerate(words_of_length(d, k)):
        expansion = {word[-1:]: 1.0}
        for letter in reversed(word[:-1]):
            nxt: dict = {}
            for sub, c in expansion.items():
                left = (letter,) + sub
                right = sub + (letter,)
                nxt[left] = nxt.get(left, 0.0) + c
                nxt[right] = nxt.get(right, 0.0) - c
            expansion = nxt
        for sub, c in expansion.items():
            mat[word_index(sub, d), col] += c
    mat.flags.writeable = False
    return mat


def lie_defect(a: TensorElement) -> float:
    """Max over levels k of the l1 norm of D_k(a) - k * pi_k(a).

    D_k is the right-to-left bracketing (Dynkin) map; the defect vanishes
    exactly when a lies in the free Lie algebra.  Requires zero scalar part.
    """
    if a.levels[0][0] != 0.0:
        raise ValueError("lie_defect requires zero scalar part")
    worst = 0.0
    for k in range(1, a.n + 1):
        lv = a.levels[k]
        if not np.any(lv):
            continue
        defect = _dynkin_matrix(a.d, k) @ lv - k * lv
        worst = max(worst, float(np.sum(np.abs(defect))))
    return worst


def is_lie(a: TensorElement, tol: float = 1e-10) -> bool:
    return lie_defect(a) <= tol


# ---------------------------------------------------------------------------
# tagged wrappers used at module boundaries
# ---------------------------------------------------------------------------


class GroupLikeElement(TensorElement):
    """Tensor element with unit scalar part; rough-path increments live here."""

    @classmethod
    def wrap(cls, t: TensorElement, tol: float | None = None) -> "GroupLikeElement":
        """Tag t as group-like; with tol set, verify the shuffle identity too."""
        if abs(t.levels[0][0] - 1.0) > 1e-12:
            raise ValueError(f"scalar part {t.levels[0][0]} != 1")
        if tol is not None and not is_grouplike(t, tol):
            raise ValueError(f"shuffle identity violated beyond tol={tol}")
        return cls(t.d, t.n, t.levels)


class LieElement(TensorElement):
    """Tensor element in the free Lie algebra (zero scalar part)."""

    @classmethod
    def wrap(cls, t: TensorElement, tol: float | None = None) -> "LieElement":
        """Tag t as free-Lie; with tol set, verify the Dynkin criterion too."""
        if abs(t.levels[0][0]) > 1e-12:
            raise ValueError(f"scalar part {t.levels[0][0]} != 0")
        if tol is not None and lie_defect(t) > tol:
            raise ValueError(f"Dynkin defect above tol={tol}: not a Lie element")
        return cls(t.d, t.n, t.levels)


# ---------------------------------------------------------------------------
# seeded random elements (used by tests and selfcheck)
# ---------------------------------------------------------------------------


def random_element(
    rng: np.random.Generator, d: int, n: int, scalar: float | None = None
) -> TensorElement:
    """Coefficients uniform in [-1, 1]; scalar part overridable."""
    levels = [rng.uniform(-1.0, 1.0, size=d**k) for k in range(n + 1)]
    if scalar is not None:
        levels[0][0] = scalar
    return TensorElement(d, n, levels)


def random_lie_element(rng: np.random.Generator, d: int, n: int) -> LieElement:
    """Random free-Lie element: Dynkin projection of random levels."""
    levels = [np.zeros(1)]
    for k in range(1, n + 1):
        raw = rng.uniform(-1.0, 1.0, size=d**k)
        levels.append(_dynkin_matrix(d, k) @ raw / k)
    return LieElement.wrap(TensorElement(d, n, levels))


def random_grouplike(rng: np.random.Generator, d: int, n: int) -> GroupLikeElement:
    return GroupLikeElement.wrap(tensor_exp(random_lie_element(rng, d, n)))
