"""Coefficient fields: exact rationals and prime fields.

Rationals are gmpy2 ``mpq`` values.  Prime-field elements are wrapped in
:class:`Mod` so that the rest of the engine can use ordinary arithmetic
operators regardless of the field.
"""

from __future__ import annotations

from fractions import Fraction

from gmpy2 import mpq


class Mod:
    __slots__ = ("v", "p")

    def __init__(self, v: int, p: int):
        self.v = v % p
        self.p = p

    def _coerce(self, other):
        if isinstance(other, Mod):
            if other.p != self.p:
                raise ValueError(f"mixing F_{self.p} and F_{other.p}")
            return other.v
        if isinstance(other, int):
            return other
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Mod(self.v + o, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Mod(self.v - o, self.p)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Mod(o - self.v, self.p)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Mod(self.v * o, self.p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if o % self.p == 0:
            raise ZeroDivisionError(f"division by zero in F_{self.p}")
        return Mod(self.v * pow(o, -1, self.p), self.p)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return Mod(o, self.p) / self

    def __neg__(self):
        return Mod(-self.v, self.p)

    def __pow__(self, k: int):
        return Mod(pow(self.v, k, self.p), self.p)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return False
        return (self.v - o) % self.p == 0

    def __hash__(self):
        return hash((self.v, self.p))

    def __bool__(self):
        return self.v != 0

    def __repr__(self):
        return f"Mod({self.v}, {self.p})"

    def __str__(self):
        return str(self.v)


class RationalField:
    characteristic = 0

    def __call__(self, x) -> mpq:
        if isinstance(x, str):
            return mpq(x.strip())
        if isinstance(x, Mod):
            raise TypeError("cannot coerce a prime-field element into Q")
        return mpq(x)

    @property
    def zero(self):
        return mpq(0)

    @property
    def one(self):
        return mpq(1)

    @property
    def tag(self) -> str:
        return "Q"

    def __eq__(self, other):
        return isinstance(other, RationalField)

    def __hash__(self):
        return hash("Q")

    def __repr__(self):
        return "QQ"


class PrimeField:
    def __init__(self, p: int):
        if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
            raise ValueError(f"{p} is not prime")
        self.characteristic = p

    def __call__(self, x) -> Mod:
        p = self.characteristic
        if isinstance(x, Mod):
            if x.p != p:
                raise ValueError(f"mixing F_{p} and F_{x.p}")
            return x
        if isinstance(x, str):
            x = Fraction(x.strip())
        if isinstance(x, int):
            return Mod(x, p)
        if isinstance(x, (Fraction, type(mpq(0)))):
            return Mod(int(x.numerator), p) / int(x.denominator)
        raise TypeError(f"cannot coerce {x!r} into F_{p}")

    @property
    def zero(self):
        return Mod(0, self.characteristic)

    @property
    def one(self):
        return Mod(1, self.characteristic)

    @property
    def tag(self) -> str:
        return f"Fp:{self.characteristic}"

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.characteristic == self.characteristic

    def __hash__(self):
        return hash(("Fp", self.characteristic))

    def __repr__(self):
        return f"GF({self.characteristic})"


QQ = RationalField()


def GF(p: int) -> PrimeField:
    return PrimeField(p)


def field_from_tag(tag: str):
    """Parse ``"Q"`` or ``"Fp:<prime>"``."""
    tag = tag.strip()
    if tag in ("Q", "QQ"):
        return QQ
    if tag.startswith("Fp:"):
        try:
            p = int(tag[3:])
        except ValueError:
            raise ValueError(f"bad field tag {tag!r}") from None
        return PrimeField(p)
    raise ValueError(f"bad field tag {tag!r}; expected Q or Fp:<prime>")
