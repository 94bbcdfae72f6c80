"""Category-order algebra: permutations, equivalence classes, parameter maps.

Two orders are equivalent when they attain the same maximum likelihood for
every dataset, making them indistinguishable to AIC/BIC.  Which orders are
equivalent depends only on (family, odds structure), assuming the
category-specific predictor is the same function for every category (the
only regime :class:`catorder.model.ModelSpec` can express):

====================  =========================  =========================
family                po / ppo                   npo
====================  =========================  =========================
baseline-category     same final (baseline) slot every order
cumulative            order ~ its reverse        order ~ its reverse
adjacent-categories   order ~ its reverse        every order
continuation-ratio    none (all distinct)        swap of the last two slots
====================  =========================  =========================

For every equivalent pair an exact linear parameter transformation maps the
maximizer under one order to the maximizer under the other, so only one fit
per class is ever needed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import total_ordering
from math import factorial

import numpy as np

from .errors import (
    DataError,
    JTooLargeError,
    NotEquivalentError,
    UnsupportedTransformError,
)
from .model import ModelSpec, Theta

MAX_J = 8


@total_ordering
@dataclass(frozen=True)
class Permutation:
    """A bijection on {1..J}; ``image[k-1] = sigma(k)``.

    Position k of the working order holds original category sigma(k); the
    last position plays the baseline / final role in every family.
    Composition follows (sigma tau)(j) = sigma(tau(j)).
    """

    image: tuple[int, ...]

    def __post_init__(self):
        image = tuple(int(v) for v in self.image)
        if sorted(image) != list(range(1, len(image) + 1)):
            raise DataError(f"not a permutation of 1..{len(image)}: {image}")
        object.__setattr__(self, "image", image)

    @classmethod
    def identity(cls, j: int) -> "Permutation":
        return cls(tuple(range(1, j + 1)))

    @classmethod
    def reversal(cls, j: int) -> "Permutation":
        return cls(tuple(range(j, 0, -1)))

    @classmethod
    def transposition(cls, j: int, a: int, b: int) -> "Permutation":
        image = list(range(1, j + 1))
        image[a - 1], image[b - 1] = image[b - 1], image[a - 1]
        return cls(tuple(image))

    @property
    def size(self) -> int:
        return len(self.image)

    def __call__(self, k: int) -> int:
        return self.image[k - 1]

    def __lt__(self, other: "Permutation") -> bool:
        return self.image < other.image

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: (self . other)(k) = self(other(k))."""
        if self.size != other.size:
            raise DataError("permutation sizes differ")
        return Permutation(tuple(self.image[v - 1] for v in other.image))

    def inverse(self) -> "Permutation":
        inv = [0] * self.size
        for pos, v in enumerate(self.image):
            inv[v - 1] = pos + 1
        return Permutation(tuple(inv))

    def reverse(self) -> "Permutation":
        """The reverse order: position k holds sigma(J+1-k)."""
        return Permutation(self.image[::-1])

    def is_identity(self) -> bool:
        return self.image == tuple(range(1, self.size + 1))

    def labels(self, names: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(names[v - 1] for v in self.image)

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.image)


def enumerate_orders(j: int) -> tuple[Permutation, ...]:
    """All J! orders in lexicographic sequence; guarded at J <= 8."""
    if j < 3:
        raise DataError("need at least 3 categories")
    if j > MAX_J:
        raise JTooLargeError(f"J={j} would enumerate {factorial(j)} orders; cap is J={MAX_J}")
    return tuple(Permutation(p) for p in itertools.permutations(range(1, j + 1)))


def _generators(family: str, odds: str, j: int) -> tuple[tuple[Permutation, ...], str]:
    """Right-composition generators of the within-class subgroup, plus rule tag."""
    ident = list(range(1, j + 1))

    def swap(a: int) -> Permutation:  # transposition of adjacent positions a, a+1
        im = ident.copy()
        im[a - 1], im[a] = im[a], im[a - 1]
        return Permutation(tuple(im))

    if family == "baseline":
        if odds == "npo":
            return tuple(swap(a) for a in range(1, j)), "any-order"
        return tuple(swap(a) for a in range(1, j - 1)), "fixed-baseline"
    if family == "cumulative":
        return (Permutation.reversal(j),), "reversal"
    if family == "adjacent":
        if odds == "npo":
            return tuple(swap(a) for a in range(1, j)), "any-order"
        return (Permutation.reversal(j),), "reversal"
    if family == "continuation":
        if odds == "npo":
            return (Permutation.transposition(j, j - 1, j),), "swap-last-two"
        return (), "none"
    raise DataError(f"unknown family {family!r}")


@dataclass(frozen=True)
class EquivalenceClasses:
    """Partition of all J! orders into likelihood-equivalence classes.

    Classes are sorted by their canonical representative (lexicographic
    minimum); members within a class are sorted too.  ``rule`` names the
    generator family that produced every merge.
    """

    family: str
    odds: str
    n_categories: int
    classes: tuple[tuple[Permutation, ...], ...]
    rule: str

    def __post_init__(self):
        lookup = {
            sigma.image: idx for idx, members in enumerate(self.classes) for sigma in members
        }
        object.__setattr__(self, "_lookup", lookup)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def index_of(self, sigma: Permutation) -> int:
        idx = self._lookup.get(sigma.image)
        if idx is None:
            raise DataError(f"order {sigma} is not an order on 1..{self.n_categories}")
        return idx

    def representative(self, sigma: Permutation) -> Permutation:
        return self.classes[self.index_of(sigma)][0]

    def members(self, sigma: Permutation) -> tuple[Permutation, ...]:
        return self.classes[self.index_of(sigma)]


def equivalence_classes(spec_or_family, j: int | None = None, odds: str | None = None) -> EquivalenceClasses:
    """Partition the J! orders using the generator set for (family, odds).

    Accepts either a ModelSpec (category count taken from it unless ``j``
    is given) or a family name plus ``odds=``.
    """
    if isinstance(spec_or_family, ModelSpec):
        family, odds = spec_or_family.family, spec_or_family.odds
        j = j or spec_or_family.n_categories
    else:
        family = spec_or_family
        if j is None or odds is None:
            raise DataError("family-name form needs j and odds")
    orders = enumerate_orders(j)
    index = {p.image: i for i, p in enumerate(orders)}
    parent = list(range(len(orders)))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    generators, rule = _generators(family, odds, j)
    for i, sigma in enumerate(orders):
        for g in generators:
            k = index[sigma.compose(g).image]
            ra, rb = find(i), find(k)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, list[Permutation]] = {}
    for i, sigma in enumerate(orders):
        groups.setdefault(find(i), []).append(sigma)
    classes = tuple(tuple(sorted(g)) for g in sorted(groups.values(), key=lambda g: min(g)))
    return EquivalenceClasses(family, odds, j, classes, rule)


def _transform_from_identity(spec: ModelSpec, theta: Theta, tau: Permutation) -> Theta:
    """theta' such that pi_{i j}(theta) = pi_{i tau^{-1}(j)}(theta') for all i, j.

    tau must lie in the within-class subgroup for (family, odds); the same
    map then transports the maximizer from any order sigma to sigma.tau.
    """
    j = spec.n_categories
    beta, zeta = theta.beta, theta.zeta
    if tau.is_identity():
        return theta
    family, odds = spec.family, spec.odds

    if family == "baseline":
        if tau(j) == j:
            return Theta(tuple(beta[tau(k) - 1] for k in range(1, j)), zeta)
        if odds != "npo":
            raise NotEquivalentError(
                "baseline po/ppo orders are equivalent only when the baseline slot is unchanged"
            )
        drop = tau(j)  # original category moved out of the baseline slot
        anchor = beta[drop - 1]
        new = []
        for k in range(1, j):
            if tau(k) == j:
                new.append(-anchor)
            else:
                new.append(beta[tau(k) - 1] - anchor)
        return Theta(tuple(new), zeta)

    if family == "cumulative" or (family == "adjacent" and odds != "npo"):
        if tau.image != Permutation.reversal(j).image:
            raise NotEquivalentError(f"{family} {odds}: only the reverse order is equivalent")
        return Theta(tuple(-beta[j - 1 - k] for k in range(1, j)), -zeta)

    if family == "adjacent":  # npo: any tau via telescoping block sums
        new = []
        for k in range(1, j):
            a, b = tau(k), tau(k + 1)
            if a < b:
                new.append(sum(beta[l - 1] for l in range(a, b)))
            else:
                new.append(-sum(beta[l - 1] for l in range(b, a)))
        return Theta(tuple(np.asarray(v, dtype=float) for v in new), zeta)

    if family == "continuation":
        if odds != "npo":
            raise UnsupportedTransformError(
                "continuation-ratio po/ppo orders admit no exact parameter transformation"
            )
        if tau.image != Permutation.transposition(j, j - 1, j).image:
            raise NotEquivalentError(
                "continuation npo: only the swap of the last two slots is equivalent"
            )
        return Theta(tuple(beta[: j - 2]) + (-beta[j - 2],), zeta)

    raise DataError(f"unknown family {family!r}")


def transform_theta(
    spec: ModelSpec, theta1: Theta, sigma1: Permutation, sigma2: Permutation
) -> Theta:
    """Transport a parameter vector between equivalent orders.

    Returns theta2 with pi_{i sigma1^{-1}(j)}(theta1) = pi_{i sigma2^{-1}(j)}(theta2)
    pointwise, hence identical likelihood kernels.  Raises NotEquivalentError
    when the two orders fall in different classes and UnsupportedTransformError
    for continuation-ratio po/ppo (no transformation exists).
    """
    theta1.validate_for(spec)
    if sigma1.size != spec.n_categories or sigma2.size != spec.n_categories:
        raise DataError("order length does not match the model spec")
    tau = sigma1.inverse().compose(sigma2)
    return _transform_from_identity(spec, theta1, tau)
